//! Sample containers, class partitioning, splitting and file ingestion.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Covariates plus binary labels. Class 1 is the minority by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<u8>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidDataset(format!("shape {:?} is empty", x.dim())));
        }
        if let Some(row) = y.iter().position(|&v| v > 1) {
            return Err(Error::BadLabel { row, value: y[row].to_string() });
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn n1(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    /// Rows at `idx`, in that order. Panics on out-of-range indices.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset { x: self.x.select(Axis(0), idx), y: idx.iter().map(|&i| self.y[i]).collect() }
    }

    /// Flips every label.
    pub fn swap_labels(&self) -> Dataset {
        Dataset { x: self.x.clone(), y: self.y.iter().map(|&v| 1 - v).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSplit {
    pub minority_idx: Vec<usize>,
    pub majority_idx: Vec<usize>,
}

impl ClassSplit {
    pub fn n1(&self) -> usize {
        self.minority_idx.len()
    }

    pub fn n0(&self) -> usize {
        self.majority_idx.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MajorityPartition {
    pub generation_idx: Vec<usize>,
    pub correction_idx: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainValTest {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

pub fn split_by_class(d: &Dataset) -> Result<ClassSplit> {
    let mut minority_idx = Vec::new();
    let mut majority_idx = Vec::new();
    for (i, &v) in d.y.iter().enumerate() {
        if v == 1 {
            minority_idx.push(i);
        } else {
            majority_idx.push(i);
        }
    }
    if minority_idx.is_empty() {
        return Err(Error::EmptyClass { label: 1 });
    }
    if majority_idx.is_empty() {
        return Err(Error::EmptyClass { label: 0 });
    }
    Ok(ClassSplit { minority_idx, majority_idx })
}

/// Random split of the majority into a generation set of size `n0g` and a
/// correction set holding the rest. Both keep the original index order.
pub fn partition_majority<R: Rng + ?Sized>(
    split: &ClassSplit,
    n0g: usize,
    rng: &mut R,
) -> Result<MajorityPartition> {
    let n0 = split.n0();
    if n0g < 1 || n0g + 1 > n0 {
        return Err(Error::InvalidPartitionSize { n0g, n0 });
    }
    let mut perm = split.majority_idx.clone();
    perm.shuffle(rng);
    let mut generation_idx = perm[..n0g].to_vec();
    let mut correction_idx = perm[n0g..].to_vec();
    generation_idx.sort_unstable();
    correction_idx.sort_unstable();
    Ok(MajorityPartition { generation_idx, correction_idx })
}

/// Default generation-set size: `min(n1, floor(n0 / 2))`, at least 1.
pub fn default_n0g(n1: usize, n0: usize) -> usize {
    n1.min(n0 / 2).max(1)
}

pub fn split_train_val_test<R: Rng + ?Sized>(
    d: &Dataset,
    probs: [f64; 3],
    rng: &mut R,
) -> Result<TrainValTest> {
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadProbabilities(probs));
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    for i in 0..d.n() {
        let u: f64 = rng.random();
        let k = if u < probs[0] {
            0
        } else if u < probs[0] + probs[1] {
            1
        } else {
            2
        };
        parts[k].push(i);
    }
    let take = |idx: &[usize]| Dataset { x: d.x.select(Axis(0), idx), y: idx.iter().map(|&i| d.y[i]).collect() };
    Ok(TrainValTest { train: take(&parts[0]), val: take(&parts[1]), test: take(&parts[2]) })
}

/// Reads a headed CSV; `label_column` names the 0/1 column, every other column
/// is a covariate.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let label_pos = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::InvalidDataset(format!("no column named {label_column:?}")))?;
    let d = headers.len() - 1;
    if d == 0 {
        return Err(Error::InvalidDataset("no covariate columns".into()));
    }
    let mut xs = Vec::new();
    let mut y = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != headers.len() {
            return Err(Error::Parse { row, col: rec.len().min(headers.len()) + 1, msg: "wrong field count".into() });
        }
        for (c, field) in rec.iter().enumerate() {
            let field = field.trim();
            if c == label_pos {
                match field {
                    "0" => y.push(0),
                    "1" => y.push(1),
                    other => match other.parse::<f64>() {
                        Ok(0.0) => y.push(0),
                        Ok(1.0) => y.push(1),
                        _ => return Err(Error::BadLabel { row, value: other.to_string() }),
                    },
                }
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse { row, col: c + 1, msg: format!("not a number: {field:?}") })?;
                xs.push(v);
            }
        }
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, d), xs).map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Dataset::new(x, y)
}

/// Writes a dataset as CSV with columns `x1..xd` and `label_column` last.
pub fn write_csv(d: &Dataset, path: &Path, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=d.d()).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (row, &label) in d.x.rows().into_iter().zip(&d.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { row, col: 0, msg: format!("{other:?}") },
    }
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Raw IDX image file contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::IdxFormat("truncated header".into()))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(Error::IdxFormat(format!("image magic {magic:#010x}, expected {IDX_IMAGES:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let len = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < len {
        return Err(Error::IdxFormat(format!("expected {len} pixel bytes, found {}", body.len())));
    }
    Ok(IdxImages { rows, cols, pixels: body[..len].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(Error::IdxFormat(format!("label magic {magic:#010x}, expected {IDX_LABELS:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::IdxFormat(format!("expected {count} labels, found {}", body.len())));
    }
    Ok(body[..count].to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IDX_IMAGES.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx_pair(images: &IdxImages, labels: &[u8], images_path: &Path, labels_path: &Path) -> Result<()> {
    fs::File::create(images_path)?.write_all(&encode_idx_images(images))?;
    fs::File::create(labels_path)?.write_all(&encode_idx_labels(labels))?;
    Ok(())
}

/// Loads an IDX image/label pair, keeping digits in `digit_filter`;
/// `y = 1` iff the digit equals `positive_digit`. Pixels are scaled by 1/255.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
    digit_filter: &[u8],
    positive_digit: u8,
) -> Result<Dataset> {
    let images = parse_idx_images(&fs::read(images_path)?)?;
    let labels = parse_idx_labels(&fs::read(labels_path)?)?;
    mnist_from_parts(&images, &labels, digit_filter, positive_digit)
}

pub fn mnist_from_parts(images: &IdxImages, labels: &[u8], digit_filter: &[u8], positive_digit: u8) -> Result<Dataset> {
    if images.count() != labels.len() {
        return Err(Error::CountMismatch { images: images.count(), labels: labels.len() });
    }
    let d = images.rows * images.cols;
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| digit_filter.contains(&labels[i])).collect();
    if keep.is_empty() {
        return Err(Error::InvalidDataset("no images match the digit filter".into()));
    }
    let mut x = Array2::<f64>::zeros((keep.len(), d));
    for (r, &i) in keep.iter().enumerate() {
        for (dst, &p) in x.row_mut(r).iter_mut().zip(&images.pixels[i * d..(i + 1) * d]) {
            *dst = p as f64 / 255.0;
        }
    }
    let y = keep.iter().map(|&i| u8::from(labels[i] == positive_digit)).collect();
    Dataset::new(x, y)
}

/// Average-pools each image over `factor x factor` blocks; a partial block at
/// the right or bottom edge is averaged over the pixels it has.
pub fn pool_images(images: &IdxImages, factor: usize) -> Result<IdxImages> {
    if factor == 0 {
        return Err(Error::Config("pooling factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(images.clone());
    }
    let (rows, cols) = (images.rows.div_ceil(factor), images.cols.div_ceil(factor));
    let size = images.rows * images.cols;
    let mut pixels = Vec::with_capacity(images.count() * rows * cols);
    for img in images.pixels.chunks_exact(size.max(1)) {
        for br in 0..rows {
            for bc in 0..cols {
                let (r0, c0) = (br * factor, bc * factor);
                let (r1, c1) = ((r0 + factor).min(images.rows), (c0 + factor).min(images.cols));
                let sum: u32 = (r0..r1).flat_map(|r| (c0..c1).map(move |c| img[r * images.cols + c] as u32)).sum();
                let count = ((r1 - r0) * (c1 - c0)) as u32;
                pixels.push(((sum + count / 2) / count) as u8);
            }
        }
    }
    Ok(IdxImages { rows, cols, pixels })
}

/// Keeps every negative and a random subset of positives so that positives
/// make up `ratio` of the result.
pub fn subsample_positive<R: Rng + ?Sized>(d: &Dataset, ratio: f64, rng: &mut R) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("positive ratio must lie in (0, 1), got {ratio}")));
    }
    let split = split_by_class(d)?;
    let target = (ratio / (1.0 - ratio) * split.n0() as f64).round() as usize;
    let keep_pos = target.min(split.n1());
    if keep_pos == 0 {
        return Err(Error::EmptyClass { label: 1 });
    }
    let mut pos = split.minority_idx.clone();
    pos.shuffle(rng);
    let mut idx: Vec<usize> = split.majority_idx.iter().copied().chain(pos[..keep_pos].iter().copied()).collect();
    idx.sort_unstable();
    Ok(d.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;
    use std::collections::BTreeSet;

    fn ds(y: Vec<u8>) -> Dataset {
        let n = y.len();
        Dataset::new(Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64), y).unwrap()
    }

    #[test]
    fn validation() {
        assert!(Dataset::new(Array2::zeros((2, 1)), vec![0]).is_err());
        assert!(Dataset::new(Array2::zeros((1, 1)), vec![2]).is_err());
        assert!(Dataset::new(Array2::zeros((0, 1)), vec![]).is_err());
    }

    #[test]
    fn class_split_examples() {
        let s = split_by_class(&ds(vec![1, 0, 0])).unwrap();
        assert_eq!(s.minority_idx, vec![0]);
        assert_eq!(s.majority_idx, vec![1, 2]);
        assert!(matches!(split_by_class(&ds(vec![1, 1])), Err(Error::EmptyClass { label: 0 })));
        let s = split_by_class(&ds(vec![0, 1, 0, 1, 0])).unwrap();
        assert_eq!((s.n1(), s.n0()), (2, 3));
    }

    #[test]
    fn partition_examples() {
        let mut y = vec![0u8; 10];
        y.push(1);
        let s = split_by_class(&ds(y)).unwrap();
        let p = partition_majority(&s, 4, &mut seeded(1)).unwrap();
        assert_eq!(p.generation_idx.len(), 4);
        assert_eq!(p.correction_idx.len(), 6);
        let g: BTreeSet<_> = p.generation_idx.iter().collect();
        assert!(p.correction_idx.iter().all(|i| !g.contains(i)));
        assert_eq!(p, partition_majority(&s, 4, &mut seeded(1)).unwrap());

        let s2 = split_by_class(&ds(vec![0, 0, 1])).unwrap();
        assert!(matches!(partition_majority(&s2, 2, &mut seeded(1)), Err(Error::InvalidPartitionSize { .. })));
        assert!(partition_majority(&s2, 0, &mut seeded(1)).is_err());
    }

    #[test]
    fn split_examples() {
        let d = ds(vec![0, 1, 0, 1, 0]);
        let t = split_train_val_test(&d, [1.0, 0.0, 0.0], &mut seeded(0)).unwrap();
        assert_eq!(t.train, d);
        assert!(matches!(
            split_train_val_test(&d, [0.5, 0.6, 0.2], &mut seeded(0)),
            Err(Error::BadProbabilities(_))
        ));
        assert!(split_train_val_test(&d, [1.2, -0.2, 0.0], &mut seeded(0)).is_err());
    }

    #[test]
    fn split_binomial_concentration() {
        let n = 10_000;
        let d = Dataset::new(Array2::zeros((n, 1)), vec![0; n]).unwrap();
        let t = split_train_val_test(&d, [0.6, 0.2, 0.2], &mut seeded(42)).unwrap();
        let sigma = (n as f64 * 0.6 * 0.4).sqrt();
        assert!((t.train.n() as f64 - 6000.0).abs() <= 3.0 * sigma);
        assert_eq!(t.train.n() + t.val.n() + t.test.n(), n);
    }

    #[test]
    fn csv_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x1,x2,y\n0,0,1\n1,1,0\n2,2,0\n").unwrap();
        let d = load_csv(&p, "y").unwrap();
        assert_eq!((d.n(), d.d(), d.n1()), (3, 2, 1));
        assert_eq!(d.x, array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);

        fs::write(&p, "x1,y\n0,2\n1,0\n").unwrap();
        assert!(matches!(load_csv(&p, "y"), Err(Error::BadLabel { row: 1, .. })));

        fs::write(&p, "x1,x2,y\n0,0,1\n1,abc,0\n").unwrap();
        match load_csv(&p, "y") {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 2)),
            other => panic!("{other:?}"),
        }

        fs::write(&p, "y,a\n1,3.5\n0,-1\n").unwrap();
        let d = load_csv(&p, "y").unwrap();
        assert_eq!(d.x, array![[3.5], [-1.0]]);
        assert_eq!(d.y, vec![1, 0]);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let d = Dataset::new(array![[0.1, -2.5], [1e-9, 3.0]], vec![1, 0]).unwrap();
        write_csv(&d, &p, "label").unwrap();
        assert_eq!(load_csv(&p, "label").unwrap(), d);
    }

    fn tiny_idx() -> (IdxImages, Vec<u8>) {
        let mut pixels = vec![0u8; 2 * 784];
        pixels[0] = 255;
        pixels[784 + 5] = 51;
        (IdxImages { rows: 28, cols: 28, pixels }, vec![1, 3])
    }

    #[test]
    fn idx_scaling_and_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        let (img, lab) = tiny_idx();
        write_idx_pair(&img, &lab, &ip, &lp).unwrap();
        let d = load_mnist_idx(&ip, &lp, &[0, 1, 2, 3, 4], 1).unwrap();
        assert_eq!(d.d(), 784);
        assert_eq!(d.x[[0, 0]], 1.0);
        assert_eq!(d.x[[1, 5]], 0.2);
        assert_eq!(d.y, vec![1, 0]);
        let d = load_mnist_idx(&ip, &lp, &[3], 1).unwrap();
        assert_eq!(d.y, vec![0]);
        assert_eq!(d.x[[0, 5]], 0.2);
    }

    #[test]
    fn idx_errors() {
        let (img, lab) = tiny_idx();
        let mut bytes = encode_idx_images(&img);
        bytes[..4].copy_from_slice(&0u32.to_be_bytes());
        assert!(matches!(parse_idx_images(&bytes), Err(Error::IdxFormat(_))));
        let bytes = encode_idx_images(&img);
        assert!(matches!(parse_idx_images(&bytes[..100]), Err(Error::IdxFormat(_))));
        assert!(matches!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 5, 1]), Err(Error::IdxFormat(_))));
        assert!(matches!(
            mnist_from_parts(&img, &lab[..1], &[1, 3], 1),
            Err(Error::CountMismatch { images: 2, labels: 1 })
        ));
    }

    #[test]
    fn idx_roundtrip_bit_exact() {
        let (img, lab) = tiny_idx();
        assert_eq!(parse_idx_images(&encode_idx_images(&img)).unwrap(), img);
        assert_eq!(parse_idx_labels(&encode_idx_labels(&lab)).unwrap(), lab);
    }

    #[test]
    fn subsampling_hits_ratio() {
        let n = 1000;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0)).collect();
        let d = Dataset::new(Array2::zeros((n, 1)), y).unwrap();
        let s = subsample_positive(&d, 0.05, &mut seeded(3)).unwrap();
        assert_eq!(s.n() - s.n1(), 750);
        assert_eq!(s.n1(), 39);
        assert!(subsample_positive(&d, 0.0, &mut seeded(3)).is_err());
    }

    #[test]
    fn pooling_averages_blocks() {
        let img = IdxImages { rows: 3, cols: 3, pixels: vec![0, 4, 8, 4, 8, 0, 1, 2, 3] };
        let p = pool_images(&img, 2).unwrap();
        assert_eq!((p.rows, p.cols), (2, 2));
        // blocks: {0,4,4,8}, {8,0}, {1,2}, {3}
        assert_eq!(p.pixels, vec![4, 4, 2, 3]);
        assert_eq!(pool_images(&img, 1).unwrap(), img);
        assert!(pool_images(&img, 0).is_err());
        let two = IdxImages { rows: 2, cols: 2, pixels: vec![10, 10, 10, 10, 0, 0, 0, 255] };
        assert_eq!(pool_images(&two, 2).unwrap().pixels, vec![10, 64]);
    }
}
