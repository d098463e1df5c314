//! Synthetic stand-in for MNIST: seven-segment glyphs on a 28x28 canvas with
//! a clean background and random slant, shift, stroke width and jitter,
//! written as an IDX pair.

use std::path::Path;

use anyhow::Context;
use biascorr::dataset::{write_idx_pair, IdxImages};
use biascorr::{RngStream, Stage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const SIDE: usize = 28;
pub const IMAGES_FILE: &str = "images.idx3-ubyte";
pub const LABELS_FILE: &str = "labels.idx1-ubyte";

/// Segments a..g, clockwise from the top, then the middle bar.
const SEGMENTS: [[u8; 7]; 10] = [
    [1, 1, 1, 1, 1, 1, 0],
    [0, 1, 1, 0, 0, 0, 0],
    [1, 1, 0, 1, 1, 0, 1],
    [1, 1, 1, 1, 0, 0, 1],
    [0, 1, 1, 0, 0, 1, 1],
    [1, 0, 1, 1, 0, 1, 1],
    [1, 0, 1, 1, 1, 1, 1],
    [1, 1, 1, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 0, 1, 1],
];

/// Endpoints `(row, col)` of each segment in glyph coordinates.
fn segment_ends(s: usize) -> ((f64, f64), (f64, f64)) {
    let (top, mid, bot, left, right) = (6.0, 14.0, 22.0, 9.0, 18.0);
    match s {
        0 => ((top, left), (top, right)),
        1 => ((top, right), (mid, right)),
        2 => ((mid, right), (bot, right)),
        3 => ((bot, left), (bot, right)),
        4 => ((mid, left), (bot, left)),
        5 => ((top, left), (mid, left)),
        _ => ((mid, left), (mid, right)),
    }
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// One glyph: pixel intensities in [0, 255]. Like MNIST the background is
/// exactly zero; variation comes from slant, shift, stroke width, endpoint
/// jitter and ink level.
pub fn render<R: Rng + ?Sized>(digit: u8, rng: &mut R) -> Vec<u8> {
    let jitter = Normal::new(0.0, 0.8).expect("valid sd");
    let shift = (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0));
    let slant = rng.random_range(-0.3..0.3);
    let width = rng.random_range(0.8..2.0);
    let ink = rng.random_range(0.7..1.0);
    let place = |p: (f64, f64), r: &mut R| {
        let (row, col) = (p.0 + jitter.sample(r), p.1 + jitter.sample(r));
        (row + shift.0, col + slant * (14.0 - row) + shift.1)
    };
    let ends: Vec<_> = (0..7)
        .filter(|&s| SEGMENTS[digit as usize][s] == 1)
        .map(|s| {
            let (a, b) = segment_ends(s);
            (place(a, rng), place(b, rng))
        })
        .collect();
    let mut px = Vec::with_capacity(SIDE * SIDE);
    for r in 0..SIDE {
        for c in 0..SIDE {
            let p = (r as f64, c as f64);
            let d = ends.iter().map(|&(a, b)| dist_to_segment(p, a, b)).fold(f64::INFINITY, f64::min);
            let v = ink * (1.0 - (d - width).max(0.0)).max(0.0);
            px.push((v * 255.0).round() as u8);
        }
    }
    px
}

/// `count` images with uniformly drawn digit labels.
pub fn generate(count: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    let rs = RngStream::new(seed, 0);
    let mut label_rng = rs.stage(Stage::Data);
    let labels: Vec<u8> = (0..count).map(|_| label_rng.random_range(0..10u8)).collect();
    let mut draw = rs.stage(Stage::Generator);
    let pixels = labels.iter().flat_map(|&d| render(d, &mut draw)).collect();
    (IdxImages { rows: SIDE, cols: SIDE, pixels }, labels)
}

pub fn write(out: &Path, count: usize, seed: u64, quiet: bool) -> anyhow::Result<()> {
    if count == 0 {
        return Err(biascorr::Error::Config("--count must be positive".into()).into());
    }
    std::fs::create_dir_all(out).map_err(biascorr::Error::Io).with_context(|| format!("creating {}", out.display()))?;
    let (images, labels) = generate(count, seed);
    write_idx_pair(&images, &labels, &out.join(IMAGES_FILE), &out.join(LABELS_FILE)).context("writing the IDX pair")?;
    if !quiet {
        println!("wrote {count} images to {}", out.display());
    }
    Ok(())
}
