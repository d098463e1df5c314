//! Scalar distributions used by the data-generating processes.
//!
//! Textual form, as accepted in configs: `normal`, `normal(mu,sigma)`, `t(nu)`,
//! `logistic(mu,s)`, `laplace(mu,b)`, `gumbel(mu,beta)`, `lst(nu,mu,s)`, `hsd`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Dist {
    T { nu: f64 },
    Normal { mu: f64, sigma: f64 },
    Logistic { mu: f64, s: f64 },
    Laplace { mu: f64, b: f64 },
    Gumbel { mu: f64, beta: f64 },
    LocScaleT { nu: f64, mu: f64, s: f64 },
    /// Hyperbolic secant, unit variance.
    Hsd,
}

impl Dist {
    pub const STANDARD_NORMAL: Dist = Dist::Normal { mu: 0.0, sigma: 1.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::BadDistParam(format!("{what} must be positive, got {v}")))
            }
        };
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::BadDistParam(format!("location {v} is not finite")))
            }
        };
        match *self {
            Dist::T { nu } => ok(nu, "nu"),
            Dist::Normal { mu, sigma } => finite(mu).and(ok(sigma, "sigma")),
            Dist::Logistic { mu, s } => finite(mu).and(ok(s, "s")),
            Dist::Laplace { mu, b } => finite(mu).and(ok(b, "b")),
            Dist::Gumbel { mu, beta } => finite(mu).and(ok(beta, "beta")),
            Dist::LocScaleT { nu, mu, s } => ok(nu, "nu").and(finite(mu)).and(ok(s, "s")),
            Dist::Hsd => Ok(()),
        }
    }

    /// One draw. Parameters are assumed valid.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = |rng: &mut R| -> f64 { rng.sample(Open01) };
        match *self {
            Dist::T { nu } => student_t(nu, rng),
            Dist::Normal { mu, sigma } => mu + sigma * rng.sample::<f64, _>(StandardNormal),
            Dist::Logistic { mu, s } => {
                let p = u(rng);
                mu + s * (p / (1.0 - p)).ln()
            }
            Dist::Laplace { mu, b } => {
                let p = u(rng) - 0.5;
                mu - b * p.signum() * (1.0 - 2.0 * p.abs()).ln()
            }
            Dist::Gumbel { mu, beta } => mu - beta * (-u(rng).ln()).ln(),
            Dist::LocScaleT { nu, mu, s } => mu + s * student_t(nu, rng),
            Dist::Hsd => 2.0 / PI * (PI * u(rng) / 2.0).tan().ln(),
        }
    }
}

fn student_t<R: Rng + ?Sized>(nu: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let c = ChiSquared::new(nu).expect("validated nu").sample(rng);
    z / (c / nu).sqrt()
}

pub fn sample_scalar<R: Rng + ?Sized>(dist: &Dist, rng: &mut R) -> Result<f64> {
    dist.validate()?;
    Ok(dist.draw(rng))
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Dist::T { nu } => write!(f, "t({nu})"),
            Dist::Normal { mu, sigma } => write!(f, "normal({mu},{sigma})"),
            Dist::Logistic { mu, s } => write!(f, "logistic({mu},{s})"),
            Dist::Laplace { mu, b } => write!(f, "laplace({mu},{b})"),
            Dist::Gumbel { mu, beta } => write!(f, "gumbel({mu},{beta})"),
            Dist::LocScaleT { nu, mu, s } => write!(f, "lst({nu},{mu},{s})"),
            Dist::Hsd => write!(f, "hsd"),
        }
    }
}

impl FromStr for Dist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(Error::BadDistParam(format!("malformed distribution {s:?}"))),
            None => (s.as_str(), ""),
        };
        let nums: Vec<f64> = if args.trim().is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| Error::BadDistParam(format!("bad number {a:?} in {s:?}"))))
                .collect::<Result<_>>()?
        };
        let arity = |want: &[usize]| {
            if want.contains(&nums.len()) {
                Ok(())
            } else {
                Err(Error::BadDistParam(format!("{name} takes {want:?} parameters, got {}", nums.len())))
            }
        };
        let loc_scale = |d: fn(f64, f64) -> Dist| -> Result<Dist> {
            arity(&[0, 2])?;
            Ok(if nums.is_empty() { d(0.0, 1.0) } else { d(nums[0], nums[1]) })
        };
        let dist = match name.trim() {
            "t" | "student-t" => {
                arity(&[1])?;
                Dist::T { nu: nums[0] }
            }
            "normal" | "gaussian" | "n" => loc_scale(|mu, sigma| Dist::Normal { mu, sigma })?,
            "logistic" => loc_scale(|mu, s| Dist::Logistic { mu, s })?,
            "laplace" => loc_scale(|mu, b| Dist::Laplace { mu, b })?,
            "gumbel" => loc_scale(|mu, beta| Dist::Gumbel { mu, beta })?,
            "lst" | "loc-scale-t" => {
                arity(&[3])?;
                Dist::LocScaleT { nu: nums[0], mu: nums[1], s: nums[2] }
            }
            "hsd" => {
                arity(&[0])?;
                Dist::Hsd
            }
            other => return Err(Error::BadDistParam(format!("unknown distribution {other:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl TryFrom<String> for Dist {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Dist> for String {
    fn from(d: Dist) -> String {
        d.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn draws(d: Dist, n: usize, seed: u64) -> Vec<f64> {
        let mut r = seeded(seed);
        (0..n).map(|_| sample_scalar(&d, &mut r).unwrap()).collect()
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn normal_moments() {
        let (m, v) = mean_var(&draws(Dist::STANDARD_NORMAL, 1_000_000, 1));
        assert!(m.abs() < 4e-3);
        assert!((v - 1.0).abs() < 0.01);
    }

    #[test]
    fn logistic_cdf_at_zero() {
        let v = draws(Dist::Logistic { mu: 0.0, s: 1.0 }, 200_000, 2);
        let frac = v.iter().filter(|&&x| x <= 0.0).count() as f64 / v.len() as f64;
        assert!((frac - 0.5).abs() < 0.005);
        let (_, var) = mean_var(&draws(Dist::Logistic { mu: 0.0, s: 2.0 }, 400_000, 22));
        assert!((var / (4.0 * PI * PI / 3.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn t2_median() {
        assert!(median(draws(Dist::T { nu: 2.0 }, 1_000_000, 3)).abs() < 0.01);
        let (_, v) = mean_var(&draws(Dist::T { nu: 6.0 }, 400_000, 33));
        assert!((v - 1.5).abs() < 0.05);
    }

    #[test]
    fn laplace_gumbel_moments() {
        let (m, v) = mean_var(&draws(Dist::Laplace { mu: 1.0, b: 2.0 }, 400_000, 4));
        assert!((m - 1.0).abs() < 0.02);
        assert!((v / 8.0 - 1.0).abs() < 0.02);
        let (m, v) = mean_var(&draws(Dist::Gumbel { mu: 0.0, beta: 1.0 }, 400_000, 5));
        assert!((m - 0.5772156649).abs() < 0.01);
        assert!((v / (PI * PI / 6.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn hsd_is_hyperbolic_secant() {
        let v = draws(Dist::Hsd, 400_000, 6);
        let (m, var) = mean_var(&v);
        assert!(m.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
        let cdf = |x: f64| 2.0 / PI * (PI * x / 2.0).exp().atan();
        for x in [-1.0, 0.5, 2.0] {
            let emp = v.iter().filter(|&&s| s <= x).count() as f64 / v.len() as f64;
            assert!((emp - cdf(x)).abs() < 0.004, "{x}");
        }
        // heavier tails than the normal with the same variance
        let tail = v.iter().filter(|x| x.abs() > 3.0).count() as f64 / v.len() as f64;
        assert!(tail > 0.005);
    }

    #[test]
    fn loc_scale_t() {
        let v = draws(Dist::LocScaleT { nu: 5.0, mu: 3.0, s: 2.0 }, 400_000, 7);
        assert!((median(v.clone()) - 3.0).abs() < 0.02);
        let (_, var) = mean_var(&v);
        assert!((var / (4.0 * 5.0 / 3.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn parsing() {
        assert_eq!("t(6)".parse::<Dist>().unwrap(), Dist::T { nu: 6.0 });
        assert_eq!("normal".parse::<Dist>().unwrap(), Dist::STANDARD_NORMAL);
        assert_eq!(" Logistic(0, 5) ".parse::<Dist>().unwrap(), Dist::Logistic { mu: 0.0, s: 5.0 });
        assert_eq!("hsd".parse::<Dist>().unwrap(), Dist::Hsd);
        for d in ["t(6)", "normal(1,2)", "laplace(0,1)", "gumbel(0,1)", "lst(3,0,1)", "hsd", "logistic(0,5)"] {
            let p: Dist = d.parse().unwrap();
            assert_eq!(p.to_string().parse::<Dist>().unwrap(), p);
        }
        for bad in ["t", "t(-1)", "normal(0,0)", "cauchy", "normal(0", "t(a)"] {
            assert!(bad.parse::<Dist>().is_err(), "{bad}");
        }
        assert!(matches!(sample_scalar(&Dist::Normal { mu: 0.0, sigma: -1.0 }, &mut seeded(0)), Err(Error::BadDistParam(_))));
    }
}
