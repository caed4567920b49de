//! Univariate node distributions.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

const GRID_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-9;

/// A univariate distribution attached to a tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Marginal {
    /// Normal law given by mean and variance.
    Normal { mean: f64, variance: f64 },
    Uniform { a: f64, b: f64 },
    /// Equal mass on each listed value.
    DiscreteUniform(Vec<f64>),
    Dirac(f64),
    /// `max(ξ, 0)` for `ξ ~ N(0, sigma²)`.
    RectifiedNormal { sigma: f64 },
    /// Empirical law of a sorted sample.
    Empirical(Vec<f64>),
}

/// Closure of the range of a distribution function, as a union of closed
/// intervals with rational endpoints (points are degenerate intervals).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeClosure(Vec<(BigRational, BigRational)>);

impl RangeClosure {
    fn full() -> Self {
        Self(vec![(BigRational::zero(), BigRational::one())])
    }

    fn points(mut pts: Vec<BigRational>) -> Self {
        pts.sort();
        pts.dedup();
        Self(pts.into_iter().map(|p| (p.clone(), p)).collect())
    }

    pub fn intervals(&self) -> &[(BigRational, BigRational)] {
        &self.0
    }
}

impl Marginal {
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        let m = Marginal::Normal { mean, variance };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let m = Marginal::Uniform { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn discrete(values: Vec<f64>) -> Result<Self> {
        let m = Marginal::DiscreteUniform(values);
        m.validate()?;
        Ok(m)
    }

    pub fn rectified_normal(sigma: f64) -> Result<Self> {
        let m = Marginal::RectifiedNormal { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical(mut sample: Vec<f64>) -> Result<Self> {
        sample.sort_by(f64::total_cmp);
        let m = Marginal::Empirical(sample);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            Marginal::Normal { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    return bad(format!("normal({mean},{variance}) needs finite mean and variance >= 0"));
                }
            }
            Marginal::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("uniform({a},{b}) needs a < b"));
                }
            }
            Marginal::DiscreteUniform(v) | Marginal::Empirical(v) => {
                if v.is_empty() {
                    return bad("discrete value list is empty".into());
                }
                if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] > w[1]) {
                    return bad("discrete values must be finite and sorted".into());
                }
            }
            Marginal::Dirac(p) => {
                if !p.is_finite() {
                    return bad("dirac point must be finite".into());
                }
            }
            Marginal::RectifiedNormal { sigma } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return bad(format!("rectnormal({sigma}) needs sigma >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Whether the distribution function is continuous.
    pub fn is_continuous(&self) -> bool {
        match self {
            Marginal::Normal { variance, .. } => *variance > 0.0,
            Marginal::Uniform { .. } => true,
            _ => false,
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain("cdf evaluated at NaN".into()));
        }
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        match self {
            Marginal::Normal { mean, variance } => {
                if *variance == 0.0 {
                    step(x >= *mean)
                } else {
                    normal::cdf((x - mean) / variance.sqrt())
                }
            }
            Marginal::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Marginal::DiscreteUniform(v) | Marginal::Empirical(v) => {
                v.partition_point(|&y| y <= x) as f64 / v.len() as f64
            }
            Marginal::Dirac(p) => step(x >= *p),
            Marginal::RectifiedNormal { sigma } => {
                if x < 0.0 {
                    0.0
                } else if *sigma == 0.0 {
                    1.0
                } else {
                    normal::cdf(x / sigma)
                }
            }
        }
    }

    /// Left limit `F(x-) = P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Marginal::Normal { mean, variance } if *variance == 0.0 => step(x > *mean),
            Marginal::Normal { .. } | Marginal::Uniform { .. } => self.cdf_unchecked(x),
            Marginal::DiscreteUniform(v) | Marginal::Empirical(v) => {
                v.partition_point(|&y| y < x) as f64 / v.len() as f64
            }
            Marginal::Dirac(p) => step(x > *p),
            Marginal::RectifiedNormal { sigma } => {
                if x <= 0.0 {
                    0.0
                } else if *sigma == 0.0 {
                    1.0
                } else {
                    normal::cdf(x / sigma)
                }
            }
        }
    }

    /// Generalized inverse `inf{x : F(x) >= t}`.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!("quantile level {t} outside (0,1)")));
        }
        Ok(self.quantile_unchecked(t))
    }

    pub(crate) fn quantile_unchecked(&self, t: f64) -> f64 {
        match self {
            Marginal::Normal { mean, variance } => mean + variance.sqrt() * normal::quantile(t),
            Marginal::Uniform { a, b } => a + t * (b - a),
            Marginal::DiscreteUniform(v) | Marginal::Empirical(v) => {
                // Smallest k with k/n >= t, guarding against t*n rounding just above an integer.
                let n = v.len();
                let mut k = (t * n as f64).ceil() as usize;
                if k > 1 && (k - 1) as f64 / n as f64 >= t {
                    k -= 1;
                }
                v[k.clamp(1, n) - 1]
            }
            Marginal::Dirac(p) => *p,
            Marginal::RectifiedNormal { sigma } => {
                if t <= 0.5 {
                    0.0
                } else {
                    sigma * normal::quantile(t)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Normal { mean, .. } => *mean,
            Marginal::Uniform { a, b } => 0.5 * (a + b),
            Marginal::DiscreteUniform(v) | Marginal::Empirical(v) => v.iter().sum::<f64>() / v.len() as f64,
            Marginal::Dirac(p) => *p,
            Marginal::RectifiedNormal { sigma } => sigma * 0.398_942_280_401_432_7,
        }
    }

    /// Stop-loss transform `E (X - k)_+`.
    pub fn stop_loss(&self, k: f64) -> f64 {
        match self {
            Marginal::Normal { mean, variance } => {
                let s = variance.sqrt();
                if s == 0.0 {
                    return (mean - k).max(0.0);
                }
                let z = (mean - k) / s;
                (mean - k) * normal::cdf(z) + s * normal::pdf(z)
            }
            Marginal::Uniform { a, b } => {
                if k <= *a {
                    0.5 * (a + b) - k
                } else if k >= *b {
                    0.0
                } else {
                    (b - k) * (b - k) / (2.0 * (b - a))
                }
            }
            Marginal::DiscreteUniform(v) | Marginal::Empirical(v) => {
                v.iter().map(|&x| (x - k).max(0.0)).sum::<f64>() / v.len() as f64
            }
            Marginal::Dirac(p) => (p - k).max(0.0),
            Marginal::RectifiedNormal { sigma } => {
                if k < 0.0 {
                    self.mean() - k
                } else if *sigma == 0.0 {
                    0.0
                } else {
                    sigma * normal::pdf(k / sigma) - k * normal::cdf(-k / sigma)
                }
            }
        }
    }

    /// Closure of `Ran(F)`; unavailable for empirical laws.
    pub fn range_closure(&self) -> Result<RangeClosure> {
        let half = BigRational::new(1.into(), 2.into());
        Ok(match self {
            Marginal::Normal { variance, .. } if *variance == 0.0 => {
                RangeClosure::points(vec![BigRational::zero(), BigRational::one()])
            }
            Marginal::Normal { .. } | Marginal::Uniform { .. } => RangeClosure::full(),
            Marginal::Dirac(_) => RangeClosure::points(vec![BigRational::zero(), BigRational::one()]),
            Marginal::RectifiedNormal { sigma } if *sigma == 0.0 => {
                RangeClosure::points(vec![BigRational::zero(), BigRational::one()])
            }
            Marginal::RectifiedNormal { .. } => RangeClosure(vec![
                (BigRational::zero(), BigRational::zero()),
                (half, BigRational::one()),
            ]),
            Marginal::DiscreteUniform(v) => {
                let n = v.len();
                let mut pts = vec![BigRational::zero()];
                for k in 1..=n {
                    if k == n || v[k] != v[k - 1] {
                        pts.push(BigRational::new(k.into(), n.into()));
                    }
                }
                RangeClosure::points(pts)
            }
            Marginal::Empirical(_) => {
                return Err(Error::Unsupported("range closure of an empirical law".into()));
            }
        })
    }

    /// Default comparison grid: 513 equispaced points spanning the
    /// 1e-4 .. 1-1e-4 quantiles of both laws.
    pub fn default_grid(&self, other: &Marginal) -> Vec<f64> {
        let lo = self.quantile_unchecked(1e-4).min(other.quantile_unchecked(1e-4));
        let hi = self.quantile_unchecked(1.0 - 1e-4).max(other.quantile_unchecked(1.0 - 1e-4));
        linspace(lo, hi, 513)
    }
}

fn step(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn range_closure_equal(m1: &Marginal, m2: &Marginal) -> Result<bool> {
    Ok(m1.range_closure()? == m2.range_closure()?)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty comparison grid".into()));
    }
    if grid.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("NaN in comparison grid".into()));
    }
    Ok(())
}

/// `m1 <=_st m2` on the grid: `F1(t) >= F2(t)` everywhere.
pub fn st_leq(m1: &Marginal, m2: &Marginal, grid: &[f64]) -> Result<bool> {
    check_grid(grid)?;
    Ok(grid.iter().all(|&t| m1.cdf_unchecked(t) + GRID_TOL >= m2.cdf_unchecked(t)))
}

/// Convex-order screen: equal means and `E(X-k)_+ <= E(Y-k)_+` on the grid.
///
/// A necessary condition checked on finitely many points, not a proof of
/// the convex order.
pub fn cx_leq(m1: &Marginal, m2: &Marginal, grid: &[f64]) -> Result<bool> {
    check_grid(grid)?;
    if (m1.mean() - m2.mean()).abs() > MEAN_TOL {
        return Ok(false);
    }
    Ok(grid.iter().all(|&k| m1.stop_loss(k) <= m2.stop_loss(k) + GRID_TOL))
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Marginal::Normal { mean, variance } => write!(f, "normal({mean},{variance})"),
            Marginal::Uniform { a, b } => write!(f, "uniform({a},{b})"),
            Marginal::DiscreteUniform(v) => write!(f, "discrete({})", list(v)),
            Marginal::Dirac(p) => write!(f, "dirac({p})"),
            Marginal::RectifiedNormal { sigma } => write!(f, "rectnormal({sigma})"),
            Marginal::Empirical(v) => write!(f, "empirical({})", list(v)),
        }
    }
}

/// Splits `name(a,b,...)` into the name and its numeric arguments.
pub(crate) fn parse_call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse literal {s:?}"));
    let Some(open) = s.find('(') else {
        return Ok((s.to_ascii_lowercase(), Vec::new()));
    };
    if !s.ends_with(')') {
        return Err(bad());
    }
    let name = s[..open].trim().to_ascii_lowercase();
    let inner = &s[open + 1..s.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    Ok((name, args))
}

impl FromStr for Marginal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} takes {n} argument(s), got {}", args.len())))
            }
        };
        match name.as_str() {
            "normal" => {
                arity(2)?;
                Marginal::normal(args[0], args[1])
            }
            "uniform" => {
                arity(2)?;
                Marginal::uniform(args[0], args[1])
            }
            "discrete" => Marginal::discrete(args),
            "dirac" => {
                arity(1)?;
                let m = Marginal::Dirac(args[0]);
                m.validate()?;
                Ok(m)
            }
            "rectnormal" => {
                arity(1)?;
                Marginal::rectified_normal(args[0])
            }
            "empirical" => Marginal::empirical(args),
            _ => Err(Error::InvalidArgument(format!("unknown marginal family {name:?}"))),
        }
    }
}

impl TryFrom<String> for Marginal {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Marginal> for String {
    fn from(m: Marginal) -> Self {
        m.to_string()
    }
}
