//! Bivariate copula families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::parse_call;
use crate::normal;

/// Clayton parameters below this are evaluated as independence.
const CLAYTON_EPS: f64 = 1e-6;
const GRID_TOL: f64 = 1e-12;
pub const DEFAULT_GRID: usize = 129;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Copula {
    Independence,
    Comonotone,
    Gaussian(f64),
    Clayton(f64),
    /// Rotation of Clayton by 180 degrees: `u + v - 1 + C(1-u, 1-v)`.
    SurvivalClayton(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependenceFlags {
    pub is_si: bool,
    pub is_ci: bool,
    pub is_mtp2: bool,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}={x} outside [0,1]")))
    }
}

fn check_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}={x} outside (0,1)")))
    }
}

// Clayton in the form C(u,v) = m (1 + (m/M)^θ - m^θ)^(-1/θ), m = min, M = max,
// which never overflows.
fn clayton_cdf(theta: f64, u: f64, v: f64) -> f64 {
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    if theta < CLAYTON_EPS {
        return u * v;
    }
    let (m, big) = if u <= v { (u, v) } else { (v, u) };
    let x = (theta * (m.ln() - big.ln())).exp();
    let y = (theta * m.ln()).exp();
    m * (-(x - y).ln_1p() / theta).exp()
}

fn clayton_h(theta: f64, u: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    if theta < CLAYTON_EPS {
        return v;
    }
    // h = (1 + (u/v)^θ - u^θ)^(-(1+θ)/θ)
    let lnx = theta * (u.ln() - v.ln());
    let y = (theta * u.ln()).exp();
    let ln_inner = if lnx > 30.0 {
        lnx + ((1.0 - y) * (-lnx).exp()).ln_1p()
    } else {
        (lnx.exp() - y).ln_1p()
    };
    (-(1.0 + theta) / theta * ln_inner).exp()
}

fn clayton_h_inv(theta: f64, u: f64, p: f64) -> f64 {
    if theta < CLAYTON_EPS {
        return p;
    }
    // (u/v)^θ = p^(-θ/(1+θ)) - 1 + u^θ
    let q = (-theta / (1.0 + theta) * p.ln()).exp_m1() + (theta * u.ln()).exp();
    (u.ln() - q.ln() / theta).exp().clamp(0.0, 1.0)
}

impl Copula {
    pub fn gaussian(rho: f64) -> Result<Self> {
        let c = Copula::Gaussian(rho);
        c.validate()?;
        Ok(c)
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        let c = Copula::Clayton(theta);
        c.validate()?;
        Ok(c)
    }

    pub fn survival_clayton(theta: f64) -> Result<Self> {
        let c = Copula::SurvivalClayton(theta);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Copula::Gaussian(r) if !(-1.0..=1.0).contains(&r) => {
                Err(Error::InvalidArgument(format!("gaussian correlation {r} outside [-1,1]")))
            }
            Copula::Clayton(t) | Copula::SurvivalClayton(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(Error::InvalidArgument(format!("clayton parameter {t} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        Ok(self.cdf_unchecked(u, v))
    }

    pub(crate) fn cdf_unchecked(&self, u: f64, v: f64) -> f64 {
        match *self {
            Copula::Independence => u * v,
            Copula::Comonotone => u.min(v),
            Copula::Gaussian(r) => {
                if u == 0.0 || v == 0.0 {
                    0.0
                } else if u == 1.0 || v == 1.0 || r == 1.0 {
                    u.min(v)
                } else if r == -1.0 {
                    (u + v - 1.0).max(0.0)
                } else {
                    normal::bvn_cdf(normal::quantile(u), normal::quantile(v), r)
                }
            }
            Copula::Clayton(t) => clayton_cdf(t, u, v),
            Copula::SurvivalClayton(t) => (u + v - 1.0 + clayton_cdf(t, 1.0 - u, 1.0 - v)).clamp(0.0, u.min(v)),
        }
    }

    /// Joint survival function `P(U > u, V > v)`.
    pub fn survival(&self, u: f64, v: f64) -> Result<f64> {
        Ok(1.0 - u - v + self.cdf(u, v)?)
    }

    /// Conditional distribution function of `V` given `U = u`.
    pub fn h(&self, u: f64, v: f64) -> Result<f64> {
        check_open("u", u)?;
        check_unit("v", v)?;
        Ok(self.h_unchecked(u, v))
    }

    pub(crate) fn h_unchecked(&self, u: f64, v: f64) -> f64 {
        match *self {
            Copula::Independence => v,
            Copula::Comonotone => {
                if v >= u {
                    1.0
                } else {
                    0.0
                }
            }
            Copula::Gaussian(r) => {
                if v <= 0.0 {
                    0.0
                } else if v >= 1.0 {
                    1.0
                } else if r.abs() == 1.0 {
                    let edge = if r > 0.0 { u } else { 1.0 - u };
                    if v >= edge {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let s = (1.0 - r * r).sqrt();
                    normal::cdf((normal::quantile(v) - r * normal::quantile(u)) / s)
                }
            }
            Copula::Clayton(t) => clayton_h(t, u, v),
            Copula::SurvivalClayton(t) => 1.0 - clayton_h(t, 1.0 - u, 1.0 - v),
        }
    }

    /// Solves `h(u, v) = p` for `v`.
    pub fn h_inv(&self, u: f64, p: f64) -> Result<f64> {
        check_open("u", u)?;
        check_open("p", p)?;
        let v = self.h_inv_unchecked(u, p);
        if !v.is_finite() {
            return Err(Error::NoConvergence(format!("h_inv({u},{p}) for {self}")));
        }
        if self.has_density() && (self.h_unchecked(u, v) - p).abs() > 1e-10 {
            return self.h_inv_bisect(u, p);
        }
        Ok(v)
    }

    pub(crate) fn h_inv_unchecked(&self, u: f64, p: f64) -> f64 {
        match *self {
            Copula::Independence => p,
            Copula::Comonotone => u,
            Copula::Gaussian(r) => {
                if r == 1.0 {
                    u
                } else if r == -1.0 {
                    1.0 - u
                } else {
                    normal::cdf(r * normal::quantile(u) + (1.0 - r * r).sqrt() * normal::quantile(p))
                }
            }
            Copula::Clayton(t) => clayton_h_inv(t, u, p),
            Copula::SurvivalClayton(t) => 1.0 - clayton_h_inv(t, 1.0 - u, 1.0 - p),
        }
    }

    /// Bisection on `v ↦ h(u, v)`; stops once the bracket collapses to
    /// adjacent floats.
    fn h_inv_bisect(&self, u: f64, p: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.h_unchecked(u, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        let collapsed = hi - lo <= 4.0 * f64::EPSILON * hi.max(f64::MIN_POSITIVE);
        if (self.h_unchecked(u, v) - p).abs() > 1e-10 && !collapsed {
            return Err(Error::NoConvergence(format!("bisection for h_inv({u},{p}) on {self}")));
        }
        Ok(v)
    }

    fn has_density(&self) -> bool {
        match *self {
            Copula::Comonotone => false,
            Copula::Gaussian(r) => r.abs() < 1.0,
            _ => true,
        }
    }

    /// Analytic positive-dependence flags.
    pub fn dependence_flags(&self) -> DependenceFlags {
        let all = |b: bool| DependenceFlags { is_si: b, is_ci: b, is_mtp2: b };
        match *self {
            Copula::Independence | Copula::Clayton(_) | Copula::SurvivalClayton(_) => all(true),
            Copula::Comonotone => DependenceFlags { is_si: true, is_ci: true, is_mtp2: false },
            Copula::Gaussian(1.0) => DependenceFlags { is_si: true, is_ci: true, is_mtp2: false },
            Copula::Gaussian(r) => all(r >= 0.0),
        }
    }

    pub fn kendall_tau(&self) -> f64 {
        match *self {
            Copula::Independence => 0.0,
            Copula::Comonotone => 1.0,
            Copula::Gaussian(r) => 2.0 / PI * r.asin(),
            Copula::Clayton(t) | Copula::SurvivalClayton(t) => t / (t + 2.0),
        }
    }

    pub fn is_comonotone(&self) -> bool {
        matches!(*self, Copula::Comonotone) || matches!(*self, Copula::Gaussian(r) if r == 1.0)
    }
}

/// Clayton parameter with the same Kendall τ as a Gaussian copula with
/// correlation `rho`: θ = 2τ/(1-τ), τ = (2/π) asin ρ.
pub fn theta_from_rho(rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("theta_from_rho needs rho in [0,1), got {rho} (unbounded at 1)")));
    }
    let tau = 2.0 / PI * rho.asin();
    Ok(2.0 * tau / (1.0 - tau))
}

/// The closed form `2 asin ρ / (π - 2 asin ρ)`, which is half of
/// [`theta_from_rho`]. Kept for comparison only.
pub fn theta_from_rho_half(rho: f64) -> Result<f64> {
    Ok(0.5 * theta_from_rho(rho)?)
}

fn open_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// `u ↦ h(u, v)` is nonincreasing on an open grid, for every grid `v`.
pub fn numeric_si_check(c: &Copula, grid_size: usize) -> Result<bool> {
    if grid_size < 3 {
        return Err(Error::InvalidArgument("grid_size must be at least 3".into()));
    }
    let g = open_grid(grid_size);
    Ok(g.iter().all(|&v| {
        g.windows(2)
            .all(|w| c.h_unchecked(w[1], v) <= c.h_unchecked(w[0], v) + GRID_TOL)
    }))
}

/// Pointwise `C1 <= C2` on an open grid.
pub fn lo_leq(c1: &Copula, c2: &Copula, grid_size: usize) -> Result<bool> {
    lo_gap(c1, c2, grid_size).map(|g| g <= GRID_TOL)
}

/// `max (C1 - C2)` over the open grid.
pub fn lo_gap(c1: &Copula, c2: &Copula, grid_size: usize) -> Result<f64> {
    if grid_size < 3 {
        return Err(Error::InvalidArgument("grid_size must be at least 3".into()));
    }
    let g = open_grid(grid_size);
    let mut worst = f64::NEG_INFINITY;
    for &u in &g {
        for &v in &g {
            worst = worst.max(c1.cdf_unchecked(u, v) - c2.cdf_unchecked(u, v));
        }
    }
    Ok(worst)
}

impl fmt::Display for Copula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Copula::Independence => write!(f, "indep"),
            Copula::Comonotone => write!(f, "comonotone"),
            Copula::Gaussian(r) => write!(f, "gaussian({r})"),
            Copula::Clayton(t) => write!(f, "clayton({t})"),
            Copula::SurvivalClayton(t) => write!(f, "sclayton({t})"),
        }
    }
}

impl FromStr for Copula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let one = || -> Result<f64> {
            match args.as_slice() {
                [x] => Ok(*x),
                _ => Err(Error::InvalidArgument(format!("{name} takes one argument"))),
            }
        };
        let none = || -> Result<()> {
            if args.is_empty() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} takes no arguments")))
            }
        };
        match name.as_str() {
            "indep" | "independence" => none().map(|_| Copula::Independence),
            "comonotone" => none().map(|_| Copula::Comonotone),
            "gaussian" => Copula::gaussian(one()?),
            "clayton" => Copula::clayton(one()?),
            "sclayton" => Copula::survival_clayton(one()?),
            _ => Err(Error::InvalidArgument(format!("unknown copula family {name:?}"))),
        }
    }
}

impl TryFrom<String> for Copula {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Copula> for String {
    fn from(c: Copula) -> Self {
        c.to_string()
    }
}
