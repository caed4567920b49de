//! Gaussian random walk observed through a perturbed channel, written as a
//! Markov tree over the hidden Markov model tree, and the robustness band for
//! the distribution of the running maximum of the observations.
//!
//! Hidden node `2n` carries `X_n ~ N(0, n)`, observed node `2n + 1` carries
//! `X_n* ~ N(0, n + σ_n)`, where `σ_n` is the variance of the observation
//! error. Node pair `(0, 1)` is the point mass at zero.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::copulas::{lo_leq, numeric_si_check, theta_from_rho, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::marginals::{linspace, Marginal};
use crate::sampler::{sample_map_chunks, TreeSpec};
use crate::tree::DirectedTree;
use crate::Copula;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_GRID_POINTS: usize = 401;

/// Coupling between hidden state and observation at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorFamily {
    Gaussian,
    Clayton,
    #[serde(rename = "sclayton")]
    SurvivalClayton,
    /// Observations equal the hidden walk.
    None,
}

impl ErrorFamily {
    pub const ALL: [ErrorFamily; 4] = [ErrorFamily::Gaussian, ErrorFamily::Clayton, ErrorFamily::SurvivalClayton, ErrorFamily::None];

    /// Family member at correlation level `rho`; Clayton parameters are
    /// matched on Kendall's τ. `rho = 1` gives the comonotone copula.
    pub fn copula(self, rho: f64) -> Result<Copula> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("observation correlation must lie in (0, 1], got {rho}")));
        }
        if rho == 1.0 || self == ErrorFamily::None {
            return Ok(Copula::Comonotone);
        }
        match self {
            ErrorFamily::Gaussian => Copula::gaussian(rho),
            ErrorFamily::Clayton => Copula::clayton(theta_from_rho(rho)?),
            ErrorFamily::SurvivalClayton => Copula::survival_clayton(theta_from_rho(rho)?),
            ErrorFamily::None => unreachable!(),
        }
    }
}

impl FromStr for ErrorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(ErrorFamily::Gaussian),
            "clayton" => Ok(ErrorFamily::Clayton),
            "sclayton" | "survival-clayton" | "survivalclayton" => Ok(ErrorFamily::SurvivalClayton),
            "none" => Ok(ErrorFamily::None),
            other => Err(Error::InvalidArgument(format!("unknown error family {other:?} (gaussian, clayton, sclayton, none)"))),
        }
    }
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorFamily::Gaussian => "gaussian",
            ErrorFamily::Clayton => "clayton",
            ErrorFamily::SurvivalClayton => "sclayton",
            ErrorFamily::None => "none",
        })
    }
}

/// Error variance per step, written `const:<v>` or `linear:<slope>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum SigmaSchedule {
    Const(f64),
    Linear(f64),
}

impl SigmaSchedule {
    /// `σ_1, ..., σ_d`.
    pub fn values(&self, d: usize) -> Vec<f64> {
        (1..=d)
            .map(|n| match *self {
                SigmaSchedule::Const(v) => v,
                SigmaSchedule::Linear(s) => s * n as f64,
            })
            .collect()
    }
}

impl FromStr for SigmaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("sigma schedule {s:?} is not const:<v> or linear:<slope>"));
        let (kind, value) = s.trim().split_once(':').ok_or_else(bad)?;
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("sigma schedule value must be finite and nonnegative, got {v}")));
        }
        match kind.trim().to_ascii_lowercase().as_str() {
            "const" => Ok(SigmaSchedule::Const(v)),
            "linear" => Ok(SigmaSchedule::Linear(v)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SigmaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSchedule::Const(v) => write!(f, "const:{v}"),
            SigmaSchedule::Linear(v) => write!(f, "linear:{v}"),
        }
    }
}

/// Perturbed walk over `d` steps together with its tree specification.
#[derive(Debug, Clone)]
pub struct PerturbedWalkSpec {
    d: usize,
    family: ErrorFamily,
    sigma: Vec<f64>,
    spec: TreeSpec,
}

impl PerturbedWalkSpec {
    pub fn horizon(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> ErrorFamily {
        self.family
    }

    /// `σ_1, ..., σ_d`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Correlation between `X_n` and `X_n*` for `n >= 1`.
    pub fn rho(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.d {
            return Err(Error::InvalidArgument(format!("step {n} outside 1..={}", self.d)));
        }
        let nf = n as f64;
        Ok((nf / (nf + self.sigma[n - 1])).sqrt())
    }

    pub fn tree_spec(&self) -> &TreeSpec {
        &self.spec
    }

    pub fn observation_node(n: usize) -> usize {
        2 * n + 1
    }

    pub fn hidden_node(n: usize) -> usize {
        2 * n
    }
}

/// Tree specification of the walk with error variances `sigma` (one per step).
pub fn build_spec(d: usize, family: ErrorFamily, sigma: &[f64]) -> Result<PerturbedWalkSpec> {
    if d == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if sigma.len() != d {
        return Err(Error::InvalidArgument(format!("sigma schedule has {} entries for {d} steps", sigma.len())));
    }
    if let Some(s) = sigma.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Domain(format!("error variance must be finite and nonnegative, got {s}")));
    }
    let sigma: Vec<f64> = if family == ErrorFamily::None { vec![0.0; d] } else { sigma.to_vec() };
    let tree = DirectedTree::hmm(d)?;
    let mut marginals = vec![Marginal::Dirac(0.0), Marginal::Dirac(0.0)];
    let mut copulas = BTreeMap::new();
    // any copula is degenerate next to the point mass
    copulas.insert((0, 1), Copula::Independence);
    copulas.insert((0, 2), Copula::Independence);
    for n in 1..=d {
        let nf = n as f64;
        marginals.push(Marginal::normal(0.0, nf)?);
        marginals.push(Marginal::normal(0.0, nf + sigma[n - 1])?);
        let rho = (nf / (nf + sigma[n - 1])).sqrt();
        copulas.insert((2 * n, 2 * n + 1), family.copula(rho)?);
        if n < d {
            copulas.insert((2 * n, 2 * n + 2), Copula::gaussian((nf / (nf + 1.0)).sqrt())?);
        }
    }
    let spec = TreeSpec::new(tree, marginals, copulas)?;
    Ok(PerturbedWalkSpec { d, family, sigma, spec })
}

/// 401 points from -5 to `4 √d`.
pub fn default_t_grid(d: usize) -> Vec<f64> {
    linspace(-5.0, 4.0 * (d as f64).sqrt(), DEFAULT_GRID_POINTS)
}

/// Empirical distribution function evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n_samples: usize,
}

impl Ecdf {
    fn from_sample(mut sample: Vec<f64>, t_grid: &[f64]) -> Self {
        sample.sort_by(f64::total_cmp);
        let n = sample.len();
        let values = t_grid.iter().map(|&t| sample.partition_point(|&m| m <= t) as f64 / n as f64).collect();
        Ecdf { t_grid: t_grid.to_vec(), values, n_samples: n }
    }

    /// `3 √(p (1 - p) / n)` at each grid point.
    pub fn mc_halfwidth(&self) -> Vec<f64> {
        self.values.iter().map(|&p| mc_halfwidth(p, self.n_samples)).collect()
    }
}

pub fn mc_halfwidth(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Samples of `max{0, X_0*, ..., X_d*}`, in sample order.
pub fn simulate_maxima(spec: &PerturbedWalkSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let width = spec.spec.tree().node_count();
    let chunks = sample_map_chunks(&spec.spec, n_samples, seed, |block, rows| {
        (0..rows)
            .map(|r| {
                let row = &block[r * width..(r + 1) * width];
                row.iter().skip(1).step_by(2).fold(0.0_f64, |m, &x| m.max(x))
            })
            .collect::<Vec<f64>>()
    })?;
    Ok(chunks.concat())
}

/// ECDF of `max{0, X_0*, ..., X_d*}` on `t_grid`.
pub fn simulate_max_ecdf(spec: &PerturbedWalkSpec, n_samples: usize, seed: u64, t_grid: &[f64]) -> Result<Ecdf> {
    Ok(Ecdf::from_sample(simulate_maxima(spec, n_samples, seed)?, t_grid))
}

/// Distribution of the maximum for the walk without error (`upper`) and
/// with the largest admissible error (`lower`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub d: usize,
    pub family: ErrorFamily,
    pub sigma_bar: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub lower_ecdf: Vec<f64>,
    pub upper_ecdf: Vec<f64>,
    pub lower_halfwidth: Vec<f64>,
    pub upper_halfwidth: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl BandResult {
    /// Sum of the two 3σ half-widths at each grid point.
    pub fn mc_halfwidth(&self) -> Vec<f64> {
        self.lower_halfwidth.iter().zip(&self.upper_halfwidth).map(|(a, b)| a + b).collect()
    }

    pub fn width(&self) -> Vec<f64> {
        self.upper_ecdf.iter().zip(&self.lower_ecdf).map(|(u, l)| u - l).collect()
    }

    /// Grid points where the no-error curve falls below the perturbed one by
    /// more than the combined Monte Carlo half-widths.
    pub fn dominance_violations(&self) -> Vec<usize> {
        let hw = self.mc_halfwidth();
        (0..self.t_grid.len()).filter(|&k| self.upper_ecdf[k] < self.lower_ecdf[k] - hw[k]).collect()
    }

    /// Linear interpolation of `(lower, upper, combined half-width)` at `t`.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let g = &self.t_grid;
        let k = g.partition_point(|&s| s < t).clamp(1, g.len() - 1);
        let w = ((t - g[k - 1]) / (g[k] - g[k - 1])).clamp(0.0, 1.0);
        let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
        let hw = self.mc_halfwidth();
        (lerp(&self.lower_ecdf), lerp(&self.upper_ecdf), lerp(&hw))
    }

    /// Columns `t,lower,upper,mc_halfwidth`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,lower,upper,mc_halfwidth")?;
        for (k, hw) in self.mc_halfwidth().into_iter().enumerate() {
            writeln!(w, "{},{},{},{}", self.t_grid[k], self.lower_ecdf[k], self.upper_ecdf[k], hw)?;
        }
        Ok(())
    }
}

/// Both scenarios are sampled with the same seed, so their difference is
/// free of sampling noise that is common to both.
pub fn uncertainty_band(
    d: usize,
    family: ErrorFamily,
    sigma_bar: &[f64],
    n_samples: usize,
    seed: u64,
    t_grid: &[f64],
) -> Result<BandResult> {
    if t_grid.len() < 2 || !t_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("t grid needs at least two increasing points".into()));
    }
    let perturbed = build_spec(d, family, sigma_bar)?;
    let exact = build_spec(d, family, &vec![0.0; d])?;
    let (lower, upper) = rayon::join(
        || simulate_max_ecdf(&perturbed, n_samples, seed, t_grid),
        || simulate_max_ecdf(&exact, n_samples, seed, t_grid),
    );
    let (lower, upper) = (lower?, upper?);
    Ok(BandResult {
        d,
        family,
        sigma_bar: perturbed.sigma,
        lower_halfwidth: lower.mc_halfwidth(),
        upper_halfwidth: upper.mc_halfwidth(),
        t_grid: t_grid.to_vec(),
        lower_ecdf: lower.values,
        upper_ecdf: upper.values,
        n_samples,
        seed,
    })
}

/// Whether `(F, C)` lies in the ambiguity set of step `n`:
/// `F_{N(0,n)} >= F >= F_{N(0,n+σ̄)}` on `t >= 0`, `C` is SI, and `C` dominates
/// the `anchor` family member at `ρ̲_n = √(n/(n+σ̄))` in the lower orthant order.
pub fn ambiguity_membership(
    candidate_marginal: &Marginal,
    candidate_copula: &Copula,
    n: usize,
    sigma_bar: f64,
    anchor: ErrorFamily,
) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidArgument("step must be at least 1".into()));
    }
    if !sigma_bar.is_finite() || sigma_bar < 0.0 {
        return Err(Error::Domain(format!("sigma_bar must be finite and nonnegative, got {sigma_bar}")));
    }
    const TOL: f64 = 1e-12;
    let nf = n as f64;
    let inner = Marginal::normal(0.0, nf)?;
    let outer = Marginal::normal(0.0, nf + sigma_bar)?;
    let grid = linspace(0.0, 8.0 * (nf + sigma_bar).sqrt(), 801);
    for &t in &grid {
        let f = candidate_marginal.cdf(t)?;
        if f > inner.cdf(t)? + TOL || f < outer.cdf(t)? - TOL {
            return Ok(false);
        }
    }
    if !numeric_si_check(candidate_copula, DEFAULT_GRID)? {
        return Ok(false);
    }
    let rho_lower = (nf / (nf + sigma_bar)).sqrt();
    lo_leq(&anchor.copula(rho_lower)?, candidate_copula, DEFAULT_GRID)
}
