//! Dependence orders and positive-dependence checks on finite laws, and the
//! hypothesis audit for the supermodular comparison theorems on trees.

use std::cmp::Ordering;
use std::path::Path;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::copulas::{lo_leq, numeric_si_check, Copula, DEFAULT_GRID};
use crate::discrete::{DiscreteBivariate, DiscreteJoint, DiscreteTreeSpec, Q};
use crate::error::{Error, Result};
use crate::marginals::{cx_leq, range_closure_equal, st_leq, Marginal};
use crate::sampler::TreeSpec;
use crate::tree::{DirectedTree, TheoremQuery};

/// Largest grid the supermodular LP is attempted on.
pub const LP_CELL_LIMIT: u128 = 10_000;
/// Largest grid the orthant scans are attempted on.
pub const SCAN_CELL_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Lo,
    Uo,
    Sm,
    Schur,
    St,
    IsmPrecondition,
    DsmPrecondition,
    DcxPrecondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Holds {
    True,
    False,
    Undecided,
}

impl Holds {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Holds::True
        } else {
            Holds::False
        }
    }

    /// False if any is false, otherwise undecided if any is undecided.
    pub fn all(items: impl IntoIterator<Item = Holds>) -> Self {
        let mut out = Holds::True;
        for h in items {
            match h {
                Holds::False => return Holds::False,
                Holds::Undecided => out = Holds::Undecided,
                Holds::True => {}
            }
        }
        out
    }

    pub fn is_true(self) -> bool {
        self == Holds::True
    }
}

/// Evidence for a failed comparison. Exact probabilities are written as
/// rational strings such as `"28/75"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// `P(X cmp point)` exceeds `P(Y cmp point)` with `cmp` in `<=`, `<`, `>=`.
    Threshold { point: Vec<f64>, comparison: String, x: String, y: String },
    /// A supermodular `f` on the support grid (row-major) with
    /// `E f(Y) - E f(X) = gap < 0`.
    TestFunction { shape: Vec<usize>, values: Vec<String>, gap: String },
    /// Rearranged cumulative integrals at conditioned level `level` and
    /// position `at`: `lhs` (smaller law) exceeds `rhs`.
    Level { level: f64, at: String, lhs: String, rhs: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub relation: Relation,
    pub holds: Holds,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OrderReport {
    fn exact(relation: Relation, witness: Option<Witness>) -> Self {
        let holds = Holds::from_bool(witness.is_none());
        Self { relation, holds, witness, tolerance: 0.0, note: None }
    }

    fn undecided(relation: Relation, note: String) -> Self {
        Self { relation, holds: Holds::Undecided, witness: None, tolerance: 0.0, note: Some(note) }
    }
}

/// Which variable of a bivariate law is conditioned on the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiDirection {
    /// Column variable stochastically increasing in the row variable.
    ColGivenRow,
    /// Row variable stochastically increasing in the column variable.
    RowGivenCol,
}

fn oriented(b: &DiscreteBivariate, dir: SiDirection) -> DiscreteBivariate {
    match dir {
        SiDirection::ColGivenRow => b.clone(),
        SiDirection::RowGivenCol => b.transpose(),
    }
}

fn cumulative(p: &[Q]) -> Vec<Q> {
    p.iter()
        .scan(Q::zero(), |acc, x| {
            *acc += x;
            Some(acc.clone())
        })
        .collect()
}

/// Exact stochastic-increasingness: conditional CDFs decrease pointwise as the
/// conditioning value increases.
pub fn si_check(b: &DiscreteBivariate, dir: SiDirection) -> Result<bool> {
    let b = oriented(b, dir);
    let cdfs: Vec<Vec<Q>> = (0..b.rows()).map(|r| b.conditional(r).map(|c| cumulative(&c))).collect::<Result<_>>()?;
    Ok(cdfs.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(lo, hi)| lo >= hi)))
}

/// All 2x2 minors `p(k,l) p(k',l') >= p(k,l') p(k',l)`.
pub fn mtp2_check(b: &DiscreteBivariate) -> bool {
    let w = b.weights();
    for k in 0..w.len() {
        for k2 in k + 1..w.len() {
            for l in 0..w[k].len() {
                for l2 in l + 1..w[k].len() {
                    if &w[k][l] * &w[k2][l2] < &w[k][l2] * &w[k2][l] {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn check_same_supports(jx: &DiscreteJoint, jy: &DiscreteJoint) -> Result<()> {
    if jx.supports() != jy.supports() {
        return Err(Error::SupportMismatch("the two joints live on different support grids".into()));
    }
    Ok(())
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn flat(strides: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(strides).map(|(a, b)| a * b).sum()
}

/// Cumulative sums along every axis, from below (`upper == false`) or above.
fn orthant_tensor(j: &DiscreteJoint, upper: bool) -> Vec<Q> {
    let shape = j.shape();
    let st = strides(&shape);
    let mut v = j.to_dense();
    for (axis, &n) in shape.iter().enumerate() {
        let s = st[axis];
        if upper {
            for k in (0..v.len()).rev() {
                if (k / s) % n + 1 < n {
                    let add = v[k + s].clone();
                    v[k] += add;
                }
            }
        } else {
            for k in 0..v.len() {
                if (k / s) % n > 0 {
                    let add = v[k - s].clone();
                    v[k] += add;
                }
            }
        }
    }
    v
}

fn lex_indices(shape: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = shape.iter().product();
    (0..total).map(move |mut k| {
        let mut idx = vec![0; shape.len()];
        for (slot, &n) in idx.iter_mut().zip(shape).rev() {
            *slot = k % n;
            k /= n;
        }
        idx
    })
}

fn orthant_scan(jx: &DiscreteJoint, jy: &DiscreteJoint, upper: bool) -> Result<OrderReport> {
    let relation = if upper { Relation::Uo } else { Relation::Lo };
    check_same_supports(jx, jy)?;
    if jx.cell_count() > SCAN_CELL_LIMIT {
        return Ok(OrderReport::undecided(relation, format!("grid exceeds {SCAN_CELL_LIMIT} cells")));
    }
    let (fx, fy) = (orthant_tensor(jx, upper), orthant_tensor(jy, upper));
    let supports = jx.supports();
    let shape = jx.shape();
    let st = strides(&shape);
    let witness = |idx: &[usize], point: Vec<f64>| {
        let k = flat(&st, idx);
        // lower orthants must satisfy F_X <= F_Y, upper ones the same for survival functions
        (fx[k] > fy[k]).then(|| Witness::Threshold {
            point,
            comparison: if upper { ">=" } else { "<=" }.into(),
            x: fx[k].to_string(),
            y: fy[k].to_string(),
        })
    };

    // Diagonal thresholds first: they give the most readable witnesses.
    let mut values: Vec<f64> = supports.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    for &t in &values {
        let idx: Option<Vec<usize>> = supports
            .iter()
            .map(|s| {
                if upper {
                    let k = s.partition_point(|&x| x < t);
                    (k < s.len()).then_some(k)
                } else {
                    s.partition_point(|&x| x <= t).checked_sub(1)
                }
            })
            .collect();
        if let Some(w) = idx.and_then(|idx| witness(&idx, vec![t; shape.len()])) {
            return Ok(OrderReport::exact(relation, Some(w)));
        }
    }
    for idx in lex_indices(&shape) {
        let point = idx.iter().zip(supports).map(|(&k, s)| s[k]).collect();
        if let Some(w) = witness(&idx, point) {
            return Ok(OrderReport::exact(relation, Some(w)));
        }
    }
    Ok(OrderReport::exact(relation, None))
}

/// `X <=_lo Y` by an exact scan of all support-grid thresholds.
pub fn lo_check(jx: &DiscreteJoint, jy: &DiscreteJoint) -> Result<OrderReport> {
    orthant_scan(jx, jy, false)
}

/// `X <=_uo Y`: survival functions `P(X >= t)` compared at every grid point.
pub fn uo_check(jx: &DiscreteJoint, jy: &DiscreteJoint) -> Result<OrderReport> {
    orthant_scan(jx, jy, true)
}

/// `X <=_sm Y` decided exactly by a rational LP.
///
/// On a finite grid `f` is supermodular iff `f(x) + f(x+e_a+e_b) >= f(x+e_a) +
/// f(x+e_b)` for all adjacent rectangles, so by Farkas' lemma the order holds
/// iff `p_Y - p_X` is a nonnegative combination of the elementary transfers
/// `δ_x + δ_{x+e_a+e_b} - δ_{x+e_a} - δ_{x+e_b}`. That feasibility problem is
/// solved by phase one; when it fails, its dual is a supermodular `f` with
/// `E f(Y) < E f(X)`. With equal marginals the certificate is shifted by a
/// modular function and scaled into `[0, 1]`.
pub fn sm_check_lp(jx: &DiscreteJoint, jy: &DiscreteJoint) -> Result<OrderReport> {
    check_same_supports(jx, jy)?;
    if jx.cell_count() > LP_CELL_LIMIT {
        return Ok(OrderReport::undecided(Relation::Sm, format!("grid exceeds the LP limit of {LP_CELL_LIMIT} cells")));
    }
    let shape = jx.shape();
    let st = strides(&shape);
    let (px, py) = (jx.to_dense(), jy.to_dense());
    let diff: Vec<Q> = py.iter().zip(&px).map(|(y, x)| y - x).collect();

    let one = Q::one();
    let mut rows: Vec<crate::lp::SparseRow> = vec![Vec::new(); diff.len()];
    let mut transfers = 0;
    for idx in lex_indices(&shape) {
        let k = flat(&st, &idx);
        for a in 0..shape.len() {
            if idx[a] + 1 >= shape[a] {
                continue;
            }
            for b in a + 1..shape.len() {
                if idx[b] + 1 >= shape[b] {
                    continue;
                }
                rows[k].push((transfers, one.clone()));
                rows[k + st[a]].push((transfers, -one.clone()));
                rows[k + st[b]].push((transfers, -one.clone()));
                rows[k + st[a] + st[b]].push((transfers, one.clone()));
                transfers += 1;
            }
        }
    }

    let report = match crate::lp::nonneg_combination(transfers, &rows, &diff)? {
        crate::lp::Combination::Feasible(_) => OrderReport::exact(Relation::Sm, None),
        crate::lp::Combination::Infeasible(y) => {
            let mut f: Vec<Q> = y.into_iter().map(|v| -v).collect();
            if (0..jx.dims()).all(|i| jx.marginal(i).ok() == jy.marginal(i).ok()) {
                normalize_supermodular(&mut f, &shape);
            }
            let gap: Q = f.iter().zip(&diff).map(|(a, b)| a * b).sum();
            debug_assert!(gap.is_negative());
            let w = Witness::TestFunction { shape: shape.clone(), values: f.iter().map(|v| v.to_string()).collect(), gap: gap.to_string() };
            OrderReport::exact(Relation::Sm, Some(w))
        }
    };
    if report.holds.is_true() {
        debug_assert!(lo_check(jx, jy)?.holds.is_true(), "sm without lo");
        debug_assert!(uo_check(jx, jy)?.holds.is_true(), "sm without uo");
    }
    Ok(report)
}

/// Subtracts the modular function matching `f` on the coordinate axes through
/// the lowest cell, then scales so the top cell has value 1. The result is
/// supermodular, nondecreasing and vanishes on those axes.
fn normalize_supermodular(f: &mut [Q], shape: &[usize]) {
    let st = strides(shape);
    let base = f[0].clone();
    let axis: Vec<Vec<Q>> = (0..shape.len()).map(|i| (0..shape[i]).map(|k| &f[k * st[i]] - &base).collect()).collect();
    for (k, idx) in lex_indices(shape).enumerate() {
        let modular: Q = idx.iter().enumerate().map(|(i, &c)| axis[i][c].clone()).sum();
        f[k] = &f[k] - &modular - &base;
    }
    let top = f[f.len() - 1].clone();
    if top.is_positive() {
        for v in f.iter_mut() {
            *v /= &top;
        }
    }
}

/// Positive supermodular dependence: the independent version of `j` is
/// supermodularly smaller than `j`.
pub fn psmd_check(j: &DiscreteJoint) -> Result<OrderReport> {
    let mut r = sm_check_lp(&j.independent_version(), j)?;
    r.note = Some("psmd: independent version compared with the law".into());
    Ok(r)
}

/// One conditioning value: its probability and the conditional CDF there.
type Piece = (Q, Q);

/// `∫_0^x f*` for the step function whose pieces are sorted by value, descending.
fn rearranged_integral(sorted: &[Piece], x: &Q) -> Q {
    let mut left = x.clone();
    let mut acc = Q::zero();
    for (len, val) in sorted {
        if left <= Q::zero() {
            break;
        }
        let take = if *len < left { len.clone() } else { left.clone() };
        acc += &take * val;
        left -= take;
    }
    acc
}

/// First breakpoint where the rearranged integral of `px` exceeds that of `py`.
fn schur_violation(px: &[Piece], py: &[Piece]) -> Option<(Q, Q, Q)> {
    let sort = |p: &[Piece]| {
        let mut p: Vec<Piece> = p.iter().filter(|(m, _)| !m.is_zero()).cloned().collect();
        p.sort_by(|a, b| b.1.cmp(&a.1));
        p
    };
    let (sx, sy) = (sort(px), sort(py));
    let mut points: Vec<Q> = Vec::new();
    for s in [&sx, &sy] {
        let mut acc = Q::zero();
        for (len, _) in s.iter() {
            acc += len;
            points.push(acc.clone());
        }
    }
    points.sort();
    points.dedup();
    let last = points.last().cloned().unwrap_or_else(Q::one);
    for x in points {
        let (l, r) = (rearranged_integral(&sx, &x), rearranged_integral(&sy, &x));
        let bad = if x == last { l != r } else { l > r };
        if bad {
            return Some((x, l, r));
        }
    }
    None
}

fn schur_setup(bx: &DiscreteBivariate, by: &DiscreteBivariate, dir: SiDirection) -> Result<(DiscreteBivariate, DiscreteBivariate)> {
    let (bx, by) = (oriented(bx, dir), oriented(by, dir));
    if bx.col_values() != by.col_values() || bx.col_marginal() != by.col_marginal() {
        return Err(Error::SupportMismatch("the conditioned variables have different laws".into()));
    }
    Ok((bx, by))
}

/// Mass and conditional law of the conditioned variable for each conditioning
/// value with positive mass.
fn conditional_rows(b: &DiscreteBivariate) -> Vec<(Q, Vec<Q>)> {
    (0..b.rows())
        .filter_map(|r| {
            let mass: Q = b.weights()[r].iter().sum();
            (!mass.is_zero()).then(|| {
                let cond = b.conditional(r).expect("positive row mass");
                (mass, cond)
            })
        })
        .collect()
}

/// Schur order for conditional distributions at every support level of the
/// conditioned variable. `ColGivenRow` compares `(col | row)` laws.
///
/// The conditioning marginals may differ; zero-mass conditioning values are
/// skipped because they occupy no length in the quantile parametrization.
pub fn schur_leq(bx: &DiscreteBivariate, by: &DiscreteBivariate, dir: SiDirection) -> Result<OrderReport> {
    let (bx, by) = schur_setup(bx, by, dir)?;
    let (rx, ry) = (conditional_rows(&bx), conditional_rows(&by));
    let pieces = |rows: &[(Q, Vec<Q>)], level: usize| -> Vec<Piece> {
        rows.iter().map(|(m, c)| (m.clone(), c[..=level].iter().sum())).collect()
    };
    for level in 0..bx.cols() {
        if let Some((at, lhs, rhs)) = schur_violation(&pieces(&rx, level), &pieces(&ry, level)) {
            let w = Witness::Level { level: bx.col_values()[level], at: at.to_string(), lhs: lhs.to_string(), rhs: rhs.to_string() };
            return Ok(OrderReport::exact(Relation::Schur, Some(w)));
        }
    }
    Ok(OrderReport::exact(Relation::Schur, None))
}

/// Schur order for the block-uniform version of the two laws: the conditioned
/// variable is spread uniformly over `[v, v + width)` within each cell, so its
/// conditional CDF is checked at every real level, not just at support points.
///
/// Inside one block each conditional CDF is affine in the position `s`, so the
/// decreasing rearrangement keeps its order between crossing points and the
/// comparison is affine in `s` there; checking the crossings and block ends
/// is exhaustive.
pub fn schur_leq_block(bx: &DiscreteBivariate, by: &DiscreteBivariate, dir: SiDirection, width: f64) -> Result<OrderReport> {
    let (bx, by) = schur_setup(bx, by, dir)?;
    let (rx, ry) = (conditional_rows(&bx), conditional_rows(&by));
    // (value at block start, slope in s) per conditioning value
    let affine = |rows: &[(Q, Vec<Q>)], block: usize| -> Vec<(Q, Q, Q)> {
        rows.iter()
            .map(|(m, c)| (m.clone(), c[..block].iter().sum::<Q>(), c[block].clone()))
            .collect()
    };
    let crossings = |p: &[(Q, Q, Q)], out: &mut Vec<Q>| {
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let ds = &p[i].2 - &p[j].2;
                if ds.is_zero() {
                    continue;
                }
                let s = (&p[j].1 - &p[i].1) / ds;
                if s.is_positive() && s < Q::one() {
                    out.push(s);
                }
            }
        }
    };
    for block in 0..bx.cols() {
        let (ax, ay) = (affine(&rx, block), affine(&ry, block));
        let mut ss = vec![Q::zero(), Q::one()];
        crossings(&ax, &mut ss);
        crossings(&ay, &mut ss);
        ss.sort();
        ss.dedup();
        for s in ss {
            let at_s = |p: &[(Q, Q, Q)]| -> Vec<Piece> { p.iter().map(|(m, a, b)| (m.clone(), a + b * &s)).collect() };
            if let Some((at, lhs, rhs)) = schur_violation(&at_s(&ax), &at_s(&ay)) {
                let level = bx.col_values()[block] + width * crate::discrete::to_f64(&s);
                let w = Witness::Level { level, at: at.to_string(), lhs: lhs.to_string(), rhs: rhs.to_string() };
                return Ok(OrderReport::exact(Relation::Schur, Some(w)));
            }
        }
    }
    Ok(OrderReport::exact(Relation::Schur, None))
}

/// Theorems whose hypotheses the audit evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Supermodular comparison of Markov tree laws from edge-wise SI and sm conditions.
    TreeSm,
    /// Copula-level sufficient conditions: SI smaller copulas, CI larger copulas, lo order.
    CopulaSm,
    /// Increasing supermodular comparison with stochastically ordered marginals.
    Ism,
    /// Decreasing supermodular comparison with reversed stochastic order.
    Dsm,
    /// Directionally convex comparison with convex-ordered continuous marginals.
    Dcx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Subject {
    Edge { from: usize, to: usize },
    Node { node: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub theorem: Theorem,
    pub hypothesis: String,
    pub subject: Subject,
    pub flag: String,
    pub value: Holds,
}

/// Edge flags. `x_*` refer to the smaller law, `y_*` to the larger one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFlags {
    pub edge: (usize, usize),
    pub x_si_child_given_parent: Holds,
    pub x_si_parent_given_child: Holds,
    pub y_si_child_given_parent: Holds,
    pub y_si_parent_given_child: Holds,
    pub y_mtp2: Holds,
    /// Edge laws (or copulas) compared in lower orthant order.
    pub smaller_lo: Holds,
    /// Bivariate edge laws compared in supermodular order.
    pub smaller_sm: Holds,
    pub same_marginals: Holds,
    pub x_psmd: Holds,
    pub y_psmd: Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFlags {
    pub node: usize,
    pub same_marginal: Holds,
    pub range_equal: Holds,
    pub st_leq: Holds,
    pub st_geq: Holds,
    pub cx_leq: Holds,
    pub continuous: Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub theorem: Theorem,
    pub holds: Holds,
    /// Hypothesis checks that are false or undecided, in evaluation order.
    pub failures: Vec<HypothesisCheck>,
}

/// Hypotheses of the comparison theorems, evaluated edge by edge. A passing
/// verdict certifies the hypotheses only; the conclusion is never checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub query: TheoremQuery,
    pub per_edge: Vec<EdgeFlags>,
    pub per_node: Vec<NodeFlags>,
    pub checks: Vec<HypothesisCheck>,
    pub verdicts: Vec<Verdict>,
}

impl ConditionReport {
    pub fn verdict(&self, theorem: Theorem) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.theorem == theorem)
    }

    pub fn first_failure(&self, theorem: Theorem) -> Option<&HypothesisCheck> {
        self.verdict(theorem).and_then(|v| v.failures.first())
    }

    fn finish(query: TheoremQuery, per_edge: Vec<EdgeFlags>, per_node: Vec<NodeFlags>, checks: Vec<HypothesisCheck>) -> Self {
        let mut theorems: Vec<Theorem> = checks.iter().map(|c| c.theorem).collect();
        theorems.sort();
        theorems.dedup();
        let verdicts = theorems
            .into_iter()
            .map(|t| {
                let mine = checks.iter().filter(|c| c.theorem == t);
                let holds = Holds::all(mine.clone().map(|c| c.value));
                let failures = mine.filter(|c| c.value != Holds::True).cloned().collect();
                Verdict { theorem: t, holds, failures }
            })
            .collect();
        Self { query, per_edge, per_node, checks, verdicts }
    }
}

struct Checks(Vec<HypothesisCheck>);

impl Checks {
    fn push(&mut self, theorem: Theorem, hypothesis: &str, subject: Subject, flag: &str, value: Holds) {
        self.0.push(HypothesisCheck { theorem, hypothesis: hypothesis.into(), subject, flag: flag.into(), value });
    }

    /// Positive-dependence conditions (i) and (ii) of the tree theorem.
    fn tree_si(&mut self, theorem: Theorem, tree: &DirectedTree, q: &TheoremQuery, e: &EdgeFlags) {
        let (i, j) = e.edge;
        let subject = Subject::Edge { from: i, to: j };
        if j != q.k_star {
            self.push(theorem, "i", subject, "x_si_child_given_parent", e.x_si_child_given_parent);
        }
        if !tree.is_leaf(j) {
            self.push(theorem, "ii", subject, "y_si_parent_given_child", e.y_si_parent_given_child);
        }
        if !q.path.contains(&j) {
            self.push(theorem, "ii", subject, "y_si_child_given_parent", e.y_si_child_given_parent);
        }
    }
}

fn check_trees(tx: &DirectedTree, ty: &DirectedTree, q: &TheoremQuery) -> Result<()> {
    if tx != ty {
        return Err(Error::InvalidArgument("the two specifications use different trees".into()));
    }
    q.validate(tx)
}

fn holds_or_undecided(r: Result<bool>) -> Holds {
    match r {
        Ok(b) => Holds::from_bool(b),
        Err(_) => Holds::Undecided,
    }
}

/// SI of a copula from its analytic flag, cross-checked on a grid.
fn copula_si(c: &Copula) -> Holds {
    let analytic = c.dependence_flags().is_si;
    match numeric_si_check(c, DEFAULT_GRID) {
        Ok(numeric) if numeric == analytic => Holds::from_bool(analytic),
        _ => Holds::Undecided,
    }
}

/// Hypothesis audit for two copula-based specifications on the same tree.
pub fn audit_copula_specs(x: &TreeSpec, y: &TreeSpec, q: &TheoremQuery) -> Result<ConditionReport> {
    let tree = x.tree();
    check_trees(tree, y.tree(), q)?;
    let per_node: Vec<NodeFlags> = (0..tree.node_count())
        .map(|n| {
            let (f, g) = (&x.marginals()[n], &y.marginals()[n]);
            let grid = f.default_grid(g);
            NodeFlags {
                node: n,
                same_marginal: Holds::from_bool(f == g),
                range_equal: holds_or_undecided(range_closure_equal(f, g)),
                st_leq: holds_or_undecided(st_leq(f, g, &grid)),
                st_geq: holds_or_undecided(st_leq(g, f, &grid)),
                cx_leq: holds_or_undecided(cx_leq(f, g, &grid)),
                continuous: Holds::from_bool(f.is_continuous() && g.is_continuous()),
            }
        })
        .collect();
    let same = |n: usize| per_node[n].same_marginal;
    let per_edge: Vec<EdgeFlags> = tree
        .edges()
        .iter()
        .map(|&(i, j)| {
            let (b, c) = (x.copula(i, j)?, y.copula(i, j)?);
            let (bsi, csi) = (copula_si(b), copula_si(c));
            let smaller_lo = holds_or_undecided(lo_leq(b, c, DEFAULT_GRID));
            let same_marginals = Holds::all([same(i), same(j)]);
            // every supported family is exchangeable, so SI holds in both directions alike
            Ok(EdgeFlags {
                edge: (i, j),
                x_si_child_given_parent: bsi,
                x_si_parent_given_child: bsi,
                y_si_child_given_parent: csi,
                y_si_parent_given_child: csi,
                y_mtp2: Holds::from_bool(c.dependence_flags().is_mtp2),
                smaller_lo,
                smaller_sm: Holds::all([same_marginals, smaller_lo]),
                same_marginals,
                x_psmd: holds_or_undecided(lo_leq(&Copula::Independence, b, DEFAULT_GRID)),
                y_psmd: holds_or_undecided(lo_leq(&Copula::Independence, c, DEFAULT_GRID)),
            })
        })
        .collect::<Result<_>>()?;

    let mut ch = Checks(Vec::new());
    for e in &per_edge {
        let subject = Subject::Edge { from: e.edge.0, to: e.edge.1 };
        ch.tree_si(Theorem::TreeSm, tree, q, e);
        ch.push(Theorem::TreeSm, "iii", subject, "smaller_sm", e.smaller_sm);
    }
    for n in &per_node {
        ch.push(Theorem::CopulaSm, "marginals", Subject::Node { node: n.node }, "same_marginal", n.same_marginal);
    }
    for e in &per_edge {
        let subject = Subject::Edge { from: e.edge.0, to: e.edge.1 };
        ch.push(Theorem::CopulaSm, "i", subject, "x_si_child_given_parent", e.x_si_child_given_parent);
        let ci = Holds::all([e.y_si_child_given_parent, e.y_si_parent_given_child]);
        ch.push(Theorem::CopulaSm, "ii", subject, "y_ci", ci);
        ch.push(Theorem::CopulaSm, "iii", subject, "smaller_lo", e.smaller_lo);
    }
    for (theorem, st_flag) in [(Theorem::Ism, "st_leq"), (Theorem::Dsm, "st_geq")] {
        for e in &per_edge {
            ch.tree_si(theorem, tree, q, e);
            ch.push(theorem, "lo", Subject::Edge { from: e.edge.0, to: e.edge.1 }, "smaller_lo", e.smaller_lo);
        }
        for n in &per_node {
            let subject = Subject::Node { node: n.node };
            ch.push(theorem, "range", subject, "range_equal", n.range_equal);
            let v = if theorem == Theorem::Ism { n.st_leq } else { n.st_geq };
            ch.push(theorem, "st", subject, st_flag, v);
        }
    }
    for n in &per_node {
        ch.push(Theorem::Dcx, "continuity", Subject::Node { node: n.node }, "continuous", n.continuous);
    }
    for e in &per_edge {
        let subject = Subject::Edge { from: e.edge.0, to: e.edge.1 };
        if e.edge.1 != q.k_star {
            ch.push(Theorem::Dcx, "i", subject, "x_si_child_given_parent", e.x_si_child_given_parent);
        }
        ch.push(Theorem::Dcx, "ii", subject, "y_mtp2", e.y_mtp2);
        ch.push(Theorem::Dcx, "iii", subject, "smaller_lo", e.smaller_lo);
    }
    for n in &per_node {
        ch.push(Theorem::Dcx, "cx", Subject::Node { node: n.node }, "cx_leq", n.cx_leq);
    }
    Ok(ConditionReport::finish(q.clone(), per_edge, per_node, ch.0))
}

fn report_holds(r: Result<OrderReport>) -> Holds {
    r.map(|r| r.holds).unwrap_or(Holds::Undecided)
}

/// Hypothesis audit for two finite-support specifications on the same tree.
/// Only the tree theorem applies; all checks are exact.
pub fn audit_discrete_specs(x: &DiscreteTreeSpec, y: &DiscreteTreeSpec, q: &TheoremQuery) -> Result<ConditionReport> {
    let tree = x.tree();
    check_trees(tree, y.tree(), q)?;
    let per_edge: Vec<EdgeFlags> = tree
        .edges()
        .iter()
        .map(|&(i, j)| {
            let (bx, by) = (x.edge(i, j)?, y.edge(i, j)?);
            let (jx, jy) = (bx.to_joint(), by.to_joint());
            let same = bx.row_values() == by.row_values()
                && bx.col_values() == by.col_values()
                && bx.row_marginal() == by.row_marginal()
                && bx.col_marginal() == by.col_marginal();
            let si = |b: &DiscreteBivariate, d| holds_or_undecided(si_check(b, d));
            let comparable = |r: Result<OrderReport>| match r {
                Err(Error::SupportMismatch(_)) => Holds::False,
                other => report_holds(other),
            };
            Ok(EdgeFlags {
                edge: (i, j),
                x_si_child_given_parent: si(bx, SiDirection::ColGivenRow),
                x_si_parent_given_child: si(bx, SiDirection::RowGivenCol),
                y_si_child_given_parent: si(by, SiDirection::ColGivenRow),
                y_si_parent_given_child: si(by, SiDirection::RowGivenCol),
                y_mtp2: Holds::from_bool(mtp2_check(by)),
                smaller_lo: comparable(lo_check(&jx, &jy)),
                smaller_sm: comparable(sm_check_lp(&jx, &jy)),
                same_marginals: Holds::from_bool(same),
                x_psmd: report_holds(psmd_check(&jx)),
                y_psmd: report_holds(psmd_check(&jy)),
            })
        })
        .collect::<Result<_>>()?;
    let mut ch = Checks(Vec::new());
    for e in &per_edge {
        ch.tree_si(Theorem::TreeSm, tree, q, e);
        ch.push(Theorem::TreeSm, "iii", Subject::Edge { from: e.edge.0, to: e.edge.1 }, "smaller_sm", e.smaller_sm);
    }
    Ok(ConditionReport::finish(q.clone(), per_edge, Vec::new(), ch.0))
}

/// Either kind of tree specification, as read from a JSON manifest.
#[derive(Debug, Clone)]
pub enum AuditSpec {
    Copula(TreeSpec),
    Discrete(DiscreteTreeSpec),
}

impl AuditSpec {
    /// Manifests with a `"bivariates"` key are finite-support specifications;
    /// all others are copula specifications.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.get("bivariates").is_some() {
            Ok(AuditSpec::Discrete(DiscreteTreeSpec::from_json_str(text, base_dir)?))
        } else {
            Ok(AuditSpec::Copula(TreeSpec::from_json_str(text, base_dir)?))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path.parent())
    }

    pub fn tree(&self) -> &DirectedTree {
        match self {
            AuditSpec::Copula(s) => s.tree(),
            AuditSpec::Discrete(s) => s.tree(),
        }
    }
}

pub fn audit_theorem_conditions(x: &AuditSpec, y: &AuditSpec, q: &TheoremQuery) -> Result<ConditionReport> {
    match (x, y) {
        (AuditSpec::Copula(a), AuditSpec::Copula(b)) => audit_copula_specs(a, b, q),
        (AuditSpec::Discrete(a), AuditSpec::Discrete(b)) => audit_discrete_specs(a, b, q),
        _ => Err(Error::InvalidArgument("cannot compare a copula specification with a finite one".into())),
    }
}

/// Marginal comparison helper shared by reports: `Ordering` of two laws in
/// the usual stochastic order on a grid, if comparable.
pub fn st_compare(f: &Marginal, g: &Marginal) -> Result<Option<Ordering>> {
    let grid = f.default_grid(g);
    let (le, ge) = (st_leq(f, g, &grid)?, st_leq(g, f, &grid)?);
    Ok(match (le, ge) {
        (true, true) => Some(Ordering::Equal),
        (true, false) => Some(Ordering::Less),
        (false, true) => Some(Ordering::Greater),
        (false, false) => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{markov_joint, q};
    use std::collections::BTreeMap;

    fn law(c: &[&[i64]], den: i64) -> DiscreteBivariate {
        DiscreteBivariate::from_counts(c, den).unwrap()
    }

    fn opposite_si_pair() -> (DiscreteTreeSpec, DiscreteTreeSpec) {
        let a01 = law(&[&[4, 4, 2], &[3, 4, 3], &[3, 2, 5]], 30);
        let a12 = law(&[&[4, 4, 2], &[4, 3, 3], &[2, 3, 5]], 30);
        let b12 = law(&[&[5, 4, 1], &[3, 3, 4], &[2, 3, 5]], 30);
        let t = DirectedTree::chain(2).unwrap();
        let x = DiscreteTreeSpec::new(t.clone(), BTreeMap::from([((0, 1), a01.clone()), ((1, 2), a12)])).unwrap();
        let y = DiscreteTreeSpec::new(t, BTreeMap::from([((0, 1), a01), ((1, 2), b12)])).unwrap();
        (x, y)
    }

    // Brute-force lower orthant comparison through the public orthant API.
    fn lo_oracle(jx: &DiscreteJoint, jy: &DiscreteJoint) -> bool {
        lex_indices(&jx.shape()).all(|idx| {
            let t: Vec<f64> = idx.iter().zip(jx.supports()).map(|(&k, s)| s[k]).collect();
            let st = vec![false; t.len()];
            jx.orthant_prob(&t, &st).unwrap() <= jy.orthant_prob(&t, &st).unwrap()
        })
    }

    #[test]
    fn si_and_mtp2_basics() {
        let (x, y) = opposite_si_pair();
        assert!(si_check(x.edge(0, 1).unwrap(), SiDirection::ColGivenRow).unwrap());
        assert!(!si_check(y.edge(0, 1).unwrap(), SiDirection::RowGivenCol).unwrap());
        let p = DiscreteBivariate::product(&[q(1, 3), q(2, 3)], &[q(1, 4), q(3, 4)]).unwrap();
        assert!(si_check(&p, SiDirection::ColGivenRow).unwrap());
        assert!(si_check(&p, SiDirection::RowGivenCol).unwrap());
        assert!(mtp2_check(&p));
        let z = law(&[&[1, 0], &[0, 0]], 1);
        assert!(matches!(si_check(&z, SiDirection::ColGivenRow), Err(Error::ZeroMass(_))));
        assert!(!mtp2_check(&law(&[&[5, 2, 3], &[3, 7, 0], &[2, 1, 7]], 30)));
        assert!(mtp2_check(&law(&[&[6, 4, 0], &[3, 4, 3], &[1, 2, 7]], 30)));
    }

    #[test]
    fn lo_witness_for_the_three_node_chain() {
        let (x, y) = opposite_si_pair();
        let (jx, jy) = (x.joint().unwrap(), y.joint().unwrap());
        let r = lo_check(&jx, &jy).unwrap();
        assert_eq!(r.holds, Holds::False);
        match r.witness.unwrap() {
            Witness::Threshold { point, comparison, x, y } => {
                assert_eq!(point, vec![1.0; 3]);
                assert_eq!(comparison, "<=");
                assert_eq!((x.as_str(), y.as_str()), ("28/75", "37/100"));
            }
            w => panic!("{w:?}"),
        }
        assert!(lo_check(&jx, &jx).unwrap().holds.is_true());
        assert!(uo_check(&jx, &jx).unwrap().holds.is_true());
        assert_eq!(sm_check_lp(&jx, &jy).unwrap().holds, Holds::False);
        let r = sm_check_lp(&jx, &jx).unwrap();
        assert!(r.holds.is_true() && r.witness.is_none());
        let other = DiscreteJoint::product(&[(vec![0.0, 1.0], vec![q(1, 2), q(1, 2)])]).unwrap();
        assert!(matches!(lo_check(&jx, &other), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn sm_certificate_is_supermodular_and_separating() {
        let (x, y) = opposite_si_pair();
        let (jx, jy) = (x.joint().unwrap(), y.joint().unwrap());
        let Some(Witness::TestFunction { shape, values, gap }) = sm_check_lp(&jx, &jy).unwrap().witness else {
            panic!("expected a test function")
        };
        let f: Vec<Q> = values.iter().map(|v| crate::discrete::parse_rational(v).unwrap()).collect();
        let st = strides(&shape);
        for idx in lex_indices(&shape) {
            for a in 0..3 {
                for b in a + 1..3 {
                    if idx[a] + 1 < shape[a] && idx[b] + 1 < shape[b] {
                        let k = flat(&st, &idx);
                        assert!(&f[k + st[a]] + &f[k + st[b]] <= &f[k] + &f[k + st[a] + st[b]]);
                    }
                }
            }
        }
        assert!(f.iter().all(|v| !v.is_negative() && *v <= Q::one()));
        let e = |j: &DiscreteJoint| -> Q { j.to_dense().iter().zip(&f).map(|(p, v)| p * v).sum() };
        let g = e(&jy) - e(&jx);
        assert!(g.is_negative());
        assert_eq!(g.to_string(), gap);
    }

    #[test]
    fn psmd_examples() {
        let p = DiscreteJoint::product(&[(vec![0.0, 1.0], vec![q(1, 2), q(1, 2)]), (vec![0.0, 1.0], vec![q(1, 3), q(2, 3)])]).unwrap();
        assert!(psmd_check(&p).unwrap().holds.is_true());
        let neg = law(&[&[0, 1], &[1, 0]], 2).to_joint();
        assert_eq!(psmd_check(&neg).unwrap().holds, Holds::False);
        let b = law(&[&[6, 4, 0], &[3, 4, 3], &[1, 2, 7]], 30);
        let t = DirectedTree::chain(3).unwrap();
        let edges = t.edges().iter().map(|&e| (e, b.clone())).collect();
        let j = markov_joint(&t, &edges).unwrap();
        assert!(psmd_check(&j).unwrap().holds.is_true());
    }

    #[test]
    fn lp_guard_is_undecided() {
        let m = vec![q(1, 101); 101];
        let v: Vec<f64> = (0..101).map(f64::from).collect();
        let j = DiscreteJoint::product(&[(v.clone(), m.clone()), (v, m)]).unwrap();
        let r = sm_check_lp(&j, &j).unwrap();
        assert_eq!(r.holds, Holds::Undecided);
    }

    #[test]
    fn schur_examples() {
        let a = law(&[&[5, 2, 3], &[3, 7, 0], &[2, 1, 7]], 30);
        let b = law(&[&[6, 4, 0], &[3, 4, 3], &[1, 2, 7]], 30);
        for d in [SiDirection::ColGivenRow, SiDirection::RowGivenCol] {
            assert!(schur_leq(&a, &b, d).unwrap().holds.is_true());
            assert!(schur_leq_block(&a, &b, d, 1.0).unwrap().holds.is_true());
            assert!(schur_leq(&a, &a, d).unwrap().holds.is_true());
        }
        // the larger law is not below the smaller one
        assert_eq!(schur_leq(&b, &a, SiDirection::ColGivenRow).unwrap().holds, Holds::False);
        let ind = DiscreteBivariate::product(&[q(1, 2), q(1, 2)], &[q(1, 3), q(1, 3), q(1, 3)]).unwrap();
        assert!(schur_leq(&ind, &b, SiDirection::ColGivenRow).unwrap().holds.is_true());
        let other = law(&[&[1, 0], &[0, 1]], 2);
        assert!(schur_leq(&other, &b, SiDirection::ColGivenRow).is_err());
    }

    #[test]
    fn rearranged_integral_matches_direct_sum() {
        let pieces = vec![(q(1, 2), q(1, 4)), (q(1, 4), q(1, 1)), (q(1, 4), q(1, 2))];
        let mut s = pieces.clone();
        s.sort_by(|a, b| b.1.cmp(&a.1));
        assert_eq!(rearranged_integral(&s, &q(1, 4)), q(1, 4));
        assert_eq!(rearranged_integral(&s, &q(1, 2)), q(3, 8));
        assert_eq!(rearranged_integral(&s, &q(3, 4)), q(7, 16));
        assert_eq!(rearranged_integral(&s, &q(1, 1)), q(1, 2));
    }

    #[test]
    fn lo_scan_agrees_with_orthant_probabilities() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rand_law = |rng: &mut rand_chacha::ChaCha8Rng| {
                let c: Vec<Vec<i64>> = (0..2).map(|_| (0..3).map(|_| rng.random_range(1..6)).collect()).collect();
                let den: i64 = c.iter().flatten().sum();
                let rows: Vec<&[i64]> = c.iter().map(|r| &r[..]).collect();
                law(&rows, den).to_joint()
            };
            let (jx, jy) = (rand_law(&mut rng), rand_law(&mut rng));
            assert_eq!(lo_check(&jx, &jy).unwrap().holds.is_true(), lo_oracle(&jx, &jy));
        }
    }

    #[test]
    fn audit_of_the_three_node_chain() {
        let (x, y) = opposite_si_pair();
        let query = TheoremQuery::for_chain(x.tree()).unwrap();
        let r = audit_discrete_specs(&x, &y, &query).unwrap();
        let v = r.verdict(Theorem::TreeSm).unwrap();
        assert_eq!(v.holds, Holds::False);
        let f = &v.failures[0];
        assert_eq!((f.hypothesis.as_str(), f.flag.as_str()), ("ii", "y_si_parent_given_child"));
        assert_eq!(f.subject, Subject::Edge { from: 0, to: 1 });
        assert!(v.failures.iter().all(|c| c.hypothesis != "i"));
        let same = audit_discrete_specs(&x, &x, &query).unwrap();
        assert_eq!(same.per_edge.iter().map(|e| e.smaller_sm).collect::<Vec<_>>(), vec![Holds::True; 2]);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"tree-sm\""));
    }

    #[test]
    fn audit_copula_corollary_setting() {
        let t = DirectedTree::star(3).unwrap();
        let m = vec![Marginal::normal(0.0, 1.0).unwrap(); 4];
        let x = TreeSpec::uniform_copula(t.clone(), m.clone(), Copula::gaussian(0.3).unwrap()).unwrap();
        let y = TreeSpec::uniform_copula(t.clone(), m, Copula::gaussian(0.8).unwrap()).unwrap();
        let query = TheoremQuery::for_star(1, 2);
        let r = audit_copula_specs(&x, &y, &query).unwrap();
        for th in [Theorem::TreeSm, Theorem::CopulaSm, Theorem::Ism, Theorem::Dsm, Theorem::Dcx] {
            assert_eq!(r.verdict(th).unwrap().holds, Holds::True, "{:?}", r.verdict(th));
        }
        // reversed roles break the lo order
        let r = audit_copula_specs(&y, &x, &query).unwrap();
        assert_eq!(r.first_failure(Theorem::CopulaSm).unwrap().flag, "smaller_lo");
        // a negatively dependent larger law fails SI and MTP2
        let neg = TreeSpec::uniform_copula(t, vec![Marginal::normal(0.0, 1.0).unwrap(); 4], Copula::gaussian(-0.2).unwrap()).unwrap();
        let r = audit_copula_specs(&x, &neg, &query).unwrap();
        assert_eq!(r.verdict(Theorem::Dcx).unwrap().holds, Holds::False);
        assert!(audit_copula_specs(&x, &x, &TheoremQuery::for_star(1, 1)).is_err());
    }

    #[test]
    fn st_compare_orders_normals() {
        let a = Marginal::normal(0.0, 1.0).unwrap();
        let b = Marginal::normal(1.0, 1.0).unwrap();
        assert_eq!(st_compare(&a, &b).unwrap(), Some(Ordering::Less));
        assert_eq!(st_compare(&a, &a).unwrap(), Some(Ordering::Equal));
        assert_eq!(st_compare(&a, &Marginal::normal(0.0, 4.0).unwrap()).unwrap(), None);
    }
}
