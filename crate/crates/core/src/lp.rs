//! Simplex method over exact rationals for small problems of the form
//! `min c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The origin is feasible, so no phase one is needed. A separate phase-one
//! routine decides whether a vector is a nonnegative combination of columns.

use num_traits::{Signed, Zero};

use crate::discrete::Q;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Q, x: Vec<Q> },
    Unbounded,
}

/// A constraint row as `(column, coefficient)` pairs sorted by column.
pub type SparseRow = Vec<(usize, Q)>;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

pub fn minimize(c: &[Q], a: &[Vec<Q>], b: &[Q]) -> Result<LpOutcome> {
    if a.iter().any(|r| r.len() != c.len()) {
        return Err(Error::InvalidArgument("constraint matrix has the wrong shape".into()));
    }
    let rows: Vec<SparseRow> = a
        .iter()
        .map(|r| r.iter().cloned().enumerate().filter(|(_, v)| !v.is_zero()).collect())
        .collect();
    minimize_sparse(c, &rows, b)
}

/// Same problem with sparse constraint rows.
pub fn minimize_sparse(c: &[Q], a: &[SparseRow], b: &[Q]) -> Result<LpOutcome> {
    let n = c.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::InvalidArgument("right-hand side has the wrong length".into()));
    }
    if a.iter().any(|r| r.iter().any(|&(j, _)| j >= n) || r.windows(2).any(|w| w[0].0 >= w[1].0)) {
        return Err(Error::InvalidArgument("sparse rows need sorted columns below the variable count".into()));
    }
    if b.iter().any(|x| x.is_negative()) {
        return Err(Error::InvalidArgument("right-hand side must be nonnegative".into()));
    }
    let width = n + m;
    let rows: Vec<SparseRow> = a
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut row: SparseRow = row.iter().filter(|(_, v)| !v.is_zero()).cloned().collect();
            row.push((n + r, Q::from_integer(1.into())));
            row
        })
        .collect();
    let mut t = Tableau {
        rows,
        rhs: b.to_vec(),
        cost: c.iter().cloned().chain(std::iter::repeat_n(Q::zero(), m)).collect(),
        objective: Q::zero(),
        basis: (n..width).collect(),
    };
    if !t.run() {
        return Ok(LpOutcome::Unbounded);
    }
    let x = t.primal(n);
    Ok(LpOutcome::Optimal { value: t.objective, x })
}

/// Result of asking whether `b` is a nonnegative combination of columns of `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Combination {
    /// `A λ = b` with `λ >= 0`.
    Feasible(Vec<Q>),
    /// Farkas certificate: `yᵀA <= 0` componentwise and `y·b > 0`.
    Infeasible(Vec<Q>),
}

/// Decides `A λ = b, λ >= 0` for `n` columns by a phase-one simplex with one
/// artificial variable per row. Rows are sparse over the columns.
pub fn nonneg_combination(n: usize, a: &[SparseRow], b: &[Q]) -> Result<Combination> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::InvalidArgument("right-hand side has the wrong length".into()));
    }
    if a.iter().any(|r| r.iter().any(|&(j, _)| j >= n) || r.windows(2).any(|w| w[0].0 >= w[1].0)) {
        return Err(Error::InvalidArgument("sparse rows need sorted columns below the variable count".into()));
    }
    let one = Q::from_integer(1.into());
    let signs: Vec<Q> = b.iter().map(|x| if x.is_negative() { -one.clone() } else { one.clone() }).collect();
    let rows: Vec<SparseRow> = a
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut row: SparseRow = row.iter().filter(|(_, v)| !v.is_zero()).map(|(j, v)| (*j, v * &signs[r])).collect();
            row.push((n + r, one.clone()));
            row
        })
        .collect();
    // reduced costs of the phase-one objective (sum of artificials) against the artificial basis
    let mut cost = vec![Q::zero(); n + m];
    for row in &rows {
        for (j, v) in row.iter().filter(|(j, _)| *j < n) {
            cost[*j] -= v;
        }
    }
    let rhs: Vec<Q> = b.iter().map(|x| x.abs()).collect();
    let objective = rhs.iter().sum();
    let mut t = Tableau { rows, rhs, cost, objective, basis: (n..n + m).collect() };
    assert!(t.run(), "phase one is bounded below by zero");
    if t.objective.is_zero() {
        return Ok(Combination::Feasible(t.primal(n)));
    }
    // the artificial column r has unit cost, so its reduced cost is 1 - ŷ_r
    let y = (0..m).map(|r| &signs[r] * (&one - &t.cost[n + r])).collect();
    Ok(Combination::Infeasible(y))
}

/// Simplex state in canonical form: basic columns are unit vectors in `rows`
/// and `cost` holds reduced costs.
struct Tableau {
    rows: Vec<SparseRow>,
    rhs: Vec<Q>,
    cost: Vec<Q>,
    objective: Q,
    basis: Vec<usize>,
}

impl Tableau {
    /// Pivots to optimality; `false` when the objective is unbounded below.
    ///
    /// Entering columns follow the most negative reduced cost while the
    /// objective keeps improving and Bland's smallest-index rule during long
    /// degenerate runs, which rules out cycling.
    fn run(&mut self) -> bool {
        let width = self.cost.len();
        let mut degenerate = 0usize;
        loop {
            let cost = &self.cost;
            let enter = if degenerate >= DEGENERATE_RUN {
                (0..width).find(|&j| cost[j].is_negative())
            } else {
                (0..width).filter(|&j| cost[j].is_negative()).min_by(|&x, &y| cost[x].cmp(&cost[y]).then(x.cmp(&y)))
            };
            let Some(enter) = enter else { return true };
            let mut leave: Option<(usize, Q)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let Some(coef) = entry(row, enter) else { continue };
                if !coef.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / coef;
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((pr, ratio)) = leave else { return false };
            degenerate = if ratio.is_zero() { degenerate + 1 } else { 0 };
            pivot(&mut self.rows, &mut self.rhs, &mut self.cost, &mut self.objective, pr, enter);
            self.basis[pr] = enter;
        }
    }

    fn primal(&self, n: usize) -> Vec<Q> {
        let mut x = vec![Q::zero(); n];
        for (r, &var) in self.basis.iter().enumerate() {
            if var < n {
                x[var] = self.rhs[r].clone();
            }
        }
        x
    }
}

fn entry(row: &SparseRow, col: usize) -> Option<&Q> {
    row.binary_search_by_key(&col, |(j, _)| *j).ok().map(|k| &row[k].1)
}

/// `target - f * pivot`, merging two sorted sparse rows.
fn axpy(target: &SparseRow, f: &Q, pivot: &SparseRow) -> SparseRow {
    let mut out = Vec::with_capacity(target.len() + pivot.len());
    let (mut a, mut b) = (0, 0);
    while a < target.len() || b < pivot.len() {
        let ca = target.get(a).map_or(usize::MAX, |e| e.0);
        let cb = pivot.get(b).map_or(usize::MAX, |e| e.0);
        if ca < cb {
            out.push(target[a].clone());
            a += 1;
        } else if cb < ca {
            out.push((cb, -(f * &pivot[b].1)));
            b += 1;
        } else {
            let v = &target[a].1 - f * &pivot[b].1;
            if !v.is_zero() {
                out.push((ca, v));
            }
            a += 1;
            b += 1;
        }
    }
    out
}

fn pivot(rows: &mut [SparseRow], rhs: &mut [Q], cost: &mut [Q], objective: &mut Q, pr: usize, pc: usize) {
    let p = entry(&rows[pr], pc).expect("pivot entry is nonzero").clone();
    for e in rows[pr].iter_mut() {
        e.1 /= &p;
    }
    rhs[pr] /= &p;
    let prow = rows[pr].clone();
    let prhs = rhs[pr].clone();
    for r in 0..rows.len() {
        if r == pr {
            continue;
        }
        if let Some(f) = entry(&rows[r], pc).cloned() {
            rows[r] = axpy(&rows[r], &f, &prow);
            rhs[r] -= &f * &prhs;
        }
    }
    let f = cost[pc].clone();
    if !f.is_zero() {
        for (j, v) in &prow {
            cost[*j] -= &f * v;
        }
        // objective value c·x rises by f times the new level of the entering variable
        *objective += &f * &prhs;
    }
}
