//! Finite-support joint laws with exact rational masses.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Deserialize;

use crate::error::{parse_err, Error, Result};
use crate::tree::{DirectedTree, TreeRef};

pub type Q = BigRational;

/// Joints with at most this many cells are stored densely.
const DENSE_LIMIT: u128 = 1_000_000;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"4/30"`, `"7"`, `"-3"` or an exact decimal such as `"0.125"`.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{int}{frac}").parse().ok()?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let v = Q::new(digits, scale);
    Some(if neg { -v } else { v })
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::Domain(format!("{x} has no rational value")))
}

pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

fn check_values(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("{what} must be finite and strictly increasing")));
    }
    Ok(())
}

/// Law of a pair `(U, V)` on a finite grid: `weights[i][j] = P(U = row_values[i], V = col_values[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBivariate {
    weights: Vec<Vec<Q>>,
    row_values: Vec<f64>,
    col_values: Vec<f64>,
}

impl DiscreteBivariate {
    pub fn new(weights: Vec<Vec<Q>>, row_values: Vec<f64>, col_values: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights[0].is_empty() {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let cols = weights[0].len();
        if weights.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("matrix rows have different lengths".into()));
        }
        if row_values.len() != weights.len() || col_values.len() != cols {
            return Err(Error::InvalidArgument("support length does not match matrix shape".into()));
        }
        check_values(&row_values, "row values")?;
        check_values(&col_values, "column values")?;
        if weights.iter().flatten().any(|w| w.is_negative()) {
            return Err(Error::InvalidArgument("negative probability".into()));
        }
        let total: Q = weights.iter().flatten().sum();
        if !total.is_one() {
            return Err(Error::InvalidArgument(format!("total mass is {total}, not 1")));
        }
        Ok(Self { weights, row_values, col_values })
    }

    /// Supports default to `0, 1, 2, ...`.
    pub fn from_matrix(weights: Vec<Vec<Q>>) -> Result<Self> {
        let r = weights.len();
        let c = weights.first().map_or(0, |w| w.len());
        Self::new(weights, (0..r).map(|i| i as f64).collect(), (0..c).map(|i| i as f64).collect())
    }

    /// Integer matrix divided by a common denominator.
    pub fn from_counts(counts: &[&[i64]], denominator: i64) -> Result<Self> {
        Self::from_matrix(counts.iter().map(|r| r.iter().map(|&c| q(c, denominator)).collect()).collect())
    }

    pub fn product(row: &[Q], col: &[Q]) -> Result<Self> {
        Self::from_matrix(row.iter().map(|a| col.iter().map(|b| a * b).collect()).collect())
    }

    /// Plain-text matrix: one row per line, entries separated by whitespace
    /// or commas, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut first_line = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if rows.is_empty() {
                first_line = lineno + 1;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_rational(t).ok_or_else(|| parse_err(lineno + 1, format!("bad entry {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(prev) = rows.last() {
                let prev: &Vec<Q> = prev;
                if prev.len() != row.len() {
                    return Err(parse_err(lineno + 1, format!("expected {} entries, found {}", prev.len(), row.len())));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(parse_err(1, "no matrix rows"));
        }
        Self::from_matrix(rows).map_err(|e| parse_err(first_line, e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.weights {
            let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn weights(&self) -> &[Vec<Q>] {
        &self.weights
    }

    pub fn row_values(&self) -> &[f64] {
        &self.row_values
    }

    pub fn col_values(&self) -> &[f64] {
        &self.col_values
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn cols(&self) -> usize {
        self.weights[0].len()
    }

    pub fn row_marginal(&self) -> Vec<Q> {
        self.weights.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<Q> {
        (0..self.cols()).map(|j| self.weights.iter().map(|r| &r[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let weights = (0..self.cols()).map(|j| self.weights.iter().map(|r| r[j].clone()).collect()).collect();
        Self { weights, row_values: self.col_values.clone(), col_values: self.row_values.clone() }
    }

    /// Law of the column variable given the row index.
    pub fn conditional(&self, given_row: usize) -> Result<Vec<Q>> {
        let row = self
            .weights
            .get(given_row)
            .ok_or_else(|| Error::InvalidArgument(format!("row {given_row} out of range")))?;
        let total: Q = row.iter().sum();
        if total.is_zero() {
            return Err(Error::ZeroMass(format!("row {given_row}")));
        }
        Ok(row.iter().map(|x| x / &total).collect())
    }

    /// Law of the row variable given the column index.
    pub fn conditional_on_col(&self, given_col: usize) -> Result<Vec<Q>> {
        self.transpose().conditional(given_col)
    }

    /// Row-conditional table with zero-mass rows replaced by the uniform law.
    fn transition(&self) -> Vec<Vec<Q>> {
        (0..self.rows())
            .map(|i| {
                self.conditional(i).unwrap_or_else(|_| {
                    log::warn!("zero-mass conditioning row {i}; using the uniform law");
                    vec![q(1, self.cols() as i64); self.cols()]
                })
            })
            .collect()
    }

    pub fn to_joint(&self) -> DiscreteJoint {
        let entries = self
            .weights
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, w)| (vec![i, j], w.clone())));
        DiscreteJoint::from_entries(vec![self.row_values.clone(), self.col_values.clone()], entries)
            .expect("a valid bivariate is a valid joint")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Storage {
    Dense(Vec<Q>),
    Sparse(BTreeMap<Vec<usize>, Q>),
}

/// Joint law on a product grid of per-node supports.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    supports: Vec<Vec<f64>>,
    storage: Storage,
}

impl DiscreteJoint {
    /// Builds a joint from index tuples and masses; repeated tuples accumulate.
    pub fn from_entries(supports: Vec<Vec<f64>>, entries: impl IntoIterator<Item = (Vec<usize>, Q)>) -> Result<Self> {
        if supports.is_empty() || supports.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidArgument("every node needs a nonempty support".into()));
        }
        for s in &supports {
            check_values(s, "support")?;
        }
        let cells = supports.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128));
        let mut storage = if cells <= DENSE_LIMIT {
            Storage::Dense(vec![Q::zero(); cells as usize])
        } else {
            Storage::Sparse(BTreeMap::new())
        };
        let mut total = Q::zero();
        for (idx, m) in entries {
            if idx.len() != supports.len() || idx.iter().zip(&supports).any(|(&i, s)| i >= s.len()) {
                return Err(Error::InvalidArgument(format!("index {idx:?} outside the grid")));
            }
            if m.is_negative() {
                return Err(Error::InvalidArgument("negative probability".into()));
            }
            if m.is_zero() {
                continue;
            }
            total += &m;
            match &mut storage {
                Storage::Dense(v) => {
                    let k = flat_index(&supports, &idx);
                    v[k] += m;
                }
                Storage::Sparse(map) => *map.entry(idx).or_insert_with(Q::zero) += m,
            }
        }
        if !total.is_one() {
            return Err(Error::InvalidArgument(format!("total mass is {total}, not 1")));
        }
        Ok(Self { supports, storage })
    }

    /// Independent joint with the given marginal laws.
    pub fn product(marginals: &[(Vec<f64>, Vec<Q>)]) -> Result<Self> {
        let supports: Vec<Vec<f64>> = marginals.iter().map(|(v, _)| v.clone()).collect();
        let mut entries: Vec<(Vec<usize>, Q)> = vec![(Vec::new(), Q::one())];
        for (_, p) in marginals {
            entries = entries
                .into_iter()
                .flat_map(|(idx, m)| {
                    p.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(move |(k, x)| {
                        let mut idx = idx.clone();
                        idx.push(k);
                        (idx, &m * x)
                    })
                })
                .collect();
        }
        Self::from_entries(supports, entries)
    }

    pub fn dims(&self) -> usize {
        self.supports.len()
    }

    pub fn supports(&self) -> &[Vec<f64>] {
        &self.supports
    }

    pub fn shape(&self) -> Vec<usize> {
        self.supports.iter().map(|s| s.len()).collect()
    }

    pub fn cell_count(&self) -> u128 {
        self.supports.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn mass(&self, idx: &[usize]) -> Q {
        if idx.len() != self.dims() || idx.iter().zip(&self.supports).any(|(&i, s)| i >= s.len()) {
            return Q::zero();
        }
        match &self.storage {
            Storage::Dense(v) => v[flat_index(&self.supports, idx)].clone(),
            Storage::Sparse(m) => m.get(idx).cloned().unwrap_or_else(Q::zero),
        }
    }

    /// All cell masses in row-major order (last coordinate fastest).
    pub fn to_dense(&self) -> Vec<Q> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::Sparse(map) => {
                let mut v = vec![Q::zero(); self.cell_count() as usize];
                for (idx, m) in map {
                    v[flat_index(&self.supports, idx)] = m.clone();
                }
                v
            }
        }
    }

    /// Cells with positive mass.
    pub fn nonzero(&self) -> Vec<(Vec<usize>, &Q)> {
        match &self.storage {
            Storage::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, m)| !m.is_zero())
                .map(|(k, m)| (unflatten(&self.supports, k), m))
                .collect(),
            Storage::Sparse(map) => map.iter().map(|(k, m)| (k.clone(), m)).collect(),
        }
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i < self.dims() {
            Ok(())
        } else {
            Err(Error::UnknownNode(i))
        }
    }

    pub fn marginal(&self, i: usize) -> Result<Vec<Q>> {
        self.check_node(i)?;
        let mut out = vec![Q::zero(); self.supports[i].len()];
        for (idx, m) in self.nonzero() {
            out[idx[i]] += m;
        }
        Ok(out)
    }

    /// Law of the listed coordinates, in the listed order.
    pub fn marginalize(&self, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("empty node subset".into()));
        }
        for (k, &i) in nodes.iter().enumerate() {
            self.check_node(i)?;
            if nodes[..k].contains(&i) {
                return Err(Error::InvalidArgument(format!("node {i} listed twice")));
            }
        }
        let supports = nodes.iter().map(|&i| self.supports[i].clone()).collect();
        let entries = self
            .nonzero()
            .into_iter()
            .map(|(idx, m)| (nodes.iter().map(|&i| idx[i]).collect(), m.clone()));
        Self::from_entries(supports, entries)
    }

    pub fn bivariate(&self, i: usize, j: usize) -> Result<DiscreteBivariate> {
        let pair = self.marginalize(&[i, j])?;
        let mut w = vec![vec![Q::zero(); self.supports[j].len()]; self.supports[i].len()];
        for (idx, m) in pair.nonzero() {
            w[idx[0]][idx[1]] = m.clone();
        }
        DiscreteBivariate::new(w, self.supports[i].clone(), self.supports[j].clone())
    }

    fn check_thresholds(&self, t: &[f64], strict: &[bool]) -> Result<()> {
        if t.len() != self.dims() || strict.len() != self.dims() {
            return Err(Error::InvalidArgument(format!("expected {} thresholds", self.dims())));
        }
        if t.iter().any(|x| x.is_nan()) {
            return Err(Error::Domain("NaN threshold".into()));
        }
        Ok(())
    }

    /// `P(X_i <= t_i for all i)`, with `<` on coordinates flagged strict.
    pub fn orthant_prob(&self, t: &[f64], strict: &[bool]) -> Result<Q> {
        self.check_thresholds(t, strict)?;
        let cut: Vec<usize> = (0..self.dims())
            .map(|i| {
                let s = &self.supports[i];
                if strict[i] {
                    s.partition_point(|&x| x < t[i])
                } else {
                    s.partition_point(|&x| x <= t[i])
                }
            })
            .collect();
        Ok(self.lower_index_mass(&cut))
    }

    /// `P(X_i > t_i for all i)`, with `>=` on coordinates flagged inclusive
    /// (`strict[i] == false`).
    pub fn upper_orthant_prob(&self, t: &[f64], strict: &[bool]) -> Result<Q> {
        self.check_thresholds(t, strict)?;
        let start: Vec<usize> = (0..self.dims())
            .map(|i| {
                let s = &self.supports[i];
                if strict[i] {
                    s.partition_point(|&x| x <= t[i])
                } else {
                    s.partition_point(|&x| x < t[i])
                }
            })
            .collect();
        Ok(self.upper_index_mass(&start))
    }

    /// Mass of cells with `idx[i] < cut[i]` for all `i`.
    pub fn lower_index_mass(&self, cut: &[usize]) -> Q {
        self.nonzero()
            .into_iter()
            .filter(|(idx, _)| idx.iter().zip(cut).all(|(a, b)| a < b))
            .map(|(_, m)| m)
            .sum()
    }

    /// Mass of cells with `idx[i] >= start[i]` for all `i`.
    pub fn upper_index_mass(&self, start: &[usize]) -> Q {
        self.nonzero()
            .into_iter()
            .filter(|(idx, _)| idx.iter().zip(start).all(|(a, b)| a >= b))
            .map(|(_, m)| m)
            .sum()
    }

    /// Product of this joint's one-dimensional marginals.
    pub fn independent_version(&self) -> Self {
        let margs: Vec<(Vec<f64>, Vec<Q>)> = (0..self.dims())
            .map(|i| (self.supports[i].clone(), self.marginal(i).expect("node in range")))
            .collect();
        Self::product(&margs).expect("marginals of a valid joint")
    }

    /// Exact test that `X_A` and `X_B` are independent given `X_i`.
    pub fn conditionally_independent(&self, i: usize, a: &[usize], b: &[usize]) -> Result<bool> {
        let mut nodes = vec![i];
        nodes.extend_from_slice(a);
        nodes.extend_from_slice(b);
        let sub = self.marginalize(&nodes)?;
        let na = a.len();
        let mut p_i: BTreeMap<usize, Q> = BTreeMap::new();
        let mut p_ia: BTreeMap<(usize, Vec<usize>), Q> = BTreeMap::new();
        let mut p_ib: BTreeMap<(usize, Vec<usize>), Q> = BTreeMap::new();
        let mut p_iab: BTreeMap<(usize, Vec<usize>, Vec<usize>), Q> = BTreeMap::new();
        for (idx, m) in sub.nonzero() {
            let (xa, xb) = (idx[1..1 + na].to_vec(), idx[1 + na..].to_vec());
            *p_i.entry(idx[0]).or_insert_with(Q::zero) += m;
            *p_ia.entry((idx[0], xa.clone())).or_insert_with(Q::zero) += m;
            *p_ib.entry((idx[0], xb.clone())).or_insert_with(Q::zero) += m;
            *p_iab.entry((idx[0], xa, xb)).or_insert_with(Q::zero) += m;
        }
        // p(x_i) p(x_i, a, b) = p(x_i, a) p(x_i, b) for every cell; cells absent
        // from p_iab need a zero product, which holds iff the factors are absent too.
        for ((xi, xa), pa) in &p_ia {
            for ((xj, xb), pb) in p_ib.range((*xi, Vec::new())..) {
                if xj != xi {
                    break;
                }
                let joint = p_iab.get(&(*xi, xa.clone(), xb.clone())).cloned().unwrap_or_else(Q::zero);
                if &p_i[xi] * joint != pa * pb {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn flat_index(supports: &[Vec<f64>], idx: &[usize]) -> usize {
    idx.iter().zip(supports).fold(0, |acc, (&i, s)| acc * s.len() + i)
}

fn unflatten(supports: &[Vec<f64>], mut k: usize) -> Vec<usize> {
    let mut idx = vec![0; supports.len()];
    for (slot, s) in idx.iter_mut().zip(supports).rev() {
        *slot = k % s.len();
        k /= s.len();
    }
    idx
}

/// Support values and masses a node inherits from one incident edge.
fn edge_marginal(b: &DiscreteBivariate, as_row: bool) -> (Vec<f64>, Vec<Q>) {
    if as_row {
        (b.row_values.clone(), b.row_marginal())
    } else {
        (b.col_values.clone(), b.col_marginal())
    }
}

/// Joint law with Markov tree dependence realizing the given edge laws.
///
/// Each edge `(i, j)` carries the law of `(X_i, X_j)` with `X_i` on the rows.
pub fn markov_joint(tree: &DirectedTree, edges: &BTreeMap<(usize, usize), DiscreteBivariate>) -> Result<DiscreteJoint> {
    for e in edges.keys() {
        if !tree.has_edge(e.0, e.1) {
            return Err(Error::InvalidArgument(format!("({}, {}) is not an edge of the tree", e.0, e.1)));
        }
    }
    let n = tree.node_count();
    let mut node_law: Vec<Option<(Vec<f64>, Vec<Q>)>> = vec![None; n];
    for &(i, j) in tree.edges() {
        let b = edges
            .get(&(i, j))
            .ok_or_else(|| Error::InvalidArgument(format!("no bivariate law for edge ({i}, {j})")))?;
        for (node, as_row) in [(i, true), (j, false)] {
            let law = edge_marginal(b, as_row);
            match &node_law[node] {
                None => node_law[node] = Some(law),
                Some(prev) if *prev == law => {}
                Some(_) => {
                    return Err(Error::Inconsistent(format!(
                        "edge ({i}, {j}) implies a different marginal for node {node}"
                    )))
                }
            }
        }
    }
    let laws: Vec<(Vec<f64>, Vec<Q>)> = node_law
        .into_iter()
        .enumerate()
        .map(|(k, l)| l.ok_or_else(|| Error::InvalidArgument(format!("node {k} has no incident edge"))))
        .collect::<Result<_>>()?;
    let order = tree.level_order();
    let root = order[0];
    let mut partial: Vec<(Vec<usize>, Q)> = laws[root]
        .1
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_zero())
        .map(|(k, m)| {
            let mut idx = vec![0; n];
            idx[root] = k;
            (idx, m.clone())
        })
        .collect();
    for &j in &order[1..] {
        let i = tree.parent(j)?.expect("non-root node has a parent");
        let trans = edges[&(i, j)].transition();
        partial = partial
            .into_iter()
            .flat_map(|(idx, m)| {
                trans[idx[i]]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(l, p)| {
                        let mut idx = idx.clone();
                        idx[j] = l;
                        (idx, &m * p)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    DiscreteJoint::from_entries(laws.into_iter().map(|(v, _)| v).collect(), partial)
}

/// A tree with a finite bivariate law on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTreeSpec {
    tree: DirectedTree,
    edges: BTreeMap<(usize, usize), DiscreteBivariate>,
}

#[derive(Deserialize)]
struct EdgeMatrixJson {
    edge: [usize; 2],
    #[serde(default)]
    matrix: Option<Vec<Vec<serde_json::Value>>>,
    #[serde(default)]
    file: Option<String>,
}

#[derive(Deserialize)]
struct DiscreteSpecJson {
    tree: TreeRef,
    bivariates: Vec<EdgeMatrixJson>,
}

fn json_rational(v: &serde_json::Value) -> Result<Q> {
    let text = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        other => return Err(Error::InvalidArgument(format!("matrix entry {other} is not a number"))),
    };
    parse_rational(&text).ok_or_else(|| Error::InvalidArgument(format!("bad matrix entry {text:?}")))
}

impl DiscreteTreeSpec {
    /// Checks that every edge has a law and that shared marginals agree.
    pub fn new(tree: DirectedTree, edges: BTreeMap<(usize, usize), DiscreteBivariate>) -> Result<Self> {
        markov_joint(&tree, &edges)?;
        Ok(Self { tree, edges })
    }

    /// Same law on every edge, e.g. a stationary chain.
    pub fn uniform_edges(tree: DirectedTree, law: &DiscreteBivariate) -> Result<Self> {
        let edges = tree.edges().iter().map(|&e| (e, law.clone())).collect();
        Self::new(tree, edges)
    }

    pub fn tree(&self) -> &DirectedTree {
        &self.tree
    }

    pub fn edges(&self) -> &BTreeMap<(usize, usize), DiscreteBivariate> {
        &self.edges
    }

    pub fn edge(&self, i: usize, j: usize) -> Result<&DiscreteBivariate> {
        self.edges
            .get(&(i, j))
            .ok_or_else(|| Error::InvalidArgument(format!("({i}, {j}) is not an edge")))
    }

    pub fn joint(&self) -> Result<DiscreteJoint> {
        markov_joint(&self.tree, &self.edges)
    }

    /// JSON with `"tree"` and `"bivariates"`: each entry names an edge and
    /// gives either an inline `"matrix"` or a matrix `"file"`.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: DiscreteSpecJson = serde_json::from_str(text)?;
        let tree = raw.tree.resolve(base_dir)?;
        let mut edges = BTreeMap::new();
        for b in raw.bivariates {
            let e = (b.edge[0], b.edge[1]);
            let law = match (b.matrix, b.file) {
                (Some(m), None) => DiscreteBivariate::from_matrix(
                    m.iter().map(|r| r.iter().map(json_rational).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?,
                )?,
                (None, Some(f)) => {
                    let p = Path::new(&f);
                    let full = match base_dir {
                        Some(d) if p.is_relative() => d.join(p),
                        _ => p.to_path_buf(),
                    };
                    let text = std::fs::read_to_string(&full)?;
                    DiscreteBivariate::parse(&text).map_err(|err| match err {
                        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", full.display()) },
                        other => other,
                    })?
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "edge ({}, {}) needs exactly one of \"matrix\" or \"file\"",
                        e.0, e.1
                    )))
                }
            };
            if edges.insert(e, law).is_some() {
                return Err(Error::InvalidArgument(format!("edge ({}, {}) listed twice", e.0, e.1)));
            }
        }
        Self::new(tree, edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path.parent())
    }
}

/// Chain law whose pair `(X_i, X_{i+1})` has density `a_kl / w²` on the block
/// `[k w, (k+1) w) × [l w, (l+1) w)`.
///
/// Offsets inside blocks are independent uniforms, independent of the block
/// indices, so orthant probabilities are exact rationals for rational thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUniformLaw {
    blocks: DiscreteJoint,
    width: Q,
}

impl BlockUniformLaw {
    /// `matrices[k]` is the block law of `(X_k, X_{k+1})`.
    pub fn chain(matrices: &[DiscreteBivariate], block_width: f64) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidArgument("need at least one matrix".into()));
        }
        let width = rational_from_f64(block_width)?;
        if !width.is_positive() {
            return Err(Error::InvalidArgument("block width must be positive".into()));
        }
        let tree = DirectedTree::chain(matrices.len())?;
        let edges = matrices
            .iter()
            .enumerate()
            .map(|(k, m)| Ok(((k, k + 1), DiscreteBivariate::from_matrix(m.weights.clone())?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { blocks: markov_joint(&tree, &edges)?, width })
    }

    /// Discrete law of the block indices.
    pub fn blocks(&self) -> &DiscreteJoint {
        &self.blocks
    }

    /// `P(X_i < t_i for all i)`; equal to the non-strict version since the law
    /// has a density.
    pub fn orthant_prob(&self, t: &[f64]) -> Result<Q> {
        let d = self.blocks.dims();
        if t.len() != d {
            return Err(Error::InvalidArgument(format!("expected {d} thresholds")));
        }
        // fraction of block k lying below t, per coordinate
        let fracs: Vec<Vec<Q>> = t
            .iter()
            .zip(self.blocks.supports())
            .map(|(&ti, s)| {
                let ti = rational_from_f64(ti)?;
                Ok((0..s.len())
                    .map(|k| {
                        let lo = &self.width * Q::from_integer(BigInt::from(k));
                        ((&ti - lo) / &self.width).clamp(Q::zero(), Q::one())
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(self
            .blocks
            .nonzero()
            .into_iter()
            .map(|(idx, m)| idx.iter().enumerate().fold(m.clone(), |acc, (i, &k)| acc * &fracs[i][k]))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn third(n: usize) -> Vec<Q> {
        vec![q(1, n as i64); n]
    }

    fn fig61_a01() -> DiscreteBivariate {
        DiscreteBivariate::from_counts(&[&[4, 4, 2], &[3, 4, 3], &[3, 2, 5]], 30).unwrap()
    }

    fn fig61_a12() -> DiscreteBivariate {
        DiscreteBivariate::from_counts(&[&[4, 4, 2], &[4, 3, 3], &[2, 3, 5]], 30).unwrap()
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("4/30"), Some(q(2, 15)));
        assert_eq!(parse_rational("0.125"), Some(q(1, 8)));
        assert_eq!(parse_rational("-.5"), Some(q(-1, 2)));
        assert_eq!(parse_rational("3"), Some(q(3, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn matrix_text_round_trip() {
        let a = fig61_a01();
        assert_eq!(DiscreteBivariate::parse(&a.to_text()).unwrap(), a);
        let text = "# header\n4/30 4/30 2/30\n3/30, 4/30, 3/30\n\n3/30 2/30 5/30 # last\n";
        assert_eq!(DiscreteBivariate::parse(text).unwrap(), a);
        match DiscreteBivariate::parse("1/2 1/2\n0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match DiscreteBivariate::parse("1/2 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(DiscreteBivariate::parse("1/2 1/4\n").is_err());
    }

    #[test]
    fn conditional_rows() {
        assert_eq!(fig61_a01().conditional(0).unwrap(), vec![q(2, 5), q(2, 5), q(1, 5)]);
        let prod = DiscreteBivariate::product(&[q(1, 4), q(3, 4)], &[q(1, 3), q(2, 3)]).unwrap();
        assert_eq!(prod.conditional(1).unwrap(), prod.col_marginal());
        let degenerate = DiscreteBivariate::from_counts(&[&[1, 1], &[0, 0]], 2).unwrap();
        assert!(matches!(degenerate.conditional(1), Err(Error::ZeroMass(_))));
    }

    #[test]
    fn chain_joint_has_uniform_marginals_and_edge_laws() {
        let tree = DirectedTree::chain(2).unwrap();
        let edges = BTreeMap::from([((0, 1), fig61_a01()), ((1, 2), fig61_a12())]);
        let j = markov_joint(&tree, &edges).unwrap();
        for i in 0..3 {
            assert_eq!(j.marginal(i).unwrap(), third(3));
        }
        assert_eq!(j.bivariate(0, 1).unwrap(), fig61_a01());
        assert_eq!(j.bivariate(1, 2).unwrap(), fig61_a12());
        assert!(j.conditionally_independent(1, &[0], &[2]).unwrap());
        assert!(!j.conditionally_independent(0, &[1], &[2]).unwrap());
        let x = j.orthant_prob(&[1.0; 3], &[false; 3]).unwrap();
        assert_eq!(x, q(112, 300));
        assert_eq!(j.orthant_prob(&[9.0; 3], &[false; 3]).unwrap(), Q::one());
        // marginalizing first agrees with summing the full joint
        let sub = j.marginalize(&[0, 2]).unwrap();
        assert_eq!(
            sub.orthant_prob(&[1.0, 1.0], &[false; 2]).unwrap(),
            j.orthant_prob(&[1.0, 9.0, 1.0], &[false; 3]).unwrap()
        );
    }

    #[test]
    fn independent_edges_give_product() {
        let prod = DiscreteBivariate::product(&third(3), &third(3)).unwrap();
        let tree = DirectedTree::star(3).unwrap();
        let edges: BTreeMap<_, _> = tree.edges().iter().map(|&e| (e, prod.clone())).collect();
        let j = markov_joint(&tree, &edges).unwrap();
        assert_eq!(j, j.independent_version());
        assert_eq!(j.mass(&[0, 1, 2, 0]), q(1, 81));
    }

    #[test]
    fn markov_joint_rejects_bad_input() {
        let tree = DirectedTree::chain(2).unwrap();
        let skewed = DiscreteBivariate::from_counts(&[&[1, 1], &[1, 1]], 4).unwrap();
        let edges = BTreeMap::from([((0, 1), fig61_a01()), ((1, 2), skewed.clone())]);
        assert!(matches!(markov_joint(&tree, &edges), Err(Error::Inconsistent(_))));
        let edges = BTreeMap::from([((0, 1), fig61_a01())]);
        assert!(markov_joint(&tree, &edges).is_err());
        let edges = BTreeMap::from([((0, 1), fig61_a01()), ((1, 2), fig61_a12()), ((0, 2), fig61_a12())]);
        assert!(markov_joint(&tree, &edges).is_err());
    }

    #[test]
    fn zero_mass_rows_fall_back_to_uniform() {
        let tree = DirectedTree::chain(2).unwrap();
        let first = DiscreteBivariate::from_counts(&[&[1, 0], &[1, 0]], 2).unwrap();
        let second = DiscreteBivariate::from_counts(&[&[1, 1], &[0, 0]], 2).unwrap();
        let j = markov_joint(&tree, &BTreeMap::from([((0, 1), first), ((1, 2), second)])).unwrap();
        assert_eq!(j.marginal(2).unwrap(), vec![q(1, 2), q(1, 2)]);
    }

    #[test]
    fn orthants_strict_and_upper() {
        let j = fig61_a01().to_joint();
        assert_eq!(j.orthant_prob(&[1.0, 1.0], &[true, false]).unwrap(), q(8, 30));
        assert_eq!(j.upper_orthant_prob(&[1.0, 1.0], &[true, true]).unwrap(), q(5, 30));
        assert_eq!(j.upper_orthant_prob(&[1.0, 1.0], &[false, false]).unwrap(), q(14, 30));
        assert!(j.orthant_prob(&[1.0], &[false]).is_err());
        assert!(j.orthant_prob(&[f64::NAN, 1.0], &[false, false]).is_err());
    }

    #[test]
    fn sparse_storage_matches_dense_queries() {
        // 7 coordinates with 8 values each exceed the dense limit
        let m: Vec<(Vec<f64>, Vec<Q>)> = (0..7).map(|_| ((0..8).map(f64::from).collect(), vec![q(1, 8); 8])).collect();
        let entries = vec![(vec![0; 7], q(1, 2)), (vec![7; 7], q(1, 2))];
        let j = DiscreteJoint::from_entries(m.iter().map(|x| x.0.clone()).collect(), entries).unwrap();
        assert!(!j.is_dense());
        assert_eq!(j.orthant_prob(&[3.0; 7], &[false; 7]).unwrap(), q(1, 2));
        assert_eq!(j.marginal(3).unwrap()[7], q(1, 2));
        assert!(j.marginalize(&[0, 1]).unwrap().is_dense());
    }

    #[test]
    fn discrete_spec_json() {
        let text = r#"{"tree": {"nodes": 3, "edges": [[0,1],[1,2]]},
            "bivariates": [
              {"edge": [0,1], "matrix": [["4/30","4/30","2/30"],["3/30","4/30","3/30"],["3/30","2/30","5/30"]]},
              {"edge": [1,2], "matrix": [["4/30","4/30","2/30"],["4/30","3/30","3/30"],["2/30","3/30","5/30"]]}
            ]}"#;
        let spec = DiscreteTreeSpec::from_json_str(text, None).unwrap();
        assert_eq!(spec.edge(0, 1).unwrap(), &fig61_a01());
        assert_eq!(spec.joint().unwrap().orthant_prob(&[1.0; 3], &[false; 3]).unwrap(), q(112, 300));
        assert!(DiscreteTreeSpec::from_json_str(&text.replace("\"edge\": [1,2]", "\"edge\": [2,1]"), None).is_err());
        let dir = std::env::temp_dir().join(format!("treedep-discrete-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.txt"), "1/2 0\n0 bad\n").unwrap();
        let bad = r#"{"tree": {"nodes": 2, "edges": [[0,1]]}, "bivariates": [{"edge": [0,1], "file": "a.txt"}]}"#;
        match DiscreteTreeSpec::from_json_str(bad, Some(&dir)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn block_uniform_orthants() {
        let a = DiscreteBivariate::from_counts(&[&[5, 2, 3], &[3, 7, 0], &[2, 1, 7]], 30).unwrap();
        let law = BlockUniformLaw::chain(&[a.clone(), a.clone(), a], 1.0).unwrap();
        assert_eq!(law.orthant_prob(&[2.0; 4]).unwrap(), q(1259, 3000));
        assert_eq!(law.orthant_prob(&[3.0; 4]).unwrap(), Q::one());
        assert_eq!(law.orthant_prob(&[-1.0, 3.0, 3.0, 3.0]).unwrap(), Q::zero());
        // halfway into the first block of one coordinate halves that block's mass
        let half = law.orthant_prob(&[0.5, 3.0, 3.0, 3.0]).unwrap();
        assert_eq!(half, q(1, 6));
    }
}
