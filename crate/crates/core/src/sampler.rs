//! Monte Carlo realization of a tree specification by conditional inversion,
//! visiting nodes root first.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::Copula;
use crate::error::{Error, Result};
use crate::marginals::Marginal;
use crate::normal;
use crate::tree::{DirectedTree, TreeRef};

/// Rows per work unit. Fixed so that output does not depend on the number of
/// worker threads.
pub const CHUNK_ROWS: usize = 4096;

pub const BINARY_MAGIC: &[u8; 8] = b"TDSAMP01";

const U_MIN: f64 = 1e-300;
const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Marginal per node, a directed tree, and a copula per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    tree: DirectedTree,
    marginals: Vec<Marginal>,
    copulas: BTreeMap<(usize, usize), Copula>,
}

#[derive(Serialize, Deserialize)]
struct EdgeCopula {
    edge: [usize; 2],
    copula: Copula,
}

#[derive(Serialize, Deserialize)]
struct TreeSpecJson {
    tree: TreeRef,
    marginals: Vec<Marginal>,
    copulas: Vec<EdgeCopula>,
}

impl TreeSpec {
    pub fn new(tree: DirectedTree, marginals: Vec<Marginal>, copulas: BTreeMap<(usize, usize), Copula>) -> Result<Self> {
        if marginals.len() != tree.node_count() {
            return Err(Error::InvalidArgument(format!(
                "{} marginals for {} nodes",
                marginals.len(),
                tree.node_count()
            )));
        }
        for m in &marginals {
            m.validate()?;
        }
        for (&(i, j), c) in &copulas {
            if !tree.has_edge(i, j) {
                return Err(Error::InvalidArgument(format!("copula given for non-edge ({i}, {j})")));
            }
            c.validate()?;
        }
        if let Some(&(i, j)) = tree.edges().iter().find(|e| !copulas.contains_key(e)) {
            return Err(Error::InvalidArgument(format!("no copula for edge ({i}, {j})")));
        }
        Ok(Self { tree, marginals, copulas })
    }

    /// Same copula on every edge.
    pub fn uniform_copula(tree: DirectedTree, marginals: Vec<Marginal>, copula: Copula) -> Result<Self> {
        let copulas = tree.edges().iter().map(|&e| (e, copula)).collect();
        Self::new(tree, marginals, copulas)
    }

    pub fn tree(&self) -> &DirectedTree {
        &self.tree
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn marginal(&self, i: usize) -> Result<&Marginal> {
        self.marginals.get(i).ok_or(Error::UnknownNode(i))
    }

    pub fn copulas(&self) -> &BTreeMap<(usize, usize), Copula> {
        &self.copulas
    }

    pub fn copula(&self, i: usize, j: usize) -> Result<&Copula> {
        self.copulas
            .get(&(i, j))
            .ok_or_else(|| Error::InvalidArgument(format!("({i}, {j}) is not an edge")))
    }

    /// Parses the JSON spec format. A `"tree"` given as a string is a path,
    /// resolved against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: TreeSpecJson = serde_json::from_str(text)?;
        let tree = raw.tree.resolve(base_dir)?;
        let mut copulas = BTreeMap::new();
        for ec in raw.copulas {
            let e = (ec.edge[0], ec.edge[1]);
            if copulas.insert(e, ec.copula).is_some() {
                return Err(Error::InvalidArgument(format!("edge ({}, {}) listed twice", e.0, e.1)));
            }
        }
        Self::new(tree, raw.marginals, copulas)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path.parent())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = TreeSpecJson {
            tree: TreeRef::Inline(self.tree.clone()),
            marginals: self.marginals.clone(),
            copulas: self
                .copulas
                .iter()
                .map(|(&(i, j), &c)| EdgeCopula { edge: [i, j], copula: c })
                .collect(),
        };
        serde_json::to_value(raw).expect("spec serializes")
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn fingerprint(&self) -> u64 {
        let text = self.to_json().to_string();
        text.bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
    }
}

/// `n × d` matrix of draws, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
    pub seed: u64,
    pub fingerprint: u64,
}

impl SampleBatch {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.data[k * self.d + j]).collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header: Vec<String> = (0..self.d).map(|j| format!("node_{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.n {
            let row: Vec<String> = self.row(k).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Magic, then `n` and `d` as little-endian u64, then the values as
    /// little-endian f64 in row-major order.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
        let bad = |m: &str| Error::InvalidArgument(format!("binary batch: {m}"));
        if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
            return Err(bad("missing header"));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let d = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        let body = &bytes[24..];
        if body.len() != n * d * 8 {
            return Err(bad("length does not match dims"));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok((n, d, data))
    }
}

/// Uniform stream for one node: word position `4k` serves sample `k`.
struct NodeStream(ChaCha8Rng);

impl NodeStream {
    fn new(seed: u64, node: usize, first_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(node as u64);
        rng.set_word_pos(first_index as u128 * 4);
        Self(rng)
    }

    /// Two uniforms for the next sample.
    fn next_pair(&mut self) -> (f64, f64) {
        let a: f64 = Open01.sample(&mut self.0);
        let b: f64 = Open01.sample(&mut self.0);
        (a, b)
    }
}

/// Samples rows `start..start+rows` into a row-major buffer.
fn sample_chunk(spec: &TreeSpec, order: &[usize], seed: u64, start: usize, rows: usize) -> Result<Vec<f64>> {
    let d = spec.tree.node_count();
    let mut out = vec![0.0; rows * d];
    // Per node and sample, the interval [F(x-), F(x)] of latent uniforms that
    // produce the drawn value; a single point where the marginal is continuous.
    let mut lo = vec![0.0; rows * d];
    let mut hi = vec![0.0; rows * d];
    for &j in order {
        let mut stream = NodeStream::new(seed, j, start);
        let marg = &spec.marginals[j];
        let continuous = marg.is_continuous();
        let parent = spec.tree.parent(j)?;
        for r in 0..rows {
            let (p, w) = stream.next_pair();
            let u = match parent {
                None => p,
                Some(i) => {
                    let c = spec.copulas[&(i, j)];
                    // Each child draws its own point in the parent's atom, so
                    // siblings depend on each other only through X_i.
                    let (a, b) = (lo[i * rows + r], hi[i * rows + r]);
                    let ui = if a == b { a } else { (a + w * (b - a)).clamp(U_MIN, U_MAX) };
                    let u = if c.is_comonotone() { ui } else { c.h_inv_unchecked(ui, p) };
                    if !u.is_finite() {
                        return Err(Error::NoConvergence(format!(
                            "conditional inverse on edge ({i}, {j}) at sample {}",
                            start + r
                        )));
                    }
                    u
                }
            }
            .clamp(U_MIN, U_MAX);
            let x = marg.quantile_unchecked(u);
            out[r * d + j] = x;
            let (a, b) = if continuous { (u, u) } else { (marg.cdf_left(x), marg.cdf_unchecked(x)) };
            lo[j * rows + r] = a;
            hi[j * rows + r] = b;
        }
    }
    Ok(out)
}

/// Runs `f` on each chunk of rows (row-major, `d` columns) and returns the
/// results in chunk order.
pub fn sample_map_chunks<T, F>(spec: &TreeSpec, n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64], usize) -> T + Sync,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let order = spec.tree.level_order();
    let chunks: Vec<usize> = (0..n.div_ceil(CHUNK_ROWS)).collect();
    chunks
        .par_iter()
        .map(|&c| {
            let start = c * CHUNK_ROWS;
            let rows = CHUNK_ROWS.min(n - start);
            let block = sample_chunk(spec, &order, seed, start, rows)?;
            Ok(f(&block, rows))
        })
        .collect()
}

pub fn sample(spec: &TreeSpec, n: usize, seed: u64) -> Result<SampleBatch> {
    let blocks = sample_map_chunks(spec, n, seed, |rows, _| rows.to_vec())?;
    Ok(SampleBatch {
        n,
        d: spec.tree.node_count(),
        data: blocks.concat(),
        seed,
        fingerprint: spec.fingerprint(),
    })
}

/// Ranks `1..=n`, ties broken by position.
fn ranks(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut r = vec![0; x.len()];
    for (pos, &k) in idx.iter().enumerate() {
        r[k] = pos + 1;
    }
    r
}

/// Sup-norm distance between the empirical copula of an edge and the
/// specified copula on an open grid.
pub fn empirical_edge_copula_check(batch: &SampleBatch, spec: &TreeSpec, edge: (usize, usize), grid_size: usize) -> Result<f64> {
    if batch.n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if grid_size < 1 {
        return Err(Error::InvalidArgument("grid_size must be positive".into()));
    }
    let (i, j) = edge;
    let c = spec.copula(i, j)?;
    if !spec.marginal(i)?.is_continuous() || !spec.marginal(j)?.is_continuous() {
        return Err(Error::Unsupported(format!("edge ({i}, {j}) has a discontinuous marginal")));
    }
    let n = batch.n;
    let (ru, rv) = (ranks(&batch.column(i)), ranks(&batch.column(j)));
    let g = grid_size;
    let grid: Vec<f64> = (1..=g).map(|k| k as f64 / (g + 1) as f64).collect();
    // cell (a, b): smallest grid indices with U <= grid[a], V <= grid[b]; g = beyond grid
    let cell = |r: usize| grid.partition_point(|&t| t < r as f64 / n as f64);
    let mut hist = vec![0usize; (g + 1) * (g + 1)];
    for k in 0..n {
        hist[cell(ru[k]) * (g + 1) + cell(rv[k])] += 1;
    }
    for a in 0..=g {
        for b in 0..=g {
            let mut s = hist[a * (g + 1) + b];
            if a > 0 {
                s += hist[(a - 1) * (g + 1) + b];
            }
            if b > 0 {
                s += hist[a * (g + 1) + b - 1];
            }
            if a > 0 && b > 0 {
                s -= hist[(a - 1) * (g + 1) + b - 1];
            }
            hist[a * (g + 1) + b] = s;
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..g {
        for b in 0..g {
            let emp = hist[a * (g + 1) + b] as f64 / n as f64;
            worst = worst.max((emp - c.cdf_unchecked(grid[a], grid[b])).abs());
        }
    }
    Ok(worst)
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic(sample: &[f64], m: &Marginal) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let f = m.cdf_unchecked(v);
        let fl = m.cdf_left(v);
        d = d.max((k + 1) as f64 / n - f).max(fl - k as f64 / n);
    }
    Ok(d)
}

/// Sample Kendall τ, `O(n²)`.
pub fn kendall_tau_sample(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for a in 0..n {
        for b in a + 1..n {
            let p = (x[a] - x[b]) * (y[a] - y[b]);
            s += if p > 0.0 {
                1
            } else if p < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn normal_scores(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    ranks(x).into_iter().map(|r| normal::quantile(r as f64 / (n + 1.0))).collect()
}

/// Residuals of `y` after least squares on `(1, z, z²)`.
fn quadratic_residuals(z: &[f64], y: &[f64]) -> Vec<f64> {
    // normal equations, solved by Gaussian elimination on the 3×3 system
    let mut m = [[0.0f64; 4]; 3];
    for (&zi, &yi) in z.iter().zip(y) {
        let basis = [1.0, zi, zi * zi];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += basis[a] * basis[b];
            }
            m[a][3] += basis[a] * yi;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).expect("rows");
        m.swap(col, piv);
        if m[col][col].abs() < 1e-12 {
            continue;
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..4 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..3)
        .map(|a| if m[a][a].abs() < 1e-12 { 0.0 } else { m[a][3] / m[a][a] })
        .collect();
    z.iter()
        .zip(y)
        .map(|(&zi, &yi)| yi - beta[0] - beta[1] * zi - beta[2] * zi * zi)
        .collect()
}

/// Largest within-bin partial correlation between normal-score summaries of
/// `X_A` and `X_B`, after binning on `X_i` and removing a quadratic trend in
/// the score of `X_i`.
pub fn conditional_independence_probe(
    batch: &SampleBatch,
    tree: &DirectedTree,
    i: usize,
    a: &[usize],
    b: &[usize],
    bins: usize,
) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty node set".into()));
    }
    if tree.node_count() != batch.d {
        return Err(Error::InvalidArgument("tree does not match the batch".into()));
    }
    if !tree.separates(i, a, b)? {
        return Err(Error::InvalidArgument(format!("node {i} does not separate {a:?} and {b:?}")));
    }
    if batch.n < 10 * bins {
        return Err(Error::InvalidArgument("too few samples for the requested bins".into()));
    }
    let summary = |set: &[usize]| {
        let cols: Vec<Vec<f64>> = set.iter().map(|&j| normal_scores(&batch.column(j))).collect();
        (0..batch.n)
            .map(|k| cols.iter().map(|c| c[k]).sum::<f64>() / set.len() as f64)
            .collect::<Vec<f64>>()
    };
    let (sa, sb) = (summary(a), summary(b));
    let zi = normal_scores(&batch.column(i));
    let mut order: Vec<usize> = (0..batch.n).collect();
    order.sort_by(|&p, &q| zi[p].total_cmp(&zi[q]));
    let mut score: f64 = 0.0;
    for bin in 0..bins {
        let lo = bin * batch.n / bins;
        let hi = (bin + 1) * batch.n / bins;
        let idx = &order[lo..hi];
        let z: Vec<f64> = idx.iter().map(|&k| zi[k]).collect();
        let ra = quadratic_residuals(&z, &idx.iter().map(|&k| sa[k]).collect::<Vec<_>>());
        let rb = quadratic_residuals(&z, &idx.iter().map(|&k| sb[k]).collect::<Vec<_>>());
        let c = pearson(&ra, &rb);
        if c.is_finite() {
            score = score.max(c.abs());
        }
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_spec(rho: f64) -> TreeSpec {
        let tree = DirectedTree::chain(2).unwrap();
        let m = vec![Marginal::normal(0.0, 1.0).unwrap(); 3];
        TreeSpec::uniform_copula(tree, m, Copula::Gaussian(rho)).unwrap()
    }

    #[test]
    fn spec_validation() {
        let tree = DirectedTree::chain(2).unwrap();
        let m = vec![Marginal::Dirac(0.0); 3];
        assert!(TreeSpec::new(tree.clone(), m.clone(), BTreeMap::new()).is_err());
        assert!(TreeSpec::new(tree.clone(), m[..2].to_vec(), BTreeMap::new()).is_err());
        let extra = BTreeMap::from([((0, 1), Copula::Independence), ((1, 2), Copula::Independence), ((0, 2), Copula::Independence)]);
        assert!(TreeSpec::new(tree, m, extra).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = chain_spec(0.5);
        let back = TreeSpec::from_json_str(&s.to_json().to_string(), None).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fingerprint(), s.fingerprint());
        let text = r#"{"tree": {"nodes": 2, "edges": [[0,1]]},
                       "marginals": ["uniform(0,1)", "normal(0,4)"],
                       "copulas": [{"edge": [0,1], "copula": "clayton(2)"}]}"#;
        let s = TreeSpec::from_json_str(text, None).unwrap();
        assert_eq!(*s.copula(0, 1).unwrap(), Copula::Clayton(2.0));
        assert!(TreeSpec::from_json_str(&text.replace("clayton(2)", "clayton(-2)"), None).is_err());
    }

    #[test]
    fn deterministic_and_chunk_independent() {
        let s = chain_spec(0.8);
        let a = sample(&s, 10_000, 7).unwrap();
        let b = sample(&s, 10_000, 7).unwrap();
        assert_eq!(a, b);
        // a prefix of a longer run is the shorter run
        let c = sample(&s, 5_000, 7).unwrap();
        assert_eq!(&a.data[..c.data.len()], &c.data[..]);
        assert_ne!(sample(&s, 100, 8).unwrap().data, a.data[..300].to_vec());
        assert!(sample(&s, 0, 1).is_err());
    }

    #[test]
    fn independent_uniforms_are_uncorrelated() {
        let tree = DirectedTree::star(3).unwrap();
        let m = vec![Marginal::uniform(0.0, 1.0).unwrap(); 4];
        let s = TreeSpec::uniform_copula(tree, m, Copula::Independence).unwrap();
        let n = 20_000;
        let b = sample(&s, n, 3).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(pearson(&b.column(i), &b.column(j)).abs() < 3.0 / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn comonotone_columns_coincide() {
        let tree = DirectedTree::chain(3).unwrap();
        let m = vec![Marginal::normal(0.0, 2.0).unwrap(); 4];
        let s = TreeSpec::uniform_copula(tree, m, Copula::Comonotone).unwrap();
        let b = sample(&s, 1000, 1).unwrap();
        for k in 0..b.n {
            let r = b.row(k);
            assert!(r.iter().all(|&x| x == r[0]));
        }
    }

    #[test]
    fn random_walk_correlation() {
        let d = 5;
        let tree = DirectedTree::chain(d).unwrap();
        let m: Vec<Marginal> = (0..=d).map(|k| Marginal::normal(0.0, (k + 1) as f64).unwrap()).collect();
        let copulas = tree
            .edges()
            .iter()
            .map(|&(i, j)| ((i, j), Copula::Gaussian(((i + 1) as f64 / (j + 1) as f64).sqrt())))
            .collect();
        let s = TreeSpec::new(tree, m, copulas).unwrap();
        let n = 20_000;
        let b = sample(&s, n, 9).unwrap();
        for k in 0..d {
            let r = pearson(&b.column(k), &b.column(k + 1));
            let want = ((k + 1) as f64 / (k + 2) as f64).sqrt();
            assert!((r - want).abs() < 3.0 / (n as f64).sqrt(), "k={k} r={r}");
        }
    }

    #[test]
    fn atoms_do_not_leak_latent_uniforms() {
        // root Dirac, comonotone edge: the child must not inherit a varying latent level
        let tree = DirectedTree::chain(2).unwrap();
        let m = vec![Marginal::Dirac(0.0), Marginal::uniform(0.0, 1.0).unwrap(), Marginal::uniform(0.0, 1.0).unwrap()];
        let copulas = BTreeMap::from([((0, 1), Copula::Comonotone), ((1, 2), Copula::Comonotone)]);
        let s = TreeSpec::new(tree, m, copulas).unwrap();
        let b = sample(&s, 5000, 2).unwrap();
        // X_1 is uniform (the atom is re-randomized), X_2 copies it
        let ks = ks_statistic(&b.column(1), &Marginal::uniform(0.0, 1.0).unwrap()).unwrap();
        assert!(ks < 1.95 / (5000f64).sqrt());
        assert_eq!(b.column(1), b.column(2));
    }

    #[test]
    fn edge_copula_and_ks() {
        let s = chain_spec(0.7);
        let b = sample(&s, 20_000, 4).unwrap();
        let dev = empirical_edge_copula_check(&b, &s, (0, 1), 33).unwrap();
        assert!(dev < 0.02, "{dev}");
        for j in 0..3 {
            let ks = ks_statistic(&b.column(j), &s.marginals()[j]).unwrap();
            assert!(ks < 1.95 / (b.n as f64).sqrt());
        }
        let tree = DirectedTree::chain(1).unwrap();
        let disc = TreeSpec::uniform_copula(tree, vec![Marginal::Dirac(0.0); 2], Copula::Independence).unwrap();
        let bd = sample(&disc, 10, 1).unwrap();
        assert!(empirical_edge_copula_check(&bd, &disc, (0, 1), 9).is_err());
    }

    #[test]
    fn kendall_tau_matches_family() {
        for c in [Copula::Gaussian(0.6), Copula::Clayton(2.0), Copula::SurvivalClayton(2.0)] {
            let tree = DirectedTree::chain(1).unwrap();
            let s = TreeSpec::uniform_copula(tree, vec![Marginal::uniform(0.0, 1.0).unwrap(); 2], c).unwrap();
            let n = 2000;
            let b = sample(&s, n, 5).unwrap();
            let t = kendall_tau_sample(&b.column(0), &b.column(1));
            assert!((t - c.kendall_tau()).abs() < 3.0 / (n as f64).sqrt(), "{c}: {t}");
        }
    }

    #[test]
    fn ci_probe_separates_markov_from_marginal_dependence() {
        let s = chain_spec(0.9);
        let b = sample(&s, 50_000, 12).unwrap();
        let score = conditional_independence_probe(&b, s.tree(), 1, &[0], &[2], 10).unwrap();
        assert!(score < 0.05, "{score}");
        assert!(pearson(&b.column(0), &b.column(2)) > 0.5);
        assert!(conditional_independence_probe(&b, s.tree(), 0, &[1], &[2], 10).is_err());
    }

    #[test]
    fn binary_and_csv_output() {
        let b = sample(&chain_spec(0.3), 10, 1).unwrap();
        let mut bin = Vec::new();
        b.write_binary(&mut bin).unwrap();
        let (n, d, data) = SampleBatch::read_binary(&bin).unwrap();
        assert_eq!((n, d), (10, 3));
        assert_eq!(data, b.data);
        let mut csv = Vec::new();
        b.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "node_0,node_1,node_2");
        assert_eq!(text.lines().count(), 11);
        let parsed: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(parsed, b.row(0));
    }
}
