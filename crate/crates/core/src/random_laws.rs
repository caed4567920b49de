//! Random exact-rational bivariate laws for fuzzing the order checks.

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::discrete::{q, DiscreteBivariate, Q};

/// Law with independent positive integer weights in `1..=max_weight`.
pub fn random_bivariate<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, max_weight: i64) -> DiscreteBivariate {
    let counts: Vec<Vec<i64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(1..=max_weight)).collect()).collect();
    from_counts(&counts)
}

/// Law with weights in `0..=max_weight`, so some cells may be empty.
pub fn random_sparse_bivariate<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, max_weight: i64) -> DiscreteBivariate {
    loop {
        let counts: Vec<Vec<i64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..=max_weight)).collect()).collect();
        if counts.iter().flatten().any(|&c| c > 0) {
            return from_counts(&counts);
        }
    }
}

fn from_counts(counts: &[Vec<i64>]) -> DiscreteBivariate {
    let total: i64 = counts.iter().flatten().sum();
    let weights = counts.iter().map(|r| r.iter().map(|&c| q(c, total)).collect()).collect();
    DiscreteBivariate::from_matrix(weights).expect("positive total mass")
}

/// Two laws with the same marginals: the second is the first after random
/// mass transfers on 2x2 rectangles. With probability one half every transfer
/// moves mass onto the main diagonal of its rectangle, which yields pairs
/// ordered in the lower orthant order.
pub fn random_identical_marginal_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (DiscreteBivariate, DiscreteBivariate) {
    let x = random_bivariate(rng, n, n, 6);
    let mut w: Vec<Vec<Q>> = x.weights().to_vec();
    let forward_only = rng.random_bool(0.5);
    for _ in 0..rng.random_range(1..=4) {
        let (i, i2) = ordered_pair(rng, n);
        let (j, j2) = ordered_pair(rng, n);
        let forward = forward_only || rng.random_bool(0.5);
        // forward moves mass from the anti-diagonal corners to the diagonal ones
        let (from, to) = if forward { ([(i, j2), (i2, j)], [(i, j), (i2, j2)]) } else { ([(i, j), (i2, j2)], [(i, j2), (i2, j)]) };
        let room = std::cmp::min(w[from[0].0][from[0].1].clone(), w[from[1].0][from[1].1].clone());
        if !room.is_positive() {
            continue;
        }
        let eps = room * q(rng.random_range(1..=4), 4);
        for (a, b) in from {
            w[a][b] -= &eps;
        }
        for (a, b) in to {
            w[a][b] += &eps;
        }
    }
    let y = DiscreteBivariate::from_matrix(w).expect("transfers keep the mass");
    (x, y)
}

fn ordered_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n - 1);
    let b = rng.random_range(a + 1..n);
    (a, b)
}

/// MTP2 law `p(i,j) ∝ r_i s_j t^(i j)` with `t >= 1`.
pub fn random_mtp2<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DiscreteBivariate {
    let r: Vec<Q> = (0..rows).map(|_| q(rng.random_range(1..=5), 1)).collect();
    let s: Vec<Q> = (0..cols).map(|_| q(rng.random_range(1..=5), 1)).collect();
    let t = q(4 + rng.random_range(0..=4), 4);
    let mut w: Vec<Vec<Q>> = vec![vec![Q::zero(); cols]; rows];
    let mut total = Q::zero();
    for i in 0..rows {
        for j in 0..cols {
            let mut v = &r[i] * &s[j];
            for _ in 0..i * j {
                v *= &t;
            }
            total += &v;
            w[i][j] = v;
        }
    }
    for row in &mut w {
        for v in row.iter_mut() {
            *v /= &total;
        }
    }
    debug_assert!(w.iter().flatten().sum::<Q>().is_one());
    DiscreteBivariate::from_matrix(w).expect("normalized")
}
