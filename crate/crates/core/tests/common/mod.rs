//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Calls `f` on every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// `min_σ (1/n) Σ |a_i − b_σ(i)|^p` over all matchings of equal-size samples.
pub fn matching_cost_1d(a: &[f64], b: &[f64], p: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut best = f64::INFINITY;
    for_each_permutation(a.len(), |s| {
        let c: f64 = s.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs().powf(p)).sum();
        best = best.min(c);
    });
    best / a.len() as f64
}

/// Exact `W_p^p` between equal-size uniform point clouds by enumerating matchings
/// (optimal couplings of uniform measures of equal size are permutations).
pub fn matching_cost(a: &[Vec<f64>], b: &[Vec<f64>], p: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut best = f64::INFINITY;
    for_each_permutation(a.len(), |s| {
        let c: f64 = s
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let d2: f64 = a[i].iter().zip(&b[j]).map(|(x, y)| (x - y) * (x - y)).sum();
                d2.sqrt().powf(p)
            })
            .sum();
        best = best.min(c);
    });
    best / a.len() as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()).collect()
}

/// Random 1-Lipschitz zigzag through 0 on `[0, m]`: slopes ±1 (or random in
/// [−1, 1] when `smooth`) on a grid of `pieces` cells.
pub fn random_zigzag(rng: &mut ChaCha8Rng, m: f64, pieces: usize, smooth: bool) -> (Vec<f64>, Vec<f64>) {
    let h = m / pieces as f64;
    let mut xs = vec![0.0];
    let mut ys = vec![0.0];
    for k in 1..=pieces {
        let slope = if smooth { 2.0 * rng.random::<f64>() - 1.0 } else if rng.random::<bool>() { 1.0 } else { -1.0 };
        xs.push(k as f64 * h);
        ys.push(ys[k - 1] + slope * h);
    }
    (xs, ys)
}
