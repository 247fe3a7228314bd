//! Unbiased maximum mean discrepancy with the kernel `exp(−½‖x − y‖²)`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Rows per kernel tile.
pub const TILE: usize = 2000;
/// Only the last this-many rows of each sample are used.
pub const MAX_ROWS: usize = 20_000;

/// Gaussian kernel `exp(−c‖x − y‖²)`, `c = ½` unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub coefficient: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { coefficient: 0.5 }
    }
}

impl KernelSpec {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-self.coefficient * d2).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mmd {
    /// Unbiased MMD² (may be negative).
    pub mmd2: f64,
    /// `√max(MMD², 0)`.
    pub mmd: f64,
    pub negative: bool,
}

struct Rows {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

fn flatten(xs: &[Vec<f64>]) -> Result<Rows> {
    let xs = &xs[xs.len().saturating_sub(MAX_ROWS)..];
    let d = xs.first().map_or(0, |r| r.len());
    if xs.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("rows must share one dimension".into()));
    }
    Ok(Rows {
        data: xs.iter().flatten().copied().collect(),
        n: xs.len(),
        d,
    })
}

fn threads_default() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Sum of `k(a_i, b_j)`, over `i ≠ j` when `same`. Tiles are reduced in a
/// fixed order, so the result does not depend on `threads`.
fn kernel_sum(k: KernelSpec, a: &Rows, b: &Rows, same: bool, threads: usize) -> f64 {
    let d = a.d;
    let ta = a.n.div_ceil(TILE);
    let tb = b.n.div_ceil(TILE);
    let tiles: Vec<(usize, usize)> = (0..ta)
        .flat_map(|i| (0..tb).map(move |j| (i, j)))
        .filter(|&(i, j)| !same || j >= i)
        .collect();
    let tile_sum = |&(ti, tj): &(usize, usize)| -> f64 {
        let mut s = 0.0;
        for i in ti * TILE..((ti + 1) * TILE).min(a.n) {
            let x = &a.data[i * d..(i + 1) * d];
            let j0 = if same && ti == tj { i + 1 } else { tj * TILE };
            for j in j0..((tj + 1) * TILE).min(b.n) {
                s += k.eval(x, &b.data[j * d..(j + 1) * d]);
            }
        }
        if same {
            2.0 * s
        } else {
            s
        }
    };
    let threads = threads.max(1).min(tiles.len().max(1));
    let sums: Vec<f64> = if threads == 1 {
        tiles.iter().map(tile_sum).collect()
    } else {
        let chunk = tiles.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = tiles
                .chunks(chunk)
                .map(|c| s.spawn(move || c.iter().map(tile_sum).collect::<Vec<f64>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("kernel tile worker")).collect()
        })
    };
    sums.iter().sum()
}

/// Unbiased MMD² between two samples (rows are points), on the last
/// [`MAX_ROWS`] rows of each.
pub fn mmd2_unbiased(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<Mmd> {
    mmd2_unbiased_with(xs, ys, KernelSpec::default(), threads_default())
}

pub fn mmd2_unbiased_with(xs: &[Vec<f64>], ys: &[Vec<f64>], k: KernelSpec, threads: usize) -> Result<Mmd> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::invalid("MMD needs at least two rows per sample"));
    }
    let a = flatten(xs)?;
    let b = flatten(ys)?;
    if a.d != b.d {
        return Err(Error::Shape("samples have different dimensions".into()));
    }
    let (m, n) = (a.n as f64, b.n as f64);
    let kxx = kernel_sum(k, &a, &a, true, threads) / (m * (m - 1.0));
    let kyy = kernel_sum(k, &b, &b, true, threads) / (n * (n - 1.0));
    let kxy = kernel_sum(k, &a, &b, false, threads) / (m * n);
    let mmd2 = kxx + kyy - 2.0 * kxy;
    Ok(Mmd {
        mmd2,
        mmd: mmd2.max(0.0).sqrt(),
        negative: mmd2 < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullScale {
    /// Standard deviation of permuted MMD² values, rescaled to the full
    /// sample sizes.
    pub scale: f64,
    pub permutations: usize,
    /// Rows per sample actually permuted.
    pub rows: usize,
}

/// Spread of MMD² under the permutation null.
///
/// Both samples are pooled (at most `max_rows` rows of each, taken from the
/// end) and split at random `permutations` times. When subsampled, the
/// standard deviation is rescaled by `(1/m + 1/n)/(1/m' + 1/n')`, the
/// null scaling of a degenerate U-statistic.
pub fn null_scale(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    permutations: usize,
    max_rows: usize,
    seed: u64,
    threads: usize,
) -> Result<NullScale> {
    if permutations < 2 {
        return Err(Error::invalid("need at least two permutations"));
    }
    let m = xs.len().min(MAX_ROWS);
    let n = ys.len().min(MAX_ROWS);
    let xs = &xs[xs.len() - m.min(max_rows)..];
    let ys = &ys[ys.len() - n.min(max_rows)..];
    let (ms, ns) = (xs.len(), ys.len());
    let mut pool: Vec<Vec<f64>> = xs.iter().chain(ys).cloned().collect();
    let mut r = rng::stream(seed, tags::PERMUTATION, 0);
    let mut vals = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        pool.shuffle(&mut r);
        vals.push(mmd2_unbiased_with(&pool[..ms], &pool[ms..], KernelSpec::default(), threads)?.mmd2);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
    let factor = (1.0 / m as f64 + 1.0 / n as f64) / (1.0 / ms as f64 + 1.0 / ns as f64);
    Ok(NullScale {
        scale: sd * factor,
        permutations,
        rows: ms.max(ns),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let z = vec![vec![0.0], vec![0.0]];
        let o = vec![vec![1.0], vec![1.0]];
        assert_eq!(mmd2_unbiased(&z, &z).unwrap().mmd2, 0.0);
        let v = mmd2_unbiased(&z, &o).unwrap().mmd2;
        assert!((v - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-12);
        assert!(mmd2_unbiased(&z[..1], &o).is_err());
    }

    #[test]
    fn tiling_and_threads_agree_with_direct_sum() {
        let mut r = rng::stream(1, 0, 0);
        use rand::Rng;
        let xs: Vec<Vec<f64>> = (0..2500).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let ys: Vec<Vec<f64>> = (0..2100).map(|_| vec![r.random::<f64>() + 0.1, r.random::<f64>()]).collect();
        let k = KernelSpec::default();
        let a = mmd2_unbiased_with(&xs, &ys, k, 1).unwrap().mmd2;
        let b = mmd2_unbiased_with(&xs, &ys, k, 7).unwrap().mmd2;
        assert_eq!(a, b);
        let mut sxx = 0.0;
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if i != j {
                    sxx += k.eval(&xs[i], &xs[j]);
                }
            }
        }
        let mut syy = 0.0;
        for i in 0..ys.len() {
            for j in 0..ys.len() {
                if i != j {
                    syy += k.eval(&ys[i], &ys[j]);
                }
            }
        }
        let sxy: f64 = xs.iter().flat_map(|x| ys.iter().map(move |y| k.eval(x, y))).sum();
        let (m, n) = (xs.len() as f64, ys.len() as f64);
        let direct = sxx / (m * (m - 1.0)) + syy / (n * (n - 1.0)) - 2.0 * sxy / (m * n);
        assert!((a - direct).abs() < 1e-12, "{a} {direct}");
    }
}
