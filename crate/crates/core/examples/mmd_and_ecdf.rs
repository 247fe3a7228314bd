//! Two-sample comparison tools: unbiased MMD² with its permutation null
//! scale, one-dimensional KS distances and ECDF envelopes over replicates.
//!
//! cargo run --release --example mmd_and_ecdf

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use varp::evaluation::{ecdf, ecdf_envelope, ks_two_sample, mmd2_unbiased, null_scale};

fn normal_rows(n: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let d = Normal::new(shift, 1.0).unwrap();
    (0..n).map(|_| vec![d.sample(&mut rng), d.sample(&mut rng)]).collect()
}

fn main() -> varp::Result<()> {
    let base = normal_rows(2000, 0.0, 1);
    for shift in [0.0, 0.1, 0.5] {
        let other = normal_rows(2000, shift, 2);
        let m = mmd2_unbiased(&base, &other)?;
        let null = null_scale(&base, &other, 30, 1000, 3, 1)?;
        let first = |r: &[Vec<f64>]| r.iter().map(|v| v[0]).collect::<Vec<_>>();
        let ks = ks_two_sample(&first(&base), &first(&other))?;
        println!(
            "shift {shift:.1}: MMD² {:+.2e} ({:+.1} null sd), KS on first coordinate {ks:.4}",
            m.mmd2,
            m.mmd2 / null.scale
        );
    }

    let curves: Vec<_> = (0..20)
        .map(|s| {
            let xs: Vec<f64> = normal_rows(500, 0.0, 100 + s).iter().map(|v| v[0]).collect();
            ecdf(&xs)
        })
        .collect::<varp::Result<_>>()?;
    let grid: Vec<f64> = (0..=40).map(|i| -3.0 + 0.15 * i as f64).collect();
    let env = ecdf_envelope(&curves, &grid)?;
    println!("ECDF envelope width over 20 replicates at 0: {:.4}", env.width_at(0.0));
    Ok(())
}
