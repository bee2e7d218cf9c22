//! Compares depth-wise and leaf-wise tree growth on a noisy nonlinear
//! target, printing the training loss curve and held-out error.
//!
//!     cargo run --release --example boosting_growth

use std::time::Instant;

use airprice::models::gbdt::gbdt_fit_with_history;
use airprice::models::{gbdt_predict, GbdtParams, Growth};
use airprice::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(n: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let r: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = (3.0 * r[0]).sin() + r[1] * r[2] + 0.5 * (r[3] > 0.2) as u8 as f64;
        y.push(target + rng.random_range(-0.1..0.1));
        rows.push(r);
    }
    (DenseMatrix::from_rows(&rows).expect("rectangular"), y)
}

fn main() {
    let (x, y) = dataset(4000, 1);
    let (xt, yt) = dataset(1000, 2);
    for growth in [Growth::DepthWise, Growth::LeafWise] {
        let params = GbdtParams {
            n_estimators: 300,
            growth,
            max_depth: 5,
            num_leaves: 32,
            ..Default::default()
        };
        let start = Instant::now();
        let (model, history) = gbdt_fit_with_history(&x, &y, &params).expect("valid params");
        let elapsed = start.elapsed();
        let pred = gbdt_predict(&model, &xt).expect("same width");
        let test_mse = pred.iter().zip(&yt).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / yt.len() as f64;
        println!("{growth:?}: fitted {} trees in {elapsed:.2?}", model.trees.len());
        for round in [0, 1, 10, 50, 100, 300] {
            println!("  train mse after {round:>3} trees: {:.5}", history[round]);
        }
        println!("  test mse: {test_mse:.5}");
    }
}
