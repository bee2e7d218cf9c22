//! Ridge shrinkage on correlated features.

use airprice::models::{ridge_fit, ridge_predict};
use airprice::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> airprice::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(-1.0..1.0);
        // b is a noisy copy of a
        let b = a + rng.random_range(-0.05..0.05);
        let c: f64 = rng.random_range(-1.0..1.0);
        rows.push(vec![a, b, c]);
        y.push(1.5 * a + 0.5 * c + 2.0 + rng.random_range(-0.1..0.1));
    }
    let x = DenseMatrix::from_rows(&rows)?;
    println!("{:>8}  {:>8} {:>8} {:>8}  {:>9}  {:>8}", "lambda", "w_a", "w_b", "w_c", "intercept", "mse");
    for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4] {
        let m = ridge_fit(&x, &y, lambda)?;
        let p = ridge_predict(&m, &x)?;
        let mse = p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        let w = &m.coefficients;
        println!("{lambda:>8}  {:>8.4} {:>8.4} {:>8.4}  {:>9.4}  {mse:>8.5}", w[0], w[1], w[2], m.intercept);
    }

    // duplicated column: singular at lambda 0, solved with the floor
    let dup = DenseMatrix::from_rows(&rows.iter().map(|r| vec![r[0], r[0]]).collect::<Vec<_>>())?;
    let m = ridge_fit(&dup, &y, 0.0)?;
    println!("\nduplicate columns at lambda 0: floored = {}, w = {:?}", m.lambda_floored, m.coefficients);
    Ok(())
}
