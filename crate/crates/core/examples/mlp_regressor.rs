//! Fits the MLP to a smooth 2-d function and reports error by epochs.

use airprice::models::{mlp_fit, mlp_predict};
use airprice::DenseMatrix;

fn target(a: f64, b: f64) -> f64 {
    (2.0 * a).sin() + 0.5 * b * b
}

fn main() -> airprice::Result<()> {
    let grid: Vec<f64> = (0..30).map(|i| -1.5 + 3.0 * i as f64 / 29.0).collect();
    let rows: Vec<Vec<f64>> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| vec![a, b])).collect();
    let y: Vec<f64> = rows.iter().map(|r| target(r[0], r[1])).collect();
    let x = DenseMatrix::from_rows(&rows)?;
    let test_rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64 * 0.37).sin() * 1.4, (i as f64 * 0.91).cos() * 1.4]).collect();
    let y_test: Vec<f64> = test_rows.iter().map(|r| target(r[0], r[1])).collect();
    let x_test = DenseMatrix::from_rows(&test_rows)?;

    for epochs in [10, 50, 200, 800] {
        let model = mlp_fit(&x, &y, &[2, 32, 16, 1], epochs, 32, 0.005, 0)?;
        let mse = |x: &DenseMatrix, y: &[f64]| -> airprice::Result<f64> {
            let p = mlp_predict(&model, x)?;
            Ok(p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
        };
        println!("epochs {epochs:>4}: train mse {:.5}, test mse {:.5}", mse(&x, &y)?, mse(&x_test, &y_test)?);
    }
    Ok(())
}
