//! Validation grid search over GBDT leaf budget and minimum leaf size.

use airprice::models::{grid_search, ModelKind, ParamGrid};
use airprice::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn data(n: usize, rng: &mut ChaCha8Rng) -> airprice::Result<(DenseMatrix, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| r[0] * r[1] + (3.0 * r[2]).sin() + rng.random_range(-0.2..0.2))
        .collect();
    Ok((DenseMatrix::from_rows(&rows)?, y))
}

fn main() -> airprice::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (xt, yt) = data(2000, &mut rng)?;
    let (xv, yv) = data(500, &mut rng)?;
    let grid: ParamGrid = [
        ("num_leaves".to_string(), vec![json!(4), json!(15), json!(63)]),
        ("min_samples_leaf".to_string(), vec![json!(5), json!(40)]),
    ]
    .into_iter()
    .collect();
    let base = json!({"n_estimators": 200, "learning_rate": 0.1});
    let result = grid_search(ModelKind::Gbdt, &base, &grid, (&xt, &yt), (&xv, &yv))?;
    for (i, cell) in result.cells.iter().enumerate() {
        let mark = if i == result.best_index { "*" } else { " " };
        let mse = cell.val_mse.map_or("failed".to_string(), |m| format!("{m:.5}"));
        println!("{mark} {} -> val mse {mse}", serde_json::Value::Object(cell.overrides.clone()));
    }
    println!("best params: {}", result.best.params_json());
    Ok(())
}
