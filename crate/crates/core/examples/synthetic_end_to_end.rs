//! Generates a synthetic market, trains GBDT and ridge through the
//! pipeline, and prints test metrics next to the achievable ceiling.
//!
//!     cargo run --release --example synthetic_end_to_end -- /tmp/airprice-demo

use std::collections::HashMap;
use std::path::PathBuf;

use airprice::evalreport::metrics;
use airprice::models::ModelKind;
use airprice::pipeline::{self, ModelConfig, PipelineConfig};
use airprice::synth::SynthSpec;

fn main() -> airprice::Result<()> {
    let root = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("airprice-demo"), PathBuf::from);
    let spec = SynthSpec { n_listings: 3000, ..Default::default() };
    let generated = pipeline::run_synth(&spec, &root.join("data"))?;

    let mut cfg = PipelineConfig {
        cities: pipeline::synth_cities(&root.join("data")),
        out: root.join("out"),
        seed: 1,
        ..Default::default()
    };
    cfg.features.k_clusters = spec.n_cities;
    let mut gbdt = ModelConfig::defaults(ModelKind::Gbdt);
    gbdt.params = serde_json::json!({"n_estimators": 300, "num_leaves": 8, "min_samples_leaf": 50});
    cfg.models = vec![gbdt, ModelConfig::defaults(ModelKind::Ridge)];
    let outcome = pipeline::run_train(&cfg)?;

    let truth: HashMap<i64, f64> = generated.truth.iter().map(|t| (t.id, t.ln_price_true)).collect();
    let test = &outcome.results.split.test;
    let observed: Vec<f64> = test.iter().map(|&i| outcome.dataset.listings[i].price_usd.ln()).collect();
    let oracle: Vec<f64> = test.iter().map(|&i| truth[&outcome.dataset.listings[i].id]).collect();
    println!("ceiling (true price function): r2 {:.4}", metrics(&observed, &oracle)?.r2);
    for m in &outcome.results.models {
        println!("{:<6} test mse {:.4}, r2 {:.4}", m.artifact.kind().as_str(), m.test.mse, m.test.r2);
    }
    println!("outputs in {}", cfg.out.display());
    Ok(())
}
