use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airprice::models::ModelKind;
use airprice::pipeline::{self, CityFiles, ModelConfig, PipelineConfig, PredictArgs};
use airprice::{Error, Result};

/// Listing price regression: ingest exports, train, score and generate
/// synthetic data.
#[derive(Parser)]
#[command(name = "airprice", version)]
struct Cli {
    /// JSON pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; outputs are identical for any value.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse city exports into one dataset file plus a drop log.
    Ingest {
        /// LABEL=LISTINGS_CSV,REVIEWS_CSV (repeatable; replaces config cities).
        #[arg(long = "city", value_parser = parse_city)]
        cities: Vec<CityFiles>,
    },
    /// Fit features and models, evaluate, and write the report.
    Train {
        /// Dataset written by `ingest`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long = "city", value_parser = parse_city)]
        cities: Vec<CityFiles>,
        /// Model kinds with default parameters (repeatable; replaces config models).
        #[arg(long = "model", value_parser = parse_kind)]
        models: Vec<ModelKind>,
    },
    /// Score listings with a saved model and pipeline.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pipeline: PathBuf,
        #[arg(long)]
        listings: PathBuf,
        #[arg(long)]
        reviews: Option<PathBuf>,
        #[arg(long, default_value = "predict")]
        city: String,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate synthetic listings, reviews and the truth table.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        cities: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
}

fn parse_city(s: &str) -> std::result::Result<CityFiles, String> {
    let (label, files) = s.split_once('=').ok_or("expected LABEL=LISTINGS,REVIEWS")?;
    let (listings, reviews) = files.split_once(',').ok_or("expected LABEL=LISTINGS,REVIEWS")?;
    Ok(CityFiles {
        label: label.to_string(),
        listings: listings.into(),
        reviews: reviews.into(),
    })
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown model kind {s:?} (ridge, gbdt, mlp)"))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.synth.seed = seed;
    }
    let threads = cli.threads;
    match cli.command {
        Command::Ingest { cities } => {
            if !cities.is_empty() {
                cfg.cities = cities;
            }
            let ds = pipeline::with_threads(threads, || pipeline::run_ingest(&cfg))??;
            log::info!("wrote {} listings to {}", ds.listings.len(), cfg.out.display());
        }
        Command::Train { dataset, cities, models } => {
            if dataset.is_some() {
                cfg.dataset = dataset;
            }
            if !cities.is_empty() {
                cfg.cities = cities;
            }
            if !models.is_empty() {
                cfg.models = models.into_iter().map(ModelConfig::defaults).collect();
            }
            let outcome = pipeline::with_threads(threads, || pipeline::run_train(&cfg))??;
            for m in &outcome.results.models {
                log::info!(
                    "{}: test mse {:.4}, mae {:.4}, r2 {:.4}",
                    m.artifact.kind().as_str(),
                    m.test.mse,
                    m.test.mae,
                    m.test.r2
                );
            }
        }
        Command::Predict { model, pipeline: pipe, listings, reviews, city, output } => {
            let args = PredictArgs {
                model: &model,
                pipeline: &pipe,
                listings: &listings,
                reviews: reviews.as_deref(),
                city: &city,
            };
            let preds = pipeline::with_threads(threads, || pipeline::run_predict(&args))??;
            let text = pipeline::predictions_csv(&preds);
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })?,
                None => print!("{text}"),
            }
        }
        Command::Synth { n, cities, noise_sigma } => {
            let mut spec = cfg.synth.clone();
            if let Some(n) = n {
                spec.n_listings = n;
            }
            if let Some(c) = cities {
                spec.n_cities = c;
            }
            if let Some(s) = noise_sigma {
                spec.noise_sigma = s;
            }
            pipeline::run_synth(&spec, &cfg.out)?;
            log::info!("wrote {} synthetic listings to {}", spec.n_listings, cfg.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
