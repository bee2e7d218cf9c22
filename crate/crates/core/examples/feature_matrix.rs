//! Builds the feature matrix for a synthetic dataset and prints its column
//! layout. Pass a path to also write the matrix (plus target) as CSV.
//!
//!     cargo run --release --example feature_matrix -- 2000 /tmp/features.csv

use std::fmt::Write as _;

use airprice::ingest::{ingest_cities, CitySource};
use airprice::synth::{generate, SynthSpec};
use airprice::textfeat::{parse_stopwords, SentimentLexicon, DEFAULT_STOPWORDS};
use airprice::transform::{assemble_matrix, fit_pipeline, FeatureSettings};

fn main() -> airprice::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().map_or(1000, |s| s.parse().expect("listing count"));
    let out = args.next();

    let data = generate(&SynthSpec { n_listings: n, ..Default::default() })?;
    let ds = ingest_cities(&[CitySource {
        label: "synth",
        listings: &data.listings_csv,
        reviews: &data.reviews_csv,
    }])?;
    let settings = FeatureSettings { k_clusters: 16, ..Default::default() };
    let fp = fit_pipeline(&ds, &settings, &SentimentLexicon::builtin(), &parse_stopwords(DEFAULT_STOPWORDS), 0)?;
    let m = assemble_matrix(&ds, &fp)?;

    println!("{} rows x {} columns", m.rows(), m.values.cols());
    let mut by_source = std::collections::BTreeMap::new();
    for c in &m.columns {
        *by_source.entry(format!("{:?}", c.source)).or_insert(0usize) += 1;
    }
    for (source, count) in by_source {
        println!("  {source:<12} {count}");
    }
    println!("first row:");
    for (c, v) in m.columns.iter().zip(m.values.row(0)).take(12) {
        println!("  {:<28} {v:>10.4}", c.name);
    }

    if let Some(path) = out {
        let mut csv = m.column_names().join(",");
        csv.push_str(",ln_price\n");
        for (row, y) in m.values.iter_rows().zip(&m.target) {
            for v in row {
                let _ = write!(csv, "{v},");
            }
            let _ = writeln!(csv, "{y}");
        }
        std::fs::write(&path, csv).expect("write csv");
        println!("wrote {path}");
    }
    Ok(())
}
