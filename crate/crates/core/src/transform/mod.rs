//! Feature assembly: train-fitted state ([`FittedPipeline`]) applied to any
//! split to produce a [`FeatureMatrix`].

mod encode;
mod scale;
mod temporal;

use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use encode::{label_encode, one_hot};
pub use scale::{apply_scaler, fit_scaler, median, quantile_sorted, ScalerKind, ScalerParams};
pub use temporal::{host_experience_months, inverse_log_price, log_price};

use crate::error::{Error, Result};
use crate::geofeat::{
    self, ClusterModel, GeoMetric, GeoPoint, KMeansParams, NeighbourhoodStats,
};
use crate::ingest::{Dataset, ListingRecord};
use crate::matrix::DenseMatrix;
use crate::textfeat::{self, DescriptionDirection, SentimentLexicon, Vocabulary};

pub const PIPELINE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnSource {
    Numeric,
    OneHot,
    Sentiment,
    TfidfScore,
    GeoCluster,
    Neighbourhood,
    Temporal,
    MissingFlag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub source: ColumnSource,
}

impl ColumnMeta {
    fn new(name: impl Into<String>, source: ColumnSource) -> Self {
        ColumnMeta {
            name: name.into(),
            source,
        }
    }
}

/// Listing fields usable as scaled numeric columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericField {
    Accommodates,
    #[serde(rename = "availability_365")]
    Availability365,
    ReviewsPerMonth,
    Bedrooms,
    Latitude,
    Longitude,
}

impl NumericField {
    pub fn name(self) -> &'static str {
        match self {
            NumericField::Accommodates => "accommodates",
            NumericField::Availability365 => "availability_365",
            NumericField::ReviewsPerMonth => "reviews_per_month",
            NumericField::Bedrooms => "bedrooms",
            NumericField::Latitude => "latitude",
            NumericField::Longitude => "longitude",
        }
    }

    pub fn value(self, l: &ListingRecord) -> Option<f64> {
        match self {
            NumericField::Accommodates => Some(l.accommodates as f64),
            NumericField::Availability365 => Some(l.availability_365 as f64),
            NumericField::ReviewsPerMonth => l.reviews_per_month,
            NumericField::Bedrooms => l.bedrooms,
            NumericField::Latitude => Some(l.latitude),
            NumericField::Longitude => Some(l.longitude),
        }
    }
}

pub const HOST_EXPERIENCE: &str = "host_experience_months";

/// Feature-construction knobs. Everything here is echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    pub numeric_columns: Vec<NumericField>,
    /// Scaler per numeric column name (plus `host_experience_months`);
    /// unlisted columns use standard scaling.
    pub scalers: BTreeMap<String, ScalerKind>,
    pub k_clusters: usize,
    pub geo_metric: GeoMetric,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub top_neighbourhoods: usize,
    pub vocab_min_df: usize,
    pub vocab_max_terms: usize,
    pub room_type_levels: Vec<String>,
    /// Reference date for host experience; defaults to the latest review.
    pub snapshot_date: Option<NaiveDate>,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            numeric_columns: vec![
                NumericField::Accommodates,
                NumericField::Availability365,
                NumericField::ReviewsPerMonth,
                NumericField::Bedrooms,
                NumericField::Latitude,
                NumericField::Longitude,
            ],
            scalers: [
                ("reviews_per_month".to_string(), ScalerKind::Robust),
                (HOST_EXPERIENCE.to_string(), ScalerKind::Robust),
            ]
            .into(),
            k_clusters: 100,
            geo_metric: GeoMetric::Euclidean,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-6,
            top_neighbourhoods: 25,
            vocab_min_df: 5,
            vocab_max_terms: 500,
            room_type_levels: ["Shared room", "Private room", "Hotel room", "Entire home/apt"]
                .map(String::from)
                .to_vec(),
            snapshot_date: None,
        }
    }
}

impl FeatureSettings {
    fn scaler_for(&self, column: &str) -> ScalerKind {
        self.scalers
            .get(column)
            .copied()
            .unwrap_or(ScalerKind::Standard)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFit {
    pub field: NumericField,
    /// Train median used to impute absent values before scaling.
    pub median: f64,
    pub scaler: ScalerParams,
}

/// Everything learned from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub schema_version: u32,
    pub snapshot_date: NaiveDate,
    pub lexicon: SentimentLexicon,
    pub vocabulary: Vocabulary,
    pub direction: DescriptionDirection,
    pub clusters: ClusterModel,
    pub neighbourhoods: NeighbourhoodStats,
    pub numeric: Vec<NumericFit>,
    pub host_experience: ScalerParams,
    pub room_type_levels: Vec<String>,
    pub columns: Vec<ColumnMeta>,
}

impl FittedPipeline {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        let found = probe
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::invalid("pipeline file has no schema_version"))?;
        if found != PIPELINE_SCHEMA_VERSION as u64 {
            return Err(Error::Schema {
                expected: PIPELINE_SCHEMA_VERSION,
                found: found as u32,
            });
        }
        Ok(serde_json::from_value(probe)?)
    }
}

/// Dense feature matrix with column metadata and (for labeled data) the
/// log-price target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<ColumnMeta>,
    pub values: DenseMatrix,
    pub target: Vec<f64>,
    pub ids: Vec<i64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}

fn review_texts(ds: &Dataset, id: i64) -> Vec<&str> {
    ds.reviews_for(id).iter().map(|r| r.comments.as_str()).collect()
}

fn build_columns(
    numeric: &[NumericFit],
    k: usize,
    neighbourhoods: &NeighbourhoodStats,
) -> Vec<ColumnMeta> {
    use ColumnSource::*;
    let mut cols = Vec::new();
    for f in numeric {
        cols.push(ColumnMeta::new(f.field.name(), Numeric));
    }
    for f in numeric {
        cols.push(ColumnMeta::new(format!("missing:{}", f.field.name()), MissingFlag));
    }
    cols.push(ColumnMeta::new("sentiment_mean", Sentiment));
    cols.push(ColumnMeta::new("review_count", Sentiment));
    cols.push(ColumnMeta::new("description_score", TfidfScore));
    let width = k.saturating_sub(1).to_string().len().max(2);
    for c in 0..k {
        cols.push(ColumnMeta::new(format!("cluster:{c:0width$}"), GeoCluster));
    }
    for n in &neighbourhoods.categories {
        cols.push(ColumnMeta::new(format!("neighbourhood:{n}"), Neighbourhood));
    }
    cols.push(ColumnMeta::new("neighbourhood_popularity", Neighbourhood));
    cols.push(ColumnMeta::new("host_is_superhost", OneHot));
    cols.push(ColumnMeta::new("room_type", Numeric));
    cols.push(ColumnMeta::new("missing:room_type", MissingFlag));
    cols.push(ColumnMeta::new(HOST_EXPERIENCE, Temporal));
    cols.push(ColumnMeta::new("missing:host_since", MissingFlag));
    cols
}

/// Fits all feature state on the training dataset.
pub fn fit_pipeline(
    train: &Dataset,
    settings: &FeatureSettings,
    lexicon: &SentimentLexicon,
    stopwords: &HashSet<String>,
    seed: u64,
) -> Result<FittedPipeline> {
    if train.listings.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let snapshot_date = match settings.snapshot_date {
        Some(d) => d,
        None => train.max_review_date().ok_or_else(|| {
            Error::Config("snapshot_date not set and the dataset has no reviews".into())
        })?,
    };

    let descriptions: Vec<&str> = train.listings.iter().map(|l| l.description.as_str()).collect();
    let vocabulary = textfeat::build_vocab(
        &descriptions,
        settings.vocab_min_df,
        settings.vocab_max_terms,
        stopwords,
    )?;
    let vectors: Vec<_> = descriptions
        .par_iter()
        .map(|d| textfeat::tfidf_vector(d, &vocabulary))
        .collect();
    let log_prices: Vec<f64> = train.listings.iter().map(|l| log_price(l.price_usd)).collect();
    let direction = textfeat::fit_description_direction(&vectors, &log_prices, vocabulary.len())?;

    let points: Vec<GeoPoint> = train
        .listings
        .iter()
        .map(|l| GeoPoint::new(l.latitude, l.longitude))
        .collect();
    let clusters = geofeat::kmeans_fit(
        &points,
        KMeansParams {
            k: settings.k_clusters,
            metric: settings.geo_metric,
            seed,
            max_iter: settings.kmeans_max_iter,
            tol: settings.kmeans_tol,
        },
    )?;
    let neighbourhoods = geofeat::fit_neighbourhood_stats(&train.listings, settings.top_neighbourhoods)?;

    let mut numeric = Vec::with_capacity(settings.numeric_columns.len());
    for &field in &settings.numeric_columns {
        let raw: Vec<Option<f64>> = train.listings.iter().map(|l| field.value(l)).collect();
        let present: Vec<f64> = raw.iter().flatten().copied().collect();
        let med = median(&present)
            .ok_or_else(|| Error::invalid(format!("column {} is empty in training data", field.name())))?;
        let imputed: Vec<Option<f64>> = raw.iter().map(|v| Some(v.unwrap_or(med))).collect();
        let scaler = fit_scaler(&imputed, settings.scaler_for(field.name()))?;
        numeric.push(NumericFit {
            field,
            median: med,
            scaler,
        });
    }

    let months: Vec<Option<f64>> = train
        .listings
        .iter()
        .map(|l| match host_experience_months(l.host_since, snapshot_date) {
            (_, true) => None,
            (m, false) => Some(m as f64),
        })
        .collect();
    let host_experience = if months.iter().any(Option::is_some) {
        fit_scaler(&months, settings.scaler_for(HOST_EXPERIENCE))?
    } else {
        ScalerParams {
            kind: settings.scaler_for(HOST_EXPERIENCE),
            a: 0.0,
            b: 0.0,
        }
    };

    let columns = build_columns(&numeric, clusters.k, &neighbourhoods);
    Ok(FittedPipeline {
        schema_version: PIPELINE_SCHEMA_VERSION,
        snapshot_date,
        lexicon: lexicon.clone(),
        vocabulary,
        direction,
        clusters,
        neighbourhoods,
        numeric,
        host_experience,
        room_type_levels: settings.room_type_levels.clone(),
        columns,
    })
}

fn listing_row(l: &ListingRecord, reviews: &[&str], fp: &FittedPipeline) -> Vec<f64> {
    let mut row = Vec::with_capacity(fp.columns.len());
    for f in &fp.numeric {
        let v = f.field.value(l).unwrap_or(f.median);
        row.push(apply_scaler(v, &f.scaler));
    }
    for f in &fp.numeric {
        row.push(if f.field.value(l).is_none() { 1.0 } else { 0.0 });
    }
    let (sentiment, count) = textfeat::listing_sentiment(reviews, &fp.lexicon);
    row.push(sentiment);
    row.push(count as f64);
    let vector = textfeat::tfidf_vector(&l.description, &fp.vocabulary);
    row.push(textfeat::description_score(&vector, &fp.direction));

    let cluster = fp.clusters.assign(GeoPoint::new(l.latitude, l.longitude));
    let k = fp.clusters.k;
    row.extend((0..k).map(|c| if c == cluster { 1.0 } else { 0.0 }));
    row.extend(one_hot(
        Some(geofeat::neighbourhood_label(l)),
        &fp.neighbourhoods.categories,
    ));
    row.push(geofeat::neighbourhood_popularity(l, &fp.neighbourhoods));
    row.push(if l.host_is_superhost == Some(true) { 1.0 } else { 0.0 });
    let (rank, unseen) = label_encode(l.room_type.as_deref(), &fp.room_type_levels);
    row.push(rank as f64);
    row.push(if unseen { 1.0 } else { 0.0 });
    let (months, missing) = host_experience_months(l.host_since, fp.snapshot_date);
    row.push(apply_scaler(months as f64, &fp.host_experience));
    row.push(if missing { 1.0 } else { 0.0 });
    row
}

/// Applies the fitted state to every listing of `ds`, in order.
pub fn assemble_matrix(ds: &Dataset, fp: &FittedPipeline) -> Result<FeatureMatrix> {
    let width = fp.columns.len();
    let rows: Vec<Vec<f64>> = ds
        .listings
        .par_iter()
        .map(|l| listing_row(l, &review_texts(ds, l.id), fp))
        .collect();
    let mut data = Vec::with_capacity(rows.len() * width);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Dimension {
                expected: width,
                got: r.len(),
            });
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {i}, column {}",
                fp.columns[j].name
            )));
        }
        data.extend_from_slice(r);
    }
    Ok(FeatureMatrix {
        columns: fp.columns.clone(),
        values: DenseMatrix::new(rows.len(), width, data)?,
        target: ds.listings.iter().map(|l| log_price(l.price_usd)).collect(),
        ids: ds.listings.iter().map(|l| l.id).collect(),
    })
}
