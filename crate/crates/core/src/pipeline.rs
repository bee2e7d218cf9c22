//! End-to-end commands driven by a JSON [`PipelineConfig`]: ingest, train,
//! predict and synth. The `airprice` binary is a thin wrapper over these.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::evalreport::{self, emit_report, metrics, model_file_name, ModelResult, RunResults, DEFAULT_RATIOS, DEFAULT_TOP_N};
use crate::fmt::float17;
use crate::geofeat::{cluster_svg, GeoPoint};
use crate::ingest::{self, CitySource, Dataset};
use crate::models::{self, fit_model, grid_search, ModelArtifact, ModelKind, ModelParams, ParamGrid};
use crate::synth::{self, SynthSpec};
use crate::textfeat::{self, SentimentLexicon};
use crate::transform::{self, assemble_matrix, fit_pipeline, FeatureSettings, FittedPipeline};

pub const DATASET_FILE: &str = "dataset.json";
pub const DROP_LOG_FILE: &str = "drop_log.json";
pub const PIPELINE_FILE: &str = "pipeline.json";
pub const CLUSTER_SVG_FILE: &str = "clusters.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityFiles {
    pub label: String,
    pub listings: PathBuf,
    pub reviews: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Overrides on top of the kind's defaults.
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ParamGrid>,
}

fn empty_object() -> serde_json::Value {
    json!({})
}

impl ModelConfig {
    pub fn defaults(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            params: empty_object(),
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratios: DEFAULT_RATIOS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cities: Vec<CityFiles>,
    /// Consolidated dataset written by `ingest`; used by `train` when set,
    /// otherwise `cities` are ingested on the fly.
    pub dataset: Option<PathBuf>,
    /// Tab-separated `token<TAB>valence`; the built-in lexicon when unset.
    pub lexicon: Option<PathBuf>,
    /// One word per line; the built-in list when unset.
    pub stopwords: Option<PathBuf>,
    pub features: FeatureSettings,
    pub split: SplitConfig,
    pub seed: u64,
    /// The first model also drives `importance.csv` / `importance.svg`.
    pub models: Vec<ModelConfig>,
    pub importance_top_n: usize,
    pub cluster_svg: bool,
    pub out: PathBuf,
    pub synth: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cities: Vec::new(),
            dataset: None,
            lexicon: None,
            stopwords: None,
            features: FeatureSettings::default(),
            split: SplitConfig::default(),
            seed: 0,
            models: vec![ModelConfig::defaults(ModelKind::Gbdt), ModelConfig::defaults(ModelKind::Ridge)],
            importance_top_n: DEFAULT_TOP_N,
            cluster_svg: false,
            out: PathBuf::from("out"),
            synth: SynthSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::from_json(&read_text(p)?),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    fn lexicon(&self) -> Result<SentimentLexicon> {
        match &self.lexicon {
            Some(p) => SentimentLexicon::parse(&read_text(p)?),
            None => Ok(SentimentLexicon::builtin()),
        }
    }

    fn stopwords(&self) -> Result<std::collections::HashSet<String>> {
        let text = match &self.stopwords {
            Some(p) => read_text(p)?,
            None => textfeat::DEFAULT_STOPWORDS.to_string(),
        };
        Ok(textfeat::parse_stopwords(&text))
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Runs `f` on a dedicated rayon pool of `threads` workers. Results do not
/// depend on the thread count.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Tracks files a command writes so they can be removed if it fails.
struct Outputs {
    dir: PathBuf,
    dir_created: bool,
    planned: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        let dir_created = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            dir_created,
            planned: Vec::new(),
        })
    }

    fn plan(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.planned.push(p.clone());
        p
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.plan(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    fn finish<T>(self, result: Result<T>) -> Result<T> {
        if result.is_err() {
            for p in &self.planned {
                let _ = std::fs::remove_file(p);
            }
            if self.dir_created {
                let _ = std::fs::remove_dir(&self.dir);
            }
        }
        result
    }
}

fn ingest_config(cfg: &PipelineConfig) -> Result<Dataset> {
    if cfg.cities.is_empty() {
        return Err(Error::Config("no cities configured".into()));
    }
    let mut raw = Vec::with_capacity(cfg.cities.len());
    for c in &cfg.cities {
        raw.push((read_bytes(&c.listings)?, read_bytes(&c.reviews)?));
    }
    let sources: Vec<CitySource<'_>> = cfg
        .cities
        .iter()
        .zip(&raw)
        .map(|(c, (l, r))| CitySource {
            label: &c.label,
            listings: l,
            reviews: r,
        })
        .collect();
    let ds = ingest::ingest_cities(&sources)?;
    log::info!(
        "ingested {} listings and {} reviews; dropped {}",
        ds.listings.len(),
        ds.review_count(),
        ds.drop_log.total()
    );
    Ok(ds)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Reads every configured city and writes `dataset.json` and
/// `drop_log.json` into `cfg.out`.
pub fn run_ingest(cfg: &PipelineConfig) -> Result<Dataset> {
    let ds = ingest_config(cfg)?;
    let mut out = Outputs::new(&cfg.out)?;
    let result = (|| {
        out.write(DATASET_FILE, serde_json::to_string(&ds)?.as_bytes())?;
        out.write(DROP_LOG_FILE, (serde_json::to_string_pretty(&ds.drop_log)? + "\n").as_bytes())?;
        Ok(())
    })();
    out.finish(result).map(|_| ds)
}

fn dataset_summary(ds: &Dataset) -> serde_json::Value {
    let mut cities: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &ds.listings {
        *cities.entry(l.city.as_str()).or_default() += 1;
    }
    json!({
        "listings": ds.listings.len(),
        "reviews": ds.review_count(),
        "cities": cities,
        "drops": ds.drop_log,
    })
}

fn train_model(
    mc: &ModelConfig,
    train: &transform::FeatureMatrix,
    val: &transform::FeatureMatrix,
    test: &transform::FeatureMatrix,
) -> Result<ModelResult> {
    let (params, artifact, grid) = match &mc.grid {
        Some(g) => {
            log::info!("grid search for {} over {} parameters", mc.kind.as_str(), g.len());
            let r = grid_search(mc.kind, &mc.params, g, (&train.values, &train.target), (&val.values, &val.target))?;
            (r.best, r.best_model, Some(r.cells))
        }
        None => {
            let params = ModelParams::from_overrides(mc.kind, &mc.params)?;
            log::info!("fitting {} on {} rows", mc.kind.as_str(), train.rows());
            let artifact = fit_model(&params, &train.values, &train.target)?;
            (params, artifact, None)
        }
    };
    let mut warnings = Vec::new();
    if let ModelArtifact::Ridge(r) = &artifact {
        if r.lambda_floored {
            warnings.push(format!("singular system; lambda floored at {}", models::ridge::LAMBDA_FLOOR));
        }
    }
    let score = |m: &transform::FeatureMatrix| metrics(&m.target, &artifact.predict(&m.values)?);
    Ok(ModelResult {
        train: score(train)?,
        val: score(val)?,
        test: score(test)?,
        params: params.params_json(),
        artifact,
        grid,
        warnings,
    })
}

pub struct TrainOutcome {
    pub dataset: Dataset,
    pub pipeline: FittedPipeline,
    pub results: RunResults,
    pub written: Vec<PathBuf>,
}

/// Splits, fits features on the training part, trains every configured
/// model and writes the report files into `cfg.out`.
pub fn run_train(cfg: &PipelineConfig) -> Result<TrainOutcome> {
    if cfg.models.is_empty() {
        return Err(Error::Config("no models configured".into()));
    }
    for (i, m) in cfg.models.iter().enumerate() {
        if cfg.models[..i].iter().any(|p| p.kind == m.kind) {
            return Err(Error::Config(format!("model kind {} configured twice", m.kind.as_str())));
        }
    }
    let ds = match &cfg.dataset {
        Some(p) => load_dataset(p)?,
        None => ingest_config(cfg)?,
    };
    let split = evalreport::split_dataset(ds.listings.len(), cfg.split.ratios, cfg.seed)?;
    let (train_ds, val_ds, test_ds) = (ds.subset(&split.train), ds.subset(&split.val), ds.subset(&split.test));
    let pipeline = fit_pipeline(&train_ds, &cfg.features, &cfg.lexicon()?, &cfg.stopwords()?, cfg.seed)?;
    let (train, val, test) = (
        assemble_matrix(&train_ds, &pipeline)?,
        assemble_matrix(&val_ds, &pipeline)?,
        assemble_matrix(&test_ds, &pipeline)?,
    );
    log::info!("feature matrix has {} columns", train.values.cols());

    let mut models = Vec::with_capacity(cfg.models.len());
    for mc in &cfg.models {
        models.push(train_model(mc, &train, &val, &test)?);
    }
    let results = RunResults {
        config: serde_json::to_value(cfg)?,
        dataset_summary: dataset_summary(&ds),
        split,
        pipeline_json: pipeline.to_json()?,
        columns: train.column_names().into_iter().map(String::from).collect(),
        models,
    };

    let mut out = Outputs::new(&cfg.out)?;
    for name in ["report.json", "importance.csv", "importance.svg", PIPELINE_FILE] {
        out.plan(name);
    }
    for m in &results.models {
        out.plan(&model_file_name(m.artifact.kind().as_str()));
    }
    let emitted = (|| {
        let mut written = emit_report(&results, &cfg.out, cfg.importance_top_n)?;
        if cfg.cluster_svg {
            let pts: Vec<GeoPoint> = train_ds.listings.iter().map(|l| GeoPoint::new(l.latitude, l.longitude)).collect();
            written.push(out.write(CLUSTER_SVG_FILE, cluster_svg(&pts, &pipeline.clusters).as_bytes())?);
        }
        Ok(written)
    })();
    let written = out.finish(emitted)?;
    Ok(TrainOutcome {
        dataset: ds,
        pipeline,
        results,
        written,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: i64,
    pub ln_price: f64,
}

/// Scores a listings CSV (price optional) with a saved pipeline and model.
pub fn predict_listings(
    model: &ModelArtifact,
    pipeline: &FittedPipeline,
    listings_csv: &[u8],
    reviews_csv: Option<&[u8]>,
    city_label: &str,
) -> Result<Vec<Prediction>> {
    if model.n_features() != pipeline.columns.len() {
        return Err(Error::Dimension {
            expected: pipeline.columns.len(),
            got: model.n_features(),
        });
    }
    let listings = ingest::parse_listings_unpriced(listings_csv, city_label)?;
    let mut drops = listings.drops;
    let reviews = match reviews_csv {
        Some(r) => {
            let parsed = ingest::parse_reviews(r)?;
            drops.merge(&parsed.drops);
            parsed.records
        }
        None => Vec::new(),
    };
    let ds = ingest::join_dataset(listings.records, reviews, drops)?;
    if ds.drop_log.total() > 0 {
        log::warn!("skipped rows while scoring: {:?}", ds.drop_log.0);
    }
    if ds.listings.is_empty() {
        return Ok(Vec::new());
    }
    let m = assemble_matrix(&ds, pipeline)?;
    let pred = model.predict(&m.values)?;
    Ok(m.ids.into_iter().zip(pred).map(|(id, ln_price)| Prediction { id, ln_price }).collect())
}

pub fn predictions_csv(preds: &[Prediction]) -> String {
    let mut out = String::from("id,ln_price_pred,price_pred\n");
    for p in preds {
        let _ = writeln!(out, "{},{},{}", p.id, float17(p.ln_price), float17(transform::inverse_log_price(p.ln_price)));
    }
    out
}

pub struct PredictArgs<'a> {
    pub model: &'a Path,
    pub pipeline: &'a Path,
    pub listings: &'a Path,
    pub reviews: Option<&'a Path>,
    pub city: &'a str,
}

pub fn run_predict(args: &PredictArgs<'_>) -> Result<Vec<Prediction>> {
    let model = ModelArtifact::from_json(&read_text(args.model)?)?;
    let pipeline = FittedPipeline::from_json(&read_text(args.pipeline)?)?;
    let listings = read_bytes(args.listings)?;
    let reviews = args.reviews.map(read_bytes).transpose()?;
    predict_listings(&model, &pipeline, &listings, reviews.as_deref(), args.city)
}

pub const SYNTH_LISTINGS: &str = "listings.csv";
pub const SYNTH_REVIEWS: &str = "reviews.csv";
pub const SYNTH_TRUTH: &str = "truth.csv";

/// Writes `listings.csv`, `reviews.csv` and `truth.csv` into `out_dir`.
pub fn run_synth(spec: &SynthSpec, out_dir: &Path) -> Result<synth::SynthOutput> {
    let generated = synth::generate(spec)?;
    let mut out = Outputs::new(out_dir)?;
    let result = (|| {
        out.write(SYNTH_LISTINGS, &generated.listings_csv)?;
        out.write(SYNTH_REVIEWS, &generated.reviews_csv)?;
        out.write(SYNTH_TRUTH, &generated.truth_csv())?;
        Ok(())
    })();
    out.finish(result).map(|_| generated)
}

/// A config pointing at the files written by [`run_synth`] in `dir`.
pub fn synth_cities(dir: &Path) -> Vec<CityFiles> {
    vec![CityFiles {
        label: "synth".into(),
        listings: dir.join(SYNTH_LISTINGS),
        reviews: dir.join(SYNTH_REVIEWS),
    }]
}
