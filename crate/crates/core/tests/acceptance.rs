//! Acceptance checks. Runs as a plain binary (`harness = false`) so every
//! criterion prints one PASS/FAIL line; exits non-zero if any gating
//! criterion fails.
//!
//! Criterion 8 needs real exports: point `AIRPRICE_REAL_CONFIG` at a
//! pipeline config listing them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use airprice::evalreport::feature_importance;
use airprice::geofeat::{self, GeoPoint, KMeansParams};
use airprice::ingest::ListingRecord;
use airprice::models::{
    find_best_split, gbdt_fit, gbdt_predict, grid_search, mlp_fit, mlp_predict, ridge_fit, GbdtParams, Growth,
    ModelArtifact, ModelKind, ParamGrid, TreeNode,
};
use airprice::models::gbdt::gbdt_fit_with_history;
use airprice::models::mlp::MlpModel;
use airprice::pipeline::{self, PipelineConfig, TrainOutcome};
use airprice::synth::SynthSpec;
use airprice::textfeat::{self, SentimentLexicon};
use airprice::transform::{apply_scaler, fit_scaler, host_experience_months, log_price, ColumnSource, ScalerKind};
use airprice::DenseMatrix;

const HAVERSINE_TOL_KM: f64 = 1.0;
const TFIDF_TOL: f64 = 1e-5;
const RIDGE_TOL: f64 = 1e-9;
const SPLIT_FUZZ_INSTANCES: usize = 60;
const SPLIT_FLOAT_REL_TOL: f64 = 1e-9;
const MONO_DATASETS: usize = 10;
const MONO_ROUNDS: usize = 100;
const MONO_REL_SLACK: f64 = 1e-12;
const MONO_ABS_SLACK: f64 = 1e-15;
const GRAD_NETWORKS: usize = 20;
const GRAD_H: f64 = 1e-5;
const GRAD_MAX_REL_ERR: f64 = 1e-4;
const CEILING_FRACTION: f64 = 0.9;
const REAL_DATA_MIN_R2: f64 = 0.5;
const DETERMINISM_FILES: [&str; 5] = [
    "report.json",
    "importance.csv",
    "pipeline.json",
    "model_gbdt.json",
    "model_ridge.json",
];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, format!("{name}: got {got}, want {want} ± {tol}"))
}

// ---------------------------------------------------------------------------
// 1. formula oracles

/// Great-circle distance by the spherical law of cosines, a different
/// formula from the library's haversine.
fn cosine_law_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dl = (b.1 - a.1).to_radians();
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    6371.0 * c.clamp(-1.0, 1.0).acos()
}

fn listing(id: i64, neighbourhood: &str) -> ListingRecord {
    ListingRecord {
        id,
        city: "test".into(),
        latitude: 37.0,
        longitude: -122.0,
        price_usd: 100.0,
        accommodates: 2,
        availability_365: 0,
        reviews_per_month: None,
        host_is_superhost: None,
        host_since: None,
        neighbourhood: Some(neighbourhood.into()),
        room_type: None,
        bedrooms: None,
        description: String::new(),
    }
}

fn oracle_geo() -> Result<(), String> {
    let la = (34.0522, -118.2437);
    let sf = (37.7749, -122.4194);
    let lib = geofeat::haversine_km(GeoPoint::new(la.0, la.1), GeoPoint::new(sf.0, sf.1));
    close("haversine LA-SF", lib, 559.0, HAVERSINE_TOL_KM)?;
    close("haversine vs cosine law", lib, cosine_law_km(la, sf), 1e-6)?;
    let anti = geofeat::haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 180.0));
    close("antipodal", anti, std::f64::consts::PI * 6371.0, 1e-6)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<GeoPoint> = (0..1000)
        .map(|_| GeoPoint::new(rng.random_range(32.0..38.0), rng.random_range(-122.0..-116.0)))
        .collect();
    let params = KMeansParams { k: 10, seed: 3, ..Default::default() };
    let a = geofeat::kmeans_fit(&pts, params).map_err(|e| e.to_string())?;
    let b = geofeat::kmeans_fit(&pts, params).map_err(|e| e.to_string())?;
    let bits = |m: &geofeat::ClusterModel| -> Vec<(u64, u64)> {
        m.centroids.iter().map(|c| (c.latitude.to_bits(), c.longitude.to_bits())).collect()
    };
    ensure(bits(&a) == bits(&b), "k-means centroids differ between identical runs")?;

    let train: Vec<ListingRecord> = (0..50).map(|i| listing(i, "Mission")).collect();
    let stats = geofeat::fit_neighbourhood_stats(&train, 10).map_err(|e| e.to_string())?;
    let pop = geofeat::neighbourhood_popularity(&listing(99, "Mission"), &stats);
    close("popularity", pop, 51f64.ln(), 1e-12)?;
    close("popularity value", pop, 3.93183, 1e-5)
}

fn oracle_text() -> Result<(), String> {
    let lex = SentimentLexicon::new(BTreeMap::from([("great".into(), 3), ("dirty".into(), -2)]))
        .map_err(|e| e.to_string())?;
    let s1 = textfeat::score_review("great place but dirty bathroom", &lex);
    close("sentiment mixed", s1, (3.0 - 2.0) / 2.0 / 3.0, 1e-12)?;
    let good = SentimentLexicon::new(BTreeMap::from([("good".into(), 3)])).map_err(|e| e.to_string())?;
    let s2 = textfeat::score_review("good good good", &good);
    close("sentiment saturated", s2, 1.0, 1e-12)?;
    // mean over two reviews scored with their own lexicons
    let mean = (s1 + s2) / 2.0;
    close("sentiment mean", mean, 0.58335, 1e-4)?;
    let (m, n) = textfeat::listing_sentiment(&["good good good", "good"], &good);
    ensure(n == 2 && m == 1.0, format!("listing sentiment {m} over {n}"))?;

    let docs = ["cozy beach house", "beach condo"];
    let none = HashSet::new();
    let vocab = textfeat::build_vocab(&docs, 1, 10, &none).map_err(|e| e.to_string())?;
    ensure(vocab.terms() == ["beach", "condo", "cozy", "house"], format!("terms {:?}", vocab.terms()))?;
    // independent df count over whitespace tokens
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        for t in d.split_whitespace().collect::<HashSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let n_docs = docs.len() as f64;
    for (i, t) in vocab.terms().iter().enumerate() {
        let want = ((1.0 + n_docs) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0;
        close(&format!("idf({t})"), vocab.idf()[i], want, TFIDF_TOL)?;
    }
    close("idf(beach)", vocab.idf()[0], 1.0, TFIDF_TOL)?;
    close("idf(cozy)", vocab.idf()[2], 1.405465, TFIDF_TOL)?;
    let only = textfeat::build_vocab(&docs, 2, 10, &none).map_err(|e| e.to_string())?;
    ensure(only.terms() == ["beach"], format!("min_df=2 terms {:?}", only.terms()))?;

    let v = textfeat::tfidf_vector("cozy beach house", &vocab);
    let raw = [1.0, 0.0, 1.405465, 1.405465];
    let len = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    close("tfidf length", len, 2.22501, TFIDF_TOL)?;
    for (i, r) in raw.iter().enumerate() {
        close(&format!("tfidf[{i}]"), v.get(i), r / len, TFIDF_TOL)?;
    }
    close("tfidf beach", v.get(0), 0.44944, TFIDF_TOL)?;
    let bb = textfeat::tfidf_vector("beach beach", &vocab);
    ensure(bb.0 == vec![(0, 1.0)], format!("beach beach → {:?}", bb.0))?;

    let e_beach = textfeat::tfidf_vector("beach", &vocab);
    let e_condo = textfeat::tfidf_vector("condo", &vocab);
    let dir = textfeat::fit_description_direction(&[e_beach, e_condo], &[400f64.ln(), 100f64.ln()], vocab.len())
        .map_err(|e| e.to_string())?;
    let (wb, wc) = (dir.weights[0], dir.weights[1]);
    ensure(wb > 0.0 && wc < 0.0 && (wb + wc).abs() < 1e-12, format!("direction beach {wb}, condo {wc}"))?;
    close("raw direction norm", dir.norm, 2f64.sqrt() * (4f64.ln() / 2.0), 1e-12)
}

fn oracle_transform() -> Result<(), String> {
    let std = fit_scaler(&[Some(2.0), Some(4.0), Some(6.0)], ScalerKind::Standard).map_err(|e| e.to_string())?;
    close("standard a", std.a, 4.0, 1e-12)?;
    close("standard b", std.b, (8.0f64 / 3.0).sqrt(), 1e-12)?;
    let vals: Vec<Option<f64>> = [1.0, 2.0, 3.0, 4.0, 100.0].into_iter().map(Some).collect();
    let rob = fit_scaler(&vals, ScalerKind::Robust).map_err(|e| e.to_string())?;
    ensure(rob.a == 3.0 && rob.b == 2.0, format!("robust ({}, {})", rob.a, rob.b))?;
    let scaled = apply_scaler(100.0, &rob);
    ensure(scaled == 48.5, format!("robust scaled 100 → {scaled}"))?;

    let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
    ensure(
        host_experience_months(Some(d("2019-01-15")), d("2021-01-15")) == (24, false),
        "host months, same day",
    )?;
    ensure(
        host_experience_months(Some(d("2019-01-15")), d("2021-01-14")) == (23, false),
        "host months, day before",
    )?;
    close("log price", log_price(100.0), 4.60517, 1e-5)
}

fn oracle_models() -> Result<(), String> {
    let x = DenseMatrix::column(&[1.0, 2.0, 3.0]);
    let y = [2.0, 4.0, 6.0];
    let m = ridge_fit(&x, &y, 1.0).map_err(|e| e.to_string())?;
    // centred: Sxx = 2, Sxy = 4
    let w = 4.0 / (2.0 + 1.0);
    close("ridge w", m.coefficients[0], w, RIDGE_TOL)?;
    close("ridge c", m.intercept, 4.0 - w * 2.0, RIDGE_TOL)?;
    close("ridge w value", m.coefficients[0], 4.0 / 3.0, RIDGE_TOL)?;

    let x = DenseMatrix::column(&[0.0, 0.0, 1.0, 1.0]);
    let y = [0.0, 0.0, 10.0, 10.0];
    let stump = |lr: f64| GbdtParams {
        n_estimators: 1,
        learning_rate: lr,
        growth: Growth::DepthWise,
        max_depth: 1,
        min_samples_leaf: 1,
        alpha: 0.0,
        lambda: 0.0,
        ..Default::default()
    };
    let g = gbdt_fit(&x, &y, &stump(1.0)).map_err(|e| e.to_string())?;
    ensure(g.base_score == 5.0, format!("base {}", g.base_score))?;
    let want_tree = TreeNode::Split {
        feature: 0,
        threshold: 0.5,
        left: Box::new(TreeNode::Leaf { value: -5.0 }),
        right: Box::new(TreeNode::Leaf { value: 5.0 }),
    };
    ensure(g.trees == vec![want_tree], format!("tree {:?}", g.trees))?;
    ensure(g.feature_gain == vec![100.0], format!("gain {:?}", g.feature_gain))?;
    let p = gbdt_predict(&g, &x).map_err(|e| e.to_string())?;
    ensure(p == vec![0.0, 0.0, 10.0, 10.0], format!("lr=1 predictions {p:?}"))?;
    let p1 = gbdt_predict(&g, &DenseMatrix::column(&[1.0])).map_err(|e| e.to_string())?;
    ensure(p1 == vec![10.0], format!("x=[1] → {p1:?}"))?;
    let g01 = gbdt_fit(&x, &y, &stump(0.1)).map_err(|e| e.to_string())?;
    let p = gbdt_predict(&g01, &x).map_err(|e| e.to_string())?;
    ensure(p == vec![4.5, 4.5, 5.5, 5.5], format!("lr=0.1 predictions {p:?}"))?;
    let resid: Vec<f64> = y.iter().map(|v| v - 5.0).collect();
    let s = find_best_split(&[0, 1, 2, 3], &x, &resid, &stump(1.0)).ok_or("no split found")?;
    ensure((s.feature, s.threshold, s.gain) == (0, 0.5, 100.0), format!("split {s:?}"))?;

    // only feature 0 carries signal; feature 1 is constant
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 8) as f64, 1.0]).collect();
    let x2 = DenseMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let y2: Vec<f64> = (0..40).map(|i| ((i % 8) as f64).powi(2)).collect();
    let g2 = gbdt_fit(&x2, &y2, &GbdtParams { n_estimators: 20, min_samples_leaf: 2, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let imp = feature_importance(&ModelArtifact::Gbdt(g2), &["a".into(), "b".into()]).map_err(|e| e.to_string())?;
    ensure(
        imp[0].feature == "a" && imp[0].score == 1.0 && imp[1].score == 0.0,
        format!("importance {imp:?}"),
    )?;

    let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
    let xl = DenseMatrix::column(&xs);
    let yl: Vec<f64> = xs.iter().map(|v| 3.0 * v - 1.0).collect();
    let grid: ParamGrid = [("lambda".to_string(), vec![serde_json::json!(0.0), serde_json::json!(1e9)])]
        .into_iter()
        .collect();
    let r = grid_search(ModelKind::Ridge, &serde_json::json!({}), &grid, (&xl, &yl), (&xl, &yl))
        .map_err(|e| e.to_string())?;
    ensure(r.best_index == 0, format!("ridge grid picked cell {}", r.best_index))?;

    let xs: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * i as f64 / 199.0).collect();
    let yl: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
    let xm = DenseMatrix::column(&xs);
    let net = mlp_fit(&xm, &yl, &[1, 8, 1], 500, 20, 0.01, 3).map_err(|e| e.to_string())?;
    let pred = mlp_predict(&net, &xm).map_err(|e| e.to_string())?;
    let mse = pred.iter().zip(&yl).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / yl.len() as f64;
    ensure(mse < 1e-2, format!("mlp y=2x training mse {mse}"))
}

fn criterion_1() -> Check {
    oracle_geo()?;
    oracle_text()?;
    oracle_transform()?;
    oracle_models()?;
    Ok("geo, text, transform and model examples match their oracles".into())
}

// ---------------------------------------------------------------------------
// 2. split finding vs brute force

/// Every feature, every midpoint between adjacent distinct node values,
/// sums recomputed from scratch for each candidate.
fn brute_force_split(rows: &[usize], x: &DenseMatrix, r: &[f64], p: &GbdtParams) -> Option<(usize, f64, f64)> {
    let score = |s: f64, n: usize| {
        let d = n as f64 + p.lambda;
        if d == 0.0 { 0.0 } else { s * s / d }
    };
    let mut best: Option<(usize, f64, f64)> = None;
    let mut best_gain = p.min_gain;
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| x.get(i, f)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut sl, mut nl, mut sr, mut nr) = (0.0, 0, 0.0, 0);
            for &i in rows {
                if x.get(i, f) <= t {
                    sl += r[i];
                    nl += 1;
                } else {
                    sr += r[i];
                    nr += 1;
                }
            }
            if nl < p.min_samples_leaf || nr < p.min_samples_leaf {
                continue;
            }
            let gain = score(sl, nl) + score(sr, nr) - score(sl + sr, nl + nr);
            if gain > best_gain {
                best_gain = gain;
                best = Some((f, t, gain));
            }
        }
    }
    best
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut with_split = 0;
    for inst in 0..SPLIT_FUZZ_INSTANCES {
        let integer = inst % 2 == 0;
        let n = rng.random_range(2..=200);
        let p = rng.random_range(1..=5);
        let levels = rng.random_range(2..=12);
        let data: Vec<f64> = (0..n * p)
            .map(|_| {
                if rng.random_bool(0.5) {
                    rng.random_range(0..levels) as f64
                } else {
                    (rng.random_range(-100.0..100.0f64) * 4.0).round() / 4.0
                }
            })
            .collect();
        let x = DenseMatrix::new(n, p, data).map_err(|e| e.to_string())?;
        let r: Vec<f64> = (0..n)
            .map(|_| {
                if integer {
                    rng.random_range(-20..=20) as f64
                } else {
                    rng.random_range(-3.0..3.0)
                }
            })
            .collect();
        let rows: Vec<usize> = if rng.random_bool(0.5) {
            (0..n).collect()
        } else {
            (0..n).filter(|_| rng.random_bool(0.6)).collect()
        };
        if rows.is_empty() {
            continue;
        }
        let params = GbdtParams {
            min_samples_leaf: rng.random_range(1..=10),
            lambda: [0.0, 1.0, 2.5][rng.random_range(0..3)],
            min_gain: [0.0, 1.0][rng.random_range(0..2)],
            ..Default::default()
        };
        let got = find_best_split(&rows, &x, &r, &params).map(|s| (s.feature, s.threshold, s.gain));
        let want = brute_force_split(&rows, &x, &r, &params);
        with_split += usize::from(want.is_some());
        let ok = if integer {
            got == want
        } else {
            match (got, want) {
                (None, None) => true,
                // a different split is accepted only as a rounding-level tie
                (Some(g), Some(w)) => (g.2 - w.2).abs() <= SPLIT_FLOAT_REL_TOL * w.2.abs().max(1.0),
                // a candidate within rounding of min_gain may land on either side
                (Some(g), None) | (None, Some(g)) => (g.2 - params.min_gain).abs() <= SPLIT_FLOAT_REL_TOL,
            }
        };
        ensure(ok, format!("instance {inst}: got {got:?}, brute force {want:?}"))?;
    }
    Ok(format!("{SPLIT_FUZZ_INSTANCES} instances agree ({with_split} with a split)"))
}

// ---------------------------------------------------------------------------
// 3. boosting monotonicity

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for d in 0..MONO_DATASETS {
        let n = rng.random_range(50..=300);
        let p = rng.random_range(1..=6);
        let data: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = DenseMatrix::new(n, p, data).map_err(|e| e.to_string())?;
        let y: Vec<f64> = (0..n)
            .map(|i| x.get(i, 0).sin() * 2.0 + x.get(i, p - 1).powi(2) + rng.random_range(-0.5..0.5))
            .collect();
        for growth in [Growth::DepthWise, Growth::LeafWise] {
            let params = GbdtParams {
                n_estimators: MONO_ROUNDS,
                learning_rate: rng.random_range(0.05..=1.0),
                growth,
                max_depth: rng.random_range(1..=5),
                num_leaves: rng.random_range(2..=16),
                min_samples_leaf: rng.random_range(1..=10),
                alpha: rng.random_range(0.0..1.0),
                lambda: rng.random_range(0.0..2.0),
                min_gain: 0.0,
            };
            let (_, hist) = gbdt_fit_with_history(&x, &y, &params).map_err(|e| e.to_string())?;
            for (t, w) in hist.windows(2).enumerate() {
                ensure(
                    w[1] <= w[0] * (1.0 + MONO_REL_SLACK) + MONO_ABS_SLACK,
                    format!("dataset {d} {growth:?}: round {} mse {} > {}", t + 1, w[1], w[0]),
                )?;
                worst = worst.max(w[1] - w[0]);
            }
        }
    }
    Ok(format!(
        "{MONO_DATASETS} datasets x {MONO_ROUNDS} rounds x 2 growths; largest per-round increase {worst:.3e}"
    ))
}

// ---------------------------------------------------------------------------
// 4. MLP gradient check

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for net_i in 0..GRAD_NETWORKS {
        let mut sizes = vec![rng.random_range(1..=4)];
        for _ in 0..rng.random_range(1..=2) {
            sizes.push(rng.random_range(1..=5));
        }
        sizes.push(1);
        // random biases too: zero biases put dead-unit pre-activations exactly
        // on the ReLU kink, where central differences are meaningless
        let mut net = MlpModel::zeros(&sizes).map_err(|e| e.to_string())?;
        let params: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_params_flat(&params);
        let n = 5;
        let data: Vec<f64> = (0..n * sizes[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
        let x = DenseMatrix::new(n, sizes[0], data).map_err(|e| e.to_string())?;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<usize> = (0..n).collect();
        let (_, grad) = net.loss_and_grad(&x, &y, &rows);
        let base = net.params_flat();
        let mut probe = net.clone();
        for (k, &analytic) in grad.iter().enumerate() {
            let mut plus = base.clone();
            plus[k] += GRAD_H;
            probe.set_params_flat(&plus);
            let lp = probe.loss_and_grad(&x, &y, &rows).0;
            let mut minus = base.clone();
            minus[k] -= GRAD_H;
            probe.set_params_flat(&minus);
            let lm = probe.loss_and_grad(&x, &y, &rows).0;
            let numeric = (lp - lm) / (2.0 * GRAD_H);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure(
                rel < GRAD_MAX_REL_ERR,
                format!("network {net_i} {sizes:?} param {k}: analytic {analytic}, numeric {numeric}"),
            )?;
        }
    }
    Ok(format!("{GRAD_NETWORKS} networks, max relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 5-7. synthetic end to end

fn synth_spec() -> SynthSpec {
    SynthSpec {
        n_listings: 5000,
        seed: 1,
        noise_sigma: 0.15,
        ..Default::default()
    }
}

fn train_config(data: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_json(
        r#"{
          "seed": 1,
          "models": [
            {"kind": "gbdt",
             "params": {"growth": "leaf_wise", "n_estimators": 1000, "learning_rate": 0.1, "alpha": 0.5},
             "grid": {"num_leaves": [4, 8, 16, 31], "min_samples_leaf": [20, 50, 100]}},
            {"kind": "ridge", "grid": {"lambda": [0.01, 0.1, 1, 10, 100]}}
          ]
        }"#,
    )
    .expect("acceptance config parses");
    // one cluster per synthetic city
    cfg.features.k_clusters = synth_spec().n_cities;
    cfg.cities = pipeline::synth_cities(data);
    cfg.out = out.to_path_buf();
    cfg
}

struct EndToEnd {
    data: tempfile::TempDir,
    truth: HashMap<i64, f64>,
    first: TrainOutcome,
    first_bytes: Vec<Vec<u8>>,
    out: tempfile::TempDir,
    seconds: f64,
}

fn read_outputs(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    DETERMINISM_FILES
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}")))
        .collect()
}

fn end_to_end() -> Result<EndToEnd, String> {
    let data = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let generated = pipeline::run_synth(&synth_spec(), data.path()).map_err(|e| e.to_string())?;
    let truth = generated.truth.iter().map(|t| (t.id, t.ln_price_true)).collect();
    let cfg = train_config(data.path(), out.path());
    let start = Instant::now();
    let first = pipeline::with_threads(1, || pipeline::run_train(&cfg))
        .and_then(|r| r)
        .map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let first_bytes = read_outputs(out.path())?;
    Ok(EndToEnd {
        data,
        truth,
        first,
        first_bytes,
        out,
        seconds,
    })
}

fn r2(y: &[f64], pred: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    let sst: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    1.0 - sse / sst
}

fn criterion_5(e: &EndToEnd) -> Check {
    let ds = &e.first.dataset;
    let test = &e.first.results.split.test;
    let observed: Vec<f64> = test.iter().map(|&i| ds.listings[i].price_usd.ln()).collect();
    let truth: Vec<f64> = test
        .iter()
        .map(|&i| e.truth.get(&ds.listings[i].id).copied().ok_or("listing missing from truth table"))
        .collect::<Result<_, _>>()?;
    let ceiling = r2(&observed, &truth);
    let test_r2 = |kind: ModelKind| {
        e.first
            .results
            .models
            .iter()
            .find(|m| m.artifact.kind() == kind)
            .map(|m| m.test.r2)
            .ok_or(format!("{} missing from results", kind.as_str()))
    };
    let (gbdt, ridge) = (test_r2(ModelKind::Gbdt)?, test_r2(ModelKind::Ridge)?);
    let detail = format!(
        "ceiling {ceiling:.4}, gbdt {gbdt:.4} (needs >= {:.4}), ridge {ridge:.4}, train {:.0}s",
        CEILING_FRACTION * ceiling,
        e.seconds
    );
    ensure(gbdt >= CEILING_FRACTION * ceiling, format!("gbdt below ceiling fraction: {detail}"))?;
    ensure(gbdt > ridge, format!("gbdt does not beat ridge: {detail}"))?;
    Ok(detail)
}

fn criterion_6(e: &EndToEnd) -> Check {
    let gbdt = e
        .first
        .results
        .models
        .iter()
        .find(|m| m.artifact.kind() == ModelKind::Gbdt)
        .ok_or("gbdt missing")?;
    let imp = feature_importance(&gbdt.artifact, &e.first.results.columns).map_err(|e| e.to_string())?;
    let by_name: HashMap<&str, f64> = imp.iter().map(|i| (i.feature.as_str(), i.score)).collect();
    let cluster: f64 = e
        .first
        .pipeline
        .columns
        .iter()
        .filter(|c| c.source == ColumnSource::GeoCluster)
        .map(|c| by_name[c.name.as_str()])
        .sum();
    let sentiment = by_name["sentiment_mean"];
    let description = by_name["description_score"];
    let detail = format!("cluster block {cluster:.4}, sentiment_mean {sentiment:.4}, description_score {description:.4}");
    ensure(cluster > 0.0 && sentiment > 0.0 && description > 0.0, detail.clone())?;
    Ok(detail)
}

fn criterion_7(e: &EndToEnd) -> Check {
    let cfg = train_config(e.data.path(), e.out.path());
    let mut runs = 1;
    for threads in [1, 4, 4] {
        std::fs::remove_dir_all(e.out.path()).map_err(|e| e.to_string())?;
        pipeline::with_threads(threads, || pipeline::run_train(&cfg))
            .and_then(|r| r)
            .map_err(|e| e.to_string())?;
        runs += 1;
        let bytes = read_outputs(e.out.path())?;
        for (f, (a, b)) in DETERMINISM_FILES.iter().zip(e.first_bytes.iter().zip(&bytes)) {
            ensure(a == b, format!("{f} differs in run {runs} (threads {threads})"))?;
        }
    }
    Ok(format!("{runs} runs at threads 1,1,4,4 byte-identical over {}", DETERMINISM_FILES.join(", ")))
}

// ---------------------------------------------------------------------------
// 8. optional real data

fn criterion_8() -> Option<Check> {
    let path = std::env::var_os("AIRPRICE_REAL_CONFIG")?;
    Some((|| {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = PipelineConfig::load(Some(Path::new(&path))).map_err(|e| e.to_string())?;
        cfg.out = out.path().to_path_buf();
        cfg.models = vec![pipeline::ModelConfig::defaults(ModelKind::Gbdt)];
        let outcome = pipeline::with_threads(1, || pipeline::run_train(&cfg))
            .and_then(|r| r)
            .map_err(|e| e.to_string())?;
        let r2 = outcome.results.models[0].test.r2;
        ensure(r2 >= REAL_DATA_MIN_R2, format!("test r2 {r2:.4} < {REAL_DATA_MIN_R2}"))?;
        Ok(format!("{} listings, test r2 {r2:.4}", outcome.dataset.listings.len()))
    })())
}

// ---------------------------------------------------------------------------

fn run(label: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(d) => println!("PASS  {label}: {d} [{secs:.1}s]"),
        Err(d) => println!("FAIL  {label}: {d} [{secs:.1}s]"),
    }
    outcome.is_ok()
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    ok &= run("criterion 1 (formula oracles)", criterion_1);
    ok &= run("criterion 2 (split finding vs brute force)", criterion_2);
    ok &= run("criterion 3 (boosting monotonicity)", criterion_3);
    ok &= run("criterion 4 (mlp gradient check)", criterion_4);
    match end_to_end() {
        Ok(e) => {
            ok &= run("criterion 5 (synthetic end to end)", || criterion_5(&e));
            ok &= run("criterion 6 (feature importance)", || criterion_6(&e));
            ok &= run("criterion 7 (determinism)", || criterion_7(&e));
        }
        Err(err) => {
            for c in ["5 (synthetic end to end)", "6 (feature importance)", "7 (determinism)"] {
                println!("FAIL  criterion {c}: end-to-end run failed: {err}");
            }
            ok = false;
        }
    }
    match criterion_8() {
        None => println!("SKIP  criterion 8 (real data): set AIRPRICE_REAL_CONFIG to a pipeline config to run"),
        // informational only
        Some(c) => match c {
            Ok(d) => println!("PASS  criterion 8 (real data): {d}"),
            Err(d) => println!("INFO  criterion 8 (real data) below target: {d}"),
        },
    }
    if !ok {
        std::process::exit(1);
    }
}
