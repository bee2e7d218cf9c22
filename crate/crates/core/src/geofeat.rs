//! Coordinate clustering and neighbourhood statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ListingRecord;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const MISSING_NEIGHBOURHOOD: &str = "(missing)";
pub const OTHER: &str = "other";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        GeoPoint {
            latitude,
            longitude,
        }
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude - a.longitude).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeoMetric {
    /// Plain Euclidean distance on raw degrees.
    #[default]
    Euclidean,
    Haversine,
}

impl GeoMetric {
    pub fn distance(self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            GeoMetric::Euclidean => {
                ((a.latitude - b.latitude).powi(2) + (a.longitude - b.longitude).powi(2)).sqrt()
            }
            GeoMetric::Haversine => haversine_km(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<GeoPoint>,
    pub metric: GeoMetric,
    pub k: usize,
    pub seed: u64,
    pub iterations_run: usize,
    /// Sum of squared point-to-centroid distances after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    /// Nearest centroid; ties go to the lowest index.
    pub fn assign(&self, point: GeoPoint) -> usize {
        nearest(&self.centroids, self.metric, point).0
    }
}

/// Convergence and budget settings for [`kmeans_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub metric: GeoMetric,
    pub seed: u64,
    pub max_iter: usize,
    /// Maximum centroid movement, in degrees, that counts as converged.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 100,
            metric: GeoMetric::Euclidean,
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

fn nearest(centroids: &[GeoPoint], metric: GeoMetric, p: GeoPoint) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = metric.distance(p, *c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn distinct_count(points: &[GeoPoint]) -> usize {
    points
        .iter()
        .map(|p| (p.latitude.to_bits(), p.longitude.to_bits()))
        .collect::<BTreeSet<_>>()
        .len()
}

fn assign_all(points: &[GeoPoint], centroids: &[GeoPoint], metric: GeoMetric) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .map(|p| nearest(centroids, metric, *p))
        .collect()
}

/// Farthest-point spread: a seeded random first centroid, then repeatedly
/// the point farthest from every centroid chosen so far.
fn spread_init(points: &[GeoPoint], k: usize, metric: GeoMetric, seed: u64) -> Vec<GeoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first]];
    let mut min_dist: Vec<f64> = points.iter().map(|p| metric.distance(*p, points[first])).collect();
    while centroids.len() < k {
        let mut best = 0;
        for (i, d) in min_dist.iter().enumerate() {
            if *d > min_dist[best] {
                best = i;
            }
        }
        let c = points[best];
        centroids.push(c);
        for (d, p) in min_dist.iter_mut().zip(points) {
            *d = d.min(metric.distance(*p, c));
        }
    }
    centroids
}

/// Lloyd's k-means over coordinates. Deterministic for a given point
/// order, `k` and seed, independent of the rayon worker count.
pub fn kmeans_fit(points: &[GeoPoint], params: KMeansParams) -> Result<ClusterModel> {
    let KMeansParams {
        k,
        metric,
        seed,
        max_iter,
        tol,
    } = params;
    if points.is_empty() {
        return Err(Error::invalid("k-means needs at least one point"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }

    let mut centroids = spread_init(points, k, metric, seed);
    let mut inertia_history = Vec::new();
    let mut iterations_run = 0;
    while iterations_run < max_iter {
        iterations_run += 1;
        let assigned = assign_all(points, &centroids, metric);
        inertia_history.push(assigned.iter().map(|(_, d)| d * d).sum());

        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (p, (c, _)) in points.iter().zip(&assigned) {
            let s = &mut sums[*c];
            s.0 += p.latitude;
            s.1 += p.longitude;
            s.2 += 1;
        }
        let mut dist_to_own: Vec<f64> = assigned.iter().map(|(_, d)| *d).collect();
        let mut next = centroids.clone();
        for (j, (slat, slon, n)) in sums.iter().enumerate() {
            if *n > 0 {
                next[j] = GeoPoint::new(slat / *n as f64, slon / *n as f64);
            } else {
                // empty cluster: reseed at the point worst served by its centroid
                let mut far = 0;
                for (i, d) in dist_to_own.iter().enumerate() {
                    if *d > dist_to_own[far] {
                        far = i;
                    }
                }
                next[j] = points[far];
                dist_to_own[far] = 0.0;
            }
        }
        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| GeoMetric::Euclidean.distance(*a, *b))
            .fold(0.0, f64::max);
        centroids = next;
        if moved < tol {
            break;
        }
    }
    let final_assign = assign_all(points, &centroids, metric);
    inertia_history.push(final_assign.iter().map(|(_, d)| d * d).sum());

    Ok(ClusterModel {
        centroids,
        metric,
        k,
        seed,
        iterations_run,
        inertia_history,
    })
}

pub fn assign_cluster(point: GeoPoint, model: &ClusterModel) -> usize {
    model.assign(point)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourhoodStats {
    /// Most frequent training neighbourhoods followed by `"other"`.
    pub categories: Vec<String>,
    pub counts: BTreeMap<String, usize>,
}

pub fn neighbourhood_label(listing: &ListingRecord) -> &str {
    listing
        .neighbourhood
        .as_deref()
        .unwrap_or(MISSING_NEIGHBOURHOOD)
}

/// Counts neighbourhood values over the training listings and keeps the
/// `top_n` most frequent (ties lexicographic). Fewer observed values than
/// `top_n` yields a shorter list.
pub fn fit_neighbourhood_stats(train: &[ListingRecord], top_n: usize) -> Result<NeighbourhoodStats> {
    if top_n == 0 {
        return Err(Error::invalid("top_n must be at least 1"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in train {
        *counts.entry(neighbourhood_label(l).to_string()).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let mut categories: Vec<String> = ranked
        .into_iter()
        .take(top_n)
        .map(|(n, _)| n.clone())
        .filter(|n| n != OTHER)
        .collect();
    categories.push(OTHER.to_string());
    Ok(NeighbourhoodStats { categories, counts })
}

/// `ln(1 + training count)` of the listing's neighbourhood; 0 for absent
/// or unseen values.
pub fn neighbourhood_popularity(listing: &ListingRecord, stats: &NeighbourhoodStats) -> f64 {
    let count = listing
        .neighbourhood
        .as_deref()
        .and_then(|n| stats.counts.get(n))
        .copied()
        .unwrap_or(0);
    (count as f64).ln_1p()
}

/// Plain scatter of points coloured by cluster with centroids overlaid.
pub fn cluster_svg(points: &[GeoPoint], model: &ClusterModel) -> String {
    const W: f64 = 800.0;
    const H: f64 = 800.0;
    const PAD: f64 = 20.0;
    let all = points.iter().chain(&model.centroids);
    let (mut lat0, mut lat1, mut lon0, mut lon1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in all {
        lat0 = lat0.min(p.latitude);
        lat1 = lat1.max(p.latitude);
        lon0 = lon0.min(p.longitude);
        lon1 = lon1.max(p.longitude);
    }
    let span_lat = (lat1 - lat0).max(1e-9);
    let span_lon = (lon1 - lon0).max(1e-9);
    let xy = |p: &GeoPoint| {
        (
            PAD + (p.longitude - lon0) / span_lon * (W - 2.0 * PAD),
            H - PAD - (p.latitude - lat0) / span_lat * (H - 2.0 * PAD),
        )
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for p in points {
        let c = model.assign(*p);
        let hue = (c * 137) % 360;
        let (x, y) = xy(p);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="hsl({hue},70%,50%)" fill-opacity="0.6"/>"#
        );
    }
    for c in &model.centroids {
        let (x, y) = xy(c);
        let _ = writeln!(
            svg,
            r#"<path d="M{:.2} {:.2} l8 8 m0 -8 l-8 8" stroke="black" stroke-width="1.5"/>"#,
            x - 4.0,
            y - 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
