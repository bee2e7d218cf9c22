//! Clusters synthetic listing coordinates and writes the scatter plot.
//!
//!     cargo run --release --example geo_clusters -- clusters.svg

use airprice::geofeat::{cluster_svg, haversine_km, kmeans_fit, GeoMetric, GeoPoint, KMeansParams};
use airprice::synth::{generate, SynthSpec};

fn main() -> airprice::Result<()> {
    let spec = SynthSpec { n_listings: 3000, n_cities: 6, ..Default::default() };
    let data = generate(&spec)?;
    let mut rdr = csv::Reader::from_reader(data.listings_csv.as_slice());
    let headers = rdr.headers().expect("header").clone();
    let lat = headers.iter().position(|h| h == "latitude").unwrap();
    let lon = headers.iter().position(|h| h == "longitude").unwrap();
    let points: Vec<GeoPoint> = rdr
        .records()
        .map(|r| {
            let r = r.expect("generated csv is valid");
            GeoPoint::new(r[lat].parse().unwrap(), r[lon].parse().unwrap())
        })
        .collect();

    for metric in [GeoMetric::Euclidean, GeoMetric::Haversine] {
        let model = kmeans_fit(&points, KMeansParams { k: spec.n_cities, metric, seed: 1, ..Default::default() })?;
        println!(
            "{metric:?}: {} iterations, final inertia {:.5}",
            model.iterations_run,
            model.inertia_history.last().unwrap()
        );
        for (c, centroid) in model.centroids.iter().enumerate() {
            let nearest = data
                .centers
                .iter()
                .map(|t| haversine_km(*centroid, *t))
                .fold(f64::INFINITY, f64::min);
            println!("  cluster {c}: ({:.4}, {:.4}), {nearest:.2} km from a true centre", centroid.latitude, centroid.longitude);
        }
        if metric == GeoMetric::Euclidean {
            if let Some(path) = std::env::args().nth(1) {
                std::fs::write(&path, cluster_svg(&points, &model)).expect("write svg");
                println!("wrote {path}");
            }
        }
    }
    Ok(())
}
