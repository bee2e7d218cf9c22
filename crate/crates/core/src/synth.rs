//! Synthetic listings and reviews with a known log-price function.
//!
//! The noiseless target is
//! `4.0 + 0.35·ln(accommodates) + offset(city) + 0.3·sentiment + 0.2·signal`,
//! where `sentiment` is the listing's mean review score under the built-in
//! lexicon (reviews are made only of lexicon words) and `signal ∈ {−1,0,1}`
//! adds "budget" or "luxury" to the description. Observed prices add
//! gaussian noise in log space and are rounded to cents.

use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geofeat::GeoPoint;
use crate::textfeat::{listing_sentiment, SentimentLexicon};

pub const MIN_LISTINGS: usize = 100;
pub const BASE_LOG_PRICE: f64 = 4.0;
pub const COEF_ACCOMMODATES: f64 = 0.35;
pub const COEF_SENTIMENT: f64 = 0.3;
pub const COEF_DESCRIPTION: f64 = 0.2;
pub const MAX_CITY_OFFSET: f64 = 0.6;
pub const CITY_SPACING_DEG: f64 = 0.5;
pub const CITY_SCATTER_DEG: f64 = 0.05;
pub const LUXURY_TOKEN: &str = "luxury";
pub const BUDGET_TOKEN: &str = "budget";

const ORIGIN: (f64, f64) = (32.5, -122.0);
const NEUTRAL_WORDS: &[&str] = &[
    "apartment", "studio", "kitchen", "bedroom", "bathroom", "parking", "wifi", "downtown",
    "beach", "garden", "balcony", "patio", "view", "walk", "minutes", "station", "shops",
    "restaurants", "park", "pool", "gym", "washer", "dryer", "queen", "king", "sofa", "desk",
    "workspace", "street", "modern", "bright", "located", "close", "guests", "house", "home",
    "room", "floor", "coffee", "towels",
];
const ZONES: &[&str] = &["North", "South", "East", "West", "Central", "Harbor"];
const ROOM_TYPES: &[&str] = &["Entire home/apt", "Private room", "Shared room", "Hotel room"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_listings: usize,
    pub n_cities: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub max_reviews: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_listings: 5000,
            n_cities: 8,
            seed: 1,
            noise_sigma: 0.15,
            max_reviews: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub id: i64,
    pub city: usize,
    pub ln_price_true: f64,
    pub noise: f64,
    pub sentiment_true: f64,
    pub desc_signal: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub listings_csv: Vec<u8>,
    pub reviews_csv: Vec<u8>,
    pub truth: Vec<TruthRow>,
    pub centers: Vec<GeoPoint>,
    pub city_offsets: Vec<f64>,
}

impl SynthOutput {
    /// `id,ln_price_true`, one row per listing.
    pub fn truth_csv(&self) -> Vec<u8> {
        let mut out = String::from("id,ln_price_true\n");
        for t in &self.truth {
            let _ = writeln!(out, "{},{:.16e}", t.id, t.ln_price_true);
        }
        out.into_bytes()
    }
}

pub fn city_centers(n_cities: usize) -> Vec<GeoPoint> {
    let per_row = (n_cities as f64).sqrt().ceil().max(1.0) as usize;
    (0..n_cities)
        .map(|c| {
            GeoPoint::new(
                ORIGIN.0 + CITY_SPACING_DEG * (c / per_row) as f64,
                ORIGIN.1 + CITY_SPACING_DEG * (c % per_row) as f64,
            )
        })
        .collect()
}

pub fn city_offsets(n_cities: usize) -> Vec<f64> {
    if n_cities == 1 {
        return vec![0.0];
    }
    // Alternate signs so neighbouring grid cells differ in price level.
    let mut levels: Vec<f64> = (0..n_cities)
        .map(|c| -MAX_CITY_OFFSET + 2.0 * MAX_CITY_OFFSET * c as f64 / (n_cities - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(n_cities);
    while !levels.is_empty() {
        out.push(levels.remove(0));
        if let Some(v) = levels.pop() {
            out.push(v);
        }
    }
    out
}

/// `$1,234.50`
pub fn format_price(usd: f64) -> String {
    let cents = (usd * 100.0).round() as u64;
    let dollars = (cents / 100).to_string();
    let mut grouped = String::new();
    for (i, ch) in dollars.chars().enumerate() {
        if i > 0 && (dollars.len() - i).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    format!("${grouped}.{:02}", cents % 100)
}

fn review_text(rng: &mut ChaCha8Rng, p_pos: f64, pos: &[&str], neg: &[&str]) -> String {
    let n = rng.random_range(3..=6);
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let pool = if rng.random_bool(p_pos) { pos } else { neg };
        words.push(*pool.choose(rng).expect("non-empty pool"));
    }
    let mut text = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push_str(match rng.random_range(0..10) {
                0 => ", ",
                1 => "\n",
                _ => " ",
            });
        }
        if i == 0 {
            let mut c = w.chars();
            let first = c.next().expect("non-empty word").to_uppercase();
            text.extend(first);
            text.push_str(c.as_str());
        } else {
            text.push_str(w);
        }
    }
    text.push('!');
    text
}

fn description(rng: &mut ChaCha8Rng, signal: i8) -> String {
    let n = rng.random_range(8..=14);
    let mut words: Vec<&str> = (0..n).map(|_| *NEUTRAL_WORDS.choose(rng).expect("pool")).collect();
    let token = match signal {
        1 => Some(LUXURY_TOKEN),
        -1 => Some(BUDGET_TOKEN),
        _ => None,
    };
    if let Some(t) = token {
        let at = rng.random_range(0..=words.len());
        words.insert(at, t);
    }
    let mut text = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push_str(if i % 5 == 0 { ", " } else { " " });
        }
        text.push_str(w);
    }
    if rng.random_range(0..4) == 0 {
        text.push_str(".\nSelf check-in.");
    }
    text
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    if spec.n_listings < MIN_LISTINGS {
        return Err(Error::Config(format!(
            "synth needs at least {MIN_LISTINGS} listings, got {}",
            spec.n_listings
        )));
    }
    if spec.n_cities == 0 {
        return Err(Error::Config("synth needs at least one city".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let lexicon = SentimentLexicon::builtin();
    let pos: Vec<&str> = lexicon.entries().iter().filter(|(_, v)| **v > 0).map(|(k, _)| k.as_str()).collect();
    let neg: Vec<&str> = lexicon.entries().iter().filter(|(_, v)| **v < 0).map(|(k, _)| k.as_str()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scatter = Normal::new(0.0, CITY_SCATTER_DEG).expect("valid sigma");
    let noise = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
    let centers = city_centers(spec.n_cities);
    let offsets = city_offsets(spec.n_cities);
    let host_epoch = NaiveDate::from_ymd_opt(2010, 1, 1).expect("date");
    let review_epoch = NaiveDate::from_ymd_opt(2021, 1, 1).expect("date");

    let mut listings = csv::Writer::from_writer(Vec::new());
    listings.write_record([
        "id", "name", "description", "host_since", "host_is_superhost", "neighbourhood_cleansed",
        "latitude", "longitude", "room_type", "accommodates", "bedrooms", "price", "availability_365",
        "reviews_per_month",
    ])?;
    let mut reviews = csv::Writer::from_writer(Vec::new());
    reviews.write_record(["listing_id", "id", "date", "reviewer_name", "comments"])?;

    let mut truth = Vec::with_capacity(spec.n_listings);
    let mut review_id: i64 = 1;
    for i in 0..spec.n_listings {
        let id = 1000 + i as i64;
        let city = rng.random_range(0..spec.n_cities);
        let lat = centers[city].latitude + scatter.sample(&mut rng);
        let lon = centers[city].longitude + scatter.sample(&mut rng);
        let accommodates: u32 = rng.random_range(1..=8);
        let signal: i8 = rng.random_range(-1..=1);
        let p_pos: f64 = rng.random();
        let n_reviews = rng.random_range(0..=spec.max_reviews);
        let texts: Vec<String> = (0..n_reviews).map(|_| review_text(&mut rng, p_pos, &pos, &neg)).collect();
        let (sentiment, _) = listing_sentiment(&texts, &lexicon);

        let ln_true = BASE_LOG_PRICE
            + COEF_ACCOMMODATES * (accommodates as f64).ln()
            + offsets[city]
            + COEF_SENTIMENT * sentiment
            + COEF_DESCRIPTION * signal as f64;
        let eps = noise.sample(&mut rng);
        let price = format_price((ln_true + eps).exp());

        let host_since = host_epoch + Days::new(rng.random_range(0..3650));
        let superhost = if rng.random_bool(0.3) { "t" } else { "f" };
        let zone = ZONES.choose(&mut rng).expect("zones");
        let room = ROOM_TYPES.choose(&mut rng).expect("room types");
        let bedrooms = if rng.random_bool(0.9) {
            accommodates.div_ceil(2).to_string()
        } else {
            String::new()
        };
        let availability = rng.random_range(0..=365u32);
        let rpm = if n_reviews > 0 {
            format!("{:.2}", n_reviews as f64 / 12.0)
        } else {
            String::new()
        };
        let desc = description(&mut rng, signal);
        listings.write_record([
            id.to_string(),
            format!("Listing {id} in city {city}"),
            desc,
            host_since.to_string(),
            superhost.to_string(),
            format!("City{city} {zone}"),
            format!("{lat:.6}"),
            format!("{lon:.6}"),
            room.to_string(),
            accommodates.to_string(),
            bedrooms,
            price,
            availability.to_string(),
            rpm,
        ])?;
        for text in &texts {
            let date = review_epoch + Days::new(rng.random_range(0..365));
            reviews.write_record([
                id.to_string(),
                review_id.to_string(),
                date.to_string(),
                format!("Guest {review_id}"),
                text.clone(),
            ])?;
            review_id += 1;
        }
        truth.push(TruthRow {
            id,
            city,
            ln_price_true: ln_true,
            noise: eps,
            sentiment_true: sentiment,
            desc_signal: signal,
        });
    }
    let finish = |w: csv::Writer<Vec<u8>>| {
        w.into_inner()
            .map_err(|e| Error::invalid(format!("csv buffer: {}", e.error())))
    };
    Ok(SynthOutput {
        listings_csv: finish(listings)?,
        reviews_csv: finish(reviews)?,
        truth,
        centers,
        city_offsets: offsets,
    })
}
