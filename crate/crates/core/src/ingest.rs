//! Parsing of InsideAirbnb-format `listings.csv` / `reviews.csv` exports.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REASON_BAD_ID: &str = "bad id";
pub const REASON_BAD_PRICE: &str = "bad price";
pub const REASON_NON_POSITIVE_PRICE: &str = "non-positive price";
pub const REASON_BAD_COORDINATE: &str = "bad coordinate";
pub const REASON_COORD_RANGE: &str = "coordinate out of range";
pub const REASON_BAD_ACCOMMODATES: &str = "bad accommodates";
pub const REASON_BAD_AVAILABILITY: &str = "bad availability_365";
pub const REASON_BAD_DATE: &str = "bad date";
pub const REASON_BAD_LISTING_REF: &str = "bad listing_id";
pub const REASON_ORPHAN: &str = "orphan review";

/// Counts of dropped rows keyed by reason. Serializes as `{reason: count}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DropLog(pub BTreeMap<String, usize>);

impl DropLog {
    pub fn record(&mut self, reason: &str) {
        *self.0.entry(reason.to_string()).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &DropLog) {
        for (reason, count) in &other.0 {
            *self.0.entry(reason.clone()).or_insert(0) += count;
        }
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    pub fn get(&self, reason: &str) -> usize {
        self.0.get(reason).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListingRecord {
    pub id: i64,
    pub city: String,
    pub latitude: f64,
    pub longitude: f64,
    pub price_usd: f64,
    pub accommodates: u32,
    pub availability_365: u16,
    pub reviews_per_month: Option<f64>,
    pub host_is_superhost: Option<bool>,
    pub host_since: Option<NaiveDate>,
    pub neighbourhood: Option<String>,
    pub room_type: Option<String>,
    pub bedrooms: Option<f64>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub listing_id: i64,
    pub review_id: i64,
    pub date: NaiveDate,
    pub comments: String,
}

/// Output of a single-file parse.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub drops: DropLog,
    /// Data rows read, excluding the header.
    pub rows_read: usize,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            drops: DropLog::default(),
            rows_read: 0,
        }
    }
}

/// Listings plus their reviews, joined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub listings: Vec<ListingRecord>,
    pub reviews_by_listing: BTreeMap<i64, Vec<ReviewRecord>>,
    pub drop_log: DropLog,
}

impl Dataset {
    pub fn reviews_for(&self, id: i64) -> &[ReviewRecord] {
        self.reviews_by_listing
            .get(&id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn review_count(&self) -> usize {
        self.reviews_by_listing.values().map(Vec::len).sum()
    }

    /// Latest review date across the dataset.
    pub fn max_review_date(&self) -> Option<NaiveDate> {
        self.reviews_by_listing
            .values()
            .flatten()
            .map(|r| r.date)
            .max()
    }

    /// A sub-dataset holding the given listing rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let listings: Vec<ListingRecord> = rows.iter().map(|&i| self.listings[i].clone()).collect();
        let reviews_by_listing = listings
            .iter()
            .map(|l| (l.id, self.reviews_for(l.id).to_vec()))
            .collect();
        Dataset {
            listings,
            reviews_by_listing,
            drop_log: DropLog::default(),
        }
    }
}

/// Parses an InsideAirbnb price string such as `"$1,234.00"`.
///
/// Only a single leading `$` and `,` separators are stripped. Returns
/// `Ok(None)` for an empty field and `Err` for any other residue.
pub fn parse_price(text: &str) -> std::result::Result<Option<f64>, String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    let body = trimmed.strip_prefix('$').unwrap_or(trimmed);
    let cleaned: String = body.chars().filter(|&c| c != ',').collect();
    if cleaned.is_empty()
        || !cleaned
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '-')
    {
        return Err(format!("malformed price {text:?}"));
    }
    let value: f64 = cleaned
        .parse()
        .map_err(|_| format!("malformed price {text:?}"))?;
    if !value.is_finite() {
        return Err(format!("malformed price {text:?}"));
    }
    Ok(Some(value))
}

fn parse_bool(text: &str) -> Option<bool> {
    match text.trim() {
        "t" => Some(true),
        "f" => Some(false),
        _ => None,
    }
}

fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").ok()
}

fn parse_opt_nonneg(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)
}

fn parse_opt_text(text: &str) -> Option<String> {
    let t = text.trim();
    (!t.is_empty()).then(|| t.to_string())
}

struct Columns(HashMap<String, usize>);

impl Columns {
    fn new(headers: &csv::StringRecord) -> Self {
        Columns(
            headers
                .iter()
                .enumerate()
                .map(|(i, h)| (h.trim().to_string(), i))
                .collect(),
        )
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn optional(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.0.get(*n).copied())
    }
}

fn cell(record: &csv::StringRecord, idx: Option<usize>) -> &str {
    idx.and_then(|i| record.get(i)).unwrap_or("")
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

/// Parses a listings export, labelling every record with `city_label`.
pub fn parse_listings<R: Read>(input: R, city_label: &str) -> Result<Parsed<ListingRecord>> {
    parse_listings_impl(input, city_label, true)
}

/// Like [`parse_listings`] but for listings to be scored: the price column
/// may be absent or empty, in which case `price_usd` is NaN. A present but
/// malformed price still drops the row.
pub fn parse_listings_unpriced<R: Read>(input: R, city_label: &str) -> Result<Parsed<ListingRecord>> {
    parse_listings_impl(input, city_label, false)
}

fn parse_listings_impl<R: Read>(input: R, city_label: &str, require_price: bool) -> Result<Parsed<ListingRecord>> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let id = cols.require("id")?;
    let price = if require_price {
        Some(cols.require("price")?)
    } else {
        cols.optional(&["price"])
    };
    let lat = cols.require("latitude")?;
    let lon = cols.require("longitude")?;
    let accommodates = cols.require("accommodates")?;
    let description = cols.require("description")?;
    let availability = cols.optional(&["availability_365"]);
    let rpm = cols.optional(&["reviews_per_month"]);
    let superhost = cols.optional(&["host_is_superhost"]);
    let host_since = cols.optional(&["host_since"]);
    let neighbourhood = cols.optional(&["neighbourhood_cleansed", "neighbourhood"]);
    let room_type = cols.optional(&["room_type"]);
    let bedrooms = cols.optional(&["bedrooms"]);

    let mut out = Parsed::default();
    for row in rdr.records() {
        let row = row?;
        out.rows_read += 1;
        let Ok(id_value) = cell(&row, Some(id)).trim().parse::<i64>() else {
            out.drops.record(REASON_BAD_ID);
            continue;
        };
        let price_value = match parse_price(cell(&row, price)) {
            Err(_) => {
                out.drops.record(REASON_BAD_PRICE);
                continue;
            }
            Ok(None) if !require_price => f64::NAN,
            Ok(None) => {
                out.drops.record(REASON_NON_POSITIVE_PRICE);
                continue;
            }
            Ok(Some(p)) if p <= 0.0 => {
                out.drops.record(REASON_NON_POSITIVE_PRICE);
                continue;
            }
            Ok(Some(p)) => p,
        };
        let (Ok(latitude), Ok(longitude)) = (
            cell(&row, Some(lat)).trim().parse::<f64>(),
            cell(&row, Some(lon)).trim().parse::<f64>(),
        ) else {
            out.drops.record(REASON_BAD_COORDINATE);
            continue;
        };
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            out.drops.record(REASON_COORD_RANGE);
            continue;
        }
        let accommodates_value = match cell(&row, Some(accommodates)).trim().parse::<u32>() {
            Ok(a) if a > 0 => a,
            _ => {
                out.drops.record(REASON_BAD_ACCOMMODATES);
                continue;
            }
        };
        let avail_text = cell(&row, availability).trim();
        let availability_365 = if avail_text.is_empty() {
            0
        } else {
            match avail_text.parse::<u16>() {
                Ok(a) if a <= 365 => a,
                _ => {
                    out.drops.record(REASON_BAD_AVAILABILITY);
                    continue;
                }
            }
        };
        out.records.push(ListingRecord {
            id: id_value,
            city: city_label.to_string(),
            latitude,
            longitude,
            price_usd: price_value,
            accommodates: accommodates_value,
            availability_365,
            reviews_per_month: parse_opt_nonneg(cell(&row, rpm)),
            host_is_superhost: parse_bool(cell(&row, superhost)),
            host_since: parse_date(cell(&row, host_since)),
            neighbourhood: parse_opt_text(cell(&row, neighbourhood)),
            room_type: parse_opt_text(cell(&row, room_type)),
            bedrooms: parse_opt_nonneg(cell(&row, bedrooms)),
            description: cell(&row, Some(description)).to_string(),
        });
    }
    Ok(out)
}

/// Parses a reviews export. Empty comments are kept.
pub fn parse_reviews<R: Read>(input: R) -> Result<Parsed<ReviewRecord>> {
    let mut rdr = reader(input);
    let cols = Columns::new(rdr.headers()?);
    let listing_id = cols.require("listing_id")?;
    let review_id = cols.require("id")?;
    let date = cols.require("date")?;
    let comments = cols.require("comments")?;

    let mut out = Parsed::default();
    for row in rdr.records() {
        let row = row?;
        out.rows_read += 1;
        let Ok(lid) = cell(&row, Some(listing_id)).trim().parse::<i64>() else {
            out.drops.record(REASON_BAD_LISTING_REF);
            continue;
        };
        let Ok(rid) = cell(&row, Some(review_id)).trim().parse::<i64>() else {
            out.drops.record(REASON_BAD_ID);
            continue;
        };
        let Some(d) = parse_date(cell(&row, Some(date))) else {
            out.drops.record(REASON_BAD_DATE);
            continue;
        };
        out.records.push(ReviewRecord {
            listing_id: lid,
            review_id: rid,
            date: d,
            comments: cell(&row, Some(comments)).to_string(),
        });
    }
    Ok(out)
}

/// Groups reviews under their listings. Reviews for unknown listings are
/// dropped as orphans; a repeated listing id is fatal.
pub fn join_dataset(
    listings: Vec<ListingRecord>,
    reviews: Vec<ReviewRecord>,
    mut drop_log: DropLog,
) -> Result<Dataset> {
    let mut seen = HashSet::with_capacity(listings.len());
    let mut reviews_by_listing: BTreeMap<i64, Vec<ReviewRecord>> = BTreeMap::new();
    for l in &listings {
        if !seen.insert(l.id) {
            return Err(Error::DuplicateListing(l.id));
        }
        reviews_by_listing.insert(l.id, Vec::new());
    }
    for r in reviews {
        match reviews_by_listing.get_mut(&r.listing_id) {
            Some(v) => v.push(r),
            None => drop_log.record(REASON_ORPHAN),
        }
    }
    Ok(Dataset {
        listings,
        reviews_by_listing,
        drop_log,
    })
}

/// One city's pair of exports, already read into memory.
#[derive(Debug, Clone)]
pub struct CitySource<'a> {
    pub label: &'a str,
    pub listings: &'a [u8],
    pub reviews: &'a [u8],
}

/// Parses every city (in parallel on the current rayon pool) and joins the
/// result in the given city order.
pub fn ingest_cities(sources: &[CitySource<'_>]) -> Result<Dataset> {
    use rayon::prelude::*;
    let parsed: Vec<Result<(Parsed<ListingRecord>, Parsed<ReviewRecord>)>> = sources
        .par_iter()
        .map(|s| Ok((parse_listings(s.listings, s.label)?, parse_reviews(s.reviews)?)))
        .collect();
    let mut listings = Vec::new();
    let mut reviews = Vec::new();
    let mut drops = DropLog::default();
    for p in parsed {
        let (l, r) = p?;
        drops.merge(&l.drops);
        drops.merge(&r.drops);
        listings.extend(l.records);
        reviews.extend(r.records);
    }
    join_dataset(listings, reviews, drops)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,price,latitude,longitude,accommodates,description,availability_365,reviews_per_month,host_is_superhost,host_since,neighbourhood_cleansed,room_type,bedrooms\n";

    #[test]
    fn price_strings() {
        assert_eq!(parse_price("$1,234.00"), Ok(Some(1234.0)));
        assert_eq!(parse_price(""), Ok(None));
        assert_eq!(parse_price("$0.00"), Ok(Some(0.0)));
        assert!(parse_price("€12.00").is_err());
        assert!(parse_price("12 USD").is_err());
        assert!(parse_price("$").is_err());
    }

    #[test]
    fn well_formed_listing() {
        let csv = format!(
            "{HEADER}1,$150.00,32.8,-117.2,2,\"Nice\nplace\",100,1.5,t,2019-01-15,Mission,Private room,1\n"
        );
        let p = parse_listings(csv.as_bytes(), "San Diego").unwrap();
        assert_eq!(p.records.len(), 1);
        let r = &p.records[0];
        assert_eq!(r.price_usd, 150.0);
        assert_eq!(r.city, "San Diego");
        assert_eq!(r.description, "Nice\nplace");
        assert_eq!(r.host_is_superhost, Some(true));
        assert_eq!(r.neighbourhood.as_deref(), Some("Mission"));
    }

    #[test]
    fn drops_with_reasons() {
        let csv = format!(
            "{HEADER}\
             1,$150.00,95.0,-117.2,2,x,1,,,,,,\n\
             2,$0.00,32.0,-117.2,2,x,1,,,,,,\n\
             3,,32.0,-117.2,2,x,1,,,,,,\n\
             4,£3,32.0,-117.2,2,x,1,,,,,,\n\
             5,$3,32.0,-117.2,2,x,1,,x,,,,\n"
        );
        let p = parse_listings(csv.as_bytes(), "c").unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.drops.get(REASON_COORD_RANGE), 1);
        assert_eq!(p.drops.get(REASON_NON_POSITIVE_PRICE), 2);
        assert_eq!(p.drops.get(REASON_BAD_PRICE), 1);
        assert_eq!(p.rows_read, p.records.len() + p.drops.total());
        assert_eq!(p.records[0].host_is_superhost, None);
    }

    #[test]
    fn missing_header_is_fatal() {
        let csv = "id,latitude,longitude,accommodates,description\n";
        match parse_listings(csv.as_bytes(), "c") {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "price"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_reviews("listing_id,id,date\n".as_bytes()),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn reviews_rules() {
        let csv = "listing_id,id,date,comments\n7,1,2020-05-01,Great stay\n7,2,not-a-date,x\n7,3,2020-05-02,\n";
        let p = parse_reviews(csv.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.drops.get(REASON_BAD_DATE), 1);
        assert_eq!(p.records[1].comments, "");
    }

    fn listing(id: i64) -> ListingRecord {
        ListingRecord {
            id,
            city: "c".into(),
            latitude: 0.0,
            longitude: 0.0,
            price_usd: 1.0,
            accommodates: 1,
            availability_365: 0,
            reviews_per_month: None,
            host_is_superhost: None,
            host_since: None,
            neighbourhood: None,
            room_type: None,
            bedrooms: None,
            description: String::new(),
        }
    }

    fn review(listing_id: i64, review_id: i64) -> ReviewRecord {
        ReviewRecord {
            listing_id,
            review_id,
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            comments: String::new(),
        }
    }

    #[test]
    fn join_groups_and_counts_orphans() {
        let ds = join_dataset(
            vec![listing(7)],
            vec![review(7, 1), review(7, 2), review(99, 3), review(7, 4)],
            DropLog::default(),
        )
        .unwrap();
        let ids: Vec<i64> = ds.reviews_for(7).iter().map(|r| r.review_id).collect();
        assert_eq!(ids, vec![1, 2, 4]);
        assert_eq!(ds.drop_log.get(REASON_ORPHAN), 1);

        let ds = join_dataset(vec![listing(1), listing(2)], vec![], DropLog::default()).unwrap();
        assert_eq!(ds.listings.len(), 2);
        assert!(ds.reviews_for(1).is_empty() && ds.reviews_for(2).is_empty());
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let err = join_dataset(vec![listing(3), listing(3)], vec![], DropLog::default());
        assert!(matches!(err, Err(Error::DuplicateListing(3))));
    }
}
