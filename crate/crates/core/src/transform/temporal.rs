use chrono::{Datelike, NaiveDate};

/// Whole calendar months from `host_since` to `snapshot`. The count
/// increments on the day-of-month of `host_since`. Absent dates and dates
/// after the snapshot give `(0, true)`.
pub fn host_experience_months(host_since: Option<NaiveDate>, snapshot: NaiveDate) -> (u32, bool) {
    let Some(since) = host_since else {
        return (0, true);
    };
    if since > snapshot {
        return (0, true);
    }
    let mut months = (snapshot.year() - since.year()) * 12 + snapshot.month() as i32 - since.month() as i32;
    if snapshot.day() < since.day() {
        months -= 1;
    }
    (months.max(0) as u32, false)
}

pub fn log_price(price_usd: f64) -> f64 {
    price_usd.ln()
}

pub fn inverse_log_price(y: f64) -> f64 {
    y.exp()
}
