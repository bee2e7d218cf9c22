/// 0/1 indicator over `categories`; unseen or absent labels land on the
/// trailing catch-all entry.
pub fn one_hot(label: Option<&str>, categories: &[String]) -> Vec<f64> {
    let mut out = vec![0.0; categories.len()];
    if categories.is_empty() {
        return out;
    }
    let pos = label
        .and_then(|l| categories.iter().position(|c| c == l))
        .unwrap_or(categories.len() - 1);
    out[pos] = 1.0;
    out
}

/// Rank of `label` in `levels`; `(-1, true)` when absent or unknown.
pub fn label_encode(label: Option<&str>, levels: &[String]) -> (i64, bool) {
    match label.and_then(|l| levels.iter().position(|x| x == l)) {
        Some(i) => (i as i64, false),
        None => (-1, true),
    }
}
