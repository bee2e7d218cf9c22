//! Review sentiment with the bundled lexicon, and a description vocabulary
//! with its price direction.

use std::collections::HashSet;

use airprice::textfeat::{
    build_vocab, description_score, fit_description_direction, listing_sentiment, parse_stopwords, score_review,
    tfidf_vector, SentimentLexicon, DEFAULT_STOPWORDS,
};

fn main() -> airprice::Result<()> {
    let lexicon = SentimentLexicon::builtin();
    let reviews = [
        "Great host, spotless and quiet. Would stay again!",
        "The room was dirty and the street was noisy.",
        "Fine for one night.",
    ];
    for r in &reviews {
        println!("{:+.3}  {r}", score_review(r, &lexicon));
    }
    let (mean, count) = listing_sentiment(&reviews, &lexicon);
    println!("listing mean {mean:+.3} over {count} reviews\n");

    let descriptions = [
        "Luxury loft with ocean view and private terrace",
        "Luxury suite near the beach, ocean view",
        "Budget room near the bus station",
        "Small budget studio, shared bathroom",
        "Quiet room with garden view",
    ];
    let prices: [f64; 5] = [420.0, 380.0, 60.0, 55.0, 110.0];
    let stop: HashSet<String> = parse_stopwords(DEFAULT_STOPWORDS);
    let vocab = build_vocab(&descriptions, 1, 50, &stop)?;
    println!("vocabulary ({} terms): {:?}", vocab.len(), vocab.terms());

    let vectors: Vec<_> = descriptions.iter().map(|d| tfidf_vector(d, &vocab)).collect();
    let y: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    let direction = fit_description_direction(&vectors, &y, vocab.len())?;
    let mut weighted: Vec<(&String, f64)> = vocab.terms().iter().zip(direction.weights.iter().copied()).collect();
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("most price-positive terms:");
    for (t, w) in weighted.iter().take(4) {
        println!("  {t:<10} {w:+.3}");
    }
    println!("most price-negative terms:");
    for (t, w) in weighted.iter().rev().take(4) {
        println!("  {t:<10} {w:+.3}");
    }
    for text in ["Luxury penthouse, ocean view", "Budget bunk near the station"] {
        println!("score {:+.3}  {text}", description_score(&tfidf_vector(text, &vocab), &direction));
    }
    Ok(())
}
