//! Synthetic lexica for tests, benchmarks and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lexicon::Lexicon;

/// Terms `w0000..` placed on a ring; every clique is a handful of terms
/// drawn from a short window of the ring, so overlap falls off with ring
/// distance. The first `n_terms` cliques are centered on each term in turn,
/// which guarantees that every term is used.
pub fn ring_lexicon(n_terms: usize, n_cliques: usize, seed: u64) -> Lexicon {
    assert!(n_terms >= 8, "ring needs at least 8 terms");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("w{:04}", i % n_terms);
    let mut cliques: Vec<Vec<String>> = Vec::with_capacity(n_cliques.max(n_terms));
    for k in 0..n_cliques.max(n_terms) {
        let center = if k < n_terms { k } else { rng.random_range(0..n_terms) };
        let size = rng.random_range(2..=5);
        let mut window: Vec<usize> = (0..7).map(|o| center + n_terms + o - 3).collect();
        window.retain(|&i| i % n_terms != center);
        window.shuffle(&mut rng);
        let mut members = vec![name(center)];
        members.extend(window.into_iter().take(size - 1).map(name));
        cliques.push(members);
    }
    Lexicon::from_cliques(&cliques).expect("ring cliques have at least two terms")
}

/// A homonym with a dominant money sense and a minority river sense.
#[derive(Debug, Clone)]
pub struct TwoSenseFixture {
    pub lexicon: Lexicon,
    pub query: &'static str,
    /// Anchor of the minority sense, the term to subtract.
    pub anchor: &'static str,
    /// The clique the anchor shares with the query.
    pub anchor_clique: &'static [&'static str],
    /// Terms belonging to each sense, query excluded.
    pub sense_terms: [&'static [&'static str]; 2],
}

const MONEY_CLIQUES: &[&[&str]] = &[
    &["bank", "money", "loan", "credit"],
    &["bank", "finance", "loan", "deposit"],
    &["bank", "lender", "mortgage", "credit"],
    &["bank", "savings", "account", "deposit"],
    &["money", "cash", "funds"],
    &["loan", "debt", "advance"],
];
const RIVER_CLIQUES: &[&[&str]] = &[
    &["bank", "river", "shore", "stream"],
    &["river", "stream", "brook", "creek"],
    &["shore", "coast", "riverside"],
];
const MONEY_TERMS: &[&str] = &[
    "money", "loan", "credit", "finance", "deposit", "lender", "mortgage", "savings", "account",
    "cash", "funds", "debt", "advance",
];
const RIVER_TERMS: &[&str] = &["river", "shore", "stream", "brook", "creek", "coast", "riverside"];

/// `bank` with a money sense and a river sense, embedded in a ring
/// lexicon of `n_background` unrelated terms.
pub fn two_sense_fixture(n_background: usize, seed: u64) -> TwoSenseFixture {
    let background = ring_lexicon(n_background, n_background * 2, seed);
    let mut cliques: Vec<Vec<String>> = MONEY_CLIQUES
        .iter()
        .chain(RIVER_CLIQUES)
        .map(|c| c.iter().map(|s| s.to_string()).collect())
        .collect();
    cliques.extend(
        background
            .cliques()
            .iter()
            .map(|c| c.iter().map(|&t| background.terms()[t as usize].clone()).collect()),
    );
    TwoSenseFixture {
        lexicon: Lexicon::from_cliques(&cliques).expect("fixture cliques are valid"),
        query: "bank",
        anchor: "river",
        anchor_clique: RIVER_CLIQUES[0],
        sense_terms: [MONEY_TERMS, RIVER_TERMS],
    }
}
