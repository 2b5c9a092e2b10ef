//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every exported call returns a JSON string. The `*_json` functions hold
//! the logic and are plain Rust, so they are tested natively.

use serde_json::json;
use wasm_bindgen::prelude::*;

use semspace::query::{self, ClusterOptions};
use semspace::synth::two_sense_fixture;
use semspace::{Lexicon, NoiseReport, OverlapLaw, SampleMode, SemanticSpace, SpaceConfig, Weighting};

/// Browser tabs stay responsive below this.
pub const MAX_SAMPLES: u32 = 5_000_000;

fn split_terms(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Theoretical pmf against a sampled histogram, ready to plot.
pub fn noise_json(dim: usize, m: usize, mode: &str, law: &str, samples: u32, rng_seed: u32) -> Result<String, String> {
    if samples > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples"));
    }
    let mode: SampleMode = mode.parse().map_err(|e: semspace::Error| e.to_string())?;
    let law: OverlapLaw = law.parse().map_err(|e: semspace::Error| e.to_string())?;
    let r = NoiseReport::generate(dim, m, mode, u64::from(samples), u64::from(rng_seed), law)
        .map_err(|e| e.to_string())?;
    let hist = &r.histogram;
    let centers: Vec<f64> = (0..hist.bins()).map(|b| hist.center(b)).collect();
    let out = json!({
        "theoretical": r.theoretical_pmf.iter().map(|&(x, p)| [x, p]).collect::<Vec<_>>(),
        "theoretical_std": r.theoretical_std,
        "bin_width": hist.width,
        "bin_centers": centers,
        "empirical": hist.probabilities(),
        "empirical_mean": r.empirical_mean,
        "empirical_std": r.empirical_std,
        "max_abs_deviation": r.max_abs_deviation,
        "band_pass": r.band_pass,
        "gaussian": r.gaussian_reference().iter().map(|&(x, p)| [x, p]).collect::<Vec<_>>(),
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn noise(dim: usize, m: usize, mode: &str, law: &str, samples: u32, rng_seed: u32) -> Result<String, JsError> {
    to_js(noise_json(dim, m, mode, law, samples, rng_seed))
}

/// A small two-sense lexicon to start from.
#[wasm_bindgen]
pub fn sample_cliques() -> String {
    two_sense_fixture(40, 1).lexicon.to_text()
}

/// A space built from clique text, kept alive between queries.
#[wasm_bindgen]
pub struct Demo {
    space: SemanticSpace,
    warnings: Vec<String>,
}

impl Demo {
    pub fn build(cliques: &str, dim: usize, m: usize, seed: u32) -> Result<Demo, String> {
        let (lexicon, warnings) = Lexicon::parse_str(cliques).map_err(|e| e.to_string())?;
        let config = SpaceConfig::new(dim, m, u64::from(seed), Weighting::TfIdf).map_err(|e| e.to_string())?;
        let (space, _) = SemanticSpace::build(lexicon, config).map_err(|e| e.to_string())?;
        let warnings = warnings.iter().map(|w| format!("line {}: {}", w.line, w.message)).collect();
        Ok(Demo { space, warnings })
    }

    pub fn neighbors_json(&self, term: &str, k: usize, minus: &str) -> Result<String, String> {
        let list = query::neighbors(&self.space, term, k, &split_terms(minus), false).map_err(|e| e.to_string())?;
        serde_json::to_string(&list).map_err(|e| e.to_string())
    }

    pub fn clusters_json(&self, term: &str, minus: &str, merge_threshold: f64) -> Result<String, String> {
        let options = ClusterOptions { merge_threshold, ..ClusterOptions::default() };
        let set = query::clusters(&self.space, term, &split_terms(minus), options).map_err(|e| e.to_string())?;
        serde_json::to_string(&set).map_err(|e| e.to_string())
    }

    pub fn summary_json(&self) -> String {
        json!({
            "terms": self.space.n_terms(),
            "cliques": self.space.lexicon().n_cliques(),
            "degenerate": self.space.degenerate_terms().collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
        .to_string()
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(cliques: &str, dim: usize, m: usize, seed: u32) -> Result<Demo, JsError> {
        Demo::build(cliques, dim, m, seed).map_err(|e| JsError::new(&e))
    }

    pub fn neighbors(&self, term: &str, k: usize, minus: &str) -> Result<String, JsError> {
        to_js(self.neighbors_json(term, k, minus))
    }

    pub fn clusters(&self, term: &str, minus: &str, merge_threshold: f64) -> Result<String, JsError> {
        to_js(self.clusters_json(term, minus, merge_threshold))
    }

    pub fn summary(&self) -> String {
        self.summary_json()
    }
}
