//! Building the semantic space and keeping it current under new cliques.
//!
//! Each clique vector is the weighted sum of its terms' seeds, and each
//! term vector is the plain sum of the vectors of the cliques containing the
//! term, normalized to unit length. Accumulation runs in `f64`; the stored
//! coordinates are `f32`.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexicon::{CliqueId, Lexicon, TermId};
use crate::seedgen::{make_seed_salted, SeedVector, SpaceConfig, Weighting};

/// Norms below this are treated as a zero vector.
const DEGENERATE_NORM: f64 = 1e-12;

/// `ln(n_cliques / df)`, natural log. Zero for a term found in every clique.
pub fn idf(n_cliques: usize, df: usize) -> f64 {
    if df == 0 || n_cliques == 0 {
        return 0.0;
    }
    (n_cliques as f64 / df as f64).ln()
}

/// `(1 + ln tf) * idf`.
pub fn tf_idf(tf: u32, idf: f64) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    (1.0 + f64::from(tf).ln()) * idf
}

/// Weight of term `t` inside clique `k`, from the lexicon's current counts.
pub fn weight(lexicon: &Lexicon, scheme: Weighting, t: TermId, k: CliqueId) -> Result<f64> {
    let clique = lexicon.clique(k)?;
    let tf = clique.iter().filter(|&&x| x == t).count() as u32;
    if tf == 0 {
        return Err(Error::domain(format!("term {t} is not in clique {k}")));
    }
    Ok(match scheme {
        Weighting::Uniform => 1.0,
        Weighting::TfIdf => {
            let df = lexicon.membership(t)?.len();
            tf_idf(tf, idf(lexicon.n_cliques(), df))
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildReport {
    pub n_terms: usize,
    pub n_cliques: usize,
    /// Terms whose vector summed to zero; they are excluded from queries.
    pub degenerate: Vec<String>,
    /// Terms re-derived with a non-zero salt after a seed collision.
    pub resalted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateReport {
    pub clique: CliqueId,
    pub new_terms: Vec<TermId>,
    /// Every term whose vector was recomputed, ascending.
    pub touched: Vec<TermId>,
    pub degenerate: Vec<TermId>,
    pub resalted: Vec<TermId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSpace {
    pub(crate) config: SpaceConfig,
    pub(crate) lexicon: Lexicon,
    pub(crate) seeds: Vec<SeedVector>,
    pub(crate) salts: Vec<u32>,
    /// Frozen per-term idf; only refreshed by a full build or `reweight`.
    pub(crate) idf: Vec<f64>,
    pub(crate) degenerate: Vec<bool>,
    /// Row-major `n_terms x dim`.
    pub(crate) vectors: Vec<f32>,
}

fn fingerprint(seed: &SeedVector) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    h.finish()
}

impl SemanticSpace {
    /// Builds every term vector. Seed collisions are repaired by re-deriving
    /// the later term with an incremented salt.
    pub fn build(lexicon: Lexicon, config: SpaceConfig) -> Result<(SemanticSpace, BuildReport)> {
        config.validate()?;
        let n = lexicon.n_terms();
        let idf = (0..n as TermId)
            .map(|t| idf(lexicon.n_cliques(), lexicon.membership(t).map_or(0, <[_]>::len)))
            .collect();
        let salts = vec![0; n];
        let mut space = SemanticSpace {
            config,
            seeds: derive_seeds(&lexicon, &salts, &config),
            lexicon,
            salts,
            idf,
            degenerate: vec![false; n],
            vectors: vec![0.0; n * config.dim],
        };
        let resalted = space.repair_collisions(0);
        space.recompute_all();
        let report = BuildReport {
            n_terms: n,
            n_cliques: space.lexicon.n_cliques(),
            degenerate: space.degenerate_terms().map(str::to_owned).collect(),
            resalted: resalted
                .iter()
                .map(|&t| space.lexicon.terms()[t as usize].clone())
                .collect(),
        };
        Ok((space, report))
    }

    /// Resalts every term from `first` on whose seed collides with any
    /// earlier term. Returns the terms that changed.
    fn repair_collisions(&mut self, first: usize) -> Vec<TermId> {
        let mut seen: HashMap<u64, Vec<TermId>> = HashMap::with_capacity(self.seeds.len());
        let mut changed = Vec::new();
        for t in 0..self.seeds.len() {
            if t >= first {
                let mut bumped = false;
                while seen
                    .get(&fingerprint(&self.seeds[t]))
                    .is_some_and(|ids| ids.iter().any(|&o| self.seeds[o as usize] == self.seeds[t]))
                {
                    self.salts[t] += 1;
                    self.seeds[t] =
                        make_seed_salted(&self.lexicon.terms()[t], self.salts[t], &self.config);
                    bumped = true;
                }
                if bumped {
                    changed.push(t as TermId);
                }
            }
            seen.entry(fingerprint(&self.seeds[t])).or_default().push(t as TermId);
        }
        changed
    }

    pub fn config(&self) -> &SpaceConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn n_terms(&self) -> usize {
        self.lexicon.n_terms()
    }

    pub fn seed(&self, t: TermId) -> Result<&SeedVector> {
        self.seeds.get(t as usize).ok_or(Error::UnknownTermId(t))
    }

    pub fn salt(&self, t: TermId) -> Result<u32> {
        self.salts.get(t as usize).copied().ok_or(Error::UnknownTermId(t))
    }

    pub fn idf_of(&self, t: TermId) -> Result<f64> {
        self.idf.get(t as usize).copied().ok_or(Error::UnknownTermId(t))
    }

    pub fn is_degenerate(&self, t: TermId) -> bool {
        self.degenerate.get(t as usize).copied().unwrap_or(false)
    }

    pub fn degenerate_terms(&self) -> impl Iterator<Item = &str> + '_ {
        self.degenerate
            .iter()
            .zip(self.lexicon.terms())
            .filter(|(d, _)| **d)
            .map(|(_, t)| t.as_str())
    }

    /// Stored row, without checking for degeneracy.
    pub fn raw_vector(&self, t: TermId) -> Result<&[f32]> {
        let dim = self.config.dim;
        let start = t as usize * dim;
        self.vectors
            .get(start..start + dim)
            .ok_or(Error::UnknownTermId(t))
    }

    /// Unit vector of a queryable term.
    pub fn vector(&self, t: TermId) -> Result<&[f32]> {
        let row = self.raw_vector(t)?;
        if self.degenerate[t as usize] {
            return Err(Error::DegenerateTerm(self.lexicon.terms()[t as usize].clone()));
        }
        Ok(row)
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    /// Resolves a term string to a queryable id.
    pub fn resolve(&self, term: &str) -> Result<TermId> {
        let id = self.lexicon.id(term)?;
        self.vector(id)?;
        Ok(id)
    }

    fn term_weight(&self, t: TermId) -> f64 {
        match self.config.weighting {
            Weighting::Uniform => 1.0,
            // Terms occur once per clique after deduplication.
            Weighting::TfIdf => tf_idf(1, self.idf[t as usize]),
        }
    }

    fn accumulate_clique(&self, k: CliqueId, out: &mut [f64]) {
        for &t in &self.lexicon.cliques()[k as usize] {
            self.seeds[t as usize].add_scaled_to(self.term_weight(t), out);
        }
    }

    /// Unnormalized clique vector, weighted by the space's frozen idf.
    pub fn clique_vector(&self, k: CliqueId) -> Result<Vec<f64>> {
        self.lexicon.clique(k)?;
        let mut out = vec![0.0; self.config.dim];
        self.accumulate_clique(k, &mut out);
        Ok(out)
    }

    /// Sum of the term's clique vectors, scaled to unit norm.
    pub fn term_vector(&self, t: TermId) -> Result<Vec<f64>> {
        let mut buf = vec![0.0; self.config.dim];
        if !self.sum_term(t, &mut buf)? {
            return Err(Error::DegenerateTerm(self.lexicon.terms()[t as usize].clone()));
        }
        Ok(buf)
    }

    /// Fills `buf` with the normalized term vector; false if it is zero.
    fn sum_term(&self, t: TermId, buf: &mut [f64]) -> Result<bool> {
        buf.fill(0.0);
        for &k in self.lexicon.membership(t)? {
            self.accumulate_clique(k, buf);
        }
        let norm = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= DEGENERATE_NORM {
            buf.fill(0.0);
            return Ok(false);
        }
        buf.iter_mut().for_each(|x| *x /= norm);
        Ok(true)
    }

    fn compute_row(&self, t: TermId, row: &mut [f32], buf: &mut [f64]) -> bool {
        let ok = self.sum_term(t, buf).unwrap_or(false);
        for (dst, &src) in row.iter_mut().zip(buf.iter()) {
            *dst = src as f32;
        }
        ok
    }

    fn recompute_all(&mut self) {
        let dim = self.config.dim;
        if dim == 0 || self.lexicon.is_empty() {
            return;
        }
        let mut vectors = std::mem::take(&mut self.vectors);
        let mut degenerate = std::mem::take(&mut self.degenerate);
        {
            let this = &*self;
            let work = |(t, (row, flag)): (usize, (&mut [f32], &mut bool))| {
                let mut buf = vec![0.0; dim];
                *flag = !this.compute_row(t as TermId, row, &mut buf);
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                vectors
                    .par_chunks_mut(dim)
                    .zip(degenerate.par_iter_mut())
                    .enumerate()
                    .for_each(work);
            }
            #[cfg(not(feature = "parallel"))]
            vectors
                .chunks_mut(dim)
                .zip(degenerate.iter_mut())
                .enumerate()
                .for_each(work);
        }
        self.vectors = vectors;
        self.degenerate = degenerate;
    }

    fn recompute(&mut self, terms: &[TermId]) {
        let dim = self.config.dim;
        let mut buf = vec![0.0; dim];
        let mut row = vec![0.0f32; dim];
        for &t in terms {
            let ok = self.compute_row(t, &mut row, &mut buf);
            let start = t as usize * dim;
            self.vectors[start..start + dim].copy_from_slice(&row);
            self.degenerate[t as usize] = !ok;
        }
    }

    /// Inserts a clique and recomputes only the vectors of terms in the
    /// union of the new members' neighborhoods. Idf is refreshed for the
    /// clique's own members and left frozen everywhere else.
    pub fn add_clique(&mut self, terms: &[&str]) -> Result<UpdateReport> {
        let old_n = self.lexicon.n_terms();
        let clique = self.lexicon.push_clique(terms)?;
        let n = self.lexicon.n_terms();
        for t in old_n..n {
            let seed = make_seed_salted(&self.lexicon.terms()[t], 0, &self.config);
            self.seeds.push(seed);
            self.salts.push(0);
            self.idf.push(0.0);
            self.degenerate.push(false);
        }
        self.vectors.resize(n * self.config.dim, 0.0);
        let resalted = if n > old_n {
            self.repair_collisions(old_n)
        } else {
            Vec::new()
        };

        let members = self.lexicon.cliques()[clique as usize].clone();
        let n_cliques = self.lexicon.n_cliques();
        for &t in &members {
            self.idf[t as usize] = idf(n_cliques, self.lexicon.membership(t)?.len());
        }

        let mut touched: Vec<TermId> = Vec::new();
        for &t in &members {
            touched.extend(self.lexicon.neighborhood(t)?);
        }
        touched.sort_unstable();
        touched.dedup();
        self.recompute(&touched);

        Ok(UpdateReport {
            clique,
            new_terms: (old_n as TermId..n as TermId).collect(),
            degenerate: touched
                .iter()
                .copied()
                .filter(|&t| self.degenerate[t as usize])
                .collect(),
            touched,
            resalted,
        })
    }

    /// Recomputes every vector with the current (frozen) idf table.
    pub fn rebuild_frozen(&mut self) {
        self.recompute_all();
    }

    /// Refreshes idf from the lexicon's counts and rebuilds every vector.
    pub fn reweight(&mut self) {
        let n_cliques = self.lexicon.n_cliques();
        for t in 0..self.lexicon.n_terms() {
            self.idf[t] = idf(n_cliques, self.lexicon.membership(t as TermId).map_or(0, <[_]>::len));
        }
        self.recompute_all();
    }

    /// Reassembles a space from stored parts and regenerates seeds and idf.
    pub(crate) fn from_stored(
        config: SpaceConfig,
        lexicon: Lexicon,
        salts: Vec<u32>,
        degenerate: Vec<bool>,
        vectors: Vec<f32>,
    ) -> SemanticSpace {
        let n_cliques = lexicon.n_cliques();
        let idf = (0..lexicon.n_terms() as TermId)
            .map(|t| idf(n_cliques, lexicon.membership(t).map_or(0, <[_]>::len)))
            .collect();
        SemanticSpace {
            seeds: derive_seeds(&lexicon, &salts, &config),
            config,
            lexicon,
            salts,
            idf,
            degenerate,
            vectors,
        }
    }
}

fn derive_seeds(lexicon: &Lexicon, salts: &[u32], config: &SpaceConfig) -> Vec<SeedVector> {
    let make = |(term, &salt): (&String, &u32)| make_seed_salted(term, salt, config);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        lexicon.terms().par_iter().zip(salts.par_iter()).map(make).collect()
    }
    #[cfg(not(feature = "parallel"))]
    lexicon.terms().iter().zip(salts.iter()).map(make).collect()
}
