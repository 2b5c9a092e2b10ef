//! Similarity, ranked neighbors, Gram-Schmidt sense subtraction and
//! clique-seeded clustering over a built space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{CliqueId, TermId};
use crate::space::SemanticSpace;

/// Residual norm below which a subtracted vector counts as dependent.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-6;

/// Slack allowed on the similarity range before `distance` rejects it.
const SIGMA_SLACK: f64 = 1e-6;

pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.9;
pub const DEFAULT_CLUSTER_MEMBERS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub term: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub query_term: String,
    pub subtracted_terms: Vec<String>,
    pub k: usize,
    pub entries: Vec<Neighbor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Union of the terms of the cliques merged into this cluster.
    pub label: Vec<String>,
    pub cliques: Vec<CliqueId>,
    /// Similarity between the cluster centroid and the query vector.
    pub score: f64,
    pub members: Vec<Neighbor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub query_term: String,
    pub subtracted_terms: Vec<String>,
    pub clusters: Vec<Cluster>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub merge_threshold: f64,
    pub members: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            members: DEFAULT_CLUSTER_MEMBERS,
        }
    }
}

fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

fn dot_mixed(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * f64::from(y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// Inner product of two term vectors.
pub fn similarity(space: &SemanticSpace, a: &str, b: &str) -> Result<f64> {
    let va = space.vector(space.resolve(a)?)?;
    let vb = space.vector(space.resolve(b)?)?;
    Ok(dot_f32(va, vb))
}

pub fn similarity_by_id(space: &SemanticSpace, a: TermId, b: TermId) -> Result<f64> {
    Ok(dot_f32(space.vector(a)?, space.vector(b)?))
}

/// `sqrt(2(1 - sigma))`, with float noise at the boundaries clamped.
pub fn distance(sigma: f64) -> Result<f64> {
    if !(-1.0 - SIGMA_SLACK..=1.0 + SIGMA_SLACK).contains(&sigma) {
        return Err(Error::domain(format!("similarity {sigma} outside [-1, 1]")));
    }
    Ok((2.0 * (1.0 - sigma.clamp(-1.0, 1.0))).sqrt())
}

/// Orthonormal basis of the span of the subtracted term vectors.
#[derive(Debug, Clone, Default)]
pub struct SubtractionBasis {
    terms: Vec<String>,
    basis: Vec<Vec<f64>>,
}

impl SubtractionBasis {
    /// Classical Gram-Schmidt with one re-orthogonalization pass, in the
    /// given order. `base` may not appear among `minus`.
    pub fn new(space: &SemanticSpace, base: Option<TermId>, minus: &[&str]) -> Result<Self> {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(minus.len());
        let mut terms = Vec::with_capacity(minus.len());
        for &name in minus {
            let id = space.resolve(name)?;
            if Some(id) == base {
                return Err(Error::domain(format!(
                    "cannot subtract the query term itself: {name}"
                )));
            }
            let mut v = widen(space.vector(id)?);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm < DEPENDENCE_TOLERANCE {
                return Err(Error::DependentSubtrahend(name.to_owned()));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            terms.push(space.lexicon().terms()[id as usize].clone());
        }
        Ok(SubtractionBasis { terms, basis })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Removes the component of `v` lying in the subtracted span.
    pub fn project_out(&self, v: &mut [f64]) {
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(v, q);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
    }
}

/// `|base>` with the span of `minus` projected out. Not renormalized.
pub fn orthogonalize(space: &SemanticSpace, base: &str, minus: &[&str]) -> Result<Vec<f64>> {
    let id = space.resolve(base)?;
    let basis = SubtractionBasis::new(space, Some(id), minus)?;
    let mut v = widen(space.vector(id)?);
    basis.project_out(&mut v);
    Ok(v)
}

/// Scores every queryable term against `query` and keeps the best `k`.
/// Ties fall back to ascending term id.
pub fn rank(space: &SemanticSpace, query: &[f64], k: usize) -> Vec<(TermId, f64)> {
    let dim = space.dim();
    let mut scored: Vec<(TermId, f64)> = space
        .vectors()
        .chunks(dim.max(1))
        .enumerate()
        .filter(|&(t, _)| !space.is_degenerate(t as TermId))
        .map(|(t, row)| (t as TermId, dot_mixed(query, row)))
        .collect();
    let order = |a: &(TermId, f64), b: &(TermId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < scored.len() {
        if k > 0 {
            scored.select_nth_unstable_by(k - 1, order);
        }
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored
}

fn to_neighbors(space: &SemanticSpace, ranked: Vec<(TermId, f64)>) -> Vec<Neighbor> {
    ranked
        .into_iter()
        .map(|(t, s)| Neighbor {
            term: space.lexicon().terms()[t as usize].clone(),
            similarity: s,
        })
        .collect()
}

/// Top-`k` neighbors of `term` after subtracting `minus`. Subtracted terms
/// stay in the candidate pool.
pub fn neighbors(
    space: &SemanticSpace,
    term: &str,
    k: usize,
    minus: &[&str],
    renormalize: bool,
) -> Result<NeighborList> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let id = space.resolve(term)?;
    let basis = SubtractionBasis::new(space, Some(id), minus)?;
    let mut query = widen(space.vector(id)?);
    basis.project_out(&mut query);
    if renormalize {
        let norm = dot(&query, &query).sqrt();
        if norm > DEPENDENCE_TOLERANCE {
            query.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(NeighborList {
        query_term: space.lexicon().terms()[id as usize].clone(),
        subtracted_terms: basis.terms().to_vec(),
        k,
        entries: to_neighbors(space, rank(space, &query, k)),
    })
}

/// One cluster per clique containing `term`, merging cliques whose
/// centroids are closer than the merge threshold.
pub fn clusters(
    space: &SemanticSpace,
    term: &str,
    minus: &[&str],
    options: ClusterOptions,
) -> Result<ClusterSet> {
    let id = space.resolve(term)?;
    let basis = SubtractionBasis::new(space, Some(id), minus)?;
    let mut query = widen(space.vector(id)?);
    basis.project_out(&mut query);

    struct Group {
        cliques: Vec<CliqueId>,
        members: Vec<TermId>,
        centroid: Vec<f64>,
    }

    let centroid_of = |members: &[TermId]| -> Option<Vec<f64>> {
        let mut c = vec![0.0; space.dim()];
        for &t in members {
            if let Ok(v) = space.vector(t) {
                c.iter_mut().zip(v).for_each(|(x, &y)| *x += f64::from(y));
            }
        }
        let norm = dot(&c, &c).sqrt();
        (norm > DEPENDENCE_TOLERANCE).then(|| {
            c.iter_mut().for_each(|x| *x /= norm);
            c
        })
    };

    let mut groups: Vec<Group> = Vec::new();
    for &k in space.lexicon().membership(id)? {
        let clique = space.lexicon().clique(k)?;
        let Some(centroid) = centroid_of(clique) else {
            continue;
        };
        let target = groups
            .iter()
            .position(|g| dot(&g.centroid, &centroid) > options.merge_threshold);
        match target {
            Some(i) => {
                let g = &mut groups[i];
                g.cliques.push(k);
                for &t in clique {
                    if !g.members.contains(&t) {
                        g.members.push(t);
                    }
                }
                if let Some(c) = centroid_of(&g.members) {
                    g.centroid = c;
                }
            }
            None => groups.push(Group {
                cliques: vec![k],
                members: clique.to_vec(),
                centroid,
            }),
        }
    }

    let mut out: Vec<Cluster> = groups
        .into_iter()
        .map(|g| {
            let mut centroid = g.centroid;
            basis.project_out(&mut centroid);
            Cluster {
                label: g
                    .members
                    .iter()
                    .map(|&t| space.lexicon().terms()[t as usize].clone())
                    .collect(),
                cliques: g.cliques,
                score: dot(&centroid, &query),
                members: to_neighbors(space, rank(space, &centroid, options.members)),
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.cliques.cmp(&b.cliques)));

    Ok(ClusterSet {
        query_term: space.lexicon().terms()[id as usize].clone(),
        subtracted_terms: basis.terms().to_vec(),
        clusters: out,
    })
}
