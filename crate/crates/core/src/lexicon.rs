//! Synonym-clique lexicon: the term–clique bipartite graph.
//!
//! Input is plain UTF-8 text with one clique per line, terms separated by
//! `;`. Lines starting with `#` are comments and blank lines are skipped.
//! Multiword terms are written with `_` in place of spaces
//! (`train_de_maison`). Terms are matched exactly after trimming
//! surrounding whitespace.

use std::collections::{HashMap, VecDeque};
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};

pub type TermId = u32;
pub type CliqueId = u32;

/// Non-fatal problem found while parsing a clique file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    terms: Vec<String>,
    index: HashMap<String, TermId>,
    cliques: Vec<Vec<TermId>>,
    membership: Vec<Vec<CliqueId>>,
}

/// Result of interpreting the path between two terms in the clique graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Separation {
    /// Number of clique hops; terms sharing a clique are 1 apart.
    Hops(u32),
    /// The terms live in different connected components.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconStats {
    pub n_terms: usize,
    pub n_cliques: usize,
    pub diameter_min: usize,
    pub diameter_mean: f64,
    pub diameter_max: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::new()
    }
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon {
            terms: Vec::new(),
            index: HashMap::new(),
            cliques: Vec::new(),
            membership: Vec::new(),
        }
    }

    /// Parses a clique file. Malformed UTF-8 is fatal; cliques with fewer
    /// than two distinct terms are skipped and reported as warnings.
    pub fn parse<R: BufRead>(mut reader: R) -> Result<(Lexicon, Vec<ParseWarning>)> {
        let mut lexicon = Lexicon::new();
        let mut warnings = Vec::new();
        let mut buf = Vec::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if reader.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let line = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("invalid UTF-8: {e}"),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let terms: Vec<&str> = line.split(';').collect();
            if let Err(err) = lexicon.push_clique(&terms) {
                warnings.push(ParseWarning {
                    line: line_no,
                    message: err.to_string(),
                });
            }
        }
        Ok((lexicon, warnings))
    }

    pub fn parse_str(text: &str) -> Result<(Lexicon, Vec<ParseWarning>)> {
        Self::parse(text.as_bytes())
    }

    /// Builds a lexicon from explicit cliques, failing on the first invalid one.
    pub fn from_cliques<I, C, S>(cliques: I) -> Result<Lexicon>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut lexicon = Lexicon::new();
        for clique in cliques {
            let terms: Vec<&str> = clique.as_ref().iter().map(AsRef::as_ref).collect();
            lexicon.push_clique(&terms)?;
        }
        Ok(lexicon)
    }

    /// Appends a clique, interning unseen terms. Duplicates inside the clique
    /// collapse; the clique must keep at least two distinct terms.
    pub fn push_clique(&mut self, terms: &[&str]) -> Result<CliqueId> {
        let mut distinct: Vec<&str> = Vec::with_capacity(terms.len());
        for term in terms.iter().map(|t| t.trim()).filter(|t| !t.is_empty()) {
            if !distinct.contains(&term) {
                distinct.push(term);
            }
        }
        if distinct.len() < 2 {
            return Err(Error::domain(format!(
                "clique needs at least 2 distinct terms, got {}",
                distinct.len()
            )));
        }
        if self.cliques.len() >= CliqueId::MAX as usize {
            return Err(Error::domain("too many cliques"));
        }
        let clique_id = self.cliques.len() as CliqueId;
        let ids: Vec<TermId> = distinct.into_iter().map(|t| self.intern(t)).collect();
        for &id in &ids {
            self.membership[id as usize].push(clique_id);
        }
        self.cliques.push(ids);
        Ok(clique_id)
    }

    fn intern(&mut self, term: &str) -> TermId {
        if let Some(&id) = self.index.get(term) {
            return id;
        }
        let id = self.terms.len() as TermId;
        self.terms.push(term.to_owned());
        self.index.insert(term.to_owned(), id);
        self.membership.push(Vec::new());
        id
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn n_cliques(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: TermId) -> Result<&str> {
        self.terms
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::UnknownTermId(id))
    }

    pub fn id(&self, term: &str) -> Result<TermId> {
        self.index
            .get(term.trim())
            .copied()
            .ok_or_else(|| Error::TermNotFound(term.to_owned()))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term.trim())
    }

    pub fn cliques(&self) -> &[Vec<TermId>] {
        &self.cliques
    }

    pub fn clique(&self, id: CliqueId) -> Result<&[TermId]> {
        self.cliques
            .get(id as usize)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownCliqueId(id))
    }

    /// Clique ids containing `term`, ascending.
    pub fn membership(&self, term: TermId) -> Result<&[CliqueId]> {
        self.membership
            .get(term as usize)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownTermId(term))
    }

    /// The set D_i of distinct terms over all cliques containing `term`,
    /// sorted by id. Always contains `term` itself.
    pub fn neighborhood(&self, term: TermId) -> Result<Vec<TermId>> {
        let mut out: Vec<TermId> = self
            .membership(term)?
            .iter()
            .flat_map(|&k| self.cliques[k as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// |D_i|, the term's diameter.
    pub fn diameter(&self, term: TermId) -> Result<usize> {
        Ok(self.neighborhood(term)?.len())
    }

    /// |D_i ∩ D_k|.
    pub fn overlap_similarity(&self, a: TermId, b: TermId) -> Result<usize> {
        let da = self.neighborhood(a)?;
        let db = self.neighborhood(b)?;
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < da.len() && j < db.len() {
            match da[i].cmp(&db[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(n)
    }

    /// Breadth-first search over the bipartite term–clique graph. The
    /// bipartite path length is halved, so terms sharing a clique are at 1.
    /// A term is at 0 from itself.
    pub fn degree_of_separation(&self, from: TermId, to: TermId) -> Result<Separation> {
        self.membership(from)?;
        self.membership(to)?;
        if from == to {
            return Ok(Separation::Hops(0));
        }
        let mut term_dist = vec![u32::MAX; self.terms.len()];
        let mut clique_seen = vec![false; self.cliques.len()];
        let mut queue = VecDeque::from([from]);
        term_dist[from as usize] = 0;
        while let Some(t) = queue.pop_front() {
            let next = term_dist[t as usize] + 1;
            for &k in &self.membership[t as usize] {
                if std::mem::replace(&mut clique_seen[k as usize], true) {
                    continue;
                }
                for &u in &self.cliques[k as usize] {
                    if term_dist[u as usize] != u32::MAX {
                        continue;
                    }
                    if u == to {
                        return Ok(Separation::Hops(next));
                    }
                    term_dist[u as usize] = next;
                    queue.push_back(u);
                }
            }
        }
        Ok(Separation::Unreachable)
    }

    pub fn stats(&self) -> LexiconStats {
        let diameters: Vec<usize> = (0..self.terms.len() as TermId)
            .map(|t| self.neighborhood(t).map(|d| d.len()).unwrap_or(0))
            .collect();
        let n = diameters.len();
        LexiconStats {
            n_terms: n,
            n_cliques: self.cliques.len(),
            diameter_min: diameters.iter().copied().min().unwrap_or(0),
            diameter_mean: if n == 0 {
                0.0
            } else {
                diameters.iter().sum::<usize>() as f64 / n as f64
            },
            diameter_max: diameters.iter().copied().max().unwrap_or(0),
        }
    }

    /// Serializes back to the clique file format, one line per clique.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for clique in &self.cliques {
            for (i, &t) in clique.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                out.push_str(&self.terms[t as usize]);
            }
            out.push('\n');
        }
        out
    }

    /// Reassembles a lexicon from an explicit term table and clique lists,
    /// as read back from a store. Term order is preserved exactly.
    pub(crate) fn from_parts(terms: Vec<String>, cliques: Vec<Vec<TermId>>) -> Result<Lexicon> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i as TermId).is_some() {
                return Err(Error::Corrupt(format!("duplicate term {t:?}")));
            }
        }
        let mut membership = vec![Vec::new(); terms.len()];
        for (k, clique) in cliques.iter().enumerate() {
            if clique.len() < 2 {
                return Err(Error::Corrupt(format!("clique {k} has fewer than 2 terms")));
            }
            for (pos, &t) in clique.iter().enumerate() {
                let slot = membership
                    .get_mut(t as usize)
                    .ok_or_else(|| Error::Corrupt(format!("clique {k} references term {t}")))?;
                if clique[..pos].contains(&t) {
                    return Err(Error::Corrupt(format!("clique {k} repeats term {t}")));
                }
                slot.push(k as CliqueId);
            }
        }
        if let Some(t) = membership.iter().position(Vec::is_empty) {
            return Err(Error::Corrupt(format!("term {t} belongs to no clique")));
        }
        Ok(Lexicon {
            terms,
            index,
            cliques,
            membership,
        })
    }
}
