//! Random-indexing semantic spaces built from synonym cliques.
//!
//! Every term gets a sparse ternary seed vector. A clique's vector is the
//! weighted sum of its terms' seeds and a term's vector is the normalized
//! sum of the vectors of its cliques. Similarity is the inner product of
//! two term vectors, and an unwanted sense of a homonym can be removed by
//! Gram-Schmidt subtraction of a term that carries that sense.
//!
//! ```
//! use semspace::{Lexicon, SemanticSpace, SpaceConfig, Weighting, query};
//!
//! let (lexicon, _warnings) = Lexicon::parse_str("bank;money;loan\nbank;river;shore\n").unwrap();
//! let config = SpaceConfig::new(1000, 10, 42, Weighting::Uniform).unwrap();
//! let (space, _report) = SemanticSpace::build(lexicon, config).unwrap();
//! let list = query::neighbors(&space, "bank", 3, &["river"], false).unwrap();
//! assert_eq!(list.subtracted_terms, ["river"]);
//! ```

pub mod error;
pub mod lexicon;
pub mod noise;
pub mod query;
pub mod seedgen;
pub mod space;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use lexicon::{CliqueId, Lexicon, LexiconStats, ParseWarning, Separation, TermId};
pub use noise::{NoiseReport, Pmf, SampleMode};
pub use query::{ClusterOptions, ClusterSet, NeighborList};
pub use seedgen::{OverlapLaw, SeedVector, SpaceConfig, Weighting};
pub use space::{BuildReport, SemanticSpace, UpdateReport};
