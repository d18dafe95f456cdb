//! RDF storage and query engine organized around characteristic sets.
//!
//! Triples are dictionary-encoded, grouped into characteristic-set (CS)
//! tables by the property set of their subjects, and hierarchically
//! related CSs are merged into wider nullable tables to cut down table
//! count and join fan-out. Queries are conjunctive basic graph patterns
//! evaluated as table permutations pruned by an object-subject link
//! index, with an optional distance-based triple-pattern reordering
//! planner.

pub mod cs;
pub mod error;
pub mod ingest;
pub mod merge;
pub mod query;
pub mod reorder;
pub mod storage;
pub mod synth;
pub mod term;

pub use error::{Error, Result};
pub use term::{Dictionary, EncodedTriple, Term, TermId};
