//! RDF terms, dictionary encoding and encoded triples.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An RDF term. Two terms are equal iff their kind and lexical form are
/// equal; literals carry their datatype/language suffix verbatim as part
/// of the lexical form, with no value-space normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// IRI text without the enclosing angle brackets.
    Iri(String),
    /// Full literal as written in N-Triples: quotes, escapes and any
    /// `@lang` / `^^<datatype>` suffix included.
    Literal(String),
    /// Blank node label without the `_:` prefix. Labels are scoped to
    /// one load and treated as constants.
    BlankNode(String),
}

impl Term {
    pub fn iri(text: impl Into<String>) -> Self {
        Term::Iri(text.into())
    }

    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(s) | Term::Literal(s) | Term::BlankNode(s) => s,
        }
    }

    /// Renders the term back in N-Triples syntax.
    pub fn to_ntriples(&self) -> String {
        match self {
            Term::Iri(s) => format!("<{s}>"),
            Term::Literal(s) => s.clone(),
            Term::BlankNode(s) => format!("_:{s}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ntriples())
    }
}

/// Dense dictionary id, assigned in first-seen order during one load.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TermId(pub u32);

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A triple with all three terms dictionary-encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedTriple {
    pub s: TermId,
    pub p: TermId,
    pub o: TermId,
}

/// Bijective term <-> id mapping for one loaded dataset.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    terms: Vec<Term>,
    index: HashMap<Term, TermId>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `term`, inserting it if unseen.
    pub fn encode(&mut self, term: Term) -> TermId {
        if let Some(&id) = self.index.get(&term) {
            return id;
        }
        let id = TermId(self.terms.len() as u32);
        self.terms.push(term.clone());
        self.index.insert(term, id);
        id
    }

    pub fn lookup(&self, term: &Term) -> Option<TermId> {
        self.index.get(term).copied()
    }

    pub fn decode(&self, id: TermId) -> &Term {
        &self.terms[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Rebuilds a dictionary from a decoded term list (persistence path).
    pub fn from_terms(terms: Vec<Term>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), TermId(i as u32)))
            .collect();
        Dictionary { terms, index }
    }
}
