//! Reference BGP evaluator used to validate the table-based executor.
//!
//! Deliberately naive and structurally independent of the storage
//! layer: it deduplicates the raw triple sequence (RDF graphs are
//! sets), then extends binding maps pattern by pattern by scanning
//! every triple.

use std::collections::{HashMap, HashSet};

use super::{Bgp, NodePattern, ResultSet, TriplePattern};
use crate::term::{Dictionary, EncodedTriple, TermId};

pub fn oracle_execute(bgp: &Bgp, triples: &[EncodedTriple], dict: &Dictionary) -> ResultSet {
    let mut seen = HashSet::new();
    let deduped: Vec<EncodedTriple> = triples
        .iter()
        .filter(|t| seen.insert(**t))
        .copied()
        .collect();

    let mut solutions: Vec<HashMap<String, TermId>> = vec![HashMap::new()];
    for pattern in &bgp.patterns {
        let mut next = Vec::new();
        for solution in &solutions {
            for triple in &deduped {
                if let Some(extended) = extend(pattern, *triple, solution, dict) {
                    next.push(extended);
                }
            }
        }
        solutions = next;
        if solutions.is_empty() {
            break;
        }
    }

    let header = bgp.header();
    let rows = solutions
        .iter()
        .map(|solution| {
            header
                .iter()
                .map(|v| *solution.get(v).expect("header variable bound"))
                .collect()
        })
        .collect();
    ResultSet { header, rows }
}

fn extend(
    pattern: &TriplePattern,
    triple: EncodedTriple,
    solution: &HashMap<String, TermId>,
    dict: &Dictionary,
) -> Option<HashMap<String, TermId>> {
    let mut extended = solution.clone();
    for (node, value) in [
        (&pattern.s, triple.s),
        (&pattern.p, triple.p),
        (&pattern.o, triple.o),
    ] {
        match node {
            NodePattern::Const(term) => {
                if dict.lookup(term) != Some(value) {
                    return None;
                }
            }
            NodePattern::Var(name) => match extended.get(name) {
                Some(&bound) if bound != value => return None,
                Some(_) => {}
                None => {
                    extended.insert(name.clone(), value);
                }
            },
        }
    }
    Some(extended)
}
