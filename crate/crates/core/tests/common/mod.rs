//! Helpers shared by the integration suites.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use raxon_core::cs::{
    build_closure, extract_cs, CharacteristicSet, CsId, InferredHierarchy, PropertySet,
    SubjectRecord,
};
use raxon_core::ingest::{collect_stats, parse_ntriples_str, RDF_TYPE_IRI};
use raxon_core::merge::{compute_plan, DensityConfig, MergeAlgorithm, DEFAULT_ENUM_BUDGET};
use raxon_core::storage::Database;
use raxon_core::term::{EncodedTriple, Term, TermId};

/// Full load pipeline over in-memory N-Triples text.
pub fn db_from_text(
    text: &str,
    m: f64,
    algo: MergeAlgorithm,
) -> (Database, Vec<EncodedTriple>) {
    let parsed = parse_ntriples_str(text, true).expect("fixture parses");
    let css = extract_cs(&parsed.triples);
    let closure = build_closure(&css);
    let config = DensityConfig::new(m).unwrap();
    let plan = compute_plan(&closure, &css, config, algo, DEFAULT_ENUM_BUDGET)
        .expect("plan within budget");
    let type_prop = parsed.dict.lookup(&Term::iri(RDF_TYPE_IRI));
    let stats = collect_stats(&parsed.triples, type_prop);
    let triples = parsed.triples.clone();
    let db = Database::assemble(parsed.dict, &css, &plan, stats, type_prop);
    (db, triples)
}

/// CS fixtures with the given property sets and cardinalities; ids
/// follow the slice order.
pub fn fake_css(specs: &[(Vec<u32>, u64)]) -> Vec<CharacteristicSet> {
    specs
        .iter()
        .enumerate()
        .map(|(i, (props, card))| {
            let properties: PropertySet = props.iter().map(|p| TermId(*p)).collect();
            let records = (0..*card)
                .map(|r| {
                    SubjectRecord::new(
                        TermId(1_000_000 + i as u32 * 10_000 + r as u32),
                        vec![vec![TermId(0)]; properties.len()],
                    )
                })
                .collect();
            CharacteristicSet {
                id: CsId(i as u32),
                properties,
                records,
            }
        })
        .collect()
}

/// Random CS instance: distinct property sets over a small universe
/// with random cardinalities, plus its closure.
pub fn random_cs_instance(
    rng: &mut ChaCha12Rng,
    max_cs: usize,
    universe: u32,
) -> (Vec<CharacteristicSet>, InferredHierarchy) {
    let n = rng.gen_range(2..=max_cs);
    let mut sets: BTreeSet<Vec<u32>> = BTreeSet::new();
    while sets.len() < n {
        let size = rng.gen_range(1..=universe);
        let mut set: BTreeSet<u32> = BTreeSet::new();
        for _ in 0..size {
            set.insert(rng.gen_range(0..universe));
        }
        sets.insert(set.into_iter().collect());
    }
    let specs: Vec<(Vec<u32>, u64)> = sets
        .into_iter()
        .map(|props| (props, rng.gen_range(1..=500)))
        .collect();
    let css = fake_css(&specs);
    let closure = build_closure(&css);
    (css, closure)
}
