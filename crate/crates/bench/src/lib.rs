//! Fixtures shared by the benchmark targets.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use raxon_core::cs::{CharacteristicSet, CsId, PropertySet, SubjectRecord};
use raxon_core::merge::{compute_plan, DensityConfig, MergeAlgorithm, DEFAULT_ENUM_BUDGET};
use raxon_core::storage::Database;
use raxon_core::synth::{self, LatticeShape, SynthConfig};
use raxon_core::term::{EncodedTriple, TermId};

/// A ~10k-triple chain-shaped corpus.
pub fn corpus_text() -> String {
    synth::generate(&SynthConfig {
        shape: LatticeShape::Chain { length: 7 },
        base_records: 600,
        skew: 0.6,
        link_density: 0.45,
        multi_value_prob: 0.15,
        typed: true,
        seed: 101,
    })
    .ntriples
}

/// Loaded database plus the raw triples for the benchmark corpus.
pub fn corpus_db(m: f64) -> (Database, Vec<EncodedTriple>) {
    let text = corpus_text();
    let parsed = raxon_core::ingest::parse_ntriples_str(&text, true).unwrap();
    let css = raxon_core::cs::extract_cs(&parsed.triples);
    let closure = raxon_core::cs::build_closure(&css);
    let config = DensityConfig::new(m).unwrap();
    let plan = compute_plan(
        &closure,
        &css,
        config,
        MergeAlgorithm::Greedy,
        DEFAULT_ENUM_BUDGET,
    )
    .unwrap();
    let type_prop = parsed
        .dict
        .lookup(&raxon_core::term::Term::iri(raxon_core::ingest::RDF_TYPE_IRI));
    let stats = raxon_core::ingest::collect_stats(&parsed.triples, type_prop);
    let triples = parsed.triples.clone();
    (
        Database::assemble(parsed.dict, &css, &plan, stats, type_prop),
        triples,
    )
}

/// Synthetic CS population for merge benchmarks: `dense` wide sets over
/// a shared core plus `non_dense` small subsets of the core, the worst
/// case for greedy candidate evaluation.
pub fn synthetic_css(non_dense: usize, dense: usize, seed: u64) -> Vec<CharacteristicSet> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let core = 21u32;
    let mut specs: Vec<(Vec<u32>, u64)> = Vec::new();
    for j in 0..dense as u32 {
        let mut props: Vec<u32> = (0..core).collect();
        props.push(core + j);
        specs.push((props, 1000));
    }
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    while specs.len() < non_dense + dense {
        let size = rng.gen_range(2..=4);
        let mut set = BTreeSet::new();
        while set.len() < size {
            set.insert(rng.gen_range(0..core));
        }
        let props: Vec<u32> = set.into_iter().collect();
        if seen.insert(props.clone()) {
            specs.push((props, rng.gen_range(1..=400)));
        }
    }
    specs
        .into_iter()
        .enumerate()
        .map(|(i, (props, card))| {
            let properties: PropertySet = props.into_iter().map(TermId).collect();
            let records = (0..card)
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
