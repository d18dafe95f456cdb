//! Shared load pipeline: parse, extract, plan, assemble.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};

use raxon_core::cs::{build_closure, build_direct_lattice, extract_cs, CharacteristicSet};
use raxon_core::cs::{HierarchyLattice, InferredHierarchy};
use raxon_core::ingest::{collect_stats, parse_ntriples, DatasetStats};
use raxon_core::merge::{classify_dense, compute_plan, DensityConfig, MergeAlgorithm, MergePlan};
use raxon_core::storage::Database;
use raxon_core::term::{Dictionary, EncodedTriple, Term, TermId};

pub struct Pipeline {
    dict: Dictionary,
    triples: Vec<EncodedTriple>,
    pub skipped_lines: u64,
    pub stats: DatasetStats,
    pub type_prop: Option<TermId>,
    pub css: Vec<CharacteristicSet>,
    pub closure: InferredHierarchy,
    pub dense_count: usize,
    pub plan: MergePlan,
}

impl Pipeline {
    pub fn from_file(
        input: &Path,
        strict: bool,
        type_iri: &str,
        m: f64,
        algorithm: MergeAlgorithm,
        budget: u64,
    ) -> Result<Pipeline> {
        let file = File::open(input)
            .with_context(|| format!("opening input {}", input.display()))?;
        let parsed = parse_ntriples(BufReader::new(file), strict)?;
        let type_prop = parsed.dict.lookup(&Term::iri(type_iri));
        let stats = collect_stats(&parsed.triples, type_prop);
        let css = extract_cs(&parsed.triples);
        let closure = build_closure(&css);
        let config = DensityConfig::new(m)?;
        let dense_count = classify_dense(&css, &config).len();
        let plan = compute_plan(&closure, &css, config, algorithm, budget)?;
        Ok(Pipeline {
            dict: parsed.dict,
            triples: parsed.triples,
            skipped_lines: parsed.skipped_lines,
            stats,
            type_prop,
            css,
            closure,
            dense_count,
            plan,
        })
    }

    /// Re-plans the same parsed dataset under a different density
    /// factor and algorithm.
    pub fn replan(&self, m: f64, algorithm: MergeAlgorithm, budget: u64) -> Result<Pipeline> {
        let config = DensityConfig::new(m)?;
        let dense_count = classify_dense(&self.css, &config).len();
        let plan = compute_plan(&self.closure, &self.css, config, algorithm, budget)?;
        Ok(Pipeline {
            dict: self.dict.clone(),
            triples: self.triples.clone(),
            skipped_lines: self.skipped_lines,
            stats: self.stats.clone(),
            type_prop: self.type_prop,
            css: self.css.clone(),
            closure: self.closure.clone(),
            dense_count,
            plan,
        })
    }

    pub fn assemble(&self) -> Database {
        Database::assemble(
            self.dict.clone(),
            &self.css,
            &self.plan,
            self.stats.clone(),
            self.type_prop,
        )
    }

    pub fn lattice(&self) -> HierarchyLattice {
        build_direct_lattice(&self.closure)
    }

    pub fn dict(&self) -> &Dictionary {
        &self.dict
    }

    pub fn triples(&self) -> &[EncodedTriple] {
        &self.triples
    }
}
