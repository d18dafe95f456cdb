//! Synthetic corpus and query generation.
//!
//! Emits N-Triples datasets whose CS lattice has a known shape (chain,
//! diamond or bipartite ancestry), with configurable record-count skew,
//! object-subject link density and multi-valued cells, plus randomized
//! conjunctive queries (stars, chains, chain-stars, cycles) anchored in
//! the generated data. Everything is seeded and deterministic.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rand_chacha::ChaCha12Rng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::ingest::RDF_TYPE_IRI;
use crate::term::{Dictionary, EncodedTriple, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeShape {
    /// Nested property sets {p0}, {p0,p1}, ..., most specific last.
    Chain { length: usize },
    /// {p0}, {p0,pi} for i in 1..=width, and the full union on top.
    Diamond { width: usize },
    /// `non_dense` singleton ancestors, each a subset of every one of
    /// the `dense` wide sets.
    Bipartite { non_dense: usize, dense: usize },
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub shape: LatticeShape,
    /// Records for the most populous CS.
    pub base_records: u64,
    /// Geometric decay of record counts across CSs, in (0, 1].
    pub skew: f64,
    /// Probability that an object value references another subject.
    pub link_density: f64,
    /// Probability that a cell holds two or three values.
    pub multi_value_prob: f64,
    /// Give every CS an rdf:type property with a per-CS class.
    pub typed: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            shape: LatticeShape::Chain { length: 5 },
            base_records: 50,
            skew: 0.6,
            link_density: 0.3,
            multi_value_prob: 0.15,
            typed: false,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub ntriples: String,
    /// Intended CS layout: property IRIs and record count per CS.
    pub expected_cs: Vec<(BTreeSet<String>, u64)>,
}

fn prop_iri(i: usize) -> String {
    format!("http://synth.example/p{i}")
}

fn class_iri(cs: usize) -> String {
    format!("http://synth.example/C{cs}")
}

/// Property index sets per shape, most specific (largest) first so the
/// base record count lands on the natural merge bases.
fn shape_sets(shape: LatticeShape) -> Vec<BTreeSet<usize>> {
    match shape {
        LatticeShape::Chain { length } => {
            let length = length.max(1);
            (0..length).rev().map(|i| (0..=i).collect()).collect()
        }
        LatticeShape::Diamond { width } => {
            let width = width.max(1);
            let mut sets = vec![(0..=width).collect::<BTreeSet<_>>()];
            for i in 1..=width {
                sets.push([0, i].into());
            }
            sets.push([0].into());
            sets
        }
        LatticeShape::Bipartite { non_dense, dense } => {
            let non_dense = non_dense.max(1);
            let dense = dense.max(1);
            let mut sets = Vec::new();
            for j in 0..dense {
                let mut set: BTreeSet<usize> = (0..non_dense).collect();
                set.insert(non_dense + j);
                sets.push(set);
            }
            for i in 0..non_dense {
                sets.push([i].into());
            }
            sets
        }
    }
}

pub fn generate(config: &SynthConfig) -> SynthDataset {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let sets = shape_sets(config.shape);

    // Record counts: geometric decay with +-20% jitter, minimum 1.
    let counts: Vec<u64> = sets
        .iter()
        .enumerate()
        .map(|(rank, _)| {
            let decay = config.skew.powi(rank as i32);
            let jitter = 0.8 + 0.4 * rng.gen::<f64>();
            ((config.base_records as f64 * decay * jitter).round() as u64).max(1)
        })
        .collect();

    let mut all_subjects: Vec<String> = Vec::new();
    for (cs, count) in counts.iter().enumerate() {
        for j in 0..*count {
            all_subjects.push(format!("http://synth.example/s{cs}_{j}"));
        }
    }

    let mut out = String::new();
    let mut literal_counter = 0u64;
    let mut expected = Vec::new();
    for (cs, set) in sets.iter().enumerate() {
        let mut props: BTreeSet<String> = set.iter().map(|&p| prop_iri(p)).collect();
        if config.typed {
            props.insert(RDF_TYPE_IRI.to_owned());
        }
        expected.push((props, counts[cs]));

        for j in 0..counts[cs] {
            let subject = format!("http://synth.example/s{cs}_{j}");
            if config.typed {
                let _ = writeln!(out, "<{subject}> <{RDF_TYPE_IRI}> <{}> .", class_iri(cs));
            }
            for &p in set {
                let n_values = if rng.gen::<f64>() < config.multi_value_prob {
                    rng.gen_range(2..=3)
                } else {
                    1
                };
                let mut used: Vec<String> = Vec::new();
                for _ in 0..n_values {
                    let value = if rng.gen::<f64>() < config.link_density {
                        let target = all_subjects.choose(&mut rng).unwrap();
                        format!("<{target}>")
                    } else {
                        literal_counter += 1;
                        match literal_counter % 4 {
                            0 => format!("\"v{literal_counter}\"@en"),
                            1 => format!(
                                "\"{literal_counter}\"^^<http://www.w3.org/2001/XMLSchema#integer>"
                            ),
                            _ => format!("\"v{literal_counter}\""),
                        }
                    };
                    if !used.contains(&value) {
                        let _ = writeln!(out, "<{subject}> <{}> {value} .", prop_iri(p));
                        used.push(value);
                    }
                }
            }
        }
    }

    SynthDataset {
        ntriples: out,
        expected_cs: expected,
    }
}

#[derive(Debug, Clone)]
pub struct QueryGenConfig {
    pub count: usize,
    pub seed: u64,
}

impl Default for QueryGenConfig {
    fn default() -> Self {
        QueryGenConfig { count: 25, seed: 11 }
    }
}

/// Randomized star / chain / chain-star / cyclic conjunctive queries
/// anchored in the dataset, so most of them have non-empty answers.
pub fn generate_queries(
    triples: &[EncodedTriple],
    dict: &Dictionary,
    config: &QueryGenConfig,
) -> Vec<String> {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let gen = QueryGen::index(triples, dict);
    if gen.subjects.is_empty() {
        return Vec::new();
    }

    let mut queries = Vec::with_capacity(config.count);
    let mut shape = 0usize;
    while queries.len() < config.count {
        let query = match shape % 4 {
            0 => gen.star(&mut rng),
            1 => gen.chain(&mut rng),
            2 => gen.chain_star(&mut rng),
            _ => gen.cyclic(&mut rng),
        };
        shape += 1;
        if let Some(q) = query {
            queries.push(q);
        }
        if shape > config.count * 8 {
            // Degenerate datasets may not support every shape; pad with
            // stars which always exist.
            if let Some(q) = gen.star(&mut rng) {
                queries.push(q);
            }
        }
    }
    queries
}

struct QueryGen<'a> {
    dict: &'a Dictionary,
    subjects: Vec<TermId>,
    by_subject: HashMap<TermId, Vec<(TermId, TermId)>>,
    link_triples: Vec<EncodedTriple>,
    links_from: HashMap<TermId, Vec<(TermId, TermId)>>,
    incoming: HashMap<TermId, Vec<(TermId, TermId)>>,
    link_pairs: HashMap<(TermId, TermId), TermId>,
}

impl<'a> QueryGen<'a> {
    fn index(triples: &[EncodedTriple], dict: &'a Dictionary) -> Self {
        let mut seen = HashSet::new();
        let deduped: Vec<EncodedTriple> = triples
            .iter()
            .filter(|t| seen.insert(**t))
            .copied()
            .collect();
        let subject_set: HashSet<TermId> = deduped.iter().map(|t| t.s).collect();
        let mut subjects = Vec::new();
        let mut by_subject: HashMap<TermId, Vec<(TermId, TermId)>> = HashMap::new();
        let mut link_triples = Vec::new();
        let mut links_from: HashMap<TermId, Vec<(TermId, TermId)>> = HashMap::new();
        let mut incoming: HashMap<TermId, Vec<(TermId, TermId)>> = HashMap::new();
        let mut link_pairs = HashMap::new();
        for t in &deduped {
            if !by_subject.contains_key(&t.s) {
                subjects.push(t.s);
            }
            by_subject.entry(t.s).or_default().push((t.p, t.o));
            if subject_set.contains(&t.o) {
                link_triples.push(*t);
                links_from.entry(t.s).or_default().push((t.p, t.o));
                incoming.entry(t.o).or_default().push((t.s, t.p));
                link_pairs.insert((t.s, t.o), t.p);
            }
        }
        QueryGen {
            dict,
            subjects,
            by_subject,
            link_triples,
            links_from,
            incoming,
            link_pairs,
        }
    }

    fn term(&self, id: TermId) -> String {
        self.dict.decode(id).to_ntriples()
    }

    fn render(patterns: &[String], vars: &[String], rng: &mut ChaCha12Rng) -> String {
        let projection = if vars.is_empty() || rng.gen::<f64>() < 0.6 {
            "*".to_owned()
        } else {
            let mut chosen: Vec<&String> = vars.iter().collect();
            chosen.shuffle(rng);
            let keep = rng.gen_range(1..=chosen.len());
            let mut kept: Vec<&str> = chosen[..keep].iter().map(|v| v.as_str()).collect();
            kept.sort_unstable();
            kept.iter()
                .map(|v| format!("?{v}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "SELECT {projection} WHERE {{\n  {}\n}}\n",
            patterns.join(" .\n  ")
        )
    }

    /// One subject variable, 2-4 predicates from one real subject.
    fn star(&self, rng: &mut ChaCha12Rng) -> Option<String> {
        let subject = *self.subjects.choose(rng)?;
        let pos = self.by_subject.get(&subject)?;
        let mut props: Vec<TermId> = pos
            .iter()
            .map(|(p, _)| *p)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        props.shuffle(rng);
        let take = rng.gen_range(1..=props.len().min(4)).max(1);
        let mut patterns = Vec::new();
        let mut vars = vec!["s".to_owned()];
        for (i, p) in props[..take].iter().enumerate() {
            if rng.gen::<f64>() < 0.35 {
                let values: Vec<TermId> = pos
                    .iter()
                    .filter(|(pp, _)| pp == p)
                    .map(|(_, o)| *o)
                    .collect();
                let value = values.choose(rng).copied().unwrap();
                patterns.push(format!("?s {} {}", self.term(*p), self.term(value)));
            } else {
                patterns.push(format!("?s {} ?o{i}", self.term(*p)));
                vars.push(format!("o{i}"));
            }
        }
        patterns.dedup();
        Some(Self::render(&patterns, &vars, rng))
    }

    /// Object-subject chain of length 2-3 walked through real links.
    fn chain(&self, rng: &mut ChaCha12Rng) -> Option<String> {
        let start = self.link_triples.choose(rng)?;
        let mut patterns = vec![format!("?x0 {} ?x1", self.term(start.p))];
        let mut vars = vec!["x0".to_owned(), "x1".to_owned()];
        let mut node = start.o;
        let target_len = rng.gen_range(2..=3);
        for step in 1..target_len {
            let Some(nexts) = self.links_from.get(&node) else { break };
            let Some(&(p, o)) = nexts.choose(rng) else { break };
            patterns.push(format!("?x{step} {} ?x{}", self.term(p), step + 1));
            vars.push(format!("x{}", step + 1));
            node = o;
        }
        if patterns.len() < 2 {
            // Extend with a star pattern on the chain's end node.
            let pos = self.by_subject.get(&node)?;
            let (p, _) = pos.choose(rng)?;
            patterns.push(format!("?x1 {} ?y", self.term(*p)));
            vars.push("y".to_owned());
        }
        if rng.gen::<f64>() < 0.3 {
            if let Some(pos) = self.by_subject.get(&node) {
                if let Some((p, o)) = pos.choose(rng) {
                    let last = vars.last().unwrap().clone();
                    patterns.push(format!("?{last} {} {}", self.term(*p), self.term(*o)));
                }
            }
        }
        Some(Self::render(&patterns, &vars, rng))
    }

    /// A short chain with extra star predicates on its first node.
    fn chain_star(&self, rng: &mut ChaCha12Rng) -> Option<String> {
        let start = self.link_triples.choose(rng)?;
        let mut patterns = vec![format!("?x0 {} ?x1", self.term(start.p))];
        let mut vars = vec!["x0".to_owned(), "x1".to_owned()];
        if let Some(nexts) = self.links_from.get(&start.o) {
            if let Some(&(p, _)) = nexts.choose(rng) {
                patterns.push(format!("?x1 {} ?x2", self.term(p)));
                vars.push("x2".to_owned());
            }
        }
        let pos = self.by_subject.get(&start.s)?;
        let extra: Vec<TermId> = pos
            .iter()
            .map(|(p, _)| *p)
            .filter(|p| *p != start.p)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for (i, p) in extra.iter().take(2).enumerate() {
            patterns.push(format!("?x0 {} ?e{i}", self.term(*p)));
            vars.push(format!("e{i}"));
        }
        patterns.dedup();
        Some(Self::render(&patterns, &vars, rng))
    }

    /// Either a closed object-subject triangle or an object-object
    /// share (auxiliary-equality cycle).
    fn cyclic(&self, rng: &mut ChaCha12Rng) -> Option<String> {
        // Triangle attempt: a -> b -> c -> a over real links.
        for _ in 0..24 {
            let Some(first) = self.link_triples.choose(rng) else { break };
            let (a, b) = (first.s, first.o);
            let Some(seconds) = self.links_from.get(&b) else { continue };
            let Some(&(p2, c)) = seconds.choose(rng) else { continue };
            if let Some(&p3) = self.link_pairs.get(&(c, a)) {
                let patterns = vec![
                    format!("?a {} ?b", self.term(first.p)),
                    format!("?b {} ?c", self.term(p2)),
                    format!("?c {} ?a", self.term(p3)),
                ];
                let vars = vec!["a".into(), "b".into(), "c".into()];
                return Some(Self::render(&patterns, &vars, rng));
            }
        }
        // Object-object share: two subjects pointing at the same value.
        let mut shared: Vec<(&TermId, &Vec<(TermId, TermId)>)> = self
            .incoming
            .iter()
            .filter(|(_, sources)| {
                sources
                    .iter()
                    .map(|(s, _)| *s)
                    .collect::<HashSet<_>>()
                    .len()
                    >= 2
            })
            .collect();
        shared.sort_by_key(|(v, _)| v.0);
        let (_, sources) = shared.choose(rng)?;
        let (s1, p1) = sources[0];
        let (_, p2) = *sources
            .iter()
            .find(|(s, _)| *s != s1)
            .expect("two distinct sources");
        let patterns = vec![
            format!("?a {} ?v", self.term(p1)),
            format!("?b {} ?v", self.term(p2)),
        ];
        let vars = vec!["a".into(), "b".into(), "v".into()];
        Some(Self::render(&patterns, &vars, rng))
    }
}
