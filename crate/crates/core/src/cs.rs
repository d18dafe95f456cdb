//! Characteristic-set extraction and the subsumption hierarchy.
//!
//! The characteristic set of a subject is the set of properties it
//! emits. Each distinct property set becomes one CS holding the records
//! of all subjects that share it; strict property-set inclusion between
//! CSs induces a lattice whose transitive closure drives merging.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{EncodedTriple, TermId};

/// Identifier of a characteristic set within one dataset. Ids are dense
/// and assigned by descending record count (ties broken by
/// lexicographic property set), so dense CSs get small ids.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CsId(pub u32);

impl fmt::Display for CsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// A sorted, deduplicated set of property ids.
#[derive(
    Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PropertySet(Vec<TermId>);

impl PropertySet {
    pub fn new(mut props: Vec<TermId>) -> Self {
        props.sort_unstable();
        props.dedup();
        PropertySet(props)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: TermId) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = TermId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[TermId] {
        &self.0
    }

    /// Position of `p` in sorted order, used as its column index.
    pub fn position(&self, p: TermId) -> Option<usize> {
        self.0.binary_search(&p).ok()
    }

    /// True iff `self` is a subset of `other` (not necessarily strict).
    pub fn is_subset_of(&self, other: &PropertySet) -> bool {
        if self.0.len() > other.0.len() {
            return false;
        }
        let mut it = other.0.iter();
        'outer: for p in &self.0 {
            for q in it.by_ref() {
                match q.cmp(p) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn is_strict_subset_of(&self, other: &PropertySet) -> bool {
        self.0.len() < other.0.len() && self.is_subset_of(other)
    }

    pub fn is_superset_of(&self, other: &PropertySet) -> bool {
        other.is_subset_of(self)
    }

    /// |self \ other|.
    pub fn difference_count(&self, other: &PropertySet) -> usize {
        self.0.iter().filter(|p| !other.contains(**p)).count()
    }

    pub fn union(&self, other: &PropertySet) -> PropertySet {
        let mut merged = self.0.clone();
        merged.extend_from_slice(&other.0);
        PropertySet::new(merged)
    }
}

impl FromIterator<TermId> for PropertySet {
    fn from_iter<I: IntoIterator<Item = TermId>>(iter: I) -> Self {
        PropertySet::new(iter.into_iter().collect())
    }
}

/// One subject and its object values, aligned with the owning CS's
/// sorted property order; every list is non-empty and deduplicated in
/// first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRecord {
    pub subject: TermId,
    values: Vec<Vec<TermId>>,
}

impl SubjectRecord {
    pub fn new(subject: TermId, values: Vec<Vec<TermId>>) -> Self {
        debug_assert!(values.iter().all(|v| !v.is_empty()));
        SubjectRecord { subject, values }
    }

    /// Values for the property at `column` in the owning CS's order.
    pub fn values_at(&self, column: usize) -> &[TermId] {
        &self.values[column]
    }

    pub fn columns(&self) -> &[Vec<TermId>] {
        &self.values
    }

    /// Deduplicated triples this record holds.
    pub fn triple_count(&self) -> u64 {
        self.values.iter().map(|v| v.len() as u64).sum()
    }
}

/// A property set plus every subject record it characterizes.
#[derive(Debug, Clone)]
pub struct CharacteristicSet {
    pub id: CsId,
    pub properties: PropertySet,
    pub records: Vec<SubjectRecord>,
}

impl CharacteristicSet {
    /// Record cardinality |r|.
    pub fn cardinality(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn triple_count(&self) -> u64 {
        self.records.iter().map(|r| r.triple_count()).sum()
    }
}

/// Direct (non-transitive) subsumption edges: (parent, child) with the
/// parent's property set a strict subset and no CS strictly between.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyLattice {
    pub nodes: Vec<CsId>,
    pub direct_edges: BTreeSet<(CsId, CsId)>,
}

/// Transitive closure of subsumption: every strict-subset pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferredHierarchy {
    pub nodes: Vec<CsId>,
    pub closure_edges: BTreeSet<(CsId, CsId)>,
}

impl InferredHierarchy {
    /// Descendants per node (out-neighbors in the closure).
    pub fn descendants(&self) -> HashMap<CsId, Vec<CsId>> {
        let mut out: HashMap<CsId, Vec<CsId>> = HashMap::new();
        for n in &self.nodes {
            out.entry(*n).or_default();
        }
        for &(a, b) in &self.closure_edges {
            out.entry(a).or_default().push(b);
        }
        out
    }
}

/// Groups subjects by their emitted property set. Each distinct subject
/// lands in exactly one CS; object lists are deduplicated per
/// (subject, property) in first-seen order.
pub fn extract_cs(triples: &[EncodedTriple]) -> Vec<CharacteristicSet> {
    // Global first-seen dedup doubles as per-record value dedup.
    let mut seen: HashSet<EncodedTriple> = HashSet::new();
    let mut subject_slot: HashMap<TermId, usize> = HashMap::new();
    let mut subjects: Vec<(TermId, BTreeMap<TermId, Vec<TermId>>)> = Vec::new();
    for t in triples {
        if !seen.insert(*t) {
            continue;
        }
        let slot = *subject_slot.entry(t.s).or_insert_with(|| {
            subjects.push((t.s, BTreeMap::new()));
            subjects.len() - 1
        });
        subjects[slot].1.entry(t.p).or_default().push(t.o);
    }

    let mut groups: HashMap<Vec<TermId>, Vec<usize>> = HashMap::new();
    for (slot, (_, props)) in subjects.iter().enumerate() {
        let key: Vec<TermId> = props.keys().copied().collect();
        groups.entry(key).or_default().push(slot);
    }

    let mut ordered: Vec<(Vec<TermId>, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|(pa, ra), (pb, rb)| rb.len().cmp(&ra.len()).then_with(|| pa.cmp(pb)));

    ordered
        .into_iter()
        .enumerate()
        .map(|(id, (props, slots))| {
            let records = slots
                .into_iter()
                .map(|slot| {
                    let (subject, values) = &subjects[slot];
                    SubjectRecord::new(*subject, values.values().cloned().collect())
                })
                .collect();
            CharacteristicSet {
                id: CsId(id as u32),
                properties: PropertySet::new(props),
                records,
            }
        })
        .collect()
}

/// Computes the full strict-subset closure by pairwise bitset tests.
pub fn build_closure(css: &[CharacteristicSet]) -> InferredHierarchy {
    let universe: BTreeMap<TermId, usize> = css
        .iter()
        .flat_map(|c| c.properties.iter())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let words = universe.len().div_ceil(64).max(1);
    let bitsets: Vec<Vec<u64>> = css
        .iter()
        .map(|c| {
            let mut bs = vec![0u64; words];
            for p in c.properties.iter() {
                let bit = universe[&p];
                bs[bit / 64] |= 1 << (bit % 64);
            }
            bs
        })
        .collect();

    let mut closure_edges = BTreeSet::new();
    for (i, a) in css.iter().enumerate() {
        for (j, b) in css.iter().enumerate() {
            if i == j || a.properties.len() >= b.properties.len() {
                continue;
            }
            let subset = bitsets[i]
                .iter()
                .zip(&bitsets[j])
                .all(|(x, y)| x & y == *x);
            if subset {
                closure_edges.insert((a.id, b.id));
            }
        }
    }
    InferredHierarchy {
        nodes: css.iter().map(|c| c.id).collect(),
        closure_edges,
    }
}

/// Transitive reduction of the closure: drops every edge implied by a
/// two-step path.
pub fn build_direct_lattice(closure: &InferredHierarchy) -> HierarchyLattice {
    let out = closure.descendants();
    let direct_edges = closure
        .closure_edges
        .iter()
        .filter(|(a, b)| {
            !out[a]
                .iter()
                .any(|mid| closure.closure_edges.contains(&(*mid, *b)))
        })
        .copied()
        .collect();
    HierarchyLattice {
        nodes: closure.nodes.clone(),
        direct_edges,
    }
}
