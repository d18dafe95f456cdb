//! Distance-based triple-pattern reordering.
//!
//! Each pattern is mapped to a cardinality vector over the query's
//! subject/object nodes (predicates are not represented). Pairs of
//! patterns are ranked by ascending Euclidean distance between their
//! vectors, sub-plans grow greedily from the closest pairs, and
//! adjacent sub-plans are then reconciled so that joined patterns sit
//! next to each other. The result is an evaluation order, never a
//! change to query semantics.

use std::collections::HashSet;

use crate::ingest::DatasetStats;
use crate::query::{NodePattern, TriplePattern};
use crate::term::{Dictionary, Term, TermId};

/// A subject/object node of the query: variable or constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKey {
    Var(String),
    Const(Term),
}

impl std::fmt::Display for NodeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeKey::Var(name) => write!(f, "?{name}"),
            NodeKey::Const(term) => write!(f, "{term}"),
        }
    }
}

/// |T| x |M| matrix of cardinality estimates: row per pattern, column
/// per distinct subject/object node in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    pub nodes: Vec<NodeKey>,
    pub rows: Vec<Vec<f64>>,
}

impl QMatrix {
    pub fn entry(&self, pattern: usize, node: &NodeKey) -> Option<f64> {
        let col = self.nodes.iter().position(|n| n == node)?;
        Some(self.rows[pattern][col])
    }
}

/// Unordered pattern pair with its Euclidean distance; `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternPair {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Cardinality estimate for one triple pattern:
/// - bound p, unbound s and o: card(p)
/// - bound p and o, unbound s: max(1, card(p)/|S|), except rdf:type
///   whose class index gives the exact subject count
/// - bound p and s: 1
/// - anything else: |D|
pub fn estimate_card(
    t: &TriplePattern,
    stats: &DatasetStats,
    dict: &Dictionary,
    type_prop: Option<TermId>,
) -> f64 {
    let pid = match &t.p {
        NodePattern::Const(term) => dict.lookup(term),
        NodePattern::Var(_) => return stats.total_triples as f64,
    };
    let card_p = pid
        .and_then(|p| stats.property_card.get(&p))
        .copied()
        .unwrap_or(0) as f64;
    match (t.s.is_bound(), t.o.is_bound()) {
        (false, false) => card_p,
        (true, _) => 1.0,
        (false, true) => {
            if pid.is_some() && pid == type_prop {
                let class = match &t.o {
                    NodePattern::Const(term) => dict.lookup(term),
                    NodePattern::Var(_) => unreachable!("object is bound"),
                };
                class
                    .and_then(|c| stats.class_card.get(&c))
                    .copied()
                    .unwrap_or(0) as f64
            } else if stats.distinct_subjects == 0 {
                1.0
            } else {
                (card_p / stats.distinct_subjects as f64).max(1.0)
            }
        }
    }
}

fn node_key(node: &NodePattern) -> NodeKey {
    match node {
        NodePattern::Var(name) => NodeKey::Var(name.clone()),
        NodePattern::Const(term) => NodeKey::Const(term.clone()),
    }
}

/// Builds Q_m: entry (t, m) = card(t) when m is t's subject or object
/// node, 0 elsewhere. Predicate positions contribute no columns.
pub fn build_qmatrix(
    patterns: &[TriplePattern],
    stats: &DatasetStats,
    dict: &Dictionary,
    type_prop: Option<TermId>,
) -> QMatrix {
    let mut nodes: Vec<NodeKey> = Vec::new();
    for t in patterns {
        for key in [node_key(&t.s), node_key(&t.o)] {
            if !nodes.contains(&key) {
                nodes.push(key);
            }
        }
    }
    let rows = patterns
        .iter()
        .map(|t| {
            let card = estimate_card(t, stats, dict, type_prop);
            let s = node_key(&t.s);
            let o = node_key(&t.o);
            nodes
                .iter()
                .map(|n| if *n == s || *n == o { card } else { 0.0 })
                .collect()
        })
        .collect();
    QMatrix { nodes, rows }
}

/// All C(|T|, 2) unordered pairs sorted by ascending distance, ties by
/// pattern-index pair.
pub fn pairwise_distances(qm: &QMatrix) -> Vec<PatternPair> {
    let n = qm.rows.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let distance = qm.rows[a]
                .iter()
                .zip(&qm.rows[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            pairs.push(PatternPair { a, b, distance });
        }
    }
    pairs.sort_by(|x, y| {
        x.distance
            .total_cmp(&y.distance)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    pairs
}

/// Walks the sorted pairs: when exactly one pattern of a pair is
/// already placed, the other is appended to that sub-plan's tail; when
/// neither is placed, a new sub-plan starts with the cheaper pattern
/// first; when both are placed, the pair is skipped.
pub fn generate_subplans(pairs: &[PatternPair], costs: &[f64]) -> Vec<Vec<usize>> {
    let mut subplans: Vec<Vec<usize>> = Vec::new();
    let mut placed: Vec<Option<usize>> = vec![None; costs.len()];
    for pair in pairs {
        match (placed[pair.a], placed[pair.b]) {
            (Some(i), None) => {
                subplans[i].push(pair.b);
                placed[pair.b] = Some(i);
            }
            (None, Some(i)) => {
                subplans[i].push(pair.a);
                placed[pair.a] = Some(i);
            }
            (None, None) => {
                let cost_a = (costs[pair.a], pair.a);
                let cost_b = (costs[pair.b], pair.b);
                let (first, second) = if cost_a.0 < cost_b.0
                    || (cost_a.0 == cost_b.0 && cost_a.1 <= cost_b.1)
                {
                    (pair.a, pair.b)
                } else {
                    (pair.b, pair.a)
                };
                placed[pair.a] = Some(subplans.len());
                placed[pair.b] = Some(subplans.len());
                subplans.push(vec![first, second]);
            }
            (Some(_), Some(_)) => {}
        }
    }
    subplans
}

/// Reconciles consecutive sub-plans: while the tail of the left plan
/// does not join the head of the right one, the first joinable pattern
/// of the right plan is pulled to the left tail; with no joinable
/// pattern the boundary stays a cartesian product. Returns the
/// concatenated final order.
pub fn reorder_subplans(subplans: Vec<Vec<usize>>, patterns: &[TriplePattern]) -> Vec<usize> {
    let mut queue = subplans.into_iter();
    let Some(mut current) = queue.next() else {
        return Vec::new();
    };
    let mut final_plan = Vec::new();
    for next in queue {
        if current.is_empty() {
            current = next;
            continue;
        }
        let (done, carried) = prioritize_pair(current, next, patterns);
        final_plan.extend(done);
        current = carried;
    }
    final_plan.extend(current);
    final_plan
}

fn prioritize_pair(
    mut left: Vec<usize>,
    mut right: Vec<usize>,
    patterns: &[TriplePattern],
) -> (Vec<usize>, Vec<usize>) {
    loop {
        let Some(&tail) = left.last() else {
            return (left, right);
        };
        let Some(&head) = right.first() else {
            return (left, right);
        };
        if patterns[tail].joins_with(&patterns[head]) {
            return (left, right);
        }
        match right
            .iter()
            .position(|&k| patterns[tail].joins_with(&patterns[k]))
        {
            Some(i) => {
                let moved = right.remove(i);
                left.push(moved);
            }
            None => return (left, right),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReorderExplain {
    pub matrix: QMatrix,
    pub pairs: Vec<PatternPair>,
    pub subplans_before: Vec<Vec<usize>>,
    pub subplans_after: Vec<usize>,
    pub order: Vec<usize>,
}

/// Full planning pass: returns the evaluation order as indices into
/// `patterns`. Single-pattern queries bypass the planner.
pub fn plan_order(
    patterns: &[TriplePattern],
    stats: &DatasetStats,
    dict: &Dictionary,
    type_prop: Option<TermId>,
) -> Vec<usize> {
    plan_order_explain(patterns, stats, dict, type_prop).order
}

pub fn plan_order_explain(
    patterns: &[TriplePattern],
    stats: &DatasetStats,
    dict: &Dictionary,
    type_prop: Option<TermId>,
) -> ReorderExplain {
    let matrix = build_qmatrix(patterns, stats, dict, type_prop);
    if patterns.len() < 2 {
        return ReorderExplain {
            matrix,
            pairs: Vec::new(),
            subplans_before: vec![(0..patterns.len()).collect()],
            subplans_after: (0..patterns.len()).collect(),
            order: (0..patterns.len()).collect(),
        };
    }
    let pairs = pairwise_distances(&matrix);
    let costs: Vec<f64> = patterns
        .iter()
        .map(|t| estimate_card(t, stats, dict, type_prop))
        .collect();
    let subplans = generate_subplans(&pairs, &costs);
    let order = reorder_subplans(subplans.clone(), patterns);
    debug_assert!(is_permutation(&order, patterns.len()));
    ReorderExplain {
        matrix,
        pairs,
        subplans_before: subplans,
        subplans_after: order.clone(),
        order,
    }
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    order.len() == n && order.iter().collect::<HashSet<_>>().len() == n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RDF_TYPE_IRI;
    use std::collections::BTreeMap;

    fn var(name: &str) -> NodePattern {
        NodePattern::Var(name.into())
    }

    fn iri(text: &str) -> NodePattern {
        NodePattern::Const(Term::iri(text))
    }

    fn pattern(s: NodePattern, p: NodePattern, o: NodePattern) -> TriplePattern {
        TriplePattern { s, p, o }
    }

    /// Dictionary + stats snapshot: 99k students, 189 departments,
    /// 106k memberships and emails, and a subOrgOf fan-out of 239 per
    /// subject.
    fn reference_setup() -> (Dictionary, DatasetStats, Option<TermId>) {
        let mut dict = Dictionary::new();
        let type_p = dict.encode(Term::iri(RDF_TYPE_IRI));
        let student = dict.encode(Term::iri("http://ex/Student"));
        let dpt = dict.encode(Term::iri("http://ex/Dpt"));
        let member_of = dict.encode(Term::iri("http://ex/memberOf"));
        let sub_org = dict.encode(Term::iri("http://ex/subOrgOf"));
        let email = dict.encode(Term::iri("http://ex/emailAddress"));
        dict.encode(Term::iri("http://ex/Univ0"));

        let mut property_card = BTreeMap::new();
        property_card.insert(member_of, 106_000);
        property_card.insert(email, 106_000);
        property_card.insert(sub_org, 239_000);
        property_card.insert(type_p, 200_000);
        let mut class_card = BTreeMap::new();
        class_card.insert(student, 99_000);
        class_card.insert(dpt, 189);
        let stats = DatasetStats {
            total_triples: 1_500_000,
            distinct_subjects: 1_000,
            property_card,
            class_card,
        };
        (dict, stats, Some(type_p))
    }

    fn reference_patterns() -> Vec<TriplePattern> {
        vec![
            pattern(var("X"), iri(RDF_TYPE_IRI), iri("http://ex/Student")),
            pattern(var("Y"), iri(RDF_TYPE_IRI), iri("http://ex/Dpt")),
            pattern(var("X"), iri("http://ex/memberOf"), var("Y")),
            pattern(var("Y"), iri("http://ex/subOrgOf"), iri("http://ex/Univ0")),
            pattern(var("X"), iri("http://ex/emailAddress"), var("Z")),
        ]
    }

    #[test]
    fn estimate_type_pattern_uses_class_index() {
        let (dict, stats, type_p) = reference_setup();
        let t = pattern(var("X"), iri(RDF_TYPE_IRI), iri("http://ex/Student"));
        assert_eq!(estimate_card(&t, &stats, &dict, type_p), 99_000.0);
    }

    #[test]
    fn estimate_bound_subject_is_one() {
        let (dict, stats, type_p) = reference_setup();
        let t = pattern(
            iri("http://ex/s1"),
            iri("http://ex/memberOf"),
            var("o"),
        );
        assert_eq!(estimate_card(&t, &stats, &dict, type_p), 1.0);
    }

    #[test]
    fn estimate_unbound_predicate_is_dataset_size() {
        let (dict, stats, type_p) = reference_setup();
        let t = pattern(var("a"), var("p"), var("b"));
        assert_eq!(estimate_card(&t, &stats, &dict, type_p), 1_500_000.0);
    }

    #[test]
    fn estimate_unknown_property_rules() {
        let (dict, stats, type_p) = reference_setup();
        // Rule (a): unknown property, unbound s/o -> 0.
        let t = pattern(var("a"), iri("http://ex/nope"), var("b"));
        assert_eq!(estimate_card(&t, &stats, &dict, type_p), 0.0);
        // Rule (b): unknown property, bound o -> max(1, 0) = 1.
        let t = pattern(var("a"), iri("http://ex/nope"), iri("http://ex/o"));
        assert_eq!(estimate_card(&t, &stats, &dict, type_p), 1.0);
    }

    #[test]
    fn qmatrix_entries_from_stats_snapshot() {
        let (dict, stats, type_p) = reference_setup();
        let patterns = reference_patterns();
        let qm = build_qmatrix(&patterns, &stats, &dict, type_p);

        let expected_nodes = vec![
            NodeKey::Var("X".into()),
            NodeKey::Const(Term::iri("http://ex/Student")),
            NodeKey::Var("Y".into()),
            NodeKey::Const(Term::iri("http://ex/Dpt")),
            NodeKey::Const(Term::iri("http://ex/Univ0")),
            NodeKey::Var("Z".into()),
        ];
        assert_eq!(qm.nodes, expected_nodes);
        let expected = [
            [99_000.0, 99_000.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 189.0, 189.0, 0.0, 0.0],
            [106_000.0, 0.0, 106_000.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 239.0, 0.0, 239.0, 0.0],
            [106_000.0, 0.0, 0.0, 0.0, 0.0, 106_000.0],
        ];
        for (row, want) in qm.rows.iter().zip(expected) {
            assert_eq!(row.as_slice(), want);
        }
    }

    #[test]
    fn qmatrix_single_pattern() {
        let mut dict = Dictionary::new();
        let p1 = dict.encode(Term::iri("p1"));
        let stats = DatasetStats {
            total_triples: 7,
            distinct_subjects: 7,
            property_card: [(p1, 7)].into(),
            class_card: BTreeMap::new(),
        };
        let patterns = vec![pattern(var("x"), iri("p1"), var("y"))];
        let qm = build_qmatrix(&patterns, &stats, &dict, None);
        assert_eq!(qm.rows, vec![vec![7.0, 7.0]]);
    }

    #[test]
    fn qmatrix_disjoint_patterns_are_block_diagonal() {
        let mut dict = Dictionary::new();
        dict.encode(Term::iri("p1"));
        dict.encode(Term::iri("p2"));
        let stats = DatasetStats {
            total_triples: 10,
            distinct_subjects: 10,
            property_card: [(TermId(0), 4), (TermId(1), 6)].into(),
            class_card: BTreeMap::new(),
        };
        let patterns = vec![
            pattern(var("a"), iri("p1"), var("b")),
            pattern(var("c"), iri("p2"), var("d")),
        ];
        let qm = build_qmatrix(&patterns, &stats, &dict, None);
        assert_eq!(qm.rows[0], vec![4.0, 4.0, 0.0, 0.0]);
        assert_eq!(qm.rows[1], vec![0.0, 0.0, 6.0, 6.0]);
    }

    #[test]
    fn distances_identical_rows_rank_first() {
        let qm = QMatrix {
            nodes: vec![NodeKey::Var("a".into()), NodeKey::Var("b".into())],
            rows: vec![vec![2.0, 2.0], vec![2.0, 2.0], vec![9.0, 0.0]],
        };
        let pairs = pairwise_distances(&qm);
        assert_eq!((pairs[0].a, pairs[0].b), (0, 1));
        assert_eq!(pairs[0].distance, 0.0);
    }

    #[test]
    fn distance_is_euclidean() {
        let qm = QMatrix {
            nodes: vec![NodeKey::Var("a".into()), NodeKey::Var("b".into())],
            rows: vec![vec![3.0, 0.0], vec![0.0, 4.0]],
        };
        assert_eq!(pairwise_distances(&qm)[0].distance, 5.0);
    }

    #[test]
    fn pair_count_is_n_choose_two() {
        let (dict, stats, type_p) = reference_setup();
        let qm = build_qmatrix(&reference_patterns(), &stats, &dict, type_p);
        assert_eq!(pairwise_distances(&qm).len(), 10);
    }

    #[test]
    fn subplan_two_patterns_cheaper_first() {
        let pairs = vec![PatternPair {
            a: 0,
            b: 1,
            distance: 1.0,
        }];
        let subplans = generate_subplans(&pairs, &[9.0, 5.0]);
        assert_eq!(subplans, vec![vec![1, 0]]);
    }

    #[test]
    fn subplan_three_pattern_trace() {
        // Closest (t2, t3), then (t1, t2): t1 appends to the tail.
        let pairs = vec![
            PatternPair { a: 1, b: 2, distance: 1.0 },
            PatternPair { a: 0, b: 1, distance: 2.0 },
            PatternPair { a: 0, b: 2, distance: 3.0 },
        ];
        let subplans = generate_subplans(&pairs, &[5.0, 3.0, 4.0]);
        assert_eq!(subplans, vec![vec![1, 2, 0]]);
    }

    #[test]
    fn subplan_two_distant_clusters() {
        let pairs = vec![
            PatternPair { a: 0, b: 1, distance: 1.0 },
            PatternPair { a: 2, b: 3, distance: 2.0 },
            PatternPair { a: 0, b: 2, distance: 90.0 },
            PatternPair { a: 0, b: 3, distance: 91.0 },
            PatternPair { a: 1, b: 2, distance: 92.0 },
            PatternPair { a: 1, b: 3, distance: 93.0 },
        ];
        let subplans = generate_subplans(&pairs, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(subplans, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn reorder_single_subplan_is_identity() {
        let patterns = reference_patterns();
        assert_eq!(
            reorder_subplans(vec![vec![2, 0, 1]], &patterns),
            vec![2, 0, 1]
        );
    }

    #[test]
    fn reorder_pulls_joinable_pattern_forward() {
        // p1 = [A], p2 = [B, C]; A joins C but not B -> [A, C, B].
        let patterns = vec![
            pattern(var("x"), iri("p"), var("y")),  // A: x, y
            pattern(var("u"), iri("q"), var("v")),  // B: u, v
            pattern(var("y"), iri("r"), var("u")),  // C: y, u
        ];
        let order = reorder_subplans(vec![vec![0], vec![1, 2]], &patterns);
        assert_eq!(order, vec![0, 2, 1]);
    }

    #[test]
    fn reorder_disconnected_subplans_concatenate() {
        let patterns = vec![
            pattern(var("a"), iri("p"), var("b")),
            pattern(var("c"), iri("q"), var("d")),
            pattern(var("e"), iri("r"), var("f")),
        ];
        let order = reorder_subplans(vec![vec![0], vec![1, 2]], &patterns);
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn plan_order_is_permutation_and_deterministic() {
        let (dict, stats, type_p) = reference_setup();
        let patterns = reference_patterns();
        let order1 = plan_order(&patterns, &stats, &dict, type_p);
        let order2 = plan_order(&patterns, &stats, &dict, type_p);
        assert_eq!(order1, order2);
        let mut sorted = order1.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn single_pattern_bypasses_planner() {
        let (dict, stats, type_p) = reference_setup();
        let patterns = vec![pattern(var("x"), iri("http://ex/memberOf"), var("y"))];
        assert_eq!(plan_order(&patterns, &stats, &dict, type_p), vec![0]);
    }
}
