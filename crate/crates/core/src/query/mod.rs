//! Basic-graph-pattern evaluation over merged CS tables.
//!
//! A query is decomposed into query CSs (patterns grouped by subject
//! key) and join edges (object variable of one CS = subject key of
//! another). Each query CS matches every table whose column set is a
//! superset of its predicates; the cartesian product of matches,
//! filtered through the ECS link index, yields the table permutations
//! that are executed one by one and appended.

mod exec;
mod oracle;
mod parse;

pub use exec::{
    execute, execute_explain, execute_partitioned, ExecOptions, ExplainReport, Planner,
    ResultSet,
};
pub use oracle::oracle_execute;
pub use parse::{parse_query, Bgp, NodePattern, Projection, TriplePattern};

use std::collections::{HashMap, HashSet};

use crate::cs::PropertySet;
use crate::storage::{Database, EcsIndex, TableId};
use crate::term::{Dictionary, Term, TermId};

pub type VarId = usize;

/// Query-scoped variable interning.
#[derive(Debug, Clone, Default)]
pub struct VarTable {
    names: Vec<String>,
    index: HashMap<String, VarId>,
}

impl VarTable {
    fn intern(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A pattern position resolved against the database dictionary. A
/// constant term absent from the dictionary can never match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatNode {
    Var(VarId),
    Known(TermId),
    UnknownConst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedPattern {
    pub s: PatNode,
    pub p: PatNode,
    pub o: PatNode,
}

/// Patterns sharing one subject key, with their bound predicate set.
/// `predicates` is `None` when some predicate is not in the dictionary,
/// in which case the query CS matches nothing.
#[derive(Debug, Clone)]
pub struct QueryCS {
    pub subject: PatNode,
    pub predicates: Option<PropertySet>,
    /// Indices into the BGP's pattern list, in input order.
    pub patterns: Vec<usize>,
}

/// Object variable of a pattern in `from` equals the subject key of
/// `to`; `pattern` is the linking pattern's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinEdge {
    pub from: usize,
    pub to: usize,
    pub pattern: usize,
    pub var: VarId,
}

/// Shared-variable constraint between two query CSs not expressed as a
/// join edge (object-object sharing).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxEquality {
    pub a: usize,
    pub b: usize,
    pub var: VarId,
}

#[derive(Debug, Clone)]
pub struct QueryGraph {
    pub css: Vec<QueryCS>,
    pub join_edges: Vec<JoinEdge>,
    pub aux_equalities: Vec<AuxEquality>,
    pub vars: VarTable,
    pub patterns: Vec<EncodedPattern>,
}

/// One table assignment per query CS, indexed like `QueryGraph::css`.
pub type TablePermutation = Vec<TableId>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum GroupKey {
    Var(VarId),
    Const(Term),
}

/// Groups patterns by subject key (first-appearance order), derives
/// join edges from object-variable/subject-key coincidences and records
/// the remaining cross-CS shared variables as auxiliary equalities.
pub fn decompose(bgp: &Bgp, dict: &Dictionary) -> QueryGraph {
    let mut vars = VarTable::default();
    let encode = |node: &NodePattern, vars: &mut VarTable| match node {
        NodePattern::Var(name) => PatNode::Var(vars.intern(name)),
        NodePattern::Const(term) => match dict.lookup(term) {
            Some(id) => PatNode::Known(id),
            None => PatNode::UnknownConst,
        },
    };

    let patterns: Vec<EncodedPattern> = bgp
        .patterns
        .iter()
        .map(|p| EncodedPattern {
            s: encode(&p.s, &mut vars),
            p: encode(&p.p, &mut vars),
            o: encode(&p.o, &mut vars),
        })
        .collect();

    let mut order: Vec<GroupKey> = Vec::new();
    let mut grouped: HashMap<GroupKey, Vec<usize>> = HashMap::new();
    for (i, pattern) in bgp.patterns.iter().enumerate() {
        let key = match &pattern.s {
            NodePattern::Var(name) => GroupKey::Var(vars.get(name).expect("interned")),
            NodePattern::Const(term) => GroupKey::Const(term.clone()),
        };
        let slot = grouped.entry(key.clone()).or_default();
        if slot.is_empty() {
            order.push(key);
        }
        slot.push(i);
    }

    let css: Vec<QueryCS> = order
        .iter()
        .map(|key| {
            let members = grouped[key].clone();
            let subject = patterns[members[0]].s;
            let mut predicates = Some(Vec::new());
            for &i in &members {
                match patterns[i].p {
                    PatNode::Known(id) => {
                        if let Some(list) = predicates.as_mut() {
                            list.push(id);
                        }
                    }
                    _ => predicates = None,
                }
            }
            QueryCS {
                subject,
                predicates: predicates.map(PropertySet::new),
                patterns: members,
            }
        })
        .collect();

    // Subject-key variable -> owning CS.
    let subject_of: HashMap<VarId, usize> = css
        .iter()
        .enumerate()
        .filter_map(|(i, q)| match q.subject {
            PatNode::Var(v) => Some((v, i)),
            _ => None,
        })
        .collect();

    let mut join_edges = Vec::new();
    for (from, q) in css.iter().enumerate() {
        for &pi in &q.patterns {
            if let PatNode::Var(v) = patterns[pi].o {
                if let Some(&to) = subject_of.get(&v) {
                    if to != from {
                        join_edges.push(JoinEdge {
                            from,
                            to,
                            pattern: pi,
                            var: v,
                        });
                    }
                }
            }
        }
    }

    // Any other variable shared between two CSs becomes an equality.
    let mut occurrences: HashMap<VarId, Vec<usize>> = HashMap::new();
    for (ci, q) in css.iter().enumerate() {
        let mut local: HashSet<VarId> = HashSet::new();
        if let PatNode::Var(v) = q.subject {
            local.insert(v);
        }
        for &pi in &q.patterns {
            if let PatNode::Var(v) = patterns[pi].o {
                local.insert(v);
            }
        }
        let mut local: Vec<VarId> = local.into_iter().collect();
        local.sort_unstable();
        for v in local {
            occurrences.entry(v).or_default().push(ci);
        }
    }
    let mut aux_equalities = Vec::new();
    let mut vars_sorted: Vec<(&VarId, &Vec<usize>)> = occurrences.iter().collect();
    vars_sorted.sort_by_key(|(v, _)| **v);
    for (&v, holders) in vars_sorted {
        for (x, &a) in holders.iter().enumerate() {
            for &b in &holders[x + 1..] {
                let covered = join_edges.iter().any(|e| {
                    e.var == v
                        && ((e.from == a && e.to == b) || (e.from == b && e.to == a))
                });
                if !covered {
                    aux_equalities.push(AuxEquality { a, b, var: v });
                }
            }
        }
    }

    QueryGraph {
        css,
        join_edges,
        aux_equalities,
        vars,
        patterns,
    }
}

/// Tables whose column sets are supersets of the query CS's predicates.
/// For a constant subject the subject index pins down the single
/// candidate table.
pub fn match_tables(qcs: &QueryCS, db: &Database) -> Vec<TableId> {
    let Some(predicates) = &qcs.predicates else {
        return Vec::new();
    };
    match qcs.subject {
        PatNode::UnknownConst => Vec::new(),
        PatNode::Known(subject) => db
            .subject_table(subject)
            .filter(|t| db.table(*t).columns.is_superset_of(predicates))
            .into_iter()
            .collect(),
        PatNode::Var(_) => db
            .tables
            .iter()
            .filter(|t| t.columns.is_superset_of(predicates))
            .map(|t| t.id)
            .collect(),
    }
}

/// Cartesian product of per-CS matches in lexicographic table order,
/// keeping only assignments where every join edge is backed by an ECS
/// pair link (any property). `prune = false` skips the ECS filter.
pub fn enumerate_permutations(
    graph: &QueryGraph,
    matches: &[Vec<TableId>],
    ecs: &EcsIndex,
    prune: bool,
) -> Vec<TablePermutation> {
    if matches.iter().any(|m| m.is_empty()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut current: TablePermutation = Vec::with_capacity(matches.len());
    assign(graph, matches, ecs, prune, &mut current, &mut out);
    out
}

fn assign(
    graph: &QueryGraph,
    matches: &[Vec<TableId>],
    ecs: &EcsIndex,
    prune: bool,
    current: &mut TablePermutation,
    out: &mut Vec<TablePermutation>,
) {
    let slot = current.len();
    if slot == matches.len() {
        out.push(current.clone());
        return;
    }
    'candidates: for &table in &matches[slot] {
        if prune {
            let assigned = |cs: usize| -> Option<TableId> {
                if cs == slot {
                    Some(table)
                } else {
                    current.get(cs).copied()
                }
            };
            for e in &graph.join_edges {
                let (Some(from), Some(to)) = (assigned(e.from), assigned(e.to)) else {
                    continue;
                };
                if !ecs.has_pair(from, to) {
                    continue 'candidates;
                }
            }
        }
        current.push(table);
        assign(graph, matches, ecs, prune, current, out);
        current.pop();
    }
}
