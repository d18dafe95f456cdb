//! Permutation-at-a-time BGP execution.
//!
//! Every query CS scans its assigned table with NOT-NULL restrictions
//! on its predicates plus the pattern's constant-object filters; the
//! per-CS binding sets are then hash-joined on their shared variables
//! (join edges and auxiliary equalities alike) and projected. Each
//! permutation is evaluated independently and the results appended in
//! permutation order.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::reorder::{self, ReorderExplain};
use crate::storage::{Database, ScanFilter, TableId};
use crate::term::{Dictionary, TermId};

use super::{
    decompose, enumerate_permutations, match_tables, Bgp, PatNode, QueryGraph,
    TablePermutation, VarId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Planner {
    #[default]
    None,
    Distance,
}

#[derive(Debug, Clone, Copy)]
pub struct ExecOptions {
    pub planner: Planner,
    /// Evaluate permutations in parallel; the append order stays
    /// deterministic either way.
    pub parallel: bool,
    /// Disable to execute every unpruned permutation (diagnostics; the
    /// result multiset must not change).
    pub ecs_prune: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            planner: Planner::None,
            parallel: false,
            ecs_prune: true,
        }
    }
}

impl ExecOptions {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Bag of bindings; every row binds every header variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub header: Vec<String>,
    pub rows: Vec<Vec<TermId>>,
}

impl ResultSet {
    /// Canonical row order for multiset comparison.
    pub fn sorted(mut self) -> Self {
        self.rows.sort_unstable();
        self
    }

    pub fn multiset_eq(&self, other: &ResultSet) -> bool {
        if self.header != other.header || self.rows.len() != other.rows.len() {
            return false;
        }
        let mut a = self.rows.clone();
        let mut b = other.rows.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }

    /// Header plus one tab-separated line per row, terms in N-Triples
    /// syntax.
    pub fn to_tsv(&self, dict: &Dictionary) -> String {
        let mut out = String::new();
        out.push_str(
            &self
                .header
                .iter()
                .map(|v| format!("?{v}"))
                .collect::<Vec<_>>()
                .join("\t"),
        );
        out.push('\n');
        for row in &self.rows {
            out.push_str(
                &row.iter()
                    .map(|id| dict.decode(*id).to_ntriples())
                    .collect::<Vec<_>>()
                    .join("\t"),
            );
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct QueryCsSummary {
    pub subject: String,
    pub predicates: Vec<String>,
    pub pattern_count: usize,
}

/// Plan diagnostics emitted by `execute_explain`.
#[derive(Debug, Clone)]
pub struct ExplainReport {
    pub query_css: Vec<QueryCsSummary>,
    /// Subject variable per query CS, `None` for constant subjects.
    pub subject_vars: Vec<Option<String>>,
    pub join_edges: Vec<(usize, usize)>,
    pub aux_equalities: Vec<(usize, usize, String)>,
    pub matches: Vec<Vec<TableId>>,
    pub permutations: Vec<TablePermutation>,
    pub per_permutation_rows: Vec<u64>,
    pub reorder: Option<ReorderExplain>,
}

pub fn execute(bgp: &Bgp, db: &Database, opts: &ExecOptions) -> Result<ResultSet> {
    let (parts, _, header) = run(bgp, db, opts)?;
    Ok(concat_results(header, parts))
}

pub fn execute_explain(
    bgp: &Bgp,
    db: &Database,
    opts: &ExecOptions,
) -> Result<(ResultSet, ExplainReport)> {
    let (parts, explain, header) = run(bgp, db, opts)?;
    Ok((concat_results(header, parts), explain))
}

/// Like [`execute`], but keeps each permutation's rows separate, in
/// permutation order. The concatenation equals `execute`'s output.
pub fn execute_partitioned(
    bgp: &Bgp,
    db: &Database,
    opts: &ExecOptions,
) -> Result<(Vec<ResultSet>, ExplainReport)> {
    let (parts, explain, header) = run(bgp, db, opts)?;
    let sets = parts
        .into_iter()
        .map(|rows| ResultSet {
            header: header.clone(),
            rows,
        })
        .collect();
    Ok((sets, explain))
}

fn concat_results(header: Vec<String>, parts: Vec<Vec<Vec<TermId>>>) -> ResultSet {
    ResultSet {
        header,
        rows: parts.into_iter().flatten().collect(),
    }
}

type Binding = Vec<Option<TermId>>;

/// Evaluates the query and returns the projected rows per permutation,
/// the explain report and the header.
#[allow(clippy::type_complexity)]
fn run(
    bgp: &Bgp,
    db: &Database,
    opts: &ExecOptions,
) -> Result<(Vec<Vec<Vec<TermId>>>, ExplainReport, Vec<String>)> {
    // The header always reflects the original pattern order, so planner
    // on/off yields comparable rows.
    let header = bgp.header();

    let (effective, reorder_explain) = match opts.planner {
        Planner::None => (bgp.clone(), None),
        Planner::Distance => {
            let explain = reorder::plan_order_explain(
                &bgp.patterns,
                &db.catalog.stats,
                &db.dict,
                db.catalog.type_property,
            );
            let patterns = explain
                .order
                .iter()
                .map(|&i| bgp.patterns[i].clone())
                .collect();
            (
                Bgp {
                    patterns,
                    projection: bgp.projection.clone(),
                },
                Some(explain),
            )
        }
    };

    let graph = decompose(&effective, &db.dict);
    let matches: Vec<Vec<TableId>> =
        graph.css.iter().map(|q| match_tables(q, db)).collect();
    let permutations = enumerate_permutations(&graph, &matches, &db.ecs, opts.ecs_prune);

    // Per-CS bindings depend only on the assigned table; compute each
    // (query CS, table) pair once and share across permutations.
    let mut locals: HashMap<(usize, TableId), Vec<Binding>> = HashMap::new();
    for (ci, tables) in matches.iter().enumerate() {
        for &t in tables {
            locals.entry((ci, t)).or_insert(local_bindings(&graph, ci, t, db)?);
        }
    }

    let bound_sets: Vec<Vec<VarId>> = graph.css.iter().map(|q| cs_variables(&graph, q)).collect();
    let eval = |permutation: &TablePermutation| -> Vec<Binding> {
        join_permutation(permutation, &locals, &bound_sets)
    };
    let per_perm: Vec<Vec<Binding>> = if opts.parallel {
        permutations.par_iter().map(eval).collect()
    } else {
        permutations.iter().map(eval).collect()
    };

    let header_ids: Vec<VarId> = header
        .iter()
        .map(|name| graph.vars.get(name).expect("projection variable is bound"))
        .collect();
    let mut parts: Vec<Vec<Vec<TermId>>> = Vec::with_capacity(per_perm.len());
    let mut per_permutation_rows = Vec::with_capacity(per_perm.len());
    for bindings in &per_perm {
        per_permutation_rows.push(bindings.len() as u64);
        parts.push(
            bindings
                .iter()
                .map(|b| {
                    header_ids
                        .iter()
                        .map(|&v| b[v].expect("joined binding is total"))
                        .collect()
                })
                .collect(),
        );
    }

    let explain = ExplainReport {
        query_css: graph
            .css
            .iter()
            .map(|q| QueryCsSummary {
                subject: match q.subject {
                    PatNode::Var(v) => format!("?{}", graph.vars.name(v)),
                    PatNode::Known(id) => db.dict.decode(id).to_ntriples(),
                    PatNode::UnknownConst => "<unmatched constant>".into(),
                },
                predicates: q
                    .predicates
                    .as_ref()
                    .map(|ps| {
                        ps.iter()
                            .map(|p| db.dict.decode(p).to_ntriples())
                            .collect()
                    })
                    .unwrap_or_else(|| vec!["<unknown property>".into()]),
                pattern_count: q.patterns.len(),
            })
            .collect(),
        subject_vars: graph
            .css
            .iter()
            .map(|q| match q.subject {
                PatNode::Var(v) => Some(graph.vars.name(v).to_owned()),
                _ => None,
            })
            .collect(),
        join_edges: graph.join_edges.iter().map(|e| (e.from, e.to)).collect(),
        aux_equalities: graph
            .aux_equalities
            .iter()
            .map(|e| (e.a, e.b, graph.vars.name(e.var).to_owned()))
            .collect(),
        matches,
        permutations,
        per_permutation_rows,
        reorder: reorder_explain,
    };
    Ok((parts, explain, header))
}

/// Variables a query CS binds: its subject variable plus the object
/// variables of its patterns, ascending.
fn cs_variables(graph: &QueryGraph, qcs: &super::QueryCS) -> Vec<VarId> {
    let mut vars = Vec::new();
    if let PatNode::Var(v) = qcs.subject {
        vars.push(v);
    }
    for &pi in &qcs.patterns {
        if let PatNode::Var(v) = graph.patterns[pi].o {
            vars.push(v);
        }
    }
    vars.sort_unstable();
    vars.dedup();
    vars
}

/// Scans the assigned table for one query CS and expands each row into
/// bindings over the CS's variables. Multi-valued cells fan out into
/// one binding per element; repeated variables must agree.
fn local_bindings(
    graph: &QueryGraph,
    cs_idx: usize,
    table_id: TableId,
    db: &Database,
) -> Result<Vec<Binding>> {
    let qcs = &graph.css[cs_idx];
    let table = db.table(table_id);
    let predicates = qcs
        .predicates
        .as_ref()
        .expect("matched query CS has known predicates");

    let mut filters = Vec::new();
    for &pi in &qcs.patterns {
        let pattern = &graph.patterns[pi];
        match pattern.o {
            PatNode::Known(value) => {
                let PatNode::Known(column) = pattern.p else { unreachable!() };
                filters.push(ScanFilter { column, value });
            }
            PatNode::UnknownConst => return Ok(Vec::new()),
            PatNode::Var(_) => {}
        }
    }
    let subject = match qcs.subject {
        PatNode::Known(s) => Some(s),
        PatNode::UnknownConst => return Ok(Vec::new()),
        PatNode::Var(_) => None,
    };

    let n_vars = graph.vars.len();
    let mut out = Vec::new();
    for row in table.scan(predicates, &filters, subject)? {
        let mut partials: Vec<Binding> = vec![vec![None; n_vars]];
        if let PatNode::Var(v) = qcs.subject {
            partials[0][v] = Some(row.subject);
        }
        for &pi in &qcs.patterns {
            let pattern = &graph.patterns[pi];
            let PatNode::Var(v) = pattern.o else { continue };
            let PatNode::Known(p) = pattern.p else { unreachable!() };
            let col = table.column_index(p).expect("matched column");
            let values = row.cells[col].as_ref().expect("NOT NULL scanned");
            let mut next = Vec::with_capacity(partials.len() * values.len());
            for partial in &partials {
                match partial[v] {
                    Some(bound) => {
                        if values.contains(&bound) {
                            next.push(partial.clone());
                        }
                    }
                    None => {
                        for &value in values {
                            let mut b = partial.clone();
                            b[v] = Some(value);
                            next.push(b);
                        }
                    }
                }
            }
            partials = next;
            if partials.is_empty() {
                break;
            }
        }
        out.extend(partials);
    }
    Ok(out)
}

/// Joins the per-CS binding sets of one permutation, CS by CS in plan
/// order, hash-joining on whatever variables both sides bind.
fn join_permutation(
    permutation: &TablePermutation,
    locals: &HashMap<(usize, TableId), Vec<Binding>>,
    bound_sets: &[Vec<VarId>],
) -> Vec<Binding> {
    let mut acc: Vec<Binding> = Vec::new();
    let mut acc_bound: Vec<VarId> = Vec::new();
    for (ci, &table) in permutation.iter().enumerate() {
        let local = &locals[&(ci, table)];
        if local.is_empty() {
            return Vec::new();
        }
        if ci == 0 {
            acc = local.clone();
            acc_bound = bound_sets[0].clone();
            continue;
        }
        let shared: Vec<VarId> = acc_bound
            .iter()
            .filter(|v| bound_sets[ci].binary_search(v).is_ok())
            .copied()
            .collect();
        acc = hash_join(&acc, local, &shared);
        if acc.is_empty() {
            return Vec::new();
        }
        for &v in &bound_sets[ci] {
            if !acc_bound.contains(&v) {
                acc_bound.push(v);
            }
        }
        acc_bound.sort_unstable();
    }
    acc
}

fn hash_join(left: &[Binding], right: &[Binding], shared: &[VarId]) -> Vec<Binding> {
    if shared.is_empty() {
        let mut out = Vec::with_capacity(left.len() * right.len());
        for l in left {
            for r in right {
                out.push(merge(l, r));
            }
        }
        return out;
    }
    let key = |b: &Binding| -> Vec<TermId> {
        shared.iter().map(|&v| b[v].expect("shared var bound")).collect()
    };
    // Build on the smaller input.
    let (build, probe, build_is_left) = if left.len() <= right.len() {
        (left, right, true)
    } else {
        (right, left, false)
    };
    let mut index: HashMap<Vec<TermId>, Vec<&Binding>> = HashMap::new();
    for b in build {
        index.entry(key(b)).or_default().push(b);
    }
    let mut out = Vec::new();
    for p in probe {
        if let Some(bucket) = index.get(&key(p)) {
            for b in bucket {
                if build_is_left {
                    out.push(merge(b, p));
                } else {
                    out.push(merge(p, b));
                }
            }
        }
    }
    out
}

fn merge(a: &Binding, b: &Binding) -> Binding {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.or(*y))
        .collect()
}
