//! Stable line-oriented reports with optional JSON rendering.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use anyhow::Result;
use serde_json::{json, Value};

use raxon_core::merge::{build_residual, dense_coverage, plan_cost};
use raxon_core::query::ExplainReport;
use raxon_core::storage::{stored_triple_count, Database};

use crate::pipeline::Pipeline;

/// Ordered key/value report; values already rendered.
pub struct Report {
    lines: Vec<(String, Value)>,
}

impl Report {
    fn new() -> Self {
        Report { lines: Vec::new() }
    }

    fn push(&mut self, key: &str, value: Value) {
        self.lines.push((key.to_owned(), value));
    }

    pub fn as_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.lines {
            let rendered = match value {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{key}: {rendered}\n"));
        }
        out
    }

    pub fn as_json(&self) -> Result<String> {
        let map: serde_json::Map<String, Value> = self
            .lines
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(serde_json::to_string_pretty(&Value::Object(map))?)
    }
}

fn round6(x: f64) -> Value {
    json!((x * 1e6).round() / 1e6)
}

pub fn load_report(
    input: &Path,
    strict: bool,
    pipeline: &Pipeline,
    db: &Database,
    db_dir: &Path,
    elapsed: Duration,
) -> Report {
    let mut r = Report::new();
    r.push("input", json!(input.display().to_string()));
    r.push("strict", json!(strict));
    r.push("triples_parsed", json!(pipeline.stats.total_triples));
    r.push("lines_skipped", json!(pipeline.skipped_lines));
    r.push("terms", json!(pipeline.dict().len()));
    r.push("subjects", json!(pipeline.stats.distinct_subjects));
    r.push("cs_count", json!(pipeline.css.len()));
    r.push("closure_edges", json!(pipeline.closure.closure_edges.len()));
    r.push("algorithm", json!(pipeline.plan.algorithm.to_string()));
    r.push("density_factor", round6(pipeline.plan.config.m()));
    r.push("dense_count", json!(pipeline.dense_count));
    r.push("tables", json!(db.tables.len()));
    r.push("groups", json!(pipeline.plan.groups.len()));
    r.push("residual_css", json!(pipeline.plan.residual.len()));
    r.push("ecs_links", json!(db.ecs.len()));
    r.push(
        "dense_coverage",
        round6(dense_coverage(&pipeline.plan, &pipeline.css)),
    );
    r.push(
        "plan_cost",
        round6(plan_cost(&pipeline.plan, &pipeline.css).total),
    );
    r.push(
        "null_cells",
        json!(db.tables.iter().map(|t| t.null_cells()).sum::<u64>()),
    );
    r.push("stored_triples", json!(stored_triple_count(&db.tables)));
    r.push("db_bytes", json!(dir_bytes(db_dir)));
    r.push("db_dir", json!(db_dir.display().to_string()));
    r.push("wall_time_ms", json!(elapsed.as_millis() as u64));
    r
}

fn dir_bytes(dir: &Path) -> u64 {
    let mut total = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&d) else { continue };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Ok(meta) = entry.metadata() {
                total += meta.len();
            }
        }
    }
    total
}

pub fn stats_report(pipeline: &Pipeline) -> Report {
    let mut r = Report::new();
    r.push("triples_parsed", json!(pipeline.stats.total_triples));
    r.push("lines_skipped", json!(pipeline.skipped_lines));
    r.push("subjects", json!(pipeline.stats.distinct_subjects));
    r.push("properties", json!(pipeline.stats.property_card.len()));
    r.push("classes", json!(pipeline.stats.class_card.len()));
    r.push("cs_count", json!(pipeline.css.len()));
    r.push("direct_edges", json!(pipeline.lattice().direct_edges.len()));
    r.push("closure_edges", json!(pipeline.closure.closure_edges.len()));

    // Histogram: record count -> number of CSs, densest first.
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    for cs in &pipeline.css {
        *histogram.entry(cs.cardinality()).or_insert(0) += 1;
    }
    for (records, count) in histogram.iter().rev() {
        r.push(&format!("records_{records}"), json!(count));
    }
    r
}

pub fn plan_report(pipeline: &Pipeline) -> Report {
    let plan = &pipeline.plan;
    let css = &pipeline.css;
    let cost = plan_cost(plan, css);
    let mut r = Report::new();
    r.push("cs_count", json!(css.len()));
    r.push("dense_count", json!(pipeline.dense_count));
    r.push("algorithm", json!(plan.algorithm.to_string()));
    r.push("density_factor", round6(plan.config.m()));
    r.push("groups", json!(plan.groups.len()));
    r.push("residual_css", json!(plan.residual.len()));
    r.push("tables", json!(plan.table_count()));
    for group in &plan.groups {
        let members = group
            .members
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        r.push(
            &format!("group_{}", group.base),
            json!(format!(
                "members=[{members}] rows={} ratio={:.6}",
                std::iter::once(group.base)
                    .chain(group.members.iter().copied())
                    .map(|id| css[id.0 as usize].cardinality())
                    .sum::<u64>(),
                cost.per_group[&group.base]
            )),
        );
    }
    if let Some(schema) = build_residual(&plan.residual, css) {
        let ids = plan
            .residual
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        r.push(
            "residual",
            json!(format!(
                "css=[{ids}] columns={} rows={} null_cells={}",
                schema.columns.len(),
                schema.row_count,
                schema.null_cells
            )),
        );
    }
    r.push("total_cost", round6(cost.total));
    r.push("dense_coverage", round6(dense_coverage(plan, css)));
    r
}

/// Diagnostics for `query --explain`, written as `#`-prefixed lines so
/// the TSV that follows stays machine-readable.
pub fn explain_text(explain: &ExplainReport) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str("# ");
        out.push_str(&s);
        out.push('\n');
    };
    for (i, q) in explain.query_css.iter().enumerate() {
        line(format!(
            "query_cs {i}: subject={} predicates=[{}] patterns={}",
            q.subject,
            q.predicates.join(","),
            q.pattern_count
        ));
    }
    for (from, to) in &explain.join_edges {
        line(format!("join_edge: q{from} -> q{to}"));
    }
    for (a, b, var) in &explain.aux_equalities {
        line(format!("aux_equality: q{a} ~ q{b} via ?{var}"));
    }
    for (i, matches) in explain.matches.iter().enumerate() {
        line(format!(
            "matches q{i}: [{}]",
            matches
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    line(format!("permutations: {}", explain.permutations.len()));
    for (i, (permutation, rows)) in explain
        .permutations
        .iter()
        .zip(&explain.per_permutation_rows)
        .enumerate()
    {
        line(format!(
            "permutation {i}: [{}] rows={rows}",
            permutation
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    if let Some(reorder) = &explain.reorder {
        line(format!(
            "qmatrix nodes: [{}]",
            reorder
                .matrix
                .nodes
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        for (i, row) in reorder.matrix.rows.iter().enumerate() {
            line(format!(
                "qmatrix t{i}: [{}]",
                row.iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        for pair in &reorder.pairs {
            line(format!(
                "pair: t{} t{} distance={:.6}",
                pair.a, pair.b, pair.distance
            ));
        }
        for (i, subplan) in reorder.subplans_before.iter().enumerate() {
            line(format!(
                "subplan {i}: [{}]",
                subplan
                    .iter()
                    .map(|t| format!("t{t}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        line(format!(
            "final_order: [{}]",
            reorder
                .order
                .iter()
                .map(|t| format!("t{t}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    out
}
