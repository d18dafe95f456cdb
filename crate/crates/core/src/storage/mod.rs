//! Materialized merged tables, the ECS link index and the database
//! handle.
//!
//! Each merge-plan group becomes one relational-style table whose
//! columns are the base CS's properties; member records are projected
//! onto them with NULLs for the properties they lack. Multi-valued
//! cells hold value lists so rows are never duplicated. A single
//! residual table aggregates the uncovered CSs over the union of their
//! property sets.

mod persist;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cs::{CharacteristicSet, CsId, PropertySet};
use crate::error::{Error, Result};
use crate::ingest::DatasetStats;
use crate::merge::{build_residual, MergeAlgorithm, MergePlan};
use crate::term::{Dictionary, TermId};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TableId(pub u32);

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// One subject row; `cells` is aligned with the owning table's sorted
/// column order, `None` marking NULL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub subject: TermId,
    pub cells: Vec<Option<Vec<TermId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableProvenance {
    Group { base: CsId, members: BTreeSet<CsId> },
    Residual { css: BTreeSet<CsId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedTable {
    pub id: TableId,
    pub columns: PropertySet,
    /// Columns observed with more than one value in some row.
    pub multi_valued: BTreeSet<TermId>,
    pub rows: Vec<Row>,
    pub provenance: TableProvenance,
}

/// Equality filter for a scan; multi-valued cells match if any element
/// equals `value`.
#[derive(Debug, Clone, Copy)]
pub struct ScanFilter {
    pub column: TermId,
    pub value: TermId,
}

impl MergedTable {
    pub fn column_index(&self, p: TermId) -> Option<usize> {
        self.columns.position(p)
    }

    pub fn null_cells(&self) -> u64 {
        self.rows
            .iter()
            .map(|r| r.cells.iter().filter(|c| c.is_none()).count() as u64)
            .sum()
    }

    /// Non-NULL (property, value) pairs, counting each list element.
    pub fn stored_triples(&self) -> u64 {
        self.rows
            .iter()
            .flat_map(|r| r.cells.iter())
            .map(|c| c.as_ref().map_or(0, |v| v.len() as u64))
            .sum()
    }

    /// Rows whose `required` columns are all non-NULL, whose cells
    /// satisfy every equality filter, and (when given) whose subject
    /// matches. Errors on columns the table does not have.
    pub fn scan<'a>(
        &'a self,
        required: &PropertySet,
        filters: &'a [ScanFilter],
        subject: Option<TermId>,
    ) -> Result<impl Iterator<Item = &'a Row> + 'a> {
        let required_idx = self.resolve_columns(required.iter())?;
        let filter_idx: Vec<(usize, TermId)> = self
            .resolve_columns(filters.iter().map(|f| f.column))?
            .into_iter()
            .zip(filters.iter().map(|f| f.value))
            .collect();
        Ok(self.rows.iter().filter(move |row| {
            if subject.is_some_and(|s| s != row.subject) {
                return false;
            }
            if required_idx.iter().any(|&i| row.cells[i].is_none()) {
                return false;
            }
            filter_idx.iter().all(|&(i, v)| {
                row.cells[i]
                    .as_ref()
                    .is_some_and(|values| values.contains(&v))
            })
        }))
    }

    fn resolve_columns(&self, cols: impl Iterator<Item = TermId>) -> Result<Vec<usize>> {
        cols.map(|c| {
            self.column_index(c).ok_or(Error::UnknownColumn {
                table: self.id.0,
                column: c.0 as u64,
            })
        })
        .collect()
    }
}

/// Per-table metadata persisted in the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub id: TableId,
    pub columns: PropertySet,
    pub multi_valued: BTreeSet<TermId>,
    pub row_count: u64,
    pub provenance: TableProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub tables: Vec<TableMeta>,
    pub density_factor: f64,
    pub algorithm: MergeAlgorithm,
    pub stats: DatasetStats,
    /// Dictionary id of the configured rdf:type IRI, when it occurs.
    pub type_property: Option<TermId>,
    pub dict_len: u64,
}

/// Materializes one table per plan group (columns = the base property
/// set) plus, when the residual is non-empty, one residual table over
/// the union of the uncovered property sets.
pub fn materialize(plan: &MergePlan, css: &[CharacteristicSet]) -> Vec<MergedTable> {
    let mut tables = Vec::with_capacity(plan.table_count());
    for group in &plan.groups {
        let base = &css[group.base.0 as usize];
        let columns = base.properties.clone();
        let mut member_ids: Vec<CsId> = group.members.iter().copied().collect();
        member_ids.sort_unstable();
        let sources = std::iter::once(group.base).chain(member_ids);
        tables.push(project_table(
            TableId(tables.len() as u32),
            columns,
            sources,
            css,
            TableProvenance::Group {
                base: group.base,
                members: group.members.clone(),
            },
        ));
    }
    if let Some(schema) = build_residual(&plan.residual, css) {
        tables.push(project_table(
            TableId(tables.len() as u32),
            schema.columns,
            plan.residual.iter().copied(),
            css,
            TableProvenance::Residual {
                css: plan.residual.clone(),
            },
        ));
    }
    tables
}

fn project_table(
    id: TableId,
    columns: PropertySet,
    sources: impl Iterator<Item = CsId>,
    css: &[CharacteristicSet],
    provenance: TableProvenance,
) -> MergedTable {
    let mut rows = Vec::new();
    let mut multi_valued = BTreeSet::new();
    for source in sources {
        let cs = &css[source.0 as usize];
        // Map each table column to the CS's own column, if present.
        let projection: Vec<Option<usize>> = columns
            .iter()
            .map(|p| cs.properties.position(p))
            .collect();
        for record in &cs.records {
            let cells: Vec<Option<Vec<TermId>>> = projection
                .iter()
                .map(|src| src.map(|i| record.values_at(i).to_vec()))
                .collect();
            for (col, cell) in columns.iter().zip(&cells) {
                if cell.as_ref().is_some_and(|v| v.len() > 1) {
                    multi_valued.insert(col);
                }
            }
            rows.push(Row {
                subject: record.subject,
                cells,
            });
        }
    }
    MergedTable {
        id,
        columns,
        multi_valued,
        rows,
        provenance,
    }
}

/// Total deduplicated triples stored across tables.
pub fn stored_triple_count(tables: &[MergedTable]) -> u64 {
    tables.iter().map(|t| t.stored_triples()).sum()
}

/// Object-subject links between tables: `(from, p, to)` is present iff
/// some row of `from` holds a value under `p` equal to the subject of
/// some row of `to`. Self-links are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcsIndex {
    links: BTreeSet<(TableId, TermId, TableId)>,
    pairs: std::collections::HashSet<(TableId, TableId)>,
}

impl EcsIndex {
    pub fn from_links(links: BTreeSet<(TableId, TermId, TableId)>) -> Self {
        let pairs = links.iter().map(|&(f, _, t)| (f, t)).collect();
        EcsIndex { links, pairs }
    }

    pub fn links(&self) -> impl Iterator<Item = &(TableId, TermId, TableId)> {
        self.links.iter()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, from: TableId, p: TermId, to: TableId) -> bool {
        self.links.contains(&(from, p, to))
    }

    /// Whether any property links `from` to `to`.
    pub fn has_pair(&self, from: TableId, to: TableId) -> bool {
        self.pairs.contains(&(from, to))
    }
}

pub fn build_ecs_index(tables: &[MergedTable]) -> EcsIndex {
    let mut subject_table: HashMap<TermId, TableId> = HashMap::new();
    for t in tables {
        for row in &t.rows {
            subject_table.insert(row.subject, t.id);
        }
    }
    let mut links = BTreeSet::new();
    for t in tables {
        for row in &t.rows {
            for (p, cell) in t.columns.iter().zip(&row.cells) {
                let Some(values) = cell else { continue };
                for v in values {
                    if let Some(&target) = subject_table.get(v) {
                        links.insert((t.id, p, target));
                    }
                }
            }
        }
    }
    EcsIndex::from_links(links)
}

/// Immutable database handle: dictionary, tables, ECS index, stats.
#[derive(Debug, Clone)]
pub struct Database {
    pub dict: Dictionary,
    pub catalog: Catalog,
    pub tables: Vec<MergedTable>,
    pub ecs: EcsIndex,
    subject_index: HashMap<TermId, TableId>,
}

impl Database {
    /// Materializes the plan and builds all derived indexes.
    pub fn assemble(
        dict: Dictionary,
        css: &[CharacteristicSet],
        plan: &MergePlan,
        stats: DatasetStats,
        type_property: Option<TermId>,
    ) -> Database {
        let tables = materialize(plan, css);
        let ecs = build_ecs_index(&tables);
        let catalog = Catalog {
            tables: tables
                .iter()
                .map(|t| TableMeta {
                    id: t.id,
                    columns: t.columns.clone(),
                    multi_valued: t.multi_valued.clone(),
                    row_count: t.rows.len() as u64,
                    provenance: t.provenance.clone(),
                })
                .collect(),
            density_factor: plan.config.m(),
            algorithm: plan.algorithm,
            stats,
            type_property,
            dict_len: dict.len() as u64,
        };
        let subject_index = build_subject_index(&tables);
        Database {
            dict,
            catalog,
            tables,
            ecs,
            subject_index,
        }
    }

    pub fn table(&self, id: TableId) -> &MergedTable {
        &self.tables[id.0 as usize]
    }

    /// Table holding the given subject, if any. Every subject lives in
    /// exactly one table.
    pub fn subject_table(&self, subject: TermId) -> Option<TableId> {
        self.subject_index.get(&subject).copied()
    }

    /// Swaps in a different ECS index; used to study pruning behavior.
    pub fn with_ecs(mut self, ecs: EcsIndex) -> Database {
        self.ecs = ecs;
        self
    }
}

fn build_subject_index(tables: &[MergedTable]) -> HashMap<TermId, TableId> {
    let mut index = HashMap::new();
    for t in tables {
        for row in &t.rows {
            index.insert(row.subject, t.id);
        }
    }
    index
}
