//! Merge planning over the CS hierarchy.
//!
//! Dense CSs (record count above a fraction of the largest CS) become
//! the bases of ancestral sub-graphs; non-dense ancestors are merged
//! down into them. Plans are scored by the ratio of NULL cells the
//! merges introduce, minimized either exactly (per-component assignment
//! enumeration) or greedily per non-dense node. CSs covered by no group
//! fall into a single residual table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cs::{CharacteristicSet, CsId, InferredHierarchy, PropertySet};
use crate::error::{Error, Result};

/// Assignment-enumeration guard for the exact algorithm.
pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeAlgorithm {
    /// One table per CS, no merging.
    None,
    Greedy,
    Optimal,
}

impl fmt::Display for MergeAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeAlgorithm::None => f.write_str("none"),
            MergeAlgorithm::Greedy => f.write_str("greedy"),
            MergeAlgorithm::Optimal => f.write_str("optimal"),
        }
    }
}

/// Validated density factor m in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityConfig {
    m: f64,
}

impl DensityConfig {
    pub fn new(m: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::InvalidDensity(m));
        }
        Ok(DensityConfig { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

/// A dense base CS plus the non-dense strict ancestors merged into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AncestralSubgraph {
    pub base: CsId,
    pub members: BTreeSet<CsId>,
}

/// Partition of all CSs into ancestral sub-graphs plus a residual set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergePlan {
    pub groups: Vec<AncestralSubgraph>,
    pub residual: BTreeSet<CsId>,
    pub config: DensityConfig,
    pub algorithm: MergeAlgorithm,
}

impl MergePlan {
    /// One memberless group per CS: the unmerged layout.
    pub fn one_table_per_cs(css: &[CharacteristicSet], config: DensityConfig) -> Self {
        MergePlan {
            groups: css
                .iter()
                .map(|c| AncestralSubgraph {
                    base: c.id,
                    members: BTreeSet::new(),
                })
                .collect(),
            residual: BTreeSet::new(),
            config,
            algorithm: MergeAlgorithm::None,
        }
    }

    /// Resulting relational table count.
    pub fn table_count(&self) -> usize {
        self.groups.len() + usize::from(!self.residual.is_empty())
    }

    /// True iff every id in 0..n appears exactly once as a base, a
    /// member, or a residual entry.
    pub fn covers_exactly(&self, n_cs: usize) -> bool {
        let mut seen = vec![false; n_cs];
        let mut mark = |id: CsId| -> bool {
            let i = id.0 as usize;
            if i >= n_cs || seen[i] {
                return false;
            }
            seen[i] = true;
            true
        };
        for g in &self.groups {
            if !mark(g.base) {
                return false;
            }
            for &m in &g.members {
                if !mark(m) {
                    return false;
                }
            }
        }
        for &r in &self.residual {
            if !mark(r) {
                return false;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Per-group NULL ratios and their sum (the plan objective).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub per_group: BTreeMap<CsId, f64>,
    pub total: f64,
}

/// Residual-table shape: union of the uncovered property sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidualSchema {
    pub columns: PropertySet,
    pub row_count: u64,
    pub null_cells: u64,
}

/// One weakly connected component after cutting dense out-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Dense sinks, ascending.
    pub dense: Vec<CsId>,
    /// Non-dense nodes, ascending.
    pub non_dense: Vec<CsId>,
    /// Dense descendants per non-dense node, aligned with `non_dense`.
    pub choices: Vec<Vec<CsId>>,
}

fn cs(css: &[CharacteristicSet], id: CsId) -> &CharacteristicSet {
    let c = &css[id.0 as usize];
    debug_assert_eq!(c.id, id);
    c
}

/// A CS is dense iff its cardinality strictly exceeds m * |r_max|.
/// m = 0 therefore marks every CS dense, m = 1 none.
pub fn classify_dense(css: &[CharacteristicSet], config: &DensityConfig) -> BTreeSet<CsId> {
    let r_max = css.iter().map(|c| c.cardinality()).max().unwrap_or(0);
    let threshold = config.m() * r_max as f64;
    css.iter()
        .filter(|c| c.cardinality() as f64 > threshold)
        .map(|c| c.id)
        .collect()
}

/// Exact non-negative ratio with cross-multiplied comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    fn to_f64(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    fn to_big(self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den.max(1)))
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

fn r_null_ratio(parent: &CharacteristicSet, child: &CharacteristicSet) -> Result<Ratio> {
    if !parent.properties.is_strict_subset_of(&child.properties) {
        return Err(Error::NotStrictSubset);
    }
    let missing = (child.properties.len() - parent.properties.len()) as u64;
    Ok(Ratio {
        num: missing * parent.cardinality(),
        den: child.cardinality(),
    })
}

/// NULL-cell ratio of merging `parent` into `child`: the number of NULL
/// cells the parent's records contribute, over the child's cardinality.
pub fn r_null(parent: &CharacteristicSet, child: &CharacteristicSet) -> Result<f64> {
    Ok(r_null_ratio(parent, child)?.to_f64())
}

fn subgraph_ratio(group: &AncestralSubgraph, css: &[CharacteristicSet]) -> Ratio {
    if group.members.is_empty() {
        return Ratio { num: 0, den: 1 };
    }
    let base = cs(css, group.base);
    let mut num = 0u64;
    let mut den = base.cardinality();
    for &m in &group.members {
        let member = cs(css, m);
        debug_assert!(member.properties.is_strict_subset_of(&base.properties));
        let missing = (base.properties.len() - member.properties.len()) as u64;
        num += missing * member.cardinality();
        den += member.cardinality();
    }
    Ratio { num, den }
}

/// Generalized NULL ratio over a whole ancestral sub-graph: total NULL
/// cells introduced by the members over the merged table's cardinality.
/// Empty member set yields 0.
pub fn subgraph_null_ratio(group: &AncestralSubgraph, css: &[CharacteristicSet]) -> f64 {
    subgraph_ratio(group, css).to_f64()
}

/// Sums per-group ratios; the residual group carries no cost.
pub fn plan_cost(plan: &MergePlan, css: &[CharacteristicSet]) -> CostReport {
    let mut per_group = BTreeMap::new();
    let mut total = 0.0;
    for g in &plan.groups {
        let ratio = subgraph_null_ratio(g, css);
        per_group.insert(g.base, ratio);
        total += ratio;
    }
    CostReport { per_group, total }
}

/// Exact rational plan cost, for oracle comparisons.
pub fn plan_cost_exact(plan: &MergePlan, css: &[CharacteristicSet]) -> BigRational {
    plan.groups
        .iter()
        .map(|g| subgraph_ratio(g, css).to_big())
        .sum()
}

/// Cuts every closure edge whose source is dense, then returns the
/// weakly connected components of what remains. Each component carries
/// its dense sinks and, per non-dense node, its in-closure dense
/// descendants.
pub fn split_components(closure: &InferredHierarchy, dense: &BTreeSet<CsId>) -> Vec<Component> {
    let index: HashMap<CsId, usize> = closure
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, i))
        .collect();
    let mut dsu = Dsu::new(closure.nodes.len());
    for &(a, b) in &closure.closure_edges {
        if !dense.contains(&a) {
            dsu.union(index[&a], index[&b]);
        }
    }

    let descendants = closure.descendants();
    let mut by_root: BTreeMap<usize, Vec<CsId>> = BTreeMap::new();
    for (i, &n) in closure.nodes.iter().enumerate() {
        by_root.entry(dsu.find(i)).or_default().push(n);
    }

    let mut components: Vec<Component> = by_root
        .into_values()
        .map(|mut nodes| {
            nodes.sort_unstable();
            let (dense_nodes, non_dense): (Vec<_>, Vec<_>) =
                nodes.into_iter().partition(|n| dense.contains(n));
            let choices = non_dense
                .iter()
                .map(|k| {
                    let mut ds: Vec<CsId> = descendants[k]
                        .iter()
                        .filter(|d| dense.contains(d))
                        .copied()
                        .collect();
                    ds.sort_unstable();
                    ds
                })
                .collect();
            Component {
                dense: dense_nodes,
                non_dense,
                choices,
            }
        })
        .collect();
    components.sort_by_key(|c| {
        c.dense
            .first()
            .or_else(|| c.non_dense.first())
            .copied()
            .unwrap()
    });
    components
}

/// Number of candidate sub-graph assignments for a component: the
/// product of per-node dense-descendant counts, skipping nodes with
/// none (those go to the residual).
pub fn assignment_count(component: &Component) -> u128 {
    component
        .choices
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.len() as u128)
        .product()
}

/// Iterates every total assignment of assignable non-dense nodes to one
/// of their dense descendants, in odometer order.
pub fn enumerate_assignments(component: &Component) -> AssignmentIter<'_> {
    let lists: Vec<(CsId, &[CsId])> = component
        .non_dense
        .iter()
        .zip(&component.choices)
        .filter(|(_, c)| !c.is_empty())
        .map(|(&k, c)| (k, c.as_slice()))
        .collect();
    AssignmentIter {
        cursor: vec![0; lists.len()],
        lists,
        done: false,
    }
}

pub struct AssignmentIter<'a> {
    lists: Vec<(CsId, &'a [CsId])>,
    cursor: Vec<usize>,
    done: bool,
}

impl Iterator for AssignmentIter<'_> {
    type Item = Vec<(CsId, CsId)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let current = self
            .lists
            .iter()
            .zip(&self.cursor)
            .map(|((k, choices), &i)| (*k, choices[i]))
            .collect();
        // Advance the odometer, rightmost digit fastest.
        let mut pos = self.lists.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.cursor[pos] += 1;
            if self.cursor[pos] < self.lists[pos].1.len() {
                break;
            }
            self.cursor[pos] = 0;
        }
        Some(current)
    }
}

fn groups_from_assignment(
    dense_nodes: &[CsId],
    assignment: &[(CsId, CsId)],
) -> Vec<AncestralSubgraph> {
    let mut groups: BTreeMap<CsId, BTreeSet<CsId>> =
        dense_nodes.iter().map(|&d| (d, BTreeSet::new())).collect();
    for &(k, d) in assignment {
        groups
            .get_mut(&d)
            .expect("assignment targets dense node")
            .insert(k);
    }
    groups
        .into_iter()
        .map(|(base, members)| AncestralSubgraph { base, members })
        .collect()
}

fn assignment_cost(
    dense_nodes: &[CsId],
    assignment: &[(CsId, CsId)],
    css: &[CharacteristicSet],
) -> BigRational {
    let mut num: HashMap<CsId, u64> = HashMap::new();
    let mut extra: HashMap<CsId, u64> = HashMap::new();
    for &(k, d) in assignment {
        let missing = (cs(css, d).properties.len() - cs(css, k).properties.len()) as u64;
        let card = cs(css, k).cardinality();
        *num.entry(d).or_insert(0) += missing * card;
        *extra.entry(d).or_insert(0) += card;
    }
    let mut total = BigRational::from_integer(BigInt::from(0));
    for &d in dense_nodes {
        let n = num.get(&d).copied().unwrap_or(0);
        if n == 0 {
            continue;
        }
        let den = cs(css, d).cardinality() + extra.get(&d).copied().unwrap_or(0);
        total += BigRational::new(BigInt::from(n), BigInt::from(den));
    }
    total
}

/// Exact merge planning: per component, enumerates every assignment of
/// non-dense nodes to their dense descendants and keeps the cheapest.
/// Components exceeding `budget` assignments abort with an error
/// suggesting the greedy algorithm.
pub fn optimal_merge(
    closure: &InferredHierarchy,
    css: &[CharacteristicSet],
    dense: &BTreeSet<CsId>,
    config: DensityConfig,
    budget: u64,
) -> Result<MergePlan> {
    let components = split_components(closure, dense);
    let solved: Vec<(Vec<AncestralSubgraph>, Vec<CsId>)> = components
        .par_iter()
        .map(|component| solve_component(component, css, budget))
        .collect::<Result<_>>()?;

    let mut groups = Vec::new();
    let mut residual = BTreeSet::new();
    for (g, r) in solved {
        groups.extend(g);
        residual.extend(r);
    }
    groups.sort_by_key(|g| g.base);
    Ok(MergePlan {
        groups,
        residual,
        config,
        algorithm: MergeAlgorithm::Optimal,
    })
}

fn solve_component(
    component: &Component,
    css: &[CharacteristicSet],
    budget: u64,
) -> Result<(Vec<AncestralSubgraph>, Vec<CsId>)> {
    if component.dense.is_empty() {
        return Ok((Vec::new(), component.non_dense.clone()));
    }
    let residual: Vec<CsId> = component
        .non_dense
        .iter()
        .zip(&component.choices)
        .filter(|(_, c)| c.is_empty())
        .map(|(&k, _)| k)
        .collect();

    let count = assignment_count(component);
    if count > budget as u128 {
        return Err(Error::EnumerationBudget {
            required: count,
            budget,
        });
    }

    let mut best: Option<(BigRational, Vec<(CsId, CsId)>)> = None;
    for assignment in enumerate_assignments(component) {
        let cost = assignment_cost(&component.dense, &assignment, css);
        match &best {
            Some((min, _)) if cost >= *min => {}
            _ => best = Some((cost, assignment)),
        }
    }
    let (_, assignment) = best.expect("at least the empty assignment exists");
    Ok((groups_from_assignment(&component.dense, &assignment), residual))
}

/// Greedy planning outcome plus the number of r_null evaluations it
/// performed (one per non-dense/dense candidate pair).
#[derive(Debug, Clone)]
pub struct GreedyRun {
    pub plan: MergePlan,
    pub evaluations: u64,
}

/// Greedy approximation: each non-dense node joins the dense descendant
/// minimizing r_null under the original cardinalities. Ties prefer the
/// larger base, then the smaller id. Non-dense nodes with no dense
/// descendant go to the residual.
pub fn greedy_merge(
    closure: &InferredHierarchy,
    css: &[CharacteristicSet],
    dense: &BTreeSet<CsId>,
    config: DensityConfig,
) -> MergePlan {
    greedy_merge_detailed(closure, css, dense, config).plan
}

pub fn greedy_merge_detailed(
    closure: &InferredHierarchy,
    css: &[CharacteristicSet],
    dense: &BTreeSet<CsId>,
    config: DensityConfig,
) -> GreedyRun {
    let descendants = closure.descendants();
    let mut members: BTreeMap<CsId, BTreeSet<CsId>> =
        dense.iter().map(|&d| (d, BTreeSet::new())).collect();
    let mut residual = BTreeSet::new();
    let mut evaluations = 0u64;

    for node in &closure.nodes {
        if dense.contains(node) {
            continue;
        }
        let mut candidates: Vec<CsId> = descendants[node]
            .iter()
            .filter(|d| dense.contains(d))
            .copied()
            .collect();
        candidates.sort_unstable();
        if candidates.is_empty() {
            residual.insert(*node);
            continue;
        }
        let k = cs(css, *node);
        let mut best: Option<(Ratio, u64, CsId)> = None;
        for d in candidates {
            evaluations += 1;
            let child = cs(css, d);
            let ratio = r_null_ratio(k, child).expect("closure guarantees strict subset");
            let key = (ratio, child.cardinality(), d);
            best = Some(match best {
                None => key,
                Some(cur) => {
                    let better = key.0 < cur.0
                        || (key.0 == cur.0
                            && (key.1 > cur.1 || (key.1 == cur.1 && key.2 < cur.2)));
                    if better {
                        key
                    } else {
                        cur
                    }
                }
            });
        }
        let (_, _, winner) = best.unwrap();
        members.get_mut(&winner).unwrap().insert(*node);
    }

    let groups = members
        .into_iter()
        .map(|(base, members)| AncestralSubgraph { base, members })
        .collect();
    GreedyRun {
        plan: MergePlan {
            groups,
            residual,
            config,
            algorithm: MergeAlgorithm::Greedy,
        },
        evaluations,
    }
}

/// Plans under the requested algorithm. `None` yields one table per CS.
pub fn compute_plan(
    closure: &InferredHierarchy,
    css: &[CharacteristicSet],
    config: DensityConfig,
    algorithm: MergeAlgorithm,
    budget: u64,
) -> Result<MergePlan> {
    match algorithm {
        MergeAlgorithm::None => Ok(MergePlan::one_table_per_cs(css, config)),
        MergeAlgorithm::Greedy => {
            let dense = classify_dense(css, &config);
            Ok(greedy_merge(closure, css, &dense, config))
        }
        MergeAlgorithm::Optimal => {
            let dense = classify_dense(css, &config);
            optimal_merge(closure, css, &dense, config, budget)
        }
    }
}

/// Shape of the single table aggregating all uncovered CSs, or `None`
/// when everything is covered.
pub fn build_residual(
    uncovered: &BTreeSet<CsId>,
    css: &[CharacteristicSet],
) -> Option<ResidualSchema> {
    if uncovered.is_empty() {
        return None;
    }
    let mut columns = PropertySet::default();
    for &id in uncovered {
        columns = columns.union(&cs(css, id).properties);
    }
    let mut row_count = 0;
    let mut null_cells = 0;
    for &id in uncovered {
        let c = cs(css, id);
        row_count += c.cardinality();
        null_cells += (columns.len() - c.properties.len()) as u64 * c.cardinality();
    }
    Some(ResidualSchema {
        columns,
        row_count,
        null_cells,
    })
}

/// Fraction of (deduplicated) triples stored in dense-based tables,
/// i.e. outside the residual. 1.0 for an empty dataset.
pub fn dense_coverage(plan: &MergePlan, css: &[CharacteristicSet]) -> f64 {
    let total: u64 = css.iter().map(|c| c.triple_count()).sum();
    if total == 0 {
        return 1.0;
    }
    let covered: u64 = plan
        .groups
        .iter()
        .flat_map(|g| std::iter::once(g.base).chain(g.members.iter().copied()))
        .map(|id| cs(css, id).triple_count())
        .sum();
    covered as f64 / total as f64
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::{build_closure, SubjectRecord};
    use crate::term::TermId;

    /// CSs with the given property sets and cardinalities; ids follow
    /// the slice order.
    fn fake_css(specs: &[(&[u32], u64)]) -> Vec<CharacteristicSet> {
        specs
            .iter()
            .enumerate()
            .map(|(i, (props, card))| {
                let properties: PropertySet = props.iter().map(|p| TermId(*p)).collect();
                let records = (0..*card)
                    .map(|r| {
                        SubjectRecord::new(
                            TermId(10_000 + i as u32 * 1000 + r as u32),
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

    fn ids(v: &[u32]) -> BTreeSet<CsId> {
        v.iter().map(|i| CsId(*i)).collect()
    }

    #[test]
    fn m_zero_marks_all_dense() {
        let css = fake_css(&[(&[1], 5), (&[1, 2], 50), (&[3], 1)]);
        let dense = classify_dense(&css, &DensityConfig::new(0.0).unwrap());
        assert_eq!(dense, ids(&[0, 1, 2]));
    }

    #[test]
    fn m_one_marks_none_dense() {
        let css = fake_css(&[(&[1], 5), (&[1, 2], 50)]);
        let dense = classify_dense(&css, &DensityConfig::new(1.0).unwrap());
        assert!(dense.is_empty());
    }

    #[test]
    fn density_threshold_is_strict() {
        let css = fake_css(&[(&[1], 1000), (&[2], 251), (&[3], 250)]);
        let dense = classify_dense(&css, &DensityConfig::new(0.25).unwrap());
        assert!(dense.contains(&CsId(1)));
        assert!(!dense.contains(&CsId(2)));
    }

    #[test]
    fn density_factor_validated() {
        assert!(DensityConfig::new(-0.1).is_err());
        assert!(DensityConfig::new(1.1).is_err());
        assert!(DensityConfig::new(0.5).is_ok());
    }

    #[test]
    fn r_null_direct_substitution() {
        let pair = fake_css(&[(&[1], 10), (&[1, 2], 10)]);
        assert_eq!(r_null(&pair[0], &pair[1]).unwrap(), 1.0);

        let pair = fake_css(&[(&[1, 2], 100), (&[1, 2, 3], 50)]);
        assert_eq!(r_null(&pair[0], &pair[1]).unwrap(), 2.0);

        let pair = fake_css(&[(&[1], 5), (&[1, 2, 3, 4], 500)]);
        assert!((r_null(&pair[0], &pair[1]).unwrap() - 0.03).abs() < 1e-12);
    }

    #[test]
    fn r_null_requires_strict_subset() {
        let css = fake_css(&[(&[1, 2], 10), (&[1, 2], 20), (&[2, 3], 5)]);
        assert!(matches!(
            r_null(&css[0], &css[1]),
            Err(Error::NotStrictSubset)
        ));
        assert!(r_null(&css[0], &css[2]).is_err());
    }

    #[test]
    fn subgraph_ratio_empty_members_is_zero() {
        let css = fake_css(&[(&[1, 2, 3], 100)]);
        let g = AncestralSubgraph {
            base: CsId(0),
            members: BTreeSet::new(),
        };
        assert_eq!(subgraph_null_ratio(&g, &css), 0.0);
    }

    #[test]
    fn subgraph_ratio_direct_substitution() {
        // base {1,2,3} x 100, members {1} x 10 and {1,2} x 20:
        // (2*10 + 1*20) / (100 + 30) = 40/130
        let css = fake_css(&[(&[1, 2, 3], 100), (&[1], 10), (&[1, 2], 20)]);
        let g = AncestralSubgraph {
            base: CsId(0),
            members: ids(&[1, 2]),
        };
        assert!((subgraph_null_ratio(&g, &css) - 40.0 / 130.0).abs() < 1e-12);
    }

    #[test]
    fn subgraph_ratio_single_member() {
        // base has 2 more properties than the member: 2*10/(50+10)
        let css = fake_css(&[(&[1, 2, 3], 50), (&[1], 10)]);
        let g = AncestralSubgraph {
            base: CsId(0),
            members: ids(&[1]),
        };
        assert!((subgraph_null_ratio(&g, &css) - 20.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn plan_cost_sums_group_ratios() {
        let css = fake_css(&[
            (&[1, 2], 10),      // base A
            (&[1], 10),         // member of A: 1*10/20 = 0.5
            (&[3, 4, 5, 6], 20),
            (&[3], 10),         // member of B: 3*10/30 = 1.0
        ]);
        let plan = MergePlan {
            groups: vec![
                AncestralSubgraph {
                    base: CsId(0),
                    members: ids(&[1]),
                },
                AncestralSubgraph {
                    base: CsId(2),
                    members: ids(&[3]),
                },
            ],
            residual: BTreeSet::new(),
            config: DensityConfig::new(0.5).unwrap(),
            algorithm: MergeAlgorithm::Greedy,
        };
        let report = plan_cost(&plan, &css);
        assert!((report.per_group[&CsId(0)] - 0.5).abs() < 1e-12);
        assert!((report.per_group[&CsId(2)] - 1.0).abs() < 1e-12);
        assert!((report.total - 1.5).abs() < 1e-12);
    }

    #[test]
    fn plan_cost_memberless_groups_total_zero() {
        let css = fake_css(&[(&[1], 5), (&[2], 6)]);
        let plan = MergePlan::one_table_per_cs(&css, DensityConfig::new(0.0).unwrap());
        assert_eq!(plan_cost(&plan, &css).total, 0.0);
    }

    /// Six-CS fixture: three non-dense ancestors with 3, 2 and 1
    /// dense descendants respectively.
    fn enumeration_fixture() -> (Vec<CharacteristicSet>, BTreeSet<CsId>) {
        let css = fake_css(&[
            (&[1], 1),            // c0: ancestor of all three dense
            (&[1, 2], 1),         // c1: ancestor of c3, c4
            (&[1, 3], 1),         // c2: ancestor of c3
            (&[1, 2, 3, 4], 100), // c3: dense
            (&[1, 2, 5], 100),    // c4: dense
            (&[1, 6], 100),       // c5: dense
        ]);
        let dense = ids(&[3, 4, 5]);
        (css, dense)
    }

    #[test]
    fn split_components_fixture_is_one_component() {
        let (css, dense) = enumeration_fixture();
        let closure = build_closure(&css);
        let components = split_components(&closure, &dense);
        assert_eq!(components.len(), 1);
        let c = &components[0];
        assert_eq!(c.dense, vec![CsId(3), CsId(4), CsId(5)]);
        assert_eq!(c.non_dense, vec![CsId(0), CsId(1), CsId(2)]);
        assert_eq!(c.choices[0], vec![CsId(3), CsId(4), CsId(5)]);
        assert_eq!(c.choices[1], vec![CsId(3), CsId(4)]);
        assert_eq!(c.choices[2], vec![CsId(3)]);
    }

    #[test]
    fn split_components_no_dense_keeps_full_closure() {
        let css = fake_css(&[(&[1], 1), (&[1, 2], 1), (&[3], 1)]);
        let closure = build_closure(&css);
        let components = split_components(&closure, &BTreeSet::new());
        assert_eq!(components.len(), 2);
    }

    #[test]
    fn split_components_all_dense_yields_singletons() {
        let css = fake_css(&[(&[1], 1), (&[1, 2], 1), (&[1, 2, 3], 1)]);
        let closure = build_closure(&css);
        let dense = ids(&[0, 1, 2]);
        let components = split_components(&closure, &dense);
        assert_eq!(components.len(), 3);
        assert!(components.iter().all(|c| c.non_dense.is_empty()));
    }

    #[test]
    fn enumeration_count_three_two_one_is_six() {
        let (css, dense) = enumeration_fixture();
        let closure = build_closure(&css);
        let components = split_components(&closure, &dense);
        let component = &components[0];
        assert_eq!(assignment_count(component), 6);
        assert_eq!(enumerate_assignments(component).count(), 6);
    }

    #[test]
    fn enumeration_no_non_dense_yields_one_empty() {
        let component = Component {
            dense: vec![CsId(0)],
            non_dense: vec![],
            choices: vec![],
        };
        let all: Vec<_> = enumerate_assignments(&component).collect();
        assert_eq!(all, vec![vec![]]);
    }

    #[test]
    fn enumeration_single_list_of_two() {
        let component = Component {
            dense: vec![CsId(1), CsId(2)],
            non_dense: vec![CsId(0)],
            choices: vec![vec![CsId(1), CsId(2)]],
        };
        assert_eq!(enumerate_assignments(&component).count(), 2);
    }

    #[test]
    fn optimal_merge_chain_single_assignment() {
        let css = fake_css(&[(&[1], 3), (&[1, 2], 4), (&[1, 2, 3], 100)]);
        let closure = build_closure(&css);
        let dense = ids(&[2]);
        let plan = optimal_merge(
            &closure,
            &css,
            &dense,
            DensityConfig::new(0.5).unwrap(),
            DEFAULT_ENUM_BUDGET,
        )
        .unwrap();
        assert_eq!(plan.groups.len(), 1);
        assert_eq!(plan.groups[0].base, CsId(2));
        assert_eq!(plan.groups[0].members, ids(&[0, 1]));
        assert!(plan.residual.is_empty());
    }

    #[test]
    fn optimal_merge_matches_exhaustive_minimum() {
        // Two non-dense nodes, both ancestors of both dense nodes, with
        // cardinalities that make the cross assignment cheapest.
        let css = fake_css(&[
            (&[1], 40),           // c0
            (&[2], 3),            // c1
            (&[1, 2, 3], 50),     // c2 dense
            (&[1, 2, 3, 4], 800), // c3 dense
        ]);
        let closure = build_closure(&css);
        let dense = ids(&[2, 3]);
        let config = DensityConfig::new(0.05).unwrap();
        let plan = optimal_merge(&closure, &css, &dense, config, DEFAULT_ENUM_BUDGET).unwrap();

        // Independent brute force over the four total assignments.
        let mut best: Option<(BigRational, MergePlan)> = None;
        for d0 in [CsId(2), CsId(3)] {
            for d1 in [CsId(2), CsId(3)] {
                let mut groups = vec![
                    AncestralSubgraph {
                        base: CsId(2),
                        members: BTreeSet::new(),
                    },
                    AncestralSubgraph {
                        base: CsId(3),
                        members: BTreeSet::new(),
                    },
                ];
                groups[(d0.0 - 2) as usize].members.insert(CsId(0));
                groups[(d1.0 - 2) as usize].members.insert(CsId(1));
                let candidate = MergePlan {
                    groups,
                    residual: BTreeSet::new(),
                    config,
                    algorithm: MergeAlgorithm::Optimal,
                };
                let cost = plan_cost_exact(&candidate, &css);
                if best.as_ref().is_none_or(|(min, _)| cost < *min) {
                    best = Some((cost, candidate));
                }
            }
        }
        let (min_cost, _) = best.unwrap();
        assert_eq!(plan_cost_exact(&plan, &css), min_cost);
        assert!(plan.covers_exactly(css.len()));
    }

    #[test]
    fn optimal_merge_dense_without_ancestors_is_memberless() {
        let css = fake_css(&[(&[7], 100)]);
        let closure = build_closure(&css);
        let dense = ids(&[0]);
        let plan = optimal_merge(
            &closure,
            &css,
            &dense,
            DensityConfig::new(0.5).unwrap(),
            DEFAULT_ENUM_BUDGET,
        )
        .unwrap();
        assert_eq!(plan.groups.len(), 1);
        assert!(plan.groups[0].members.is_empty());
    }

    #[test]
    fn optimal_merge_budget_exceeded() {
        // 8 non-dense nodes each with 8 dense descendants: 8^8 > 10^6.
        let mut specs: Vec<(Vec<u32>, u64)> = Vec::new();
        for i in 0..8u32 {
            specs.push((vec![i + 1], 1));
        }
        for j in 0..8u32 {
            let mut props: Vec<u32> = (1..=8).collect();
            props.push(100 + j);
            specs.push((props, 1000));
        }
        let borrowed: Vec<(&[u32], u64)> =
            specs.iter().map(|(p, c)| (p.as_slice(), *c)).collect();
        let css = fake_css(&borrowed);
        let closure = build_closure(&css);
        let dense: BTreeSet<CsId> = (8..16).map(CsId).collect();
        let err = optimal_merge(
            &closure,
            &css,
            &dense,
            DensityConfig::new(0.5).unwrap(),
            1_000_000,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EnumerationBudget { .. }));
    }

    #[test]
    fn greedy_single_descendant_matches_optimal() {
        let css = fake_css(&[(&[1], 3), (&[1, 2], 4), (&[1, 2, 3], 100)]);
        let closure = build_closure(&css);
        let dense = ids(&[2]);
        let config = DensityConfig::new(0.5).unwrap();
        let greedy = greedy_merge(&closure, &css, &dense, config);
        let optimal =
            optimal_merge(&closure, &css, &dense, config, DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(greedy.groups, optimal.groups);
        assert_eq!(greedy.residual, optimal.residual);
    }

    #[test]
    fn greedy_picks_minimal_r_null() {
        // k {1} x 10; d1 {1,2} x 100 -> 0.1; d2 {1,2,3} x 20 -> 1.0.
        let css = fake_css(&[(&[1], 10), (&[1, 2], 100), (&[1, 2, 3], 20)]);
        let closure = build_closure(&css);
        let dense = ids(&[1, 2]);
        let plan = greedy_merge(&closure, &css, &dense, DensityConfig::new(0.15).unwrap());
        let d1 = plan.groups.iter().find(|g| g.base == CsId(1)).unwrap();
        assert_eq!(d1.members, ids(&[0]));
        let d2 = plan.groups.iter().find(|g| g.base == CsId(2)).unwrap();
        assert!(d2.members.is_empty());
    }

    #[test]
    fn greedy_empty_dense_puts_everything_in_residual() {
        let css = fake_css(&[(&[1], 10), (&[1, 2], 100)]);
        let closure = build_closure(&css);
        let plan = greedy_merge(
            &closure,
            &css,
            &BTreeSet::new(),
            DensityConfig::new(1.0).unwrap(),
        );
        assert!(plan.groups.is_empty());
        assert_eq!(plan.residual, ids(&[0, 1]));
        assert_eq!(plan.table_count(), 1);
    }

    #[test]
    fn greedy_evaluation_count_is_sum_of_choices() {
        let (css, dense) = enumeration_fixture();
        let closure = build_closure(&css);
        let run =
            greedy_merge_detailed(&closure, &css, &dense, DensityConfig::new(0.5).unwrap());
        assert_eq!(run.evaluations, 3 + 2 + 1);
    }

    #[test]
    fn residual_empty_when_everything_covered() {
        let css = fake_css(&[(&[1], 5)]);
        assert!(build_residual(&BTreeSet::new(), &css).is_none());
    }

    #[test]
    fn residual_union_and_null_count() {
        let css = fake_css(&[(&[1], 2), (&[2], 3)]);
        let schema = build_residual(&ids(&[0, 1]), &css).unwrap();
        assert_eq!(schema.columns.len(), 2);
        assert_eq!(schema.row_count, 5);
        assert_eq!(schema.null_cells, 2 + 3);
    }

    #[test]
    fn m_one_residual_holds_every_cs() {
        let css = fake_css(&[(&[1], 5), (&[1, 2], 7), (&[3], 2)]);
        let closure = build_closure(&css);
        let config = DensityConfig::new(1.0).unwrap();
        let dense = classify_dense(&css, &config);
        let plan = greedy_merge(&closure, &css, &dense, config);
        assert_eq!(plan.residual.len(), css.len());
        let schema = build_residual(&plan.residual, &css).unwrap();
        assert_eq!(schema.row_count, 14);
    }

    #[test]
    fn coverage_boundaries() {
        let css = fake_css(&[(&[1], 5), (&[2], 5)]);
        let closure = build_closure(&css);
        let config = DensityConfig::new(0.0).unwrap();
        let dense = classify_dense(&css, &config);
        let plan = greedy_merge(&closure, &css, &dense, config);
        assert_eq!(dense_coverage(&plan, &css), 1.0);

        let config1 = DensityConfig::new(1.0).unwrap();
        let dense1 = classify_dense(&css, &config1);
        let plan1 = greedy_merge(&closure, &css, &dense1, config1);
        assert_eq!(dense_coverage(&plan1, &css), 0.0);
    }

    #[test]
    fn coverage_complement_arithmetic() {
        let css = fake_css(&[(&[1, 2], 77), (&[3], 23)]);
        let closure = build_closure(&css);
        let plan = greedy_merge(
            &closure,
            &css,
            &ids(&[0]),
            DensityConfig::new(0.5).unwrap(),
        );
        assert_eq!(plan.residual, ids(&[1]));
        // c0 holds 77 records x 2 props, c1 23 x 1; coverage by triples.
        let cov = dense_coverage(&plan, &css);
        assert!((cov - 154.0 / 177.0).abs() < 1e-12);
    }

    #[test]
    fn plan_partition_validity() {
        let (css, dense) = enumeration_fixture();
        let closure = build_closure(&css);
        let config = DensityConfig::new(0.5).unwrap();
        for plan in [
            greedy_merge(&closure, &css, &dense, config),
            optimal_merge(&closure, &css, &dense, config, DEFAULT_ENUM_BUDGET).unwrap(),
            MergePlan::one_table_per_cs(&css, config),
        ] {
            assert!(plan.covers_exactly(css.len()));
        }
    }
}
