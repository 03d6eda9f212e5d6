//! Structural decomposition of a diagram into horizontal sums, products and
//! chains, producing the recursive plan that drives solver dispatch.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::diagram::{GreechieDiagram, SubDiagram};

/// Product verification falls back to exhaustive search over coarsenings
/// only up to this many candidate factors.
const MAX_EXHAUSTIVE_FACTORS: usize = 10;

/// Edges `A_1 … A_m` ordered along a path, consecutive edges meeting in one
/// shared outcome. All indices refer to the diagram the chain was detected on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainDescriptor {
    /// Operation indices in chain order.
    pub edges: Vec<usize>,
    /// `shared[i]` is the single outcome of `A_i ∩ A_{i+1}`.
    pub shared: Vec<usize>,
    /// `interiors[i]` is `A_i` minus its shared outcomes, in member order.
    pub interiors: Vec<Vec<usize>>,
}

impl ChainDescriptor {
    /// Number of edges m.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn splitting_parameter_count(&self) -> usize {
        self.shared.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanKind {
    HorizontalSum(Vec<PlanNode>),
    Product(Vec<PlanNode>),
    Chain(ChainDescriptor),
    ClassicalLeaf,
    NumericLeaf,
}

/// One node of a decomposition plan. Each node owns its sub-diagram; the
/// root's sub-diagram is the input diagram itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub diagram: GreechieDiagram,
    /// Local outcome index → outcome index in the parent node.
    pub to_parent: Vec<usize>,
    pub kind: PlanKind,
}

impl PlanNode {
    pub fn children(&self) -> &[PlanNode] {
        match &self.kind {
            PlanKind::HorizontalSum(c) | PlanKind::Product(c) => c,
            _ => &[],
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            PlanKind::HorizontalSum(_) => "HorizontalSum",
            PlanKind::Product(_) => "Product",
            PlanKind::Chain(_) => "Chain",
            PlanKind::ClassicalLeaf => "ClassicalLeaf",
            PlanKind::NumericLeaf => "NumericLeaf",
        }
    }

    fn visit<'a>(&'a self, to_root: &[usize], out: &mut Vec<(&'a PlanNode, Vec<usize>)>) {
        match &self.kind {
            PlanKind::HorizontalSum(children) | PlanKind::Product(children) => {
                for child in children {
                    let map: Vec<usize> = child.to_parent.iter().map(|&p| to_root[p]).collect();
                    child.visit(&map, out);
                }
            }
            _ => out.push((self, to_root.to_vec())),
        }
    }
}

/// A recursive solver plan over a diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTree {
    pub root: PlanNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Only products, horizontal sums and classical leaves.
    Constructible,
    /// No numeric leaves, but at least one chain.
    ChainSolvable,
    /// Some part needs the general numeric solver.
    NumericOnly,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Constructible => "constructible",
            Verdict::ChainSolvable => "chain-solvable",
            Verdict::NumericOnly => "numeric-only",
        })
    }
}

impl DecompositionTree {
    /// Leaf nodes paired with their outcome indices in the root diagram.
    pub fn leaves(&self) -> Vec<(&PlanNode, Vec<usize>)> {
        let identity: Vec<usize> = (0..self.root.diagram.outcome_count()).collect();
        let mut out = Vec::new();
        self.root.visit(&identity, &mut out);
        out
    }

    pub fn has_numeric_leaf(&self) -> bool {
        self.leaves()
            .iter()
            .any(|(n, _)| matches!(n.kind, PlanKind::NumericLeaf))
    }

    pub fn verdict(&self) -> Verdict {
        let leaves = self.leaves();
        if leaves.iter().any(|(n, _)| matches!(n.kind, PlanKind::NumericLeaf)) {
            Verdict::NumericOnly
        } else if leaves.iter().any(|(n, _)| matches!(n.kind, PlanKind::Chain(_))) {
            Verdict::ChainSolvable
        } else {
            Verdict::Constructible
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so component order follows declaration order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Groups in order of their smallest member.
    fn groups(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in 0..self.parent.len() {
            let r = self.find(x);
            by_root.entry(r).or_default().push(x);
        }
        by_root.into_values().collect()
    }
}

/// Connected components of the relation "x and y share an operation", each
/// with its induced operations.
pub fn connected_components(diagram: &GreechieDiagram) -> Vec<SubDiagram> {
    let mut uf = UnionFind::new(diagram.outcome_count());
    for op in diagram.operations() {
        for w in op.members().windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    uf.groups().iter().map(|g| diagram.induced(g)).collect()
}

enum Check {
    Valid,
    /// Two groups whose traces do not combine freely; they must share a factor.
    Witness(usize, usize),
    Invalid,
}

fn traces(diagram: &GreechieDiagram, group: &[usize]) -> Vec<Vec<usize>> {
    let members: HashSet<usize> = group.iter().copied().collect();
    diagram
        .operations()
        .iter()
        .map(|op| {
            let mut t: Vec<usize> = op.members().iter().copied().filter(|x| members.contains(x)).collect();
            t.sort_unstable();
            t
        })
        .collect()
}

fn check_factorization(diagram: &GreechieDiagram, groups: &[Vec<usize>]) -> Check {
    // trace ids per group per edge
    let mut ids: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    let mut distinct: Vec<usize> = Vec::with_capacity(groups.len());
    let mut any_empty = false;
    for g in groups {
        let mut table: HashMap<Vec<usize>, usize> = HashMap::new();
        let row: Vec<usize> = traces(diagram, g)
            .into_iter()
            .map(|t| {
                any_empty |= t.is_empty();
                let next = table.len();
                *table.entry(t).or_insert(next)
            })
            .collect();
        distinct.push(table.len());
        ids.push(row);
    }

    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let pairs: HashSet<(usize, usize)> = (0..diagram.operation_count())
                .map(|e| (ids[i][e], ids[j][e]))
                .collect();
            if pairs.len() < distinct[i] * distinct[j] {
                return Check::Witness(i, j);
            }
        }
    }

    if any_empty {
        return Check::Invalid;
    }
    let expected = distinct
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k));
    if expected != Some(diagram.operation_count()) {
        return Check::Invalid;
    }
    let tuples: HashSet<Vec<usize>> = (0..diagram.operation_count())
        .map(|e| ids.iter().map(|row| row[e]).collect())
        .collect();
    if tuples.len() == diagram.operation_count() {
        Check::Valid
    } else {
        Check::Invalid
    }
}

/// All set partitions of `0..k` as restricted growth strings, finest first.
fn coarsenings(k: usize) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    let mut rgs = vec![0usize; k];
    fn rec(pos: usize, max: usize, rgs: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
        if pos == rgs.len() {
            all.push(rgs.clone());
            return;
        }
        for v in 0..=max + 1 {
            rgs[pos] = v;
            rec(pos + 1, max.max(v), rgs, all);
        }
    }
    if k > 0 {
        rec(1, 0, &mut rgs, &mut all);
    }
    let blocks = |r: &Vec<usize>| r.iter().max().map_or(0, |m| m + 1);
    all.sort_by_key(|r| std::cmp::Reverse(blocks(r)));
    all
}

fn merge_groups(groups: &[Vec<usize>], labels: &[usize]) -> Vec<Vec<usize>> {
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut merged = vec![Vec::new(); blocks];
    for (g, &l) in groups.iter().zip(labels) {
        merged[l].extend_from_slice(g);
    }
    for m in &mut merged {
        m.sort_unstable();
    }
    merged.sort_by_key(|m| m[0]);
    merged
}

/// Finds a product factorization with at least two factors, or `None`.
///
/// Candidate factors start as the connected components of the
/// non-coexistence graph (x ~ y iff no operation contains both). Pairs of
/// candidates whose traces do not combine freely are merged until the edge
/// set is exactly the set of unions of one trace per factor. Each factor is
/// returned as the diagram of its traces.
pub fn factor_product(diagram: &GreechieDiagram) -> Option<Vec<SubDiagram>> {
    let n = diagram.outcome_count();
    let mut together = vec![vec![false; n]; n];
    for op in diagram.operations() {
        for &x in op.members() {
            for &y in op.members() {
                together[x][y] = true;
            }
        }
    }
    let mut uf = UnionFind::new(n);
    for (x, row) in together.iter().enumerate() {
        for (y, &linked) in row.iter().enumerate().skip(x + 1) {
            if !linked {
                uf.union(x, y);
            }
        }
    }
    let mut groups = uf.groups();

    while groups.len() >= 2 {
        match check_factorization(diagram, &groups) {
            Check::Valid => return Some(groups.iter().map(|g| diagram.induced(g)).collect()),
            Check::Witness(i, j) => {
                let moved = groups.remove(j);
                groups[i].extend(moved);
                groups[i].sort_unstable();
            }
            Check::Invalid => {
                if groups.len() > MAX_EXHAUSTIVE_FACTORS {
                    log::debug!(
                        "product search abandoned: {} candidate factors exceed the exhaustive limit",
                        groups.len()
                    );
                    return None;
                }
                return coarsenings(groups.len())
                    .into_iter()
                    .map(|labels| merge_groups(&groups, &labels))
                    .filter(|g| g.len() >= 2)
                    .find(|g| matches!(check_factorization(diagram, g), Check::Valid))
                    .map(|g| g.iter().map(|f| diagram.induced(f)).collect());
            }
        }
    }
    None
}

/// Recognizes a diagram whose edges form a path `A_1 … A_m` (m ≥ 2) with
/// consecutive edges sharing exactly one outcome, non-consecutive edges
/// disjoint, and every edge keeping at least one unshared outcome.
pub fn detect_chain(diagram: &GreechieDiagram) -> Option<ChainDescriptor> {
    let ops = diagram.operations();
    let m = ops.len();
    if m < 2 {
        return None;
    }
    let mut adjacent: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    let mut links = 0;
    for i in 0..m {
        for j in i + 1..m {
            let shared: Vec<usize> = ops[i].members().iter().copied().filter(|&x| ops[j].contains(x)).collect();
            match shared.len() {
                0 => {}
                1 => {
                    adjacent[i].push((j, shared[0]));
                    adjacent[j].push((i, shared[0]));
                    links += 1;
                }
                _ => return None,
            }
        }
    }
    if links != m - 1 || adjacent.iter().any(|a| a.is_empty() || a.len() > 2) {
        return None;
    }
    let start = (0..m).find(|&e| adjacent[e].len() == 1)?;

    let mut edges = vec![start];
    let mut shared = Vec::with_capacity(m - 1);
    let mut prev = usize::MAX;
    let mut cur = start;
    while edges.len() < m {
        let &(next, y) = adjacent[cur].iter().find(|(e, _)| *e != prev)?;
        shared.push(y);
        edges.push(next);
        prev = cur;
        cur = next;
    }
    let distinct: HashSet<usize> = edges.iter().copied().collect();
    let distinct_shared: HashSet<usize> = shared.iter().copied().collect();
    if distinct.len() != m || distinct_shared.len() != m - 1 {
        return None;
    }

    let interiors: Vec<Vec<usize>> = edges
        .iter()
        .map(|&e| {
            ops[e]
                .members()
                .iter()
                .copied()
                .filter(|x| !distinct_shared.contains(x))
                .collect()
        })
        .collect();
    if interiors.iter().any(Vec::is_empty) {
        return None;
    }
    Some(ChainDescriptor {
        edges,
        shared,
        interiors,
    })
}

fn plan_node(diagram: GreechieDiagram, to_parent: Vec<usize>) -> PlanNode {
    let components = connected_components(&diagram);
    let kind = if components.len() > 1 {
        PlanKind::HorizontalSum(
            components
                .into_iter()
                .map(|c| plan_node(c.diagram, c.parent_index))
                .collect(),
        )
    } else if diagram.operation_count() == 1 {
        PlanKind::ClassicalLeaf
    } else if let Some(factors) = factor_product(&diagram) {
        if factors.iter().all(|f| f.diagram.operation_count() == 1) {
            PlanKind::ClassicalLeaf
        } else {
            PlanKind::Product(
                factors
                    .into_iter()
                    .map(|f| plan_node(f.diagram, f.parent_index))
                    .collect(),
            )
        }
    } else if let Some(chain) = detect_chain(&diagram) {
        PlanKind::Chain(chain)
    } else {
        PlanKind::NumericLeaf
    };
    PlanNode {
        diagram,
        to_parent,
        kind,
    }
}

/// Recursive classification: horizontal sum, then single edge, then product,
/// then chain, otherwise a numeric leaf.
pub fn build_plan(diagram: &GreechieDiagram) -> DecompositionTree {
    let identity = (0..diagram.outcome_count()).collect();
    DecompositionTree {
        root: plan_node(diagram.clone(), identity),
    }
}
