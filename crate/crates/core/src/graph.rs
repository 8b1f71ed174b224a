//! The compressed formula graph.
//!
//! Dependencies are inserted one at a time and greedily merged into an
//! adjacent compressed edge when some pattern admits them. Queries run a
//! breadth-first search directly over compressed edges, and clearing formula
//! cells splits the affected edges in place.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::cellspace::{Axis, CellAddr, CellError, Offset, Range};
use crate::engine::{Direction, FormulaGraph, GraphStats};
use crate::formula::{Dependency, FixednessHints};
use crate::pattern::{CompressedEdge, Pattern, PatternKind, PatternSet};
use crate::rangeset::RangeSet;
use crate::spatial::{Handle, OverlapIndex, RTreeIndex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("formula at {dep} references itself through {prec}")]
    SelfReference { prec: Range, dep: CellAddr },
    #[error(transparent)]
    Bounds(#[from] CellError),
    #[error("invalid edge {prec}->{dep}: {reason}")]
    InvalidEdge {
        prec: Range,
        dep: Range,
        reason: &'static str,
    },
}

pub type EdgeId = Handle;

/// Reference-counted set of uncompressed vertices. A range counts once no
/// matter how many dependencies mention it.
#[derive(Debug, Default, Clone)]
pub(crate) struct VertexCounter {
    refs: HashMap<Range, u32>,
}

impl VertexCounter {
    pub(crate) fn add_dependency(&mut self, prec: Range, dep: CellAddr) {
        *self.refs.entry(prec).or_default() += 1;
        *self.refs.entry(Range::cell(dep)).or_default() += 1;
    }

    pub(crate) fn remove_dependency(&mut self, prec: Range, dep: CellAddr) {
        for r in [prec, Range::cell(dep)] {
            if let Some(n) = self.refs.get_mut(&r) {
                *n -= 1;
                if *n == 0 {
                    self.refs.remove(&r);
                }
            }
        }
    }

    pub(crate) fn len(&self) -> u64 {
        self.refs.len() as u64
    }
}

/// A possible merge of an inserted dependency into an existing edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeCandidate {
    pub merged: CompressedEdge,
    pub old: CompressedEdge,
    pub old_id: EdgeId,
}

fn pattern_rank(kind: PatternKind) -> u8 {
    match kind {
        PatternKind::RrChain => 0,
        PatternKind::Rr => 1,
        PatternKind::Fr => 2,
        PatternKind::Rf => 3,
        PatternKind::Ff => 4,
        PatternKind::Single => 5,
    }
}

fn agrees_with_markers(kind: PatternKind, hints: &FixednessHints) -> bool {
    let implied = PatternKind::implied_by(hints);
    kind == implied || (kind == PatternKind::RrChain && implied == PatternKind::Rr)
}

/// Picks the merge to perform. Candidates are ranked by, in order: column
/// runs before row runs; the chain pattern before the others; agreement
/// with the `$` markers of the inserted reference; pattern order
/// (chain, RR, FR, RF, FF); and finally the position of the old edge.
pub fn select_winner<'a>(
    candidates: &'a [MergeCandidate],
    hints: &FixednessHints,
) -> Option<&'a MergeCandidate> {
    candidates.iter().min_by_key(|c| {
        let kind = c.merged.kind();
        (
            c.merged.axis != Axis::Column,
            kind != PatternKind::RrChain,
            !agrees_with_markers(kind, hints),
            pattern_rank(kind),
            c.old.dep.head,
            c.old.prec.head,
            c.old_id,
        )
    })
}

const NEIGHBOURS: [Offset; 4] = [
    Offset::new(0, -1),
    Offset::new(0, 1),
    Offset::new(-1, 0),
    Offset::new(1, 0),
];

/// Compressed graph with R-tree indexes over edge precedents and
/// dependents.
#[derive(Default)]
pub struct CompressedGraph {
    edges: HashMap<EdgeId, CompressedEdge>,
    next_id: EdgeId,
    prec_index: RTreeIndex,
    dep_index: RTreeIndex,
    raw_edges: u64,
    vertices: VertexCounter,
    patterns: PatternSet,
}

impl std::fmt::Debug for CompressedGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompressedGraph")
            .field("edges", &self.edges.len())
            .field("raw_edges", &self.raw_edges)
            .field("patterns", &self.patterns)
            .finish()
    }
}

impl CompressedGraph {
    pub fn new() -> Self {
        Self::with_patterns(PatternSet::all())
    }

    /// A graph that only compresses with the given patterns.
    pub fn with_patterns(patterns: PatternSet) -> Self {
        Self {
            patterns,
            ..Default::default()
        }
    }

    /// Rebuilds a graph from previously exported edges. Each edge is
    /// validated; no re-compression is attempted.
    pub fn from_edges(
        edges: impl IntoIterator<Item = CompressedEdge>,
        patterns: PatternSet,
    ) -> Result<Self, GraphError> {
        let mut g = Self::with_patterns(patterns);
        for e in edges {
            validate_edge(&e)?;
            for cell in e.dep.cells() {
                let prec = e.window(cell).expect("validated");
                g.vertices.add_dependency(prec, cell);
            }
            g.raw_edges += e.count;
            g.add_edge(e);
        }
        Ok(g)
    }

    pub fn patterns(&self) -> PatternSet {
        self.patterns
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = &CompressedEdge> {
        self.edges.values()
    }

    /// Edges sorted by dependent head, then precedent head.
    pub fn sorted_edges(&self) -> Vec<CompressedEdge> {
        let mut v: Vec<_> = self.edges.values().copied().collect();
        v.sort_by_key(|e| (e.dep.head, e.prec.head, e.dep.tail, e.prec.tail));
        v
    }

    pub fn raw_edge_count(&self) -> u64 {
        self.raw_edges
    }

    pub fn raw_vertex_count(&self) -> u64 {
        self.vertices.len()
    }

    fn add_edge(&mut self, e: CompressedEdge) -> EdgeId {
        let id = self.next_id;
        self.next_id += 1;
        self.prec_index.insert(e.prec, id);
        self.dep_index.insert(e.dep, id);
        self.edges.insert(id, e);
        id
    }

    fn remove_edge(&mut self, id: EdgeId) -> CompressedEdge {
        let e = self.edges.remove(&id).expect("edge id is live");
        self.prec_index.remove(e.prec, id);
        self.dep_index.remove(e.dep, id);
        e
    }

    /// Every valid merge of `d` into an edge whose dependent is adjacent to
    /// `d.dep`.
    pub fn merge_candidates(&self, d: &Dependency) -> Vec<MergeCandidate> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for o in NEIGHBOURS {
            let Ok(n) = d.dep.offset(o) else { continue };
            for (_, id) in self.dep_index.overlapping(&Range::cell(n)) {
                if !seen.insert(id) {
                    continue;
                }
                let old = self.edges[&id];
                let mut push = |kind| {
                    if let Some(merged) = old.try_extend(d, kind) {
                        out.push(MergeCandidate {
                            merged,
                            old,
                            old_id: id,
                        });
                    }
                };
                match old.kind() {
                    PatternKind::Single => self.patterns.iter().for_each(&mut push),
                    k if self.patterns.contains(k) => push(k),
                    _ => {}
                }
            }
        }
        out
    }

    /// Adds the formulas at `cell` after clearing whatever was there.
    pub fn update_cell(&mut self, cell: CellAddr, deps: &[Dependency]) -> Result<(), GraphError> {
        FormulaGraph::update_cell(self, cell, deps)
    }

    /// Reduced edges per pattern: for each pattern, the sum over its edges
    /// of `count - 1`.
    pub fn reduced_edges_by_pattern(&self) -> BTreeMap<PatternKind, u64> {
        let mut m: BTreeMap<PatternKind, u64> =
            PatternKind::ALL.into_iter().map(|k| (k, 0)).collect();
        for e in self.edges.values() {
            *m.entry(e.kind()).or_default() += e.count - 1;
        }
        m
    }
}

impl FormulaGraph for CompressedGraph {
    fn insert_dependency(&mut self, d: &Dependency) -> Result<(), GraphError> {
        if !d.prec.in_grid() {
            CellAddr::checked(d.prec.tail.col as i64, d.prec.tail.row as i64)?;
        }
        CellAddr::new(d.dep.col, d.dep.row)?;
        if d.is_self_reference() {
            return Err(GraphError::SelfReference {
                prec: d.prec,
                dep: d.dep,
            });
        }
        self.raw_edges += 1;
        self.vertices.add_dependency(d.prec, d.dep);
        let candidates = self.merge_candidates(d);
        match select_winner(&candidates, &d.hints) {
            Some(w) => {
                self.remove_edge(w.old_id);
                self.add_edge(w.merged);
            }
            None => {
                self.add_edge(CompressedEdge::single(d.prec, d.dep));
            }
        }
        Ok(())
    }

    fn clear_cells(&mut self, s: &Range) {
        for (_, id) in self.dep_index.overlapping(s) {
            let e = self.remove_edge(id);
            let hole = e.dep.intersect(s).expect("index hit overlaps");
            for cell in hole.cells() {
                let prec = e.window(cell).expect("cell is a member");
                self.vertices.remove_dependency(prec, cell);
            }
            self.raw_edges -= hole.area();
            for piece in e.remove_dep(&hole) {
                self.add_edge(piece);
            }
        }
    }

    fn traverse(&self, start: &Range, dir: Direction, transitive: bool) -> RangeSet {
        let mut result = RangeSet::new();
        let mut queue = VecDeque::from([*start]);
        let index = match dir {
            Direction::Dependents => &self.prec_index,
            Direction::Precedents => &self.dep_index,
        };
        while let Some(current) = queue.pop_front() {
            for (_, id) in index.overlapping(&current) {
                let e = &self.edges[&id];
                let found = match (dir, transitive) {
                    (Direction::Dependents, true) => e.find_dep(&current),
                    (Direction::Dependents, false) => e.find_dep_direct(&current),
                    (Direction::Precedents, true) => e.find_prec(&current),
                    (Direction::Precedents, false) => e.find_prec_direct(&current),
                };
                let Some(found) = found else { continue };
                let fresh = result.insert_uncovered(found);
                if transitive {
                    queue.extend(fresh);
                }
            }
        }
        result
    }

    fn stats(&self) -> GraphStats {
        let vertices: HashSet<Range> = self
            .edges
            .values()
            .flat_map(|e| [e.prec, e.dep])
            .collect();
        GraphStats::new(
            self.edges.len() as u64,
            vertices.len() as u64,
            self.raw_edges,
            self.vertices.len(),
        )
    }

    fn reduced_edges_by_pattern(&self) -> BTreeMap<PatternKind, u64> {
        CompressedGraph::reduced_edges_by_pattern(self)
    }

    fn dependencies(&self) -> Vec<(Range, CellAddr)> {
        self.edges
            .values()
            .flat_map(|e| e.decompress().map(|d| (d.prec, d.dep)))
            .collect()
    }
}

/// Checks that an edge is internally consistent: a one-wide run whose
/// member windows are valid and bound exactly its precedent.
pub fn validate_edge(e: &CompressedEdge) -> Result<(), GraphError> {
    let bad = |reason| GraphError::InvalidEdge {
        prec: e.prec,
        dep: e.dep,
        reason,
    };
    if !e.prec.in_grid() || !e.dep.in_grid() {
        return Err(bad("outside the grid"));
    }
    if e.count != e.dep.area() {
        return Err(bad("count does not match the dependent run"));
    }
    match e.pattern {
        Pattern::Single => {
            if !e.dep.is_cell() {
                return Err(bad("single edge with a multi-cell dependent"));
            }
        }
        p => {
            if e.dep.run_axis() != Some(e.axis) {
                return Err(bad("dependent is not a run along the edge axis"));
            }
            if let Some(dir) = p.chain_dir() {
                if dir.axis() != e.axis {
                    return Err(bad("chain direction crosses the run"));
                }
            }
            let first = p.window(e.dep.head).ok_or_else(|| bad("invalid first window"))?;
            let last = p.window(e.dep.tail).ok_or_else(|| bad("invalid last window"))?;
            if first.bbox(&last) != e.prec {
                return Err(bad("precedent is not the bound of the member windows"));
            }
        }
    }
    if e.dep.cells().any(|c| e.window(c).is_some_and(|w| w.contains_cell(c))) {
        return Err(bad("member references itself"));
    }
    Ok(())
}
