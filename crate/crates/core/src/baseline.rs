//! Uncompressed reference engines.
//!
//! [`NoCompGraph`] keeps every dependency as its own edge behind an R-tree.
//! [`CalcGraph`] is the same graph over a fixed grid of containers.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::cellspace::{CellAddr, Range, MAX_COL, MAX_ROW};
use crate::engine::{Direction, FormulaGraph, GraphStats};
use crate::formula::Dependency;
use crate::graph::{GraphError, VertexCounter};
use crate::pattern::PatternKind;
use crate::rangeset::RangeSet;
use crate::spatial::{Handle, OverlapIndex, RTreeIndex};

/// Dependency multiset with overlap indexes on both endpoints.
#[derive(Default)]
pub struct UncompressedGraph<I: OverlapIndex> {
    deps: HashMap<Handle, Dependency>,
    next: Handle,
    prec_index: I,
    dep_index: I,
    vertices: VertexCounter,
}

pub type NoCompGraph = UncompressedGraph<RTreeIndex>;
pub type CalcGraph = UncompressedGraph<ContainerGrid>;

impl<I: OverlapIndex> UncompressedGraph<I> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from dependencies, rejecting self-references.
    pub fn from_dependencies<'a>(
        deps: impl IntoIterator<Item = &'a Dependency>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::default();
        for d in deps {
            g.insert_dependency(d)?;
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.deps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deps.is_empty()
    }
}

impl<I: OverlapIndex> FormulaGraph for UncompressedGraph<I> {
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
        let h = self.next;
        self.next += 1;
        self.prec_index.insert(d.prec, h);
        self.dep_index.insert(Range::cell(d.dep), h);
        self.vertices.add_dependency(d.prec, d.dep);
        self.deps.insert(h, *d);
        Ok(())
    }

    fn clear_cells(&mut self, s: &Range) {
        for (_, h) in self.dep_index.overlapping(s) {
            let d = self.deps.remove(&h).expect("indexed handle is live");
            self.prec_index.remove(d.prec, h);
            self.dep_index.remove(Range::cell(d.dep), h);
            self.vertices.remove_dependency(d.prec, d.dep);
        }
    }

    fn traverse(&self, start: &Range, dir: Direction, transitive: bool) -> RangeSet {
        let mut result = RangeSet::new();
        let mut queue = VecDeque::from([*start]);
        while let Some(current) = queue.pop_front() {
            let hits = match dir {
                Direction::Dependents => self.prec_index.overlapping(&current),
                Direction::Precedents => self.dep_index.overlapping(&current),
            };
            for (_, h) in hits {
                let d = &self.deps[&h];
                let found = match dir {
                    Direction::Dependents => Range::cell(d.dep),
                    Direction::Precedents => d.prec,
                };
                let fresh = result.insert_uncovered(found);
                if transitive {
                    queue.extend(fresh);
                }
            }
        }
        result
    }

    fn stats(&self) -> GraphStats {
        let n = self.deps.len() as u64;
        let v = self.vertices.len();
        GraphStats::new(n, v, n, v)
    }

    fn reduced_edges_by_pattern(&self) -> BTreeMap<PatternKind, u64> {
        PatternKind::ALL.into_iter().map(|k| (k, 0)).collect()
    }

    fn dependencies(&self) -> Vec<(Range, CellAddr)> {
        self.deps.values().map(|d| (d.prec, d.dep)).collect()
    }
}

pub const CONTAINER_COLS: u32 = 256;
const DENSE_ROWS: u32 = 1 << 15;
const DENSE_ROW_HEIGHT: u32 = 256;
const SPARSE_ROW_HEIGHT: u32 = 128;

/// Container column of a 1-based column index.
pub fn col_bucket(col: u32) -> u32 {
    (col - 1) / CONTAINER_COLS
}

/// Container row of a 1-based row index. Rows past 2^15 use half-height
/// containers.
pub fn row_bucket(row: u32) -> u32 {
    if row <= DENSE_ROWS {
        (row - 1) / DENSE_ROW_HEIGHT
    } else {
        DENSE_ROWS / DENSE_ROW_HEIGHT + (row - 1 - DENSE_ROWS) / SPARSE_ROW_HEIGHT
    }
}

/// Fixed partition of the sheet into containers. A range is registered in
/// every container it overlaps.
#[derive(Default)]
pub struct ContainerGrid {
    containers: HashMap<(u32, u32), Vec<(Range, Handle)>>,
    len: usize,
}

impl ContainerGrid {
    pub fn new() -> Self {
        Self::default()
    }

    fn buckets(r: &Range) -> impl Iterator<Item = (u32, u32)> {
        let (c0, c1) = (col_bucket(r.head.col), col_bucket(r.tail.col));
        let (r0, r1) = (row_bucket(r.head.row), row_bucket(r.tail.row));
        (c0..=c1).flat_map(move |c| (r0..=r1).map(move |rb| (c, rb)))
    }

    fn bucket_count(r: &Range) -> u64 {
        let cols = col_bucket(r.tail.col) - col_bucket(r.head.col) + 1;
        let rows = row_bucket(r.tail.row) - row_bucket(r.head.row) + 1;
        cols as u64 * rows as u64
    }

    /// Total number of containers in a full grid.
    pub fn grid_size() -> (u32, u32) {
        (col_bucket(MAX_COL) + 1, row_bucket(MAX_ROW) + 1)
    }
}

impl OverlapIndex for ContainerGrid {
    fn insert(&mut self, range: Range, handle: Handle) {
        for b in Self::buckets(&range) {
            self.containers.entry(b).or_default().push((range, handle));
        }
        self.len += 1;
    }

    fn remove(&mut self, range: Range, handle: Handle) -> bool {
        let mut found = false;
        for b in Self::buckets(&range) {
            let Some(list) = self.containers.get_mut(&b) else { continue };
            if let Some(i) = list.iter().position(|e| *e == (range, handle)) {
                list.swap_remove(i);
                found = true;
                if list.is_empty() {
                    self.containers.remove(&b);
                }
            }
        }
        if found {
            self.len -= 1;
        }
        found
    }

    fn overlapping(&self, probe: &Range) -> Vec<(Range, Handle)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut visit = |list: &Vec<(Range, Handle)>| {
            for &(r, h) in list {
                if r.overlaps(probe) && seen.insert(h) {
                    out.push((r, h));
                }
            }
        };
        if Self::bucket_count(probe) > self.containers.len() as u64 {
            let (c0, c1) = (col_bucket(probe.head.col), col_bucket(probe.tail.col));
            let (r0, r1) = (row_bucket(probe.head.row), row_bucket(probe.tail.row));
            for ((c, rb), list) in &self.containers {
                if (c0..=c1).contains(c) && (r0..=r1).contains(rb) {
                    visit(list);
                }
            }
        } else {
            for b in Self::buckets(probe) {
                if let Some(list) = self.containers.get(&b) {
                    visit(list);
                }
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.len
    }
}

/// Overlap query against a container grid.
pub fn calc_overlap_query(grid: &ContainerGrid, probe: &Range) -> Vec<(Range, Handle)> {
    grid.overlapping(probe)
}
