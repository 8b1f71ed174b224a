//! The common interface of the compressed graph and the baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::baseline::{CalcGraph, NoCompGraph};
use crate::cellspace::{CellAddr, Range};
use crate::formula::Dependency;
use crate::graph::{CompressedGraph, GraphError};
use crate::pattern::{PatternKind, PatternSet};
use crate::rangeset::RangeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Dependents,
    Precedents,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deps" => Ok(Direction::Dependents),
            "precs" => Ok(Direction::Precedents),
            other => Err(format!("unknown direction {other:?} (expected deps or precs)")),
        }
    }
}

/// Size of a graph next to the size of the uncompressed graph it stands for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphStats {
    pub edges: u64,
    pub vertices: u64,
    pub raw_edges: u64,
    pub raw_vertices: u64,
    pub edge_ratio: f64,
    pub vertex_ratio: f64,
}

impl GraphStats {
    pub fn new(edges: u64, vertices: u64, raw_edges: u64, raw_vertices: u64) -> Self {
        let ratio = |raw: u64, n: u64| if n == 0 { 0.0 } else { raw as f64 / n as f64 };
        Self {
            edges,
            vertices,
            raw_edges,
            raw_vertices,
            edge_ratio: ratio(raw_edges, edges),
            vertex_ratio: ratio(raw_vertices, vertices),
        }
    }
}

pub trait FormulaGraph: Send + Sync {
    fn insert_dependency(&mut self, d: &Dependency) -> Result<(), GraphError>;

    /// Removes the formulas located in `s`. References to cells of `s`
    /// made by other formulas are kept.
    fn clear_cells(&mut self, s: &Range);

    /// Breadth-first search from `start`. With `transitive` false only the
    /// first layer is returned.
    fn traverse(&self, start: &Range, dir: Direction, transitive: bool) -> RangeSet;

    fn stats(&self) -> GraphStats;

    fn reduced_edges_by_pattern(&self) -> BTreeMap<PatternKind, u64>;

    /// Every represented dependency as `(precedent, dependent)`, in no
    /// particular order.
    fn dependencies(&self) -> Vec<(Range, CellAddr)>;

    fn find_dependents(&self, r: &Range) -> RangeSet {
        self.traverse(r, Direction::Dependents, true)
    }

    fn find_precedents(&self, s: &Range) -> RangeSet {
        self.traverse(s, Direction::Precedents, true)
    }

    /// Replaces the formula at `cell`: clears it, then inserts `deps` in
    /// order.
    fn update_cell(&mut self, cell: CellAddr, deps: &[Dependency]) -> Result<(), GraphError> {
        self.clear_cells(&Range::cell(cell));
        deps.iter().try_for_each(|d| self.insert_dependency(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Taco,
    NoComp,
    Calc,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Taco, EngineKind::NoComp, EngineKind::Calc];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Taco => "taco",
            EngineKind::NoComp => "nocomp",
            EngineKind::Calc => "calc",
        }
    }

    /// An empty graph of this kind. `patterns` only affects `Taco`.
    pub fn build(self, patterns: PatternSet) -> Box<dyn FormulaGraph> {
        match self {
            EngineKind::Taco => Box::new(CompressedGraph::with_patterns(patterns)),
            EngineKind::NoComp => Box::new(NoCompGraph::default()),
            EngineKind::Calc => Box::new(CalcGraph::default()),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EngineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown engine {s:?} (expected taco, nocomp or calc)"))
    }
}
