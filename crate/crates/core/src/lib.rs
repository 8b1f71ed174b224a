//! Compressed formula dependency graphs.
//!
//! A spreadsheet's formulas induce a graph from referenced ranges to the
//! cells that reference them. Neighbouring formulas are usually filled from
//! the same template, so runs of dependencies can be stored as a single
//! [`CompressedEdge`] with a constant-size [`Pattern`]. [`CompressedGraph`]
//! builds such a graph greedily, answers dependents and precedents queries
//! without decompressing, and updates in place when formulas change.
//!
//! [`NoCompGraph`] and [`CalcGraph`] are uncompressed references behind the
//! same [`FormulaGraph`] trait.

pub mod baseline;
pub mod cellspace;
pub mod engine;
pub mod export;
pub mod formula;
pub mod graph;
pub mod pattern;
pub mod rangeset;
pub mod sheet;
pub mod spatial;
pub mod workload;

pub use baseline::{CalcGraph, ContainerGrid, NoCompGraph, UncompressedGraph};
pub use cellspace::{Axis, CellAddr, CellError, Offset, Range};
pub use engine::{Direction, EngineKind, FormulaGraph, GraphStats};
pub use formula::{extract_refs, Dependency, FixednessHints, FormulaError};
pub use graph::{CompressedGraph, GraphError};
pub use pattern::{ChainDir, CompressedEdge, Pattern, PatternKind, PatternSet};
pub use rangeset::{coalesce, RangeSet};
pub use sheet::{Edit, Sheet, SheetDump, SheetError};
pub use workload::{generate, percentiles, Percentiles, Workload, WorkloadKind, WorkloadSpec};
