//! Sheet dumps and sheets.
//!
//! A dump is UTF-8 text with one `address<TAB>content` record per line.
//! Lines starting with `#` and blank lines are ignored. Content beginning
//! with `=` is a formula; anything else is a literal.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::cellspace::{CellAddr, CellError, Range};
use crate::engine::{EngineKind, FormulaGraph};
use crate::formula::{extract_refs, Dependency, FormulaError};
use crate::graph::GraphError;
use crate::pattern::PatternSet;

#[derive(Debug, Error)]
pub enum SheetError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Address {
        line: usize,
        #[source]
        source: CellError,
    },
    #[error("line {line}: {addr} already appeared on line {first}")]
    Duplicate {
        line: usize,
        addr: CellAddr,
        first: usize,
    },
    #[error("{}formula at {addr}: {source}", line_prefix(*.line))]
    Formula {
        line: Option<usize>,
        addr: CellAddr,
        #[source]
        source: FormulaError,
    },
    #[error("{}formula at {addr}: {source}", line_prefix(*.line))]
    Graph {
        line: Option<usize>,
        addr: CellAddr,
        #[source]
        source: GraphError,
    },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub addr: CellAddr,
    pub content: String,
    /// 1-based source line, when parsed from text.
    pub line: Option<usize>,
}

/// Ordered cell records with unique addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SheetDump {
    records: Vec<Record>,
    index: HashMap<CellAddr, usize>,
}

impl SheetDump {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, SheetError> {
        let mut dump = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (addr, content) = raw.split_once('\t').ok_or_else(|| SheetError::Syntax {
                line,
                reason: "expected address<TAB>content".into(),
            })?;
            let addr: CellAddr = addr
                .trim()
                .parse()
                .map_err(|source| SheetError::Address { line, source })?;
            if let Some(&i) = dump.index.get(&addr) {
                let first = dump.records[i].line.unwrap_or(0);
                return Err(SheetError::Duplicate { line, addr, first });
            }
            dump.insert(Record {
                addr,
                content: content.to_string(),
                line: Some(line),
            });
        }
        Ok(dump)
    }

    /// Appends a record. Panics on a duplicate address.
    pub fn push(&mut self, addr: CellAddr, content: impl Into<String>) {
        assert!(!self.index.contains_key(&addr), "duplicate address {addr}");
        self.insert(Record {
            addr,
            content: content.into(),
            line: None,
        });
    }

    fn insert(&mut self, r: Record) {
        self.index.insert(r.addr, self.records.len());
        self.records.push(r);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, addr: CellAddr) -> Option<&str> {
        self.index.get(&addr).map(|&i| self.records[i].content.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = writeln!(s, "{}\t{}", r.addr, r.content);
        }
        s
    }

    /// Records in column-major order.
    pub fn column_major(&self) -> Vec<&Record> {
        let mut v: Vec<_> = self.records.iter().collect();
        v.sort_by_key(|r| r.addr);
        v
    }

    /// Every dependency of every formula, in column-major order.
    pub fn dependencies(&self) -> Result<Vec<Dependency>, SheetError> {
        let mut out = Vec::new();
        for r in self.column_major() {
            out.extend(formula_deps(r.addr, &r.content, r.line)?);
        }
        Ok(out)
    }

    /// Inserts every formula's dependencies into `g`, column-major.
    pub fn load_into<G: FormulaGraph + ?Sized>(&self, g: &mut G) -> Result<(), SheetError> {
        for r in self.column_major() {
            for d in formula_deps(r.addr, &r.content, r.line)? {
                g.insert_dependency(&d).map_err(|source| SheetError::Graph {
                    line: r.line,
                    addr: r.addr,
                    source,
                })?;
            }
        }
        Ok(())
    }

    pub fn load(
        &self,
        engine: EngineKind,
        patterns: PatternSet,
    ) -> Result<Box<dyn FormulaGraph>, SheetError> {
        let mut g = engine.build(patterns);
        self.load_into(g.as_mut())?;
        Ok(g)
    }
}

fn formula_deps(
    addr: CellAddr,
    content: &str,
    line: Option<usize>,
) -> Result<Vec<Dependency>, SheetError> {
    if !content.starts_with('=') {
        return Ok(Vec::new());
    }
    let deps = extract_refs(content, addr).map_err(|source| SheetError::Formula {
        line,
        addr,
        source,
    })?;
    if let Some(d) = deps.iter().find(|d| d.is_self_reference()) {
        return Err(SheetError::Graph {
            line,
            addr,
            source: GraphError::SelfReference {
                prec: d.prec,
                dep: d.dep,
            },
        });
    }
    Ok(deps)
}

/// One change to a sheet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edit {
    /// Empties every cell in the range.
    Clear(Range),
    /// Replaces the content of one cell. Empty content empties the cell.
    Set { cell: CellAddr, content: String },
}

/// Cell contents kept consistent with a formula graph.
pub struct Sheet {
    cells: BTreeMap<CellAddr, String>,
    graph: Box<dyn FormulaGraph>,
}

impl Sheet {
    pub fn load(dump: &SheetDump, engine: EngineKind, patterns: PatternSet) -> Result<Self, SheetError> {
        let graph = dump.load(engine, patterns)?;
        let cells = dump
            .records()
            .iter()
            .map(|r| (r.addr, r.content.clone()))
            .collect();
        Ok(Self { cells, graph })
    }

    pub fn graph(&self) -> &dyn FormulaGraph {
        self.graph.as_ref()
    }

    pub fn get(&self, addr: CellAddr) -> Option<&str> {
        self.cells.get(&addr).map(String::as_str)
    }

    /// Non-empty cells inside `window`, column-major.
    pub fn cells_in(&self, window: &Range) -> Vec<(CellAddr, &str)> {
        let (h, t) = (window.head, window.tail);
        (h.col..=t.col)
            .flat_map(|col| {
                let lo = CellAddr { col, row: h.row };
                let hi = CellAddr { col, row: t.row };
                self.cells.range(lo..=hi)
            })
            .map(|(a, c)| (*a, c.as_str()))
            .collect()
    }

    pub fn to_dump(&self) -> SheetDump {
        let mut d = SheetDump::new();
        for (a, c) in &self.cells {
            d.push(*a, c.clone());
        }
        d
    }

    /// Applies one edit. A failing edit leaves the sheet unchanged.
    pub fn apply(&mut self, edit: &Edit) -> Result<(), SheetError> {
        match edit {
            Edit::Clear(range) => {
                self.graph.clear_cells(range);
                self.cells.retain(|a, _| !range.contains_cell(*a));
            }
            Edit::Set { cell, content } => {
                let deps = formula_deps(*cell, content, None)?;
                self.graph
                    .update_cell(*cell, &deps)
                    .map_err(|source| SheetError::Graph {
                        line: None,
                        addr: *cell,
                        source,
                    })?;
                if content.is_empty() {
                    self.cells.remove(cell);
                } else {
                    self.cells.insert(*cell, content.clone());
                }
            }
        }
        Ok(())
    }

    /// Applies edits in order. Every formula is parsed before anything is
    /// applied, so a bad edit leaves the sheet unchanged; the error carries
    /// the index of the offending edit.
    pub fn apply_all(&mut self, edits: &[Edit]) -> Result<(), (usize, SheetError)> {
        for (i, e) in edits.iter().enumerate() {
            if let Edit::Set { cell, content } = e {
                formula_deps(*cell, content, None).map_err(|err| (i, err))?;
            }
        }
        for (i, e) in edits.iter().enumerate() {
            self.apply(e).map_err(|err| (i, err))?;
        }
        Ok(())
    }
}
