//! Compression patterns and the four per-pattern kernels.
//!
//! A [`CompressedEdge`] stands for a run of dependencies whose formula
//! cells form a contiguous one-wide run (`dep`) and whose referenced
//! ranges follow one [`Pattern`]. Every kernel here is constant time in the
//! number of dependencies the edge represents.
//!
//! The kernels are written for column runs. Row runs are handled by
//! transposing the edge, running the column code, and transposing back.

use std::fmt;
use std::str::FromStr;

use crate::cellspace::{Axis, CellAddr, Offset, Range};
use crate::formula::{Dependency, FixednessHints};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternKind {
    Single,
    Rr,
    Rf,
    Fr,
    Ff,
    RrChain,
}

impl PatternKind {
    pub const ALL: [PatternKind; 6] = [
        PatternKind::Single,
        PatternKind::Rr,
        PatternKind::Rf,
        PatternKind::Fr,
        PatternKind::Ff,
        PatternKind::RrChain,
    ];

    /// Patterns that can compress two or more dependencies.
    pub const COMPRESSING: [PatternKind; 5] = [
        PatternKind::RrChain,
        PatternKind::Rr,
        PatternKind::Rf,
        PatternKind::Fr,
        PatternKind::Ff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Single => "Single",
            PatternKind::Rr => "RR",
            PatternKind::Rf => "RF",
            PatternKind::Fr => "FR",
            PatternKind::Ff => "FF",
            PatternKind::RrChain => "RRChain",
        }
    }

    /// The pattern autofill would produce for a reference with these
    /// markers.
    pub fn implied_by(hints: &FixednessHints) -> PatternKind {
        match (hints.head_fixed(), hints.tail_fixed()) {
            (false, false) => PatternKind::Rr,
            (false, true) => PatternKind::Rf,
            (true, false) => PatternKind::Fr,
            (true, true) => PatternKind::Ff,
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(PatternKind::Single),
            "rr" => Ok(PatternKind::Rr),
            "rf" => Ok(PatternKind::Rf),
            "fr" => Ok(PatternKind::Fr),
            "ff" => Ok(PatternKind::Ff),
            "rrchain" | "rr-chain" => Ok(PatternKind::RrChain),
            other => Err(format!("unknown pattern {other:?}")),
        }
    }
}

/// The compressing patterns the greedy builder is allowed to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternSet(u8);

impl PatternSet {
    pub fn all() -> Self {
        PatternKind::COMPRESSING.into_iter().collect()
    }

    pub fn none() -> Self {
        PatternSet(0)
    }

    pub fn contains(&self, kind: PatternKind) -> bool {
        self.0 & (1 << kind as u8) != 0
    }

    pub fn insert(&mut self, kind: PatternKind) {
        if kind != PatternKind::Single {
            self.0 |= 1 << kind as u8;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PatternKind> + '_ {
        PatternKind::COMPRESSING
            .into_iter()
            .filter(|k| self.contains(*k))
    }
}

impl Default for PatternSet {
    fn default() -> Self {
        Self::all()
    }
}

impl FromIterator<PatternKind> for PatternSet {
    fn from_iter<T: IntoIterator<Item = PatternKind>>(iter: T) -> Self {
        let mut set = PatternSet::none();
        for k in iter {
            set.insert(k);
        }
        set
    }
}

impl FromStr for PatternSet {
    type Err = String;

    /// Comma-separated list such as `rrchain,rr,rf,fr,ff`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = PatternSet::none();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let kind: PatternKind = part.parse()?;
            if kind == PatternKind::Single {
                return Err("single is always enabled".into());
            }
            set.insert(kind);
        }
        Ok(set)
    }
}

/// Which neighbour each formula in a chain references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainDir {
    Above,
    Below,
    Left,
    Right,
}

impl ChainDir {
    /// Offset from a formula cell to the cell it references.
    pub fn unit(self) -> Offset {
        match self {
            ChainDir::Above => Offset::new(0, -1),
            ChainDir::Below => Offset::new(0, 1),
            ChainDir::Left => Offset::new(-1, 0),
            ChainDir::Right => Offset::new(1, 0),
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            ChainDir::Above | ChainDir::Below => Axis::Column,
            ChainDir::Left | ChainDir::Right => Axis::Row,
        }
    }

    pub fn from_unit(o: Offset) -> Option<ChainDir> {
        match (o.dc, o.dr) {
            (0, -1) => Some(ChainDir::Above),
            (0, 1) => Some(ChainDir::Below),
            (-1, 0) => Some(ChainDir::Left),
            (1, 0) => Some(ChainDir::Right),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChainDir::Above => "ABOVE",
            ChainDir::Below => "BELOW",
            ChainDir::Left => "LEFT",
            ChainDir::Right => "RIGHT",
        }
    }

    fn transposed(self) -> ChainDir {
        match self {
            ChainDir::Above => ChainDir::Left,
            ChainDir::Below => ChainDir::Right,
            ChainDir::Left => ChainDir::Above,
            ChainDir::Right => ChainDir::Below,
        }
    }
}

impl fmt::Display for ChainDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChainDir {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ABOVE" => Ok(ChainDir::Above),
            "BELOW" => Ok(ChainDir::Below),
            "LEFT" => Ok(ChainDir::Left),
            "RIGHT" => Ok(ChainDir::Right),
            other => Err(format!("unknown chain direction {other:?}")),
        }
    }
}

/// Pattern plus the constant-size data needed to rebuild each dependency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Single,
    /// Sliding window: both corners relative.
    Rr { h_rel: Offset, t_rel: Offset },
    /// Shrinking window: relative head, fixed tail.
    Rf { h_rel: Offset, t_fix: CellAddr },
    /// Expanding window: fixed head, relative tail.
    Fr { h_fix: CellAddr, t_rel: Offset },
    /// Fixed window.
    Ff { h_fix: CellAddr, t_fix: CellAddr },
    /// Each formula references its neighbour in `dir`, inside the run.
    RrChain { dir: ChainDir },
}

impl Pattern {
    pub fn kind(&self) -> PatternKind {
        match self {
            Pattern::Single => PatternKind::Single,
            Pattern::Rr { .. } => PatternKind::Rr,
            Pattern::Rf { .. } => PatternKind::Rf,
            Pattern::Fr { .. } => PatternKind::Fr,
            Pattern::Ff { .. } => PatternKind::Ff,
            Pattern::RrChain { .. } => PatternKind::RrChain,
        }
    }

    pub fn h_rel(&self) -> Option<Offset> {
        match *self {
            Pattern::Rr { h_rel, .. } | Pattern::Rf { h_rel, .. } => Some(h_rel),
            Pattern::RrChain { dir } => Some(dir.unit()),
            _ => None,
        }
    }

    pub fn t_rel(&self) -> Option<Offset> {
        match *self {
            Pattern::Rr { t_rel, .. } | Pattern::Fr { t_rel, .. } => Some(t_rel),
            Pattern::RrChain { dir } => Some(dir.unit()),
            _ => None,
        }
    }

    pub fn h_fix(&self) -> Option<CellAddr> {
        match *self {
            Pattern::Fr { h_fix, .. } | Pattern::Ff { h_fix, .. } => Some(h_fix),
            _ => None,
        }
    }

    pub fn t_fix(&self) -> Option<CellAddr> {
        match *self {
            Pattern::Rf { t_fix, .. } | Pattern::Ff { t_fix, .. } => Some(t_fix),
            _ => None,
        }
    }

    pub fn chain_dir(&self) -> Option<ChainDir> {
        match *self {
            Pattern::RrChain { dir } => Some(dir),
            _ => None,
        }
    }

    /// Derives the `kind` pattern from one dependency `prec → dep`, if that
    /// dependency can be a member of such a run along `axis`.
    fn derive(kind: PatternKind, prec: &Range, dep: CellAddr, axis: Axis) -> Option<Pattern> {
        let h_rel = prec.head.diff(dep);
        let t_rel = prec.tail.diff(dep);
        Some(match kind {
            PatternKind::Single => return None,
            PatternKind::Rr => Pattern::Rr { h_rel, t_rel },
            PatternKind::Rf => Pattern::Rf {
                h_rel,
                t_fix: prec.tail,
            },
            PatternKind::Fr => Pattern::Fr {
                h_fix: prec.head,
                t_rel,
            },
            PatternKind::Ff => Pattern::Ff {
                h_fix: prec.head,
                t_fix: prec.tail,
            },
            PatternKind::RrChain => {
                let dir = ChainDir::from_unit(h_rel).filter(|_| prec.is_cell())?;
                if dir.axis() != axis {
                    return None;
                }
                Pattern::RrChain { dir }
            }
        })
    }

    /// The precedent of the formula at `cell`, or `None` if it would leave
    /// the grid or be inverted.
    pub fn window(&self, cell: CellAddr) -> Option<Range> {
        let (head, tail) = match *self {
            Pattern::Single => return None,
            Pattern::Rr { h_rel, t_rel } => (cell.offset(h_rel).ok()?, cell.offset(t_rel).ok()?),
            Pattern::Rf { h_rel, t_fix } => (cell.offset(h_rel).ok()?, t_fix),
            Pattern::Fr { h_fix, t_rel } => (h_fix, cell.offset(t_rel).ok()?),
            Pattern::Ff { h_fix, t_fix } => (h_fix, t_fix),
            Pattern::RrChain { dir } => {
                let c = cell.offset(dir.unit()).ok()?;
                (c, c)
            }
        };
        (head.col <= tail.col && head.row <= tail.row).then_some(Range { head, tail })
    }

    fn transposed(&self) -> Pattern {
        match *self {
            Pattern::Single => Pattern::Single,
            Pattern::Rr { h_rel, t_rel } => Pattern::Rr {
                h_rel: h_rel.transposed(),
                t_rel: t_rel.transposed(),
            },
            Pattern::Rf { h_rel, t_fix } => Pattern::Rf {
                h_rel: h_rel.transposed(),
                t_fix: t_fix.transposed(),
            },
            Pattern::Fr { h_fix, t_rel } => Pattern::Fr {
                h_fix: h_fix.transposed(),
                t_rel: t_rel.transposed(),
            },
            Pattern::Ff { h_fix, t_fix } => Pattern::Ff {
                h_fix: h_fix.transposed(),
                t_fix: t_fix.transposed(),
            },
            Pattern::RrChain { dir } => Pattern::RrChain {
                dir: dir.transposed(),
            },
        }
    }
}

/// A compressed edge `(prec, dep, pattern, meta)`.
///
/// `dep` is a single cell (for [`Pattern::Single`]) or a one-wide run along
/// `axis`; `count` is the number of dependencies represented, which equals
/// the number of cells in `dep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressedEdge {
    pub prec: Range,
    pub dep: Range,
    pub pattern: Pattern,
    pub axis: Axis,
    pub count: u64,
}

/// Inclusive row interval in signed arithmetic, clipped later.
type Span = (i64, i64);

impl CompressedEdge {
    pub fn single(prec: Range, dep: CellAddr) -> Self {
        Self {
            prec,
            dep: Range::cell(dep),
            pattern: Pattern::Single,
            axis: Axis::Column,
            count: 1,
        }
    }

    pub fn kind(&self) -> PatternKind {
        self.pattern.kind()
    }

    /// The precedent of one formula cell in `dep`.
    pub fn window(&self, cell: CellAddr) -> Option<Range> {
        if !self.dep.contains_cell(cell) {
            return None;
        }
        match self.pattern {
            Pattern::Single => Some(self.prec),
            p => p.window(cell),
        }
    }

    /// Expands the edge back into the dependencies it represents, in run
    /// order.
    pub fn decompress(&self) -> impl Iterator<Item = Dependency> + '_ {
        self.dep.cells().map(move |cell| {
            let prec = self.window(cell).expect("edge members have valid windows");
            Dependency::new(prec, cell)
        })
    }

    /// Tries to add `d` to this edge under `kind`.
    ///
    /// `d.dep` must extend `self.dep` by one cell at either end of the run.
    /// A [`Pattern::Single`] edge may be promoted to any compressing kind;
    /// a compressed edge only accepts its own kind.
    pub fn try_extend(&self, d: &Dependency, kind: PatternKind) -> Option<CompressedEdge> {
        if kind == PatternKind::Single || self.dep.contains_cell(d.dep) {
            return None;
        }
        let (pattern, axis) = match self.pattern {
            Pattern::Single => {
                let anchor = self.dep.head;
                let axis = if anchor.col == d.dep.col && anchor.row.abs_diff(d.dep.row) == 1 {
                    Axis::Column
                } else if anchor.row == d.dep.row && anchor.col.abs_diff(d.dep.col) == 1 {
                    Axis::Row
                } else {
                    return None;
                };
                (Pattern::derive(kind, &self.prec, anchor, axis)?, axis)
            }
            p => {
                if p.kind() != kind || !self.dep.adjacent(&Range::cell(d.dep), self.axis) {
                    return None;
                }
                (p, self.axis)
            }
        };
        if pattern.window(d.dep)? != d.prec {
            return None;
        }
        Some(CompressedEdge {
            prec: self.prec.bbox(&d.prec),
            dep: self.dep.bbox(&Range::cell(d.dep)),
            pattern,
            axis,
            count: self.count + 1,
        })
    }

    /// Cells of `dep` that depend on `r`. For a chain this includes the
    /// dependents reached through the chain itself.
    pub fn find_dep(&self, r: &Range) -> Option<Range> {
        self.dependents_of(r, true)
    }

    /// Cells of `dep` whose own formula references `r`.
    pub fn find_dep_direct(&self, r: &Range) -> Option<Range> {
        self.dependents_of(r, false)
    }

    /// Cells that `s` (clipped to `dep`) depends on through this edge. For
    /// a chain this includes precedents reached through the chain itself.
    pub fn find_prec(&self, s: &Range) -> Option<Range> {
        self.precedents_of(s, true)
    }

    /// Union of the windows of the cells in `s` (clipped to `dep`).
    pub fn find_prec_direct(&self, s: &Range) -> Option<Range> {
        self.precedents_of(s, false)
    }

    /// Drops the dependencies of the formula cells in `s`. The remainder of
    /// the run is returned as at most two edges; single-cell remainders
    /// become [`Pattern::Single`].
    pub fn remove_dep(&self, s: &Range) -> Vec<CompressedEdge> {
        let Some(hole) = self.dep.intersect(s) else {
            return vec![*self];
        };
        self.dep
            .subtract(&hole)
            .into_iter()
            .map(|piece| {
                let prec = self
                    .find_prec_direct(&piece)
                    .expect("remainder lies inside dep");
                if piece.is_cell() {
                    CompressedEdge::single(prec, piece.head)
                } else {
                    CompressedEdge {
                        prec,
                        dep: piece,
                        pattern: self.pattern,
                        axis: self.axis,
                        count: piece.area(),
                    }
                }
            })
            .collect()
    }

    fn column_frame(&self) -> CompressedEdge {
        match self.axis {
            Axis::Column => *self,
            Axis::Row => CompressedEdge {
                prec: self.prec.transposed(),
                dep: self.dep.transposed(),
                pattern: self.pattern.transposed(),
                axis: Axis::Column,
                count: self.count,
            },
        }
    }

    fn dependents_of(&self, r: &Range, transitive: bool) -> Option<Range> {
        let r = r.intersect(&self.prec)?;
        if matches!(self.pattern, Pattern::Single | Pattern::Ff { .. }) {
            return Some(self.dep);
        }
        let transpose = self.axis == Axis::Row;
        let e = self.column_frame();
        let r = if transpose { r.transposed() } else { r };
        let (a, b) = (r.head.row as i64, r.tail.row as i64);
        let (d0, d1) = (e.dep.head.row as i64, e.dep.tail.row as i64);
        // Rows y of dep whose window meets rows [a, b] of r.
        let span: Span = match e.pattern {
            Pattern::Rr { h_rel, t_rel } => (a - t_rel.dr as i64, b - h_rel.dr as i64),
            Pattern::Rf { h_rel, .. } => (d0, b - h_rel.dr as i64),
            Pattern::Fr { t_rel, .. } => (a - t_rel.dr as i64, d1),
            Pattern::RrChain { dir } => {
                let dr = dir.unit().dr as i64;
                match (transitive, dr < 0) {
                    (false, _) => (a - dr, b - dr),
                    (true, true) => (a - dr, d1),
                    (true, false) => (d0, b - dr),
                }
            }
            Pattern::Single | Pattern::Ff { .. } => unreachable!(),
        };
        let out = clip_rows(&e.dep, span)?;
        Some(if transpose { out.transposed() } else { out })
    }

    fn precedents_of(&self, s: &Range, transitive: bool) -> Option<Range> {
        let s = s.intersect(&self.dep)?;
        let transpose = self.axis == Axis::Row;
        let e = self.column_frame();
        let s = if transpose { s.transposed() } else { s };
        let add = |c: CellAddr, o: Offset| CellAddr {
            col: (c.col as i64 + o.dc as i64) as u32,
            row: (c.row as i64 + o.dr as i64) as u32,
        };
        let out = match e.pattern {
            Pattern::Single => e.prec,
            Pattern::Rr { h_rel, t_rel } => Range {
                head: add(s.head, h_rel),
                tail: add(s.tail, t_rel),
            },
            Pattern::Rf { h_rel, t_fix } => Range {
                head: add(s.head, h_rel),
                tail: t_fix,
            },
            Pattern::Fr { h_fix, t_rel } => Range {
                head: h_fix,
                tail: add(s.tail, t_rel),
            },
            Pattern::Ff { h_fix, t_fix } => Range {
                head: h_fix,
                tail: t_fix,
            },
            Pattern::RrChain { dir } => {
                let unit = dir.unit();
                match (transitive, unit.dr < 0) {
                    (false, _) => Range {
                        head: add(s.head, unit),
                        tail: add(s.tail, unit),
                    },
                    (true, true) => Range {
                        head: e.prec.head,
                        tail: add(s.tail, unit),
                    },
                    (true, false) => Range {
                        head: add(s.head, unit),
                        tail: e.prec.tail,
                    },
                }
            }
        };
        Some(if transpose { out.transposed() } else { out })
    }
}

/// Restricts the column-run `dep` to rows `span`.
fn clip_rows(dep: &Range, span: Span) -> Option<Range> {
    let lo = span.0.max(dep.head.row as i64);
    let hi = span.1.min(dep.tail.row as i64);
    (lo <= hi).then_some(Range {
        head: CellAddr {
            col: dep.head.col,
            row: lo as u32,
        },
        tail: CellAddr {
            col: dep.tail.col,
            row: hi as u32,
        },
    })
}
