//! Grid coordinates and rectangle arithmetic.
//!
//! Columns and rows are 1-based. A [`Range`] is an inclusive rectangle given
//! by its top-left (`head`) and bottom-right (`tail`) cells; a single cell is
//! the range whose head equals its tail.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of columns in a sheet (`XFD`).
pub const MAX_COL: u32 = 16_384;
/// Number of rows in a sheet.
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CellError {
    #[error("malformed reference {text:?}: {reason}")]
    Parse { text: String, reason: &'static str },
    #[error("coordinate ({col}, {row}) is outside the grid")]
    OutOfBounds { col: i64, row: i64 },
}

/// A cell position: `col` is the column index `i`, `row` the row index `j`.
///
/// Ordering is column-major (column first, then row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddr {
    pub col: u32,
    pub row: u32,
}

impl CellAddr {
    pub fn new(col: u32, row: u32) -> Result<Self, CellError> {
        Self::checked(col as i64, row as i64)
    }

    /// Builds a cell from signed coordinates, rejecting anything off-grid.
    pub fn checked(col: i64, row: i64) -> Result<Self, CellError> {
        if (1..=MAX_COL as i64).contains(&col) && (1..=MAX_ROW as i64).contains(&row) {
            Ok(Self {
                col: col as u32,
                row: row as u32,
            })
        } else {
            Err(CellError::OutOfBounds { col, row })
        }
    }

    pub fn in_grid(self) -> bool {
        (1..=MAX_COL).contains(&self.col) && (1..=MAX_ROW).contains(&self.row)
    }

    pub fn offset(self, o: Offset) -> Result<Self, CellError> {
        Self::checked(self.col as i64 + o.dc as i64, self.row as i64 + o.dr as i64)
    }

    /// `self - other` as an offset.
    pub fn diff(self, other: CellAddr) -> Offset {
        Offset::new(
            self.col as i32 - other.col as i32,
            self.row as i32 - other.row as i32,
        )
    }

    /// Swaps column and row. Used to run row-axis logic through the
    /// column-axis code; the result may lie outside the grid.
    pub(crate) fn transposed(self) -> Self {
        Self {
            col: self.row,
            row: self.col,
        }
    }

    pub fn to_range(self) -> Range {
        Range::cell(self)
    }
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", column_name(self.col), self.row)
    }
}

impl FromStr for CellAddr {
    type Err = CellError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cell(s)
    }
}

/// A relative position `(dc, dr)`: column delta and row delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Offset {
    pub dc: i32,
    pub dr: i32,
}

impl Offset {
    pub const fn new(dc: i32, dr: i32) -> Self {
        Self { dc, dr }
    }

    pub(crate) fn transposed(self) -> Self {
        Self {
            dc: self.dr,
            dr: self.dc,
        }
    }
}

impl std::ops::Neg for Offset {
    type Output = Offset;

    fn neg(self) -> Offset {
        Offset::new(-self.dc, -self.dr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    /// Cells stacked in one column.
    Column,
    /// Cells laid out along one row.
    Row,
}

/// Inclusive rectangle of cells.
///
/// Ordering compares heads column-major, then tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Range {
    pub head: CellAddr,
    pub tail: CellAddr,
}

impl Range {
    /// Builds the range spanned by two corners in any order.
    pub fn new(a: CellAddr, b: CellAddr) -> Self {
        Self {
            head: CellAddr {
                col: a.col.min(b.col),
                row: a.row.min(b.row),
            },
            tail: CellAddr {
                col: a.col.max(b.col),
                row: a.row.max(b.row),
            },
        }
    }

    pub const fn cell(c: CellAddr) -> Self {
        Self { head: c, tail: c }
    }

    pub fn is_cell(&self) -> bool {
        self.head == self.tail
    }

    pub fn width(&self) -> u64 {
        (self.tail.col - self.head.col) as u64 + 1
    }

    pub fn height(&self) -> u64 {
        (self.tail.row - self.head.row) as u64 + 1
    }

    pub fn area(&self) -> u64 {
        self.width() * self.height()
    }

    pub fn in_grid(&self) -> bool {
        self.head.in_grid() && self.tail.in_grid()
    }

    /// The bounding union (`⊕`): smallest range containing both.
    pub fn bbox(&self, other: &Range) -> Range {
        Range {
            head: CellAddr {
                col: self.head.col.min(other.head.col),
                row: self.head.row.min(other.head.row),
            },
            tail: CellAddr {
                col: self.tail.col.max(other.tail.col),
                row: self.tail.row.max(other.tail.row),
            },
        }
    }

    pub fn intersect(&self, other: &Range) -> Option<Range> {
        let head = CellAddr {
            col: self.head.col.max(other.head.col),
            row: self.head.row.max(other.head.row),
        };
        let tail = CellAddr {
            col: self.tail.col.min(other.tail.col),
            row: self.tail.row.min(other.tail.row),
        };
        (head.col <= tail.col && head.row <= tail.row).then_some(Range { head, tail })
    }

    pub fn overlaps(&self, other: &Range) -> bool {
        self.head.col <= other.tail.col
            && other.head.col <= self.tail.col
            && self.head.row <= other.tail.row
            && other.head.row <= self.tail.row
    }

    pub fn contains(&self, other: &Range) -> bool {
        self.head.col <= other.head.col
            && self.head.row <= other.head.row
            && other.tail.col <= self.tail.col
            && other.tail.row <= self.tail.row
    }

    pub fn contains_cell(&self, c: CellAddr) -> bool {
        self.contains(&Range::cell(c))
    }

    /// `self \ other` as disjoint pieces, cut in the order top strip,
    /// bottom strip, left strip, right strip.
    pub fn subtract(&self, other: &Range) -> Vec<Range> {
        let Some(hole) = self.intersect(other) else {
            return vec![*self];
        };
        let mut out = Vec::with_capacity(4);
        if hole.head.row > self.head.row {
            out.push(Range {
                head: self.head,
                tail: CellAddr {
                    col: self.tail.col,
                    row: hole.head.row - 1,
                },
            });
        }
        if hole.tail.row < self.tail.row {
            out.push(Range {
                head: CellAddr {
                    col: self.head.col,
                    row: hole.tail.row + 1,
                },
                tail: self.tail,
            });
        }
        if hole.head.col > self.head.col {
            out.push(Range {
                head: CellAddr {
                    col: self.head.col,
                    row: hole.head.row,
                },
                tail: CellAddr {
                    col: hole.head.col - 1,
                    row: hole.tail.row,
                },
            });
        }
        if hole.tail.col < self.tail.col {
            out.push(Range {
                head: CellAddr {
                    col: hole.tail.col + 1,
                    row: hole.head.row,
                },
                tail: CellAddr {
                    col: self.tail.col,
                    row: hole.tail.row,
                },
            });
        }
        out
    }

    /// Translates the range. Fails if either corner leaves the grid.
    pub fn shift(&self, o: Offset) -> Result<Range, CellError> {
        Ok(Range {
            head: self.head.offset(o)?,
            tail: self.tail.offset(o)?,
        })
    }

    /// True when the two ranges share a full edge along `axis`: same column
    /// span and touching rows for [`Axis::Column`], same row span and
    /// touching columns for [`Axis::Row`].
    pub fn adjacent(&self, other: &Range, axis: Axis) -> bool {
        match axis {
            Axis::Column => {
                self.head.col == other.head.col
                    && self.tail.col == other.tail.col
                    && (self.tail.row + 1 == other.head.row || other.tail.row + 1 == self.head.row)
            }
            Axis::Row => {
                self.head.row == other.head.row
                    && self.tail.row == other.tail.row
                    && (self.tail.col + 1 == other.head.col || other.tail.col + 1 == self.head.col)
            }
        }
    }

    /// The run direction of a one-wide range, if it has one. A single cell
    /// has no direction.
    pub fn run_axis(&self) -> Option<Axis> {
        if self.is_cell() {
            None
        } else if self.head.col == self.tail.col {
            Some(Axis::Column)
        } else if self.head.row == self.tail.row {
            Some(Axis::Row)
        } else {
            None
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = CellAddr> + '_ {
        let (c0, c1, r0, r1) = (self.head.col, self.tail.col, self.head.row, self.tail.row);
        (c0..=c1).flat_map(move |col| (r0..=r1).map(move |row| CellAddr { col, row }))
    }

    pub(crate) fn transposed(&self) -> Range {
        Range {
            head: self.head.transposed(),
            tail: self.tail.transposed(),
        }
    }
}

impl From<CellAddr> for Range {
    fn from(c: CellAddr) -> Self {
        Range::cell(c)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_cell() {
            write!(f, "{}", self.head)
        } else {
            write!(f, "{}:{}", self.head, self.tail)
        }
    }
}

impl FromStr for Range {
    type Err = CellError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_range(s)
    }
}

/// Bijective base-26 column name: 1 → `A`, 27 → `AA`.
pub fn column_name(mut col: u32) -> String {
    let mut buf = Vec::with_capacity(3);
    while col > 0 {
        let rem = (col - 1) % 26;
        buf.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    buf.reverse();
    String::from_utf8(buf).expect("ascii")
}

/// Parses `A1`, `$A$1`, `a1`. Dollar markers are dropped.
pub fn parse_cell(text: &str) -> Result<CellAddr, CellError> {
    let err = |reason| CellError::Parse {
        text: text.to_string(),
        reason,
    };
    let bytes = text.as_bytes();
    let mut pos = 0;
    if bytes.get(pos) == Some(&b'$') {
        pos += 1;
    }
    let mut col: i64 = 0;
    let letters_start = pos;
    while let Some(b) = bytes.get(pos).filter(|b| b.is_ascii_alphabetic()) {
        col = col * 26 + (b.to_ascii_uppercase() - b'A') as i64 + 1;
        if col > MAX_COL as i64 {
            return Err(CellError::OutOfBounds { col, row: 1 });
        }
        pos += 1;
    }
    if pos == letters_start {
        return Err(err("missing column letters"));
    }
    if bytes.get(pos) == Some(&b'$') {
        pos += 1;
    }
    let digits = &text[pos..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err("missing or invalid row number"));
    }
    if digits.starts_with('0') {
        return Err(err("row numbers start at 1"));
    }
    let row: i64 = if digits.len() > 8 {
        i64::MAX
    } else {
        digits.parse().map_err(|_| err("invalid row number"))?
    };
    CellAddr::checked(col, row)
}

/// Parses `A1` or `A1:B2` (with optional `$` markers) into a range.
pub fn parse_range(text: &str) -> Result<Range, CellError> {
    match text.split_once(':') {
        Some((a, b)) => Ok(Range::new(parse_cell(a)?, parse_cell(b)?)),
        None => parse_cell(text).map(Range::cell),
    }
}
