//! Sets of disjoint ranges, used for query results and visited sets.

use crate::cellspace::{CellAddr, Range};
use crate::spatial::{OverlapIndex, RTreeIndex};

/// Pairwise-disjoint ranges with an overlap index.
#[derive(Default)]
pub struct RangeSet {
    ranges: Vec<Range>,
    index: RTreeIndex,
}

impl RangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the part of `r` not yet covered and returns that part as
    /// disjoint pieces (empty when `r` was already fully covered).
    pub fn insert_uncovered(&mut self, r: Range) -> Vec<Range> {
        let mut pieces = vec![r];
        for (covered, _) in self.index.overlapping(&r) {
            pieces = pieces
                .into_iter()
                .flat_map(|p| p.subtract(&covered))
                .collect();
            if pieces.is_empty() {
                return pieces;
            }
        }
        for p in &pieces {
            self.index.insert(*p, self.ranges.len() as u64);
            self.ranges.push(*p);
        }
        pieces
    }

    pub fn covers(&self, c: CellAddr) -> bool {
        self.index.any_overlapping(&Range::cell(c))
    }

    pub fn ranges(&self) -> &[Range] {
        &self.ranges
    }

    pub fn into_ranges(self) -> Vec<Range> {
        self.ranges
    }

    /// Ranges in ascending order.
    pub fn sorted(&self) -> Vec<Range> {
        let mut v = self.ranges.clone();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn cell_count(&self) -> u64 {
        self.ranges.iter().map(Range::area).sum()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellAddr> + '_ {
        self.ranges.iter().flat_map(|r| r.cells())
    }
}

impl std::fmt::Debug for RangeSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.sorted().iter().map(|r| r.to_string())).finish()
    }
}

/// Merges disjoint ranges into fewer, larger ones covering the same cells.
/// Purely presentational: `B1` and `B2:B5` become `B1:B5`.
pub fn coalesce(ranges: &[Range]) -> Vec<Range> {
    let mut v = ranges.to_vec();
    loop {
        let before = v.len();
        v = merge_pass(v, |r| (r.head.col, r.tail.col, r.head.row), |a, b| {
            a.head.col == b.head.col && a.tail.col == b.tail.col && a.tail.row + 1 == b.head.row
        });
        v = merge_pass(v, |r| (r.head.row, r.tail.row, r.head.col), |a, b| {
            a.head.row == b.head.row && a.tail.row == b.tail.row && a.tail.col + 1 == b.head.col
        });
        if v.len() == before {
            break;
        }
    }
    v.sort();
    v
}

fn merge_pass(
    mut v: Vec<Range>,
    key: impl Fn(&Range) -> (u32, u32, u32),
    joins: impl Fn(&Range, &Range) -> bool,
) -> Vec<Range> {
    v.sort_by_key(|r| key(r));
    let mut out: Vec<Range> = Vec::with_capacity(v.len());
    for r in v {
        match out.last_mut() {
            Some(last) if joins(last, &r) => *last = last.bbox(&r),
            _ => out.push(r),
        }
    }
    out
}
