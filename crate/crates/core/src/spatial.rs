//! Rectangle-overlap indexes over ranges.

use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use crate::cellspace::Range;

/// Opaque identifier stored alongside each indexed range.
pub type Handle = u64;

/// Insert/delete/overlap-query over `(Range, Handle)` entries.
pub trait OverlapIndex: Default + Send + Sync {
    fn insert(&mut self, range: Range, handle: Handle);

    /// Removes one entry; returns false if it was not present.
    fn remove(&mut self, range: Range, handle: Handle) -> bool;

    /// Every entry whose range intersects `probe`, each exactly once.
    fn overlapping(&self, probe: &Range) -> Vec<(Range, Handle)>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type Entry = GeomWithData<Rectangle<[i64; 2]>, Handle>;

fn envelope(r: &Range) -> AABB<[i64; 2]> {
    AABB::from_corners(
        [r.head.col as i64, r.head.row as i64],
        [r.tail.col as i64, r.tail.row as i64],
    )
}

fn entry(r: &Range, handle: Handle) -> Entry {
    let e = envelope(r);
    GeomWithData::new(Rectangle::from_corners(e.lower(), e.upper()), handle)
}

fn from_entry(e: &Entry) -> Range {
    let lo = e.geom().lower();
    let hi = e.geom().upper();
    Range {
        head: crate::cellspace::CellAddr {
            col: lo[0] as u32,
            row: lo[1] as u32,
        },
        tail: crate::cellspace::CellAddr {
            col: hi[0] as u32,
            row: hi[1] as u32,
        },
    }
}

/// R*-tree backed index. Corners are inclusive integer cells, so touching
/// envelopes only intersect when the ranges share a cell.
#[derive(Default)]
pub struct RTreeIndex {
    tree: RTree<Entry>,
}

impl RTreeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bulk_load(entries: Vec<(Range, Handle)>) -> Self {
        Self {
            tree: RTree::bulk_load(entries.iter().map(|(r, h)| entry(r, *h)).collect()),
        }
    }

    pub fn any_overlapping(&self, probe: &Range) -> bool {
        self.tree
            .locate_in_envelope_intersecting(envelope(probe))
            .next()
            .is_some()
    }
}

impl OverlapIndex for RTreeIndex {
    fn insert(&mut self, range: Range, handle: Handle) {
        self.tree.insert(entry(&range, handle));
    }

    fn remove(&mut self, range: Range, handle: Handle) -> bool {
        self.tree.remove(&entry(&range, handle)).is_some()
    }

    fn overlapping(&self, probe: &Range) -> Vec<(Range, Handle)> {
        self.tree
            .locate_in_envelope_intersecting(envelope(probe))
            .map(|e| (from_entry(e), e.data))
            .collect()
    }

    fn len(&self) -> usize {
        self.tree.size()
    }
}

/// Linear scan. Reference implementation for tests.
#[derive(Default)]
pub struct LinearIndex {
    entries: Vec<(Range, Handle)>,
}

impl OverlapIndex for LinearIndex {
    fn insert(&mut self, range: Range, handle: Handle) {
        self.entries.push((range, handle));
    }

    fn remove(&mut self, range: Range, handle: Handle) -> bool {
        match self.entries.iter().position(|e| *e == (range, handle)) {
            Some(i) => {
                self.entries.swap_remove(i);
                true
            }
            None => false,
        }
    }

    fn overlapping(&self, probe: &Range) -> Vec<(Range, Handle)> {
        self.entries
            .iter()
            .filter(|(r, _)| r.overlaps(probe))
            .copied()
            .collect()
    }

    fn len(&self) -> usize {
        self.entries.len()
    }
}
