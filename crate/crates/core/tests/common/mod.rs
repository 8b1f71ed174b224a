//! Brute-force oracles shared by the integration tests.
//!
//! Nothing here calls the library's pattern arithmetic: windows are
//! recomputed from the generating parameters and reachability is a plain
//! cell-level search.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use cellgraph::sheet::{Edit, SheetDump};
use cellgraph::{
    extract_refs, Axis, CalcGraph, CellAddr, CompressedEdge, CompressedGraph, Dependency,
    Direction, FormulaGraph, NoCompGraph, Offset, PatternKind, Range, RangeSet,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn cell(col: u32, row: u32) -> CellAddr {
    CellAddr { col, row }
}

/// Cells of a query result. Fails if the pieces overlap.
pub fn cellset(rs: &RangeSet) -> Result<BTreeSet<CellAddr>, String> {
    let set: BTreeSet<CellAddr> = rs.cells().collect();
    if set.len() as u64 != rs.cell_count() {
        return Err(format!("result pieces overlap: {rs:?}"));
    }
    Ok(set)
}

fn cells_of(r: &Range) -> impl Iterator<Item = CellAddr> {
    let (c0, c1, r0, r1) = (r.head.col, r.tail.col, r.head.row, r.tail.row);
    (c0..=c1).flat_map(move |c| (r0..=r1).map(move |w| cell(c, w)))
}

/// Cell-level reachability over an explicit dependency list.
pub struct CellOracle {
    dependents_of: HashMap<CellAddr, Vec<CellAddr>>,
    precedents_of: HashMap<CellAddr, Vec<Range>>,
}

impl CellOracle {
    pub fn new(deps: &[(Range, CellAddr)]) -> Self {
        let mut dependents_of: HashMap<CellAddr, Vec<CellAddr>> = HashMap::new();
        let mut precedents_of: HashMap<CellAddr, Vec<Range>> = HashMap::new();
        for (p, d) in deps {
            for x in cells_of(p) {
                dependents_of.entry(x).or_default().push(*d);
            }
            precedents_of.entry(*d).or_default().push(*p);
        }
        Self {
            dependents_of,
            precedents_of,
        }
    }

    fn step(&self, x: CellAddr, dir: Direction) -> Vec<CellAddr> {
        match dir {
            Direction::Dependents => self.dependents_of.get(&x).cloned().unwrap_or_default(),
            Direction::Precedents => self
                .precedents_of
                .get(&x)
                .map(|ps| ps.iter().flat_map(cells_of).collect())
                .unwrap_or_default(),
        }
    }

    pub fn reach(&self, start: &Range, dir: Direction, transitive: bool) -> BTreeSet<CellAddr> {
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<CellAddr> = cells_of(start).collect();
        let layer: Vec<CellAddr> = queue.drain(..).collect();
        for x in layer {
            for y in self.step(x, dir) {
                if out.insert(y) && transitive {
                    queue.push_back(y);
                }
            }
        }
        while let Some(x) = queue.pop_front() {
            for y in self.step(x, dir) {
                if out.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        out
    }
}

/// Bounding box of every cell and referenced range, grown by one cell.
pub fn probe_area(dump: &SheetDump, deps: &[(Range, CellAddr)]) -> Range {
    let mut bbox = Range::cell(cell(1, 1));
    for r in dump.records() {
        bbox = bbox.bbox(&Range::cell(r.addr));
    }
    for (p, _) in deps {
        bbox = bbox.bbox(p);
    }
    Range::new(bbox.head, cell(bbox.tail.col + 1, bbox.tail.row + 1))
}

fn pairs(deps: &[Dependency]) -> Vec<(Range, CellAddr)> {
    deps.iter().map(|d| (d.prec, d.dep)).collect()
}

/// Queries every cell of the probe area in both directions, transitive and
/// first-layer, on each graph and compares cell sets with the oracle.
/// Returns the number of comparisons made.
pub fn compare_queries(
    graphs: &[(&str, &dyn FormulaGraph)],
    oracle: &CellOracle,
    area: &Range,
) -> Result<usize, String> {
    let mut n = 0;
    for c in cells_of(area) {
        let start = Range::cell(c);
        for dir in [Direction::Dependents, Direction::Precedents] {
            for transitive in [true, false] {
                let want = oracle.reach(&start, dir, transitive);
                for (name, g) in graphs {
                    let got = cellset(&g.traverse(&start, dir, transitive))?;
                    if got != want {
                        return Err(format!(
                            "{name}: {dir:?} of {c} (transitive {transitive}): got {} cells, want {}; extra {:?}, missing {:?}",
                            got.len(),
                            want.len(),
                            got.difference(&want).take(5).collect::<Vec<_>>(),
                            want.difference(&got).take(5).collect::<Vec<_>>(),
                        ));
                    }
                    n += 1;
                }
            }
        }
    }
    Ok(n)
}

/// Loads a dump into all three engines and checks every cell against the
/// oracle.
pub fn check_sheet(dump: &SheetDump) -> Result<(CompressedGraph, usize), String> {
    let deps = dump.dependencies().map_err(|e| e.to_string())?;
    let mut taco = CompressedGraph::new();
    let mut nocomp = NoCompGraph::new();
    let mut calc = CalcGraph::new();
    dump.load_into(&mut taco).map_err(|e| e.to_string())?;
    dump.load_into(&mut nocomp).map_err(|e| e.to_string())?;
    dump.load_into(&mut calc).map_err(|e| e.to_string())?;
    let deps = pairs(&deps);
    check_lossless(&taco, &deps)?;
    let oracle = CellOracle::new(&deps);
    let area = probe_area(dump, &deps);
    let n = compare_queries(
        &[("taco", &taco), ("nocomp", &nocomp), ("calc", &calc)],
        &oracle,
        &area,
    )?;
    Ok((taco, n))
}

/// The graph represents exactly `deps` as a multiset.
pub fn check_lossless(g: &dyn FormulaGraph, deps: &[(Range, CellAddr)]) -> Result<(), String> {
    let mut got = g.dependencies();
    let mut want = deps.to_vec();
    got.sort();
    want.sort();
    if got != want {
        let g: BTreeSet<_> = got.iter().collect();
        let w: BTreeSet<_> = want.iter().collect();
        return Err(format!(
            "decompressed graph differs: {} vs {} dependencies; extra {:?}; missing {:?}",
            got.len(),
            want.len(),
            g.difference(&w).take(3).collect::<Vec<_>>(),
            w.difference(&g).take(3).collect::<Vec<_>>(),
        ));
    }
    Ok(())
}

/// Σ reduced == |E'| − |E| and Σ count == |E'|.
pub fn check_accounting(g: &CompressedGraph) -> Result<(), String> {
    let stats = g.stats();
    let reduced: u64 = g.reduced_edges_by_pattern().values().sum();
    let counts: u64 = g.edges().map(|e| e.count).sum();
    if reduced != stats.raw_edges - stats.edges {
        return Err(format!(
            "reduced edges {reduced} != {} - {}",
            stats.raw_edges, stats.edges
        ));
    }
    if counts != stats.raw_edges {
        return Err(format!("edge counts {counts} != raw edges {}", stats.raw_edges));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pattern kernels

/// Generating parameters of a random edge.
#[derive(Debug, Clone, Copy)]
pub enum Meta {
    Single(Range),
    Rr(Offset, Offset),
    Rf(Offset, CellAddr),
    Fr(CellAddr, Offset),
    Ff(CellAddr, CellAddr),
    Chain(Offset),
}

fn add(c: CellAddr, o: Offset) -> Option<(i64, i64)> {
    let col = c.col as i64 + o.dc as i64;
    let row = c.row as i64 + o.dr as i64;
    (col >= 1 && row >= 1 && col <= 16_384 && row <= 1_048_576).then_some((col, row))
}

/// The precedent window of dependency cell `c`, recomputed from scratch.
pub fn oracle_window(meta: &Meta, c: CellAddr) -> Option<Range> {
    let to = |p: (i64, i64)| cell(p.0 as u32, p.1 as u32);
    let fix = |x: CellAddr| (x.col as i64, x.row as i64);
    let (h, t) = match *meta {
        Meta::Single(r) => return Some(r),
        Meta::Rr(h, t) => (add(c, h)?, add(c, t)?),
        Meta::Rf(h, tf) => (add(c, h)?, fix(tf)),
        Meta::Fr(hf, t) => (fix(hf), add(c, t)?),
        Meta::Ff(hf, tf) => (fix(hf), fix(tf)),
        Meta::Chain(u) => (add(c, u)?, add(c, u)?),
    };
    (h.0 <= t.0 && h.1 <= t.1).then(|| Range {
        head: to(h),
        tail: to(t),
    })
}

#[derive(Debug, Clone)]
pub struct KernelCase {
    pub kind: PatternKind,
    pub meta: Meta,
    pub cells: Vec<CellAddr>,
    pub windows: Vec<Range>,
    pub edge: CompressedEdge,
}

fn rand_offset(rng: &mut impl Rng, spread: i32) -> Offset {
    Offset::new(rng.gen_range(-spread..=spread), rng.gen_range(-spread..=spread))
}

/// A random valid edge of `kind`, built by extending a single edge one
/// dependency at a time. Errors if an extension the oracle deems valid is
/// refused.
pub fn random_case(rng: &mut impl Rng, kind: PatternKind, max_len: usize) -> Result<KernelCase, String> {
    loop {
        let axis = if rng.gen_bool(0.5) { Axis::Column } else { Axis::Row };
        let len = if kind == PatternKind::Single {
            1
        } else {
            rng.gen_range(2..=max_len)
        };
        let start = cell(rng.gen_range(20..=40), rng.gen_range(20..=40));
        let step = match axis {
            Axis::Column => (0, 1),
            Axis::Row => (1, 0),
        };
        let cells: Vec<CellAddr> = (0..len as u32)
            .map(|k| cell(start.col + k * step.0, start.row + k * step.1))
            .collect();
        let (w, h) = (rng.gen_range(0..=3), rng.gen_range(0..=3));
        let last = cells[len - 1];
        let near = |rng: &mut _, base: CellAddr| {
            let o = rand_offset(rng, 5);
            cell((base.col as i32 + o.dc) as u32, (base.row as i32 + o.dr) as u32)
        };
        let shift = |c: CellAddr, o: Offset| cell((c.col as i32 + o.dc) as u32, (c.row as i32 + o.dr) as u32);
        let meta = match kind {
            PatternKind::Single => {
                let a = near(rng, start);
                Meta::Single(Range::new(a, cell(a.col + w as u32, a.row + h as u32)))
            }
            PatternKind::Rr => {
                let ho = rand_offset(rng, 5);
                Meta::Rr(ho, Offset::new(ho.dc + w, ho.dr + h))
            }
            PatternKind::Rf => {
                let ho = rand_offset(rng, 5);
                Meta::Rf(ho, shift(last, Offset::new(ho.dc + w, ho.dr + h)))
            }
            PatternKind::Fr => {
                let to = rand_offset(rng, 5);
                Meta::Fr(shift(start, Offset::new(to.dc - w, to.dr - h)), to)
            }
            PatternKind::Ff => {
                let a = near(rng, start);
                Meta::Ff(a, cell(a.col + w as u32, a.row + h as u32))
            }
            PatternKind::RrChain => {
                let units = match axis {
                    Axis::Column => [Offset::new(0, -1), Offset::new(0, 1)],
                    Axis::Row => [Offset::new(-1, 0), Offset::new(1, 0)],
                };
                Meta::Chain(*units.choose(rng).unwrap())
            }
        };
        let windows: Option<Vec<Range>> = cells.iter().map(|c| oracle_window(&meta, *c)).collect();
        let Some(windows) = windows else { continue };
        if cells.iter().zip(&windows).any(|(c, w)| w.contains_cell(*c)) {
            continue;
        }
        let mut edge = CompressedEdge::single(windows[0], cells[0]);
        for k in 1..len {
            let d = Dependency::new(windows[k], cells[k]);
            edge = edge.try_extend(&d, kind).ok_or_else(|| {
                format!("{kind} refused member {k} ({} -> {}) of {meta:?}", windows[k], cells[k])
            })?;
        }
        return Ok(KernelCase {
            kind,
            meta,
            cells,
            windows,
            edge,
        });
    }
}

fn range_cells(r: Option<Range>) -> BTreeSet<CellAddr> {
    r.map(|r| cells_of(&r).collect()).unwrap_or_default()
}

fn bbox_of<'a>(rs: impl IntoIterator<Item = &'a Range>) -> Option<Range> {
    rs.into_iter().fold(None, |acc, r| Some(acc.map_or(*r, |a: Range| a.bbox(r))))
}

/// The union of the windows fills their bounding box.
fn covers_bbox<'a>(windows: impl Iterator<Item = &'a Range> + Clone) -> bool {
    let Some(b) = bbox_of(windows.clone()) else { return true };
    let width = (b.tail.col - b.head.col + 1) as usize;
    let mut filled = vec![false; b.area() as usize];
    for w in windows {
        for c in cells_of(w) {
            filled[(c.row - b.head.row) as usize * width + (c.col - b.head.col) as usize] = true;
        }
    }
    filled.into_iter().all(|f| f)
}

/// Every sub-range of `r`.
pub fn sub_ranges(r: &Range) -> Vec<Range> {
    let mut out = Vec::new();
    for c0 in r.head.col..=r.tail.col {
        for c1 in c0..=r.tail.col {
            for r0 in r.head.row..=r.tail.row {
                for r1 in r0..=r.tail.row {
                    out.push(Range {
                        head: cell(c0, r0),
                        tail: cell(c1, r1),
                    });
                }
            }
        }
    }
    out
}

/// Checks decompression, findDep, findPrec and removeDep of one edge
/// exhaustively. Returns the number of probes.
pub fn check_kernel(case: &KernelCase) -> Result<usize, String> {
    let e = &case.edge;
    let ctx = |what: String| format!("{} edge {}->{} {:?}: {what}", case.kind, e.prec, e.dep, case.meta);
    let is_chain = case.kind == PatternKind::RrChain;
    let members: BTreeMap<CellAddr, Range> =
        case.cells.iter().copied().zip(case.windows.iter().copied()).collect();

    // members reading each cell
    let mut readers: HashMap<CellAddr, Vec<CellAddr>> = HashMap::new();
    for (c, w) in &members {
        for x in cells_of(w) {
            readers.entry(x).or_default().push(*c);
        }
    }

    // decompression
    let mut got: Vec<(Range, CellAddr)> = e.decompress().map(|d| (d.prec, d.dep)).collect();
    let mut want: Vec<(Range, CellAddr)> = members.iter().map(|(c, w)| (*w, *c)).collect();
    got.sort();
    want.sort();
    if got != want {
        return Err(ctx(format!("decompresses to {got:?}")));
    }
    if e.count as usize != case.cells.len() {
        return Err(ctx(format!("count {}", e.count)));
    }
    if Some(e.prec) != bbox_of(case.windows.iter()) {
        return Err(ctx("prec is not the bound of the windows".into()));
    }
    cellgraph::graph::validate_edge(e).map_err(|err| ctx(err.to_string()))?;

    let mut probes = 0;

    // findDep
    for r in sub_ranges(&e.prec) {
        let direct: BTreeSet<CellAddr> = members
            .iter()
            .filter(|(_, w)| w.overlaps(&r))
            .map(|(c, _)| *c)
            .collect();
        let mut closure = direct.clone();
        if is_chain {
            let mut frontier: Vec<CellAddr> = direct.iter().copied().collect();
            while let Some(x) = frontier.pop() {
                for d in readers.get(&x).into_iter().flatten() {
                    if closure.insert(*d) {
                        frontier.push(*d);
                    }
                }
            }
        }
        let got_t = range_cells(e.find_dep(&r));
        let got_d = range_cells(e.find_dep_direct(&r));
        if got_t != closure {
            return Err(ctx(format!("find_dep({r}) = {:?}, want {closure:?}", e.find_dep(&r))));
        }
        if got_d != direct {
            return Err(ctx(format!("find_dep_direct({r}) = {:?}, want {direct:?}", e.find_dep_direct(&r))));
        }
        probes += 1;
    }

    // findPrec and removeDep over every sub-run of dep
    let n = case.cells.len();
    for i in 0..n {
        for j in i..n {
            let s = Range::new(case.cells[i], case.cells[j]);
            let in_s: Vec<(CellAddr, Range)> = members
                .iter()
                .filter(|(c, _)| s.contains_cell(**c))
                .map(|(c, w)| (*c, *w))
                .collect();
            let direct = bbox_of(in_s.iter().map(|(_, w)| w));
            if !is_chain && !covers_bbox(in_s.iter().map(|(_, w)| w)) {
                return Err(ctx(format!("windows of {s} do not form a rectangle")));
            }
            let mut transitive = direct;
            if is_chain {
                let mut seen: BTreeSet<CellAddr> = in_s.iter().map(|(c, _)| *c).collect();
                let mut frontier: Vec<Range> = in_s.iter().map(|(_, w)| *w).collect();
                while let Some(w) = frontier.pop() {
                    transitive = Some(transitive.map_or(w, |t| t.bbox(&w)));
                    for x in cells_of(&w) {
                        if let Some(wx) = members.get(&x) {
                            if seen.insert(x) {
                                frontier.push(*wx);
                            }
                        }
                    }
                }
            }
            if e.find_prec(&s) != transitive {
                return Err(ctx(format!("find_prec({s}) = {:?}, want {transitive:?}", e.find_prec(&s))));
            }
            if e.find_prec_direct(&s) != direct {
                return Err(ctx(format!(
                    "find_prec_direct({s}) = {:?}, want {direct:?}",
                    e.find_prec_direct(&s)
                )));
            }

            let pieces = e.remove_dep(&s);
            let mut got: Vec<(Range, CellAddr)> = Vec::new();
            for p in &pieces {
                cellgraph::graph::validate_edge(p).map_err(|err| ctx(format!("remove_dep({s}): {err}")))?;
                if p.dep.is_cell() != (p.kind() == PatternKind::Single) {
                    return Err(ctx(format!("remove_dep({s}) produced {p:?}")));
                }
                got.extend(p.decompress().map(|d| (d.prec, d.dep)));
            }
            let mut want: Vec<(Range, CellAddr)> = members
                .iter()
                .filter(|(c, _)| !s.contains_cell(**c))
                .map(|(c, w)| (*w, *c))
                .collect();
            got.sort();
            want.sort();
            if got != want || pieces.len() > 2 {
                return Err(ctx(format!("remove_dep({s}) = {pieces:?}")));
            }
            probes += 2;
        }
    }
    Ok(probes)
}

// ---------------------------------------------------------------------------
// Random edits

/// A random edit on a sheet about `width` × `rows` cells, biased towards
/// formulas that resemble their neighbours. Never produces a
/// self-reference.
pub fn random_edit(rng: &mut impl Rng, width: u32, rows: u32) -> Edit {
    let roll: f64 = rng.gen();
    let at = cell(rng.gen_range(1..=width + 1), rng.gen_range(1..=rows + 2));
    if roll < 0.2 {
        return Edit::Clear(Range::cell(at));
    }
    if roll < 0.3 {
        let tail = cell(
            (at.col + rng.gen_range(0..=2)).min(width + 1),
            (at.row + rng.gen_range(0..=6)).min(rows + 2),
        );
        return Edit::Clear(Range::new(at, tail));
    }
    if roll < 0.37 {
        return Edit::Set {
            cell: at,
            content: rng.gen_range(0..100).to_string(),
        };
    }
    loop {
        let content = random_formula(rng, at, width, rows);
        let ok = extract_refs(&content, at)
            .map(|ds| ds.iter().all(|d| !d.is_self_reference()))
            .unwrap_or(false);
        if ok {
            return Edit::Set { cell: at, content };
        }
    }
}

fn col_name(c: u32) -> String {
    cellgraph::cellspace::column_name(c)
}

fn random_formula(rng: &mut impl Rng, at: CellAddr, width: u32, rows: u32) -> String {
    let x = rng.gen_range(1..=width);
    let xn = col_name(x);
    let r = at.row;
    let up = r.saturating_sub(1).max(1);
    match rng.gen_range(0..7) {
        0 => format!("={xn}{r}"),
        1 => format!("=SUM({xn}{r}:{xn}{})", r + rng.gen_range(0..=2)),
        2 => format!("=SUM(${xn}$1:{xn}{r})"),
        3 => format!("=SUM({xn}{r}:${xn}${rows})"),
        4 => format!("=SUM(${xn}$1:${xn}$3)"),
        5 => format!("={xn}{r}+{}{up}", col_name(at.col)),
        _ => format!(
            "={}{}",
            col_name(rng.gen_range(1..=width)),
            rng.gen_range(1..=rows)
        ),
    }
}

/// Applies an edit to a plain cell map.
pub fn apply_to_model(model: &mut BTreeMap<CellAddr, String>, edit: &Edit) {
    match edit {
        Edit::Clear(r) => model.retain(|a, _| !r.contains_cell(*a)),
        Edit::Set { cell, content } if content.is_empty() => {
            model.remove(cell);
        }
        Edit::Set { cell, content } => {
            model.insert(*cell, content.clone());
        }
    }
}

pub fn model_dependencies(model: &BTreeMap<CellAddr, String>) -> Vec<(Range, CellAddr)> {
    let mut out = Vec::new();
    for (a, c) in model {
        if c.starts_with('=') {
            out.extend(extract_refs(c, *a).unwrap().iter().map(|d| (d.prec, d.dep)));
        }
    }
    out
}

pub fn model_dump(model: &BTreeMap<CellAddr, String>) -> SheetDump {
    let mut d = SheetDump::new();
    for (a, c) in model {
        d.push(*a, c.clone());
    }
    d
}

/// One randomized maintenance run: a random sheet, then up to `edits`
/// random clears and sets applied to a compressed sheet and to a plain
/// cell map. Losslessness is checked after every edit; at the end every
/// query is compared with an uncompressed graph rebuilt from the map.
pub fn maintenance_run(seed: u64, edits: usize) -> Result<usize, String> {
    use cellgraph::sheet::Sheet;
    use cellgraph::{generate, EngineKind, PatternSet, WorkloadSpec};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let rows = rng.gen_range(3..=30);
    let w = generate(&WorkloadSpec::random(rows, seed, 0.2)).map_err(|e| e.to_string())?;
    let width = w.dump.records().iter().map(|r| r.addr.col).max().unwrap_or(1);
    let mut sheet = Sheet::load(&w.dump, EngineKind::Taco, PatternSet::all()).map_err(|e| e.to_string())?;
    let mut model: BTreeMap<CellAddr, String> =
        w.dump.records().iter().map(|r| (r.addr, r.content.clone())).collect();
    let count = rng.gen_range(edits / 2..=edits);
    for step in 0..count {
        let edit = random_edit(&mut rng, width, rows);
        sheet
            .apply(&edit)
            .map_err(|e| format!("step {step} {edit:?}: {e}"))?;
        apply_to_model(&mut model, &edit);
        check_lossless(sheet.graph(), &model_dependencies(&model))
            .map_err(|e| format!("after step {step} {edit:?}: {e}"))?;
    }
    let deps = model_dependencies(&model);
    let rebuilt = NoCompGraph::from_dependencies(
        &deps.iter().map(|(p, d)| Dependency::new(*p, *d)).collect::<Vec<_>>(),
    )
    .map_err(|e| e.to_string())?;
    let oracle = CellOracle::new(&deps);
    let area = probe_area(&model_dump(&model), &deps);
    let area = Range::new(area.head, cell(area.tail.col.max(width + 2), area.tail.row.max(rows + 3)));
    compare_queries(&[("taco", sheet.graph()), ("nocomp", &rebuilt)], &oracle, &area)
}
