//! Synthetic benchmark sheets and latency summaries.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cellspace::{column_name, CellAddr, Range, MAX_ROW};
use crate::sheet::{Edit, SheetDump};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("rows must be between 1 and {MAX_ROW}, got {0}")]
    Rows(u64),
    #[error("modify rows ({modify}) exceed rows ({rows})")]
    ModifyRows { modify: u32, rows: u32 },
    #[error("outlier fraction must be within [0, 1], got {0}")]
    Outliers(f64),
    #[error("percentiles of an empty sample")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkloadKind {
    /// `B1 = A1`, `Bi = Ai + B(i-1)`.
    RunTotalFast,
    /// `Bi = SUM($A$1:Ai)`.
    RunTotalSlow,
    /// `Ci = Bi * $A$1`.
    Rate,
    /// RunTotalSlow plus edits rewriting a prefix of column B to the fast
    /// form.
    ModifySlowToFast,
    /// Seeded columns of templated formulas with random outliers.
    RandomPatterned,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 5] = [
        WorkloadKind::RunTotalFast,
        WorkloadKind::RunTotalSlow,
        WorkloadKind::Rate,
        WorkloadKind::ModifySlowToFast,
        WorkloadKind::RandomPatterned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::RunTotalFast => "runtotalfast",
            WorkloadKind::RunTotalSlow => "runtotalslow",
            WorkloadKind::Rate => "rate",
            WorkloadKind::ModifySlowToFast => "modify",
            WorkloadKind::RandomPatterned => "random",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let kind = match lower.as_str() {
            "modifyslowtofast" | "slowtofast" => WorkloadKind::ModifySlowToFast,
            "randompatterned" => WorkloadKind::RandomPatterned,
            other => WorkloadKind::ALL
                .into_iter()
                .find(|k| k.name() == other)
                .ok_or_else(|| {
                    format!("unknown workload {s:?} (expected runtotalfast, runtotalslow, rate, modify or random)")
                })?,
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub rows: u32,
    pub modify_rows: u32,
    pub seed: u64,
    pub outlier_pct: f64,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, rows: u32) -> Self {
        Self {
            kind,
            rows,
            modify_rows: 0,
            seed: 0,
            outlier_pct: 0.0,
        }
    }

    pub fn run_total_fast(rows: u32) -> Self {
        Self::new(WorkloadKind::RunTotalFast, rows)
    }

    pub fn run_total_slow(rows: u32) -> Self {
        Self::new(WorkloadKind::RunTotalSlow, rows)
    }

    pub fn rate(rows: u32) -> Self {
        Self::new(WorkloadKind::Rate, rows)
    }

    pub fn modify(rows: u32, modify_rows: u32) -> Self {
        Self {
            modify_rows,
            ..Self::new(WorkloadKind::ModifySlowToFast, rows)
        }
    }

    pub fn random(rows: u32, seed: u64, outlier_pct: f64) -> Self {
        Self {
            seed,
            outlier_pct,
            ..Self::new(WorkloadKind::RandomPatterned, rows)
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        if self.rows == 0 || self.rows > MAX_ROW {
            return Err(WorkloadError::Rows(self.rows as u64));
        }
        if self.kind == WorkloadKind::ModifySlowToFast && self.modify_rows > self.rows {
            return Err(WorkloadError::ModifyRows {
                modify: self.modify_rows,
                rows: self.rows,
            });
        }
        if !(0.0..=1.0).contains(&self.outlier_pct) {
            return Err(WorkloadError::Outliers(self.outlier_pct));
        }
        Ok(())
    }
}

/// Formula template of a generated column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    /// `=SUM(Xy+a:Yy+b)`.
    Sliding,
    /// `=SUM(Xy:$Y$N)`.
    Shrinking,
    /// `=SUM($X$1:Yy)`.
    Expanding,
    /// `=SUM($X$a:$Y$b)`.
    Fixed,
    /// `=Xy+Cy-1` where C is the column itself; the first row is `=X1`.
    Chain,
    /// `=Xy*$Z$k`.
    Scaled,
}

impl Template {
    /// Number of references each formula of the column makes.
    pub fn refs(self) -> usize {
        match self {
            Template::Chain | Template::Scaled => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnTemplate {
    pub col: u32,
    pub template: Template,
}

/// A generated sheet plus the edits to replay on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub spec: WorkloadSpec,
    pub dump: SheetDump,
    pub edits: Vec<Edit>,
    /// Formula columns of a random sheet; empty for the fixed workloads.
    pub columns: Vec<ColumnTemplate>,
    /// Cells whose template formula was replaced by an outlier.
    pub outliers: Vec<CellAddr>,
}

fn a1(col: u32, row: u32) -> String {
    format!("{}{row}", column_name(col))
}

fn fixed(col: u32, row: u32) -> String {
    format!("${}${row}", column_name(col))
}

fn cell(col: u32, row: u32) -> CellAddr {
    CellAddr { col, row }
}

pub fn generate(spec: &WorkloadSpec) -> Result<Workload, WorkloadError> {
    spec.validate()?;
    let n = spec.rows;
    let mut dump = SheetDump::new();
    let mut edits = Vec::new();
    let mut columns = Vec::new();
    let mut outliers = Vec::new();
    match spec.kind {
        WorkloadKind::RunTotalFast => {
            for i in 1..=n {
                dump.push(cell(1, i), "1");
            }
            dump.push(cell(2, 1), "=A1");
            for i in 2..=n {
                dump.push(cell(2, i), format!("=A{i}+B{}", i - 1));
            }
        }
        WorkloadKind::RunTotalSlow | WorkloadKind::ModifySlowToFast => {
            for i in 1..=n {
                dump.push(cell(1, i), "1");
            }
            for i in 1..=n {
                dump.push(cell(2, i), format!("=SUM($A$1:A{i})"));
            }
            if spec.kind == WorkloadKind::ModifySlowToFast {
                let last = (spec.modify_rows + 1).min(n);
                for i in 2..=last {
                    edits.push(Edit::Set {
                        cell: cell(2, i),
                        content: format!("=A{i}+B{}", i - 1),
                    });
                }
            }
        }
        WorkloadKind::Rate => {
            dump.push(cell(1, 1), "0.05");
            for i in 1..=n {
                dump.push(cell(2, i), format!("{}", 100 + i));
            }
            for i in 1..=n {
                dump.push(cell(3, i), format!("=B{i}*$A$1"));
            }
        }
        WorkloadKind::RandomPatterned => {
            random_patterned(spec, &mut dump, &mut columns, &mut outliers);
        }
    }
    Ok(Workload {
        spec: *spec,
        dump,
        edits,
        columns,
        outliers,
    })
}

fn random_patterned(
    spec: &WorkloadSpec,
    dump: &mut SheetDump,
    columns: &mut Vec<ColumnTemplate>,
    outliers: &mut Vec<CellAddr>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.rows;
    let literal_cols: u32 = rng.gen_range(1..=3);
    let formula_cols: u32 = rng.gen_range(2..=8);
    let width = literal_cols + formula_cols;
    for c in 1..=literal_cols {
        for r in 1..=n {
            dump.push(cell(c, r), rng.gen_range(0..1000).to_string());
        }
    }
    for c in literal_cols + 1..=width {
        let earlier: Vec<u32> = (1..c).collect();
        let mut choices = vec![
            Template::Sliding,
            Template::Shrinking,
            Template::Expanding,
            Template::Fixed,
            Template::Chain,
        ];
        if earlier.len() >= 2 {
            choices.push(Template::Scaled);
        }
        let template = *choices.choose(&mut rng).expect("non-empty");
        let x = *earlier.choose(&mut rng).expect("non-empty");
        let y = rng.gen_range(x..c);
        let z = earlier
            .iter()
            .filter(|&&z| z != x)
            .collect::<Vec<_>>()
            .choose(&mut rng)
            .map(|z| **z)
            .unwrap_or(x);
        let a: u32 = rng.gen_range(0..=2);
        let b: u32 = a + rng.gen_range(0..=2);
        let fa: u32 = rng.gen_range(1..=n);
        let fb: u32 = rng.gen_range(fa..=n);
        let k: u32 = rng.gen_range(1..=n);
        columns.push(ColumnTemplate { col: c, template });
        for r in 1..=n {
            let here = cell(c, r);
            let formula = if rng.gen_bool(spec.outlier_pct) {
                outliers.push(here);
                format!("={}", random_target(&mut rng, here, width, n))
            } else {
                match template {
                    Template::Sliding => format!("=SUM({}:{})", a1(x, r + a), a1(y, r + b)),
                    Template::Shrinking => format!("=SUM({}:{})", a1(x, r), fixed(y, n)),
                    Template::Expanding => format!("=SUM({}:{})", fixed(x, 1), a1(y, r)),
                    Template::Fixed => format!("=SUM({}:{})", fixed(x, fa), fixed(y, fb)),
                    Template::Chain if r == 1 => format!("={}", a1(x, 1)),
                    Template::Chain => format!("={}+{}", a1(x, r), a1(c, r - 1)),
                    Template::Scaled => format!("={}*{}", a1(x, r), fixed(z, k)),
                }
            };
            dump.push(here, formula);
        }
    }
}

/// A random cell or small block within the sheet that does not contain
/// `avoid`.
fn random_target(rng: &mut ChaCha8Rng, avoid: CellAddr, width: u32, rows: u32) -> String {
    loop {
        let c0 = rng.gen_range(1..=width);
        let r0 = rng.gen_range(1..=rows);
        let r = if rng.gen_bool(0.5) {
            Range::cell(cell(c0, r0))
        } else {
            let c1 = (c0 + rng.gen_range(0..=2)).min(width);
            let r1 = (r0 + rng.gen_range(0..=2)).min(rows);
            Range::new(cell(c0, r0), cell(c1, r1))
        };
        if !r.contains_cell(avoid) {
            return r.to_string();
        }
    }
}

/// Latency summary using nearest-rank percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub max: f64,
    pub p75: f64,
    pub median: f64,
    pub mean: f64,
}

/// Nearest-rank percentile of an ascending sample: the element at rank
/// `ceil(p/100 * n)`. The median is therefore the lower median.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn percentiles(samples: &[f64]) -> Result<Percentiles, WorkloadError> {
    if samples.is_empty() {
        return Err(WorkloadError::EmptySample);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Percentiles {
        max: v[v.len() - 1],
        p75: nearest_rank(&v, 75.0),
        median: nearest_rank(&v, 50.0),
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}
