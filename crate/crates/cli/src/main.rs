use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cellgraph::export::{export_graph, export_graph_pretty, import_graph};
use cellgraph::{
    coalesce, generate, percentiles, CompressedGraph, Direction, EngineKind, FormulaGraph,
    GraphStats, PatternKind, PatternSet, Range, Sheet, SheetDump, WorkloadKind, WorkloadSpec,
};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cellgraph", version, about = "Compressed formula dependency graphs")]
struct Cli {
    /// Patterns the compressor may use, comma separated.
    #[arg(long, global = true, env = "TACO_PATTERNS", default_value = "rrchain,rr,rf,fr,ff")]
    patterns: PatternSet,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph size and per-pattern edge reduction of one or more sheets.
    Stats {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "taco")]
        engine: EngineKind,
        #[arg(long)]
        json: bool,
    },
    /// Dependents or precedents of a range.
    Query {
        file: PathBuf,
        #[arg(long)]
        range: Range,
        #[arg(long)]
        dir: Direction,
        #[arg(long, default_value = "taco")]
        engine: EngineKind,
        /// Only the first layer of the search.
        #[arg(long)]
        direct: bool,
        #[arg(long)]
        json: bool,
    },
    /// Times build, query and modification on a generated workload.
    Bench {
        #[arg(long)]
        workload: WorkloadKind,
        #[arg(long)]
        rows: u32,
        /// Rows rewritten by the modify workload. Defaults to all of them.
        #[arg(long)]
        modify_rows: Option<u32>,
        #[arg(long)]
        engine: EngineKind,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        #[arg(long)]
        no_header: bool,
    },
    /// Runs the HTTP trace service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Sheet to load at startup.
        #[arg(long)]
        sheet: Option<PathBuf>,
        #[arg(long, default_value = "taco")]
        engine: EngineKind,
    },
    /// Writes the compressed graph of a sheet as JSON.
    Export {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pretty: bool,
    },
    /// Reads an exported graph back and prints its stats.
    Import {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

type Result<T> = std::result::Result<T, String>;

fn read_dump(path: &Path) -> Result<SheetDump> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    SheetDump::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(path: &Path, engine: EngineKind, patterns: PatternSet) -> Result<Box<dyn FormulaGraph>> {
    read_dump(path)?
        .load(engine, patterns)
        .map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct StatsDoc {
    file: String,
    engine: String,
    #[serde(flatten)]
    stats: GraphStats,
    reduced: BTreeMap<String, u64>,
}

fn stats_doc(file: &Path, engine: EngineKind, g: &dyn FormulaGraph) -> StatsDoc {
    StatsDoc {
        file: file.display().to_string(),
        engine: engine.to_string(),
        stats: g.stats(),
        reduced: g
            .reduced_edges_by_pattern()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    }
}

fn print_stats(d: &StatsDoc) {
    let s = &d.stats;
    println!("{} ({})", d.file, d.engine);
    println!("  edges     {:>10}  (uncompressed {}, ratio {:.2})", s.edges, s.raw_edges, s.edge_ratio);
    println!("  vertices  {:>10}  (uncompressed {}, ratio {:.2})", s.vertices, s.raw_vertices, s.vertex_ratio);
    let reduced: Vec<String> = PatternKind::ALL
        .iter()
        .filter_map(|k| d.reduced.get(k.name()).map(|v| format!("{k}={v}")))
        .collect();
    println!("  reduced   {}", reduced.join(" "));
}

#[derive(Serialize)]
struct Summary {
    sheets: usize,
    edge_ratio: cellgraph::Percentiles,
    vertex_ratio: cellgraph::Percentiles,
}

fn stats(files: &[PathBuf], engine: EngineKind, patterns: PatternSet, json: bool) -> Result<()> {
    let mut docs = Vec::new();
    for f in files {
        let g = load(f, engine, patterns)?;
        docs.push(stats_doc(f, engine, g.as_ref()));
    }
    let summary = if docs.len() > 1 {
        let ratios = |get: fn(&GraphStats) -> f64| {
            let v: Vec<f64> = docs.iter().map(|d| get(&d.stats)).collect();
            percentiles(&v).map_err(|e| e.to_string())
        };
        Some(Summary {
            sheets: docs.len(),
            edge_ratio: ratios(|s| s.edge_ratio)?,
            vertex_ratio: ratios(|s| s.vertex_ratio)?,
        })
    } else {
        None
    };
    if json {
        let out = match summary {
            Some(s) => serde_json::json!({ "sheets": docs, "summary": s }),
            None => serde_json::to_value(&docs[0]).map_err(|e| e.to_string())?,
        };
        println!("{out}");
        return Ok(());
    }
    docs.iter().for_each(print_stats);
    if let Some(s) = summary {
        for (name, p) in [("edge ratio", s.edge_ratio), ("vertex ratio", s.vertex_ratio)] {
            println!(
                "{name} over {} sheets: max {:.2} p75 {:.2} median {:.2} mean {:.2}",
                s.sheets, p.max, p.p75, p.median, p.mean
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct QueryDoc {
    ranges: Vec<String>,
    cells: u64,
    elapsed_us: u64,
}

fn query(file: &Path, range: &Range, dir: Direction, engine: EngineKind, patterns: PatternSet, direct: bool, json: bool) -> Result<()> {
    let g = load(file, engine, patterns)?;
    let start = Instant::now();
    let found = g.traverse(range, dir, !direct);
    let elapsed = start.elapsed();
    let doc = QueryDoc {
        ranges: coalesce(&found.sorted()).iter().map(Range::to_string).collect(),
        cells: found.cell_count(),
        elapsed_us: elapsed.as_micros() as u64,
    };
    if json {
        println!("{}", serde_json::to_string(&doc).map_err(|e| e.to_string())?);
    } else {
        for r in &doc.ranges {
            println!("{r}");
        }
        eprintln!("{} cells in {:.3} ms", doc.cells, elapsed.as_secs_f64() * 1e3);
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    workload: String,
    rows: u32,
    engine: String,
    build_ms: f64,
    query_ms: f64,
    modify_ms: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn ms(since: Instant) -> f64 {
    (since.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

#[allow(clippy::too_many_arguments)]
fn bench(
    workload: WorkloadKind,
    rows: u32,
    modify_rows: Option<u32>,
    engine: EngineKind,
    patterns: PatternSet,
    repeat: u32,
    header: bool,
) -> Result<()> {
    let mut spec = WorkloadSpec::new(workload, rows);
    if workload == WorkloadKind::ModifySlowToFast {
        spec.modify_rows = modify_rows.unwrap_or(rows);
    }
    let w = generate(&spec).map_err(|e| e.to_string())?;
    let a1 = Range::cell(cellgraph::CellAddr { col: 1, row: 1 });
    let (mut build, mut query, mut modify) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..repeat {
        let start = Instant::now();
        let g = w.dump.load(engine, patterns).map_err(|e| e.to_string())?;
        build.push(ms(start));

        let start = Instant::now();
        std::hint::black_box(g.find_dependents(&a1));
        query.push(ms(start));
        drop(g);

        if !w.edits.is_empty() {
            let mut sheet = Sheet::load(&w.dump, engine, patterns).map_err(|e| e.to_string())?;
            let start = Instant::now();
            for e in &w.edits {
                sheet.apply(e).map_err(|e| e.to_string())?;
            }
            modify.push(ms(start));
        }
    }
    let row = BenchRow {
        workload: workload.to_string(),
        rows,
        engine: engine.to_string(),
        build_ms: median(build),
        query_ms: median(query),
        modify_ms: (!modify.is_empty()).then(|| median(modify)),
    };
    let mut out = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(std::io::stdout());
    out.serialize(row).map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())
}

fn serve(host: &str, port: u16, sheet: Option<&Path>, engine: EngineKind, patterns: PatternSet) -> Result<()> {
    let state = cellgraph_service::AppState::new(engine, patterns);
    if let Some(path) = sheet {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let id = state.open(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("loaded {} as sheet {id}", path.display());
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let listener = cellgraph_service::TcpListener::bind((host, port))
            .await
            .map_err(|e| format!("cannot listen on {host}:{port}: {e}"))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on http://{addr}");
        cellgraph_service::serve(listener, state)
            .await
            .map_err(|e| e.to_string())
    })
}

fn export(file: &Path, out: &Path, patterns: PatternSet, pretty: bool) -> Result<()> {
    let mut g = CompressedGraph::with_patterns(patterns);
    read_dump(file)?
        .load_into(&mut g)
        .map_err(|e| format!("{}: {e}", file.display()))?;
    let json = if pretty { export_graph_pretty(&g) } else { export_graph(&g) };
    fs::write(out, json + "\n").map_err(|e| format!("{}: {e}", out.display()))
}

fn import(file: &Path, patterns: PatternSet, json: bool) -> Result<()> {
    let text = fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let g = import_graph(&text, patterns).map_err(|e| format!("{}: {e}", file.display()))?;
    let doc = stats_doc(file, EngineKind::Taco, &g);
    if json {
        println!("{}", serde_json::to_string(&doc).map_err(|e| e.to_string())?);
    } else {
        print_stats(&doc);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let patterns = cli.patterns;
    match cli.command {
        Command::Stats { files, engine, json } => stats(&files, engine, patterns, json),
        Command::Query { file, range, dir, engine, direct, json } => {
            query(&file, &range, dir, engine, patterns, direct, json)
        }
        Command::Bench { workload, rows, modify_rows, engine, repeat, no_header } => {
            bench(workload, rows, modify_rows, engine, patterns, repeat, !no_header)
        }
        Command::Serve { port, host, sheet, engine } => serve(&host, port, sheet.as_deref(), engine, patterns),
        Command::Export { file, out, pretty } => export(&file, &out, patterns, pretty),
        Command::Import { file, json } => import(&file, patterns, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
