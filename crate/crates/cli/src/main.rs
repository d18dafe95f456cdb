//! `raxon` command line: load N-Triples into a CS-table database, plan
//! merges, inspect statistics, run queries, generate synthetic corpora
//! and verify the engine against a reference evaluator.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 verification failure.

mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use raxon_core::ingest::RDF_TYPE_IRI;
use raxon_core::merge::{MergeAlgorithm, DEFAULT_ENUM_BUDGET};
use raxon_core::query::{
    execute_explain, oracle_execute, parse_query, ExecOptions, Planner,
};
use raxon_core::storage::Database;
use raxon_core::synth::{self, LatticeShape, QueryGenConfig, SynthConfig};

use pipeline::Pipeline;

#[derive(Parser)]
#[command(
    name = "raxon",
    version,
    about = "Characteristic-set RDF storage and query engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an N-Triples file into a new database directory.
    Load(LoadArgs),
    /// Print characteristic-set statistics for an input file.
    Stats(StatsArgs),
    /// Compute and print a merge plan without materializing it.
    #[command(visible_alias = "merge")]
    MergePlan(MergePlanArgs),
    /// Run a query against a loaded database.
    Query(QueryArgs),
    /// Check engine results against the reference evaluator over a
    /// density-factor grid.
    Verify(VerifyArgs),
    /// Generate a synthetic N-Triples corpus (and optionally queries).
    Gen(GenArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// N-Triples input file.
    #[arg(long)]
    input: PathBuf,
    /// Abort on the first malformed line instead of skipping.
    #[arg(long)]
    strict: bool,
    /// IRI whose triples feed the per-class subject counts.
    #[arg(long, default_value = RDF_TYPE_IRI)]
    type_iri: String,
}

#[derive(Args)]
struct MergeArgs {
    /// Density factor m in [0, 1].
    #[arg(long, default_value_t = 0.25)]
    m: f64,
    /// Merge algorithm.
    #[arg(long, value_enum, default_value_t = AlgoArg::Greedy)]
    algo: AlgoArg,
    /// Assignment-enumeration budget for the optimal algorithm.
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    enum_budget: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Greedy,
    Optimal,
    None,
}

impl From<AlgoArg> for MergeAlgorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Greedy => MergeAlgorithm::Greedy,
            AlgoArg::Optimal => MergeAlgorithm::Optimal,
            AlgoArg::None => MergeAlgorithm::None,
        }
    }
}

#[derive(Args)]
struct LoadArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    #[command(flatten)]
    merge: MergeArgs,
    /// Target database directory (must be absent or empty).
    #[arg(long, env = "RAXON_DB")]
    db: PathBuf,
    /// Also write the load report as JSON.
    #[arg(long)]
    json_report: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    ingest: IngestArgs,
}

#[derive(Args)]
struct MergePlanArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    #[command(flatten)]
    merge: MergeArgs,
    /// Write the full plan report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// Database directory.
    #[arg(long, env = "RAXON_DB")]
    db: PathBuf,
    /// Query file (SELECT ... WHERE { ... }).
    #[arg(long)]
    file: PathBuf,
    /// Triple-pattern ordering strategy.
    #[arg(long, value_enum, default_value_t = PlannerArg::None)]
    planner: PlannerArg,
    /// Print plan diagnostics before the results.
    #[arg(long)]
    explain: bool,
    /// Evaluate table permutations in parallel.
    #[arg(long)]
    parallel: bool,
    /// Execute every unpruned permutation (diagnostics).
    #[arg(long)]
    no_ecs_prune: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    None,
    Distance,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    /// Query file or directory of `.rq` files.
    #[arg(long)]
    queries: PathBuf,
    /// Density factors to test, comma separated.
    #[arg(long, default_value = "0,0.1,0.3,0.5,1", value_delimiter = ',')]
    m_grid: Vec<f64>,
    /// Merge algorithm under test.
    #[arg(long, value_enum, default_value_t = AlgoArg::Greedy)]
    algo: AlgoArg,
    /// Assignment-enumeration budget for the optimal algorithm.
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    enum_budget: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Chain,
    Diamond,
    Bipartite,
}

#[derive(Args)]
struct GenArgs {
    /// Output N-Triples file.
    #[arg(long)]
    output: PathBuf,
    /// Lattice shape of the generated CS hierarchy.
    #[arg(long, value_enum, default_value_t = ShapeArg::Chain)]
    shape: ShapeArg,
    /// Shape size: chain length, diamond width, or bipartite ancestor
    /// count.
    #[arg(long, default_value_t = 6)]
    size: usize,
    /// Dense-layer size for the bipartite shape.
    #[arg(long)]
    dense: Option<usize>,
    /// Records in the most populous CS.
    #[arg(long, default_value_t = 100)]
    records: u64,
    /// Geometric record-count decay across CSs.
    #[arg(long, default_value_t = 0.6)]
    skew: f64,
    /// Probability that an object references another subject.
    #[arg(long, default_value_t = 0.3)]
    link_density: f64,
    /// Probability of multi-valued cells.
    #[arg(long, default_value_t = 0.15)]
    multi_prob: f64,
    /// Add rdf:type with a per-CS class to every CS.
    #[arg(long)]
    typed: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also generate queries into this directory.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    query_count: usize,
    #[arg(long, default_value_t = 11)]
    query_seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Load(args) => cmd_load(args),
        Command::Stats(args) => cmd_stats(args),
        Command::MergePlan(args) => cmd_merge_plan(args),
        Command::Query(args) => cmd_query(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn cmd_load(args: LoadArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let pipeline = Pipeline::from_file(
        &args.ingest.input,
        args.ingest.strict,
        &args.ingest.type_iri,
        args.merge.m,
        args.merge.algo.into(),
        args.merge.enum_budget,
    )?;
    let db = pipeline.assemble();
    db.persist(&args.db)
        .with_context(|| format!("persisting into {}", args.db.display()))?;
    let report = report::load_report(
        &args.ingest.input,
        args.ingest.strict,
        &pipeline,
        &db,
        &args.db,
        start.elapsed(),
    );
    print!("{}", report.as_text());
    if let Some(path) = &args.json_report {
        std::fs::write(path, report.as_json()?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode> {
    let pipeline = Pipeline::from_file(
        &args.ingest.input,
        args.ingest.strict,
        &args.ingest.type_iri,
        0.0,
        MergeAlgorithm::None,
        DEFAULT_ENUM_BUDGET,
    )?;
    print!("{}", report::stats_report(&pipeline).as_text());
    Ok(ExitCode::SUCCESS)
}

fn cmd_merge_plan(args: MergePlanArgs) -> Result<ExitCode> {
    let pipeline = Pipeline::from_file(
        &args.ingest.input,
        args.ingest.strict,
        &args.ingest.type_iri,
        args.merge.m,
        args.merge.algo.into(),
        args.merge.enum_budget,
    )?;
    let report = report::plan_report(&pipeline);
    print!("{}", report.as_text());
    if let Some(path) = &args.json {
        std::fs::write(path, report.as_json()?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_query(args: QueryArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.file)
        .with_context(|| format!("reading query {}", args.file.display()))?;
    let bgp = parse_query(&text)?;
    let db = Database::load(&args.db)?;
    let opts = ExecOptions {
        planner: match args.planner {
            PlannerArg::None => Planner::None,
            PlannerArg::Distance => Planner::Distance,
        },
        parallel: args.parallel,
        ecs_prune: !args.no_ecs_prune,
    };
    let (results, explain) = execute_explain(&bgp, &db, &opts)?;
    if args.explain {
        print!("{}", report::explain_text(&explain));
    }
    print!("{}", results.to_tsv(&db.dict));
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let queries = collect_queries(&args.queries)?;
    for m in &args.m_grid {
        if !(0.0..=1.0).contains(m) {
            bail!("m grid value {m} outside [0, 1]");
        }
    }
    println!("queries: {}", queries.len());
    println!(
        "m_grid: [{}]",
        args.m_grid
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );

    let mut checks = 0u64;
    let mut mismatches = 0u64;
    if queries.is_empty() {
        println!("checks: 0");
        println!("mismatches: 0");
        return Ok(ExitCode::SUCCESS);
    }

    let base = Pipeline::from_file(
        &args.ingest.input,
        args.ingest.strict,
        &args.ingest.type_iri,
        0.0,
        MergeAlgorithm::None,
        args.enum_budget,
    )?;
    let parsed_queries: Vec<(String, raxon_core::query::Bgp)> = queries
        .iter()
        .map(|(name, text)| Ok((name.clone(), parse_query(text)?)))
        .collect::<Result<_>>()?;
    let oracle_results: Vec<_> = parsed_queries
        .iter()
        .map(|(_, bgp)| oracle_execute(bgp, base.triples(), base.dict()))
        .collect();

    for &m in &args.m_grid {
        let pipeline = base.replan(m, args.algo.into(), args.enum_budget)?;
        // Exercise the on-disk path end to end.
        let tmp = tempfile::tempdir()?;
        let db_dir = tmp.path().join("db");
        pipeline.assemble().persist(&db_dir)?;
        let db = Database::load(&db_dir)?;

        for ((name, bgp), want) in parsed_queries.iter().zip(&oracle_results) {
            for (mode, opts) in [
                ("plain", ExecOptions::new()),
                (
                    "planner",
                    ExecOptions {
                        planner: Planner::Distance,
                        ..ExecOptions::new()
                    },
                ),
                (
                    "unpruned",
                    ExecOptions {
                        ecs_prune: false,
                        ..ExecOptions::new()
                    },
                ),
            ] {
                checks += 1;
                let got = execute_explain(bgp, &db, &opts)?.0;
                if !got.multiset_eq(want) {
                    mismatches += 1;
                    println!(
                        "mismatch: query={name} m={m} mode={mode} engine_rows={} oracle_rows={}",
                        got.rows.len(),
                        want.rows.len()
                    );
                }
            }
        }
    }
    println!("checks: {checks}");
    println!("mismatches: {mismatches}");
    Ok(if mismatches == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn collect_queries(path: &PathBuf) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| Ok(e?.path()))
            .collect::<Result<_>>()?;
        entries.sort();
        for entry in entries {
            if entry.extension().is_some_and(|e| e == "rq") {
                out.push((
                    entry.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read_to_string(&entry)?,
                ));
            }
        }
    } else {
        out.push((
            path.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            std::fs::read_to_string(path)
                .with_context(|| format!("reading queries from {}", path.display()))?,
        ));
    }
    Ok(out)
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let shape = match args.shape {
        ShapeArg::Chain => LatticeShape::Chain {
            length: args.size,
        },
        ShapeArg::Diamond => LatticeShape::Diamond { width: args.size },
        ShapeArg::Bipartite => LatticeShape::Bipartite {
            non_dense: args.size,
            dense: args.dense.unwrap_or_else(|| (args.size / 2).max(1)),
        },
    };
    let config = SynthConfig {
        shape,
        base_records: args.records,
        skew: args.skew,
        link_density: args.link_density,
        multi_value_prob: args.multi_prob,
        typed: args.typed,
        seed: args.seed,
    };
    let data = synth::generate(&config);
    std::fs::write(&args.output, &data.ntriples)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("output: {}", args.output.display());
    println!("cs_layouts: {}", data.expected_cs.len());
    println!("triples: {}", data.ntriples.lines().count());

    if let Some(dir) = &args.queries {
        let parsed = raxon_core::ingest::parse_ntriples_str(&data.ntriples, true)?;
        let queries = synth::generate_queries(
            &parsed.triples,
            &parsed.dict,
            &QueryGenConfig {
                count: args.query_count,
                seed: args.query_seed,
            },
        );
        std::fs::create_dir_all(dir)?;
        for (i, q) in queries.iter().enumerate() {
            std::fs::write(dir.join(format!("q{i:03}.rq")), q)?;
        }
        println!("queries_dir: {}", dir.display());
        println!("queries: {}", queries.len());
    }
    Ok(ExitCode::SUCCESS)
}
