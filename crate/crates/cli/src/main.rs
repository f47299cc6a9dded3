//! `symplan`: generate, split, solve, validate, evaluate and convert
//! classical planning tasks.
//!
//! Exit codes: 0 on success, 1 on usage or I/O errors, 2 when a task is
//! unsolvable or a search or generation limit is hit.

mod input;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use symplan_core::codec::{encode_plan, encode_task};
use symplan_core::generators::GenerateError;
use symplan_core::harness::{read_jsonl, split_indices, write_jsonl, SplitMode};
use symplan_core::pddl::{emit_domain, emit_problem_with, InitOrder};
use symplan_core::planner::{astar_plan_with, LimitKind};
use symplan_core::{
    build_dataset, classify_plan, evaluate, ground_task, BleuMode, Candidate, DatasetRecord, DomainTag,
    GeneratorConfig, Heuristic, SearchOptions, SearchOutcome, SplitSpec,
};

use input::TaskArgs;

const EXIT_UNSOLVED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "symplan", version, about = "Classical planning corpus and evaluation toolkit")]
struct Cli {
    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a corpus of solved instances as JSONL.
    Generate(GenerateArgs),
    /// Write train/test JSONL files for each fold or repeat.
    Split(SplitArgs),
    /// Solve one task optimally.
    Solve(SolveArgs),
    /// Classify a plan against a task and print the outcome as JSON.
    Validate(ValidateArgs),
    /// Score a candidates file against a test corpus.
    Evaluate(EvaluateArgs),
    /// Convert between PDDL files and the linearized task string.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Domain tag: bw, hn, gr or dl.
    #[arg(long)]
    domain: DomainTag,
    /// Number of unique solved instances.
    #[arg(long)]
    count: usize,
    /// Corpus seed.
    #[arg(long, env = "SYMPLAN_SEED", default_value_t = 0)]
    seed: u64,
    /// Parameter range override, e.g. `blocks=3..6`. Repeatable.
    #[arg(long = "range", value_name = "NAME=LO..HI")]
    ranges: Vec<String>,
    /// Share of hanoi instances that move a full tower.
    #[arg(long)]
    hanoi_tower_share: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Corpus JSONL.
    #[arg(long)]
    corpus: PathBuf,
    /// Directory receiving `fold<k>/train.jsonl` and `fold<k>/test.jsonl`.
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 5, conflicts_with = "repeats")]
    folds: usize,
    /// Independent random splits instead of folds.
    #[arg(long)]
    repeats: Option<usize>,
    /// Training share for a single split or for repeats.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Shuffle seed.
    #[arg(long, env = "SYMPLAN_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// lmcut, hmax or blind.
    #[arg(long, default_value = "lmcut")]
    heuristic: Heuristic,
    /// Expansion cap (default: 5000000).
    #[arg(long)]
    max_expansions: Option<u64>,
    /// Wall-clock cap in seconds (default: 60).
    #[arg(long)]
    max_seconds: Option<f64>,
    /// Disable stubborn-set pruning.
    #[arg(long)]
    no_pruning: bool,
    /// Disable symmetry reduction.
    #[arg(long)]
    no_symmetry: bool,
}

impl SearchArgs {
    fn options(&self) -> SearchOptions {
        let d = SearchOptions::default();
        SearchOptions {
            max_expansions: self.max_expansions.unwrap_or(d.max_expansions),
            max_seconds: self.max_seconds.unwrap_or(d.max_seconds),
            stubborn_sets: !self.no_pruning,
            symmetry: !self.no_symmetry,
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Print a JSON object instead of the bare plan.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Plan text, actions separated by commas.
    #[arg(long, conflicts_with = "plan_file")]
    plan: Option<String>,
    /// File holding the plan text.
    #[arg(long)]
    plan_file: Option<PathBuf>,
    /// Optimal cost; enables the optimality flag on valid plans.
    #[arg(long)]
    reference_cost: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Test corpus JSONL.
    #[arg(long)]
    corpus: PathBuf,
    /// Candidates JSONL with `{id, plan}` lines.
    #[arg(long)]
    candidates: PathBuf,
    /// Report JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance outcomes JSONL output.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// BLEU aggregation: corpus or sentence.
    #[arg(long, default_value = "corpus")]
    bleu: BleuMode,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// PDDL domain and problem to a task string.
    #[arg(long, conflicts_with = "to_pddl", required_unless_present = "to_pddl")]
    to_linearized: bool,
    /// Task string to PDDL domain and problem.
    #[arg(long)]
    to_pddl: bool,
    #[command(flatten)]
    task: TaskArgs,
    /// Output file for the linearized string.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output file for the domain PDDL.
    #[arg(long, requires = "out_problem")]
    out_domain: Option<PathBuf>,
    /// Output file for the problem PDDL.
    #[arg(long, requires = "out_domain")]
    out_problem: Option<PathBuf>,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing stdout")
        }
    }
}

fn parse_range(spec: &str) -> Result<(String, u32, u32)> {
    let (name, bounds) = spec.split_once('=').with_context(|| format!("range '{spec}' is not NAME=LO..HI"))?;
    let (lo, hi) = bounds.split_once("..").unwrap_or((bounds, bounds));
    let parse = |v: &str| v.trim().parse::<u32>().with_context(|| format!("bad bound '{v}' in range '{spec}'"));
    Ok((name.trim().to_string(), parse(lo)?, parse(hi)?))
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode> {
    let mut cfg = GeneratorConfig::new(args.domain, args.count, args.seed);
    for spec in &args.ranges {
        let (name, lo, hi) = parse_range(spec)?;
        cfg = cfg.with_range(&name, lo, hi)?;
    }
    if let Some(share) = args.hanoi_tower_share {
        cfg.hanoi_tower_share = share;
    }
    let records = match build_dataset(&cfg) {
        Ok(r) => r,
        Err(e @ GenerateError::Exhausted { .. }) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_UNSOLVED));
        }
        Err(e) => return Err(e.into()),
    };
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_text(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_split(args: &SplitArgs) -> Result<ExitCode> {
    let corpus: Vec<DatasetRecord> = read_jsonl(&args.corpus)?;
    let spec = match args.repeats {
        Some(n) => SplitSpec { train_fraction: args.train_fraction, folds: n, seed: args.seed, mode: SplitMode::Repeats },
        None => SplitSpec { train_fraction: args.train_fraction, folds: args.folds, seed: args.seed, mode: SplitMode::Folds },
    };
    let folds = split_indices(corpus.len(), &spec)?;
    for (k, fold) in folds.iter().enumerate() {
        let dir = args.out_dir.join(format!("fold{k}"));
        let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
        write_jsonl(&dir.join("train.jsonl"), &pick(&fold.train))?;
        write_jsonl(&dir.join("test.jsonl"), &pick(&fold.test))?;
        eprintln!("fold{k}: {} train, {} test", fold.train.len(), fold.test.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let (dom, prob) = args.task.load()?;
    let task = ground_task(&dom, &prob)?;
    let r = astar_plan_with(&task, args.search.heuristic, &args.search.options(), |_, _, _| {});
    match &r.outcome {
        SearchOutcome::Solved { plan, cost, expansions } => {
            let text = encode_plan(plan).rendered;
            if args.json {
                let v = serde_json::json!({
                    "plan": text,
                    "cost": cost,
                    "expansions": expansions,
                    "wall_time": r.wall_time,
                });
                println!("{v}");
            } else {
                println!("{text}");
                eprintln!("cost {cost}, {expansions} expansions, {:.3}s", r.wall_time);
            }
            Ok(ExitCode::SUCCESS)
        }
        SearchOutcome::Unsolvable => {
            eprintln!("unsolvable");
            Ok(ExitCode::from(EXIT_UNSOLVED))
        }
        SearchOutcome::ResourceLimit(kind) => {
            let what = match kind {
                LimitKind::Expansions => "expansion",
                LimitKind::Time => "time",
                LimitKind::States => "state",
            };
            eprintln!("resource limit: {what} limit reached");
            Ok(ExitCode::from(EXIT_UNSOLVED))
        }
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let plan = match (&args.plan, &args.plan_file) {
        (Some(p), _) => p.clone(),
        (None, Some(f)) => input::read(f)?,
        (None, None) => bail!("no plan given: pass --plan or --plan-file"),
    };
    let (dom, prob) = args.task.load()?;
    let task = ground_task(&dom, &prob)?;
    let outcome = classify_plan(&task, plan.trim(), args.reference_cost);
    println!("{}", serde_json::to_string(&outcome)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let corpus: Vec<DatasetRecord> = read_jsonl(&args.corpus)?;
    let candidates: Vec<Candidate> = read_jsonl(&args.candidates)?;
    let eval = evaluate(&corpus, &candidates, args.bleu)?;
    if !eval.unmatched_candidates.is_empty() {
        eprintln!("warning: {} candidate ids not in the corpus were ignored", eval.unmatched_candidates.len());
    }
    print!("{}", eval.report.to_table());
    if let Some(p) = &args.out {
        let json = serde_json::to_string_pretty(&eval.report)? + "\n";
        fs::write(p, json).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.instances {
        write_jsonl(p, &eval.instances)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_convert(args: &ConvertArgs) -> Result<ExitCode> {
    let (dom, prob) = args.task.load()?;
    if args.to_linearized {
        let text = encode_task(&dom, &prob).rendered + "\n";
        write_text(args.out.as_deref(), &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    // Source order keeps linearized -> PDDL -> linearized a fixpoint.
    let domain_text = emit_domain(&dom);
    let problem_text = emit_problem_with(&prob, InitOrder::Source);
    match (&args.out_domain, &args.out_problem) {
        (Some(d), Some(p)) => {
            write_text(Some(d), &domain_text)?;
            write_text(Some(p), &problem_text)?;
        }
        _ => write_text(None, &format!("{domain_text}\n{problem_text}"))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Split(a) => cmd_split(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
