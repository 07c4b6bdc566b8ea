use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clique_select::cli::{
    self, append_csv, execute, main_phase_bound, parse_distribution, run_sweep, summarize,
    write_trace, Algo, RunSpec, SweepOptions,
};
use clique_select::runtime::SortMode;
use clique_select::Error;

/// Congested-clique selection benchmark: simulate the algorithms on
/// generated instances, verify every answer against a sequential oracle,
/// and record rounds, bandwidth, and per-node work.
#[derive(Parser)]
#[command(name = "clique-select", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one generated instance.
    Run(Box<RunArgs>),
    /// Run the default benchmark grid and print a summary table.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    /// Parallel median of medians.
    Mom,
    /// Selection by regular sampling.
    Rs,
    /// Preprocessed, round-optimal selection.
    Opt,
    /// Multiple selection by regular sampling.
    Multi,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Mom => Algo::Mom,
            AlgoArg::Rs => Algo::Rs,
            AlgoArg::Opt => Algo::Opt,
            AlgoArg::Multi => Algo::Multi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SortModeArg {
    /// Charge the sort primitive a fixed round cost.
    Charged,
    /// Simulate the sort as broadcast plus local sorting.
    Explicit,
}

impl From<SortModeArg> for SortMode {
    fn from(m: SortModeArg) -> Self {
        match m {
            SortModeArg::Charged => SortMode::Charged,
            SortModeArg::Explicit => SortMode::Explicit,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Input set size.
    #[arg(long)]
    n: u64,
    /// Node count.
    #[arg(long)]
    p: usize,
    /// Single target rank (1-based).
    #[arg(long, conflicts_with = "ranks")]
    k: Option<u64>,
    /// Comma-separated target ranks (1-based).
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<u64>>,
    /// Inefficiency exponent for `rs` (sampling base 2^phi).
    #[arg(long, default_value_t = 1)]
    phi: u32,
    /// Words per directed link per round.
    #[arg(long, default_value_t = 1)]
    bandwidth: u64,
    #[arg(long, value_enum, default_value_t = SortModeArg::Charged)]
    sort_mode: SortModeArg,
    /// Rounds charged per distributed sort in charged mode.
    #[arg(long, default_value_t = 3)]
    c_sort: u64,
    /// Key distribution: uniform | sorted | reversed | equal | few:<d> | halves.
    #[arg(long, default_value = "uniform")]
    dist: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Error out if any link ever exceeds the bandwidth (instead of only
    /// recording the excess).
    #[arg(long)]
    strict: bool,
    /// Append one record to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the per-round trace (TSV) to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    repeats: u32,
    #[arg(long, default_value_t = 1)]
    seed_base: u64,
    #[arg(long, default_value_t = 1)]
    bandwidth: u64,
    #[arg(long, value_enum, default_value_t = SortModeArg::Charged)]
    sort_mode: SortModeArg,
    #[arg(long, default_value_t = 3)]
    c_sort: u64,
    /// Relax the per-link bandwidth check.
    #[arg(long)]
    no_strict: bool,
    /// Append all records to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Suppress the per-cell summary lines (the final totals always print).
    #[arg(long)]
    quiet: bool,
}

const EXIT_OK: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run_command(*args),
        Command::Sweep(args) => sweep_command(args),
    }
}

fn run_command(args: RunArgs) -> ExitCode {
    let dist = match parse_distribution(&args.dist) {
        Ok(d) => d,
        Err(e) => return usage_error(&e.to_string()),
    };
    let ranks = match (args.k, args.ranks) {
        (Some(k), None) => vec![k],
        (None, Some(ranks)) => ranks,
        (None, None) => return usage_error("one of --k or --ranks is required"),
        (Some(_), Some(_)) => unreachable!("clap rejects --k with --ranks"),
    };
    if ranks.iter().any(|&k| k == 0 || k > args.n) {
        return usage_error(&format!("ranks must lie in 1..={}", args.n));
    }
    if matches!(args.algo, AlgoArg::Rs) && args.n < args.p as u64 {
        return usage_error(&format!(
            "rs needs n >= p (got n={} < p={})",
            args.n, args.p
        ));
    }

    let spec = RunSpec {
        algo: args.algo.into(),
        n: args.n,
        p: args.p,
        ranks,
        phi: args.phi,
        bandwidth: args.bandwidth,
        sort_mode: args.sort_mode.into(),
        c_sort: args.c_sort,
        dist,
        seed: args.seed,
        strict: args.strict,
        trace: args.trace.is_some(),
    };

    let output = match execute(&spec) {
        Ok(o) => o,
        Err(e @ (Error::Config(_) | Error::Instance(_) | Error::Rank { .. })) => {
            return usage_error(&e.to_string());
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };

    for (rank, elem) in &output.result.answers {
        println!(
            "rank {rank}: key {} (tag {}:{})",
            elem.key, elem.origin, elem.seq
        );
    }
    println!(
        "rounds={} main_phases={} (bound {}) preprocess_phases={} max_ops_per_node={} correct={}",
        output.record.rounds_total,
        output.record.main_phases,
        main_phase_bound(spec.algo, spec.n, output.record.r, spec.phi),
        output.record.preprocess_phases,
        output.record.max_ops_per_node,
        output.record.correct
    );

    if let Some(path) = &args.csv {
        if let Err(e) = append_csv(path, &output.record) {
            eprintln!("cannot write CSV {}: {e}", path.display());
            return ExitCode::from(EXIT_FAILED);
        }
    }
    if let Some(path) = &args.trace {
        if let Err(e) = write_trace(path, &output.trace_rows) {
            eprintln!("cannot write trace {}: {e}", path.display());
            return ExitCode::from(EXIT_FAILED);
        }
    }

    for v in &output.violations {
        eprintln!("{v}");
    }
    if !output.violations.is_empty() || !output.record.correct {
        if !output.record.correct {
            eprintln!("answer mismatch against the oracle");
        }
        return ExitCode::from(EXIT_FAILED);
    }
    ExitCode::from(EXIT_OK)
}

fn sweep_command(args: SweepArgs) -> ExitCode {
    let opts = SweepOptions {
        repeats: args.repeats,
        seed_base: args.seed_base,
        bandwidth: args.bandwidth,
        sort_mode: args.sort_mode.into(),
        c_sort: args.c_sort,
        strict: !args.no_strict,
    };
    let csv = args.csv.clone();
    let quiet = args.quiet;
    let mut csv_error = None;
    let runs = match run_sweep(&opts, |run| {
        if !quiet {
            println!("{}", summarize(run));
        }
        if let Some(path) = &csv {
            if let Err(e) = append_csv(path, &run.record) {
                csv_error = Some(format!("cannot write CSV {}: {e}", path.display()));
            }
        }
    }) {
        Ok(runs) => runs,
        Err(e) => {
            eprintln!("sweep failed: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    if let Some(msg) = csv_error {
        eprintln!("{msg}");
        return ExitCode::from(EXIT_FAILED);
    }

    let total = runs.len();
    let correct = runs.iter().filter(|r| r.record.correct).count();
    let violations: usize = runs.iter().map(|r| r.violations.len()).sum();
    let over_bound = runs
        .iter()
        .filter(|r| {
            r.record.main_phases as u32
                > main_phase_bound(r.spec.algo, r.spec.n, r.record.r, r.spec.phi)
        })
        .count();

    println!("\nsweep summary ({total} runs)");
    println!("  correct:            {correct}/{total}");
    println!("  invariant failures: {violations}");
    println!("  phase-bound misses: {over_bound}");
    for algo in [Algo::Mom, Algo::Rs, Algo::Opt, Algo::Multi] {
        let rows: Vec<&cli::SweepRun> = runs.iter().filter(|r| r.spec.algo == algo).collect();
        if rows.is_empty() {
            continue;
        }
        let worst = rows
            .iter()
            .map(|r| {
                let budget =
                    (r.spec.n as f64 / r.spec.p as f64) * ((r.record.r as f64 + 1.0).log2());
                r.record.max_ops_per_node as f64 / budget
            })
            .fold(0.0f64, f64::max);
        let max_phases = rows.iter().map(|r| r.record.main_phases).max().unwrap_or(0);
        println!(
            "  {:<5} runs={:<4} max_main_phases={:<3} worst ops/(n/p*log2(r+1))={:.2}",
            algo.label(),
            rows.len(),
            max_phases,
            worst
        );
    }

    if correct == total && violations == 0 {
        ExitCode::from(EXIT_OK)
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}
