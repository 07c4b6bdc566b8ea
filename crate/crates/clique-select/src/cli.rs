//! Benchmark harness behind the `clique-select` binary: run one algorithm
//! on a generated instance, verify it against the oracle, append one CSV
//! row per run, and sweep the default parameter grid.
//!
//! CSV rows are integers and flags only, written in a fixed column order,
//! so identical flags reproduce byte-identical rows on any platform.

use std::io::Write as _;
use std::path::Path;

use crate::oracle::{generate, oracle_multiselect, Distribution, InstanceSpec};
use crate::rng::SplitMix64;
use crate::runtime::{CliqueConfig, CliqueState, SortMode, TraceRow};
use crate::sampling::{
    ceil_log_base, ceil_log_four_thirds, div_ceil, log_star, LogStarMode, RankSet,
};
use crate::select::{
    mom_phase_shrink_check, mom_select, multiselect, rank_of_boundary_consistency, rs_select,
    select_optimal, SelectionResult, Violation,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Mom,
    Rs,
    Opt,
    Multi,
}

impl Algo {
    pub fn label(&self) -> &'static str {
        match self {
            Algo::Mom => "mom",
            Algo::Rs => "rs",
            Algo::Opt => "opt",
            Algo::Multi => "multi",
        }
    }
}

/// Everything one run needs; a pure value, so runs are reproducible.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub algo: Algo,
    pub n: u64,
    pub p: usize,
    pub ranks: Vec<u64>,
    pub phi: u32,
    pub bandwidth: u64,
    pub sort_mode: SortMode,
    pub c_sort: u64,
    pub dist: Distribution,
    pub seed: u64,
    pub strict: bool,
    pub trace: bool,
}

impl RunSpec {
    pub fn new(algo: Algo, n: u64, p: usize, ranks: Vec<u64>) -> Self {
        Self {
            algo,
            n,
            p,
            ranks,
            phi: 1,
            bandwidth: 1,
            sort_mode: SortMode::Charged,
            c_sort: 3,
            dist: Distribution::UniformRandom,
            seed: 1,
            strict: true,
            trace: false,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub algorithm: String,
    pub n: u64,
    pub p: usize,
    pub r: usize,
    pub phi: u32,
    pub b: u64,
    pub sort_mode: String,
    pub c_sort: u64,
    pub seed: u64,
    pub rounds_total: u64,
    pub main_phases: usize,
    pub preprocess_phases: usize,
    pub max_ops_per_node: u64,
    pub correct: bool,
}

pub const CSV_HEADER: &str = "algorithm,n,p,r,phi,B,sort_mode,c_sort,seed,rounds_total,main_phases,preprocess_phases,max_ops_per_node,correct";

impl RunRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.n,
            self.p,
            self.r,
            self.phi,
            self.b,
            self.sort_mode,
            self.c_sort,
            self.seed,
            self.rounds_total,
            self.main_phases,
            self.preprocess_phases,
            self.max_ops_per_node,
            self.correct
        )
    }
}

/// Full output of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub result: SelectionResult,
    pub violations: Vec<Violation>,
    pub trace_rows: Vec<TraceRow>,
}

/// Parse a distribution flag: `uniform`, `sorted`, `reversed`, `equal`,
/// `few:<d>`, or `halves`.
pub fn parse_distribution(s: &str) -> Result<Distribution> {
    match s {
        "uniform" => Ok(Distribution::UniformRandom),
        "sorted" => Ok(Distribution::Sorted),
        "reversed" => Ok(Distribution::Reversed),
        "equal" => Ok(Distribution::AllEqualKeys),
        "halves" => Ok(Distribution::AdversarialHalves),
        other => {
            if let Some(d) = other.strip_prefix("few:") {
                let d: u64 = d
                    .parse()
                    .map_err(|_| Error::Config(format!("bad distinct-key count in `{other}`")))?;
                if d == 0 {
                    return Err(Error::Config("few:<d> needs d >= 1".into()));
                }
                Ok(Distribution::FewDistinct(d))
            } else {
                Err(Error::Config(format!("unknown distribution `{other}`")))
            }
        }
    }
}

/// Execute one run: generate, simulate, verify against the oracle, and
/// replay-check the phase log.
pub fn execute(spec: &RunSpec) -> Result<RunOutput> {
    let instance = InstanceSpec {
        n: spec.n,
        p: spec.p,
        distribution: spec.dist,
        seed: spec.seed,
    };
    let elements = generate(&instance);
    let targets = RankSet::new(spec.ranks.clone())?;
    if spec.algo != Algo::Multi && targets.len() != 1 {
        return Err(Error::Config(format!(
            "{} selects a single rank, got {}",
            spec.algo.label(),
            targets.len()
        )));
    }
    let config = CliqueConfig {
        p: spec.p,
        bandwidth: spec.bandwidth,
        sort_mode: spec.sort_mode,
        c_sort: spec.c_sort,
        strict_bandwidth: spec.strict,
    };
    let mut st = CliqueState::load_instance(elements.clone(), config)?;
    if spec.trace {
        st.enable_trace();
    }
    let result = match spec.algo {
        Algo::Mom => mom_select(&mut st, targets.ranks()[0])?,
        Algo::Rs => rs_select(&mut st, targets.ranks()[0], spec.phi)?,
        Algo::Opt => select_optimal(&mut st, targets.ranks()[0])?,
        Algo::Multi => multiselect(&mut st, &targets)?,
    };

    let expected = oracle_multiselect(&elements, &targets)?;
    let correct = result.answers == expected;
    let mut violations = Vec::new();
    if let Err(v) = mom_phase_shrink_check(&result, spec.p) {
        violations.push(v);
    }
    if let Err(v) = rank_of_boundary_consistency(&result) {
        violations.push(v);
    }

    let record = RunRecord {
        algorithm: spec.algo.label().to_string(),
        n: spec.n,
        p: spec.p,
        r: targets.len(),
        phi: spec.phi,
        b: spec.bandwidth,
        sort_mode: spec.sort_mode.label().to_string(),
        c_sort: spec.c_sort,
        seed: spec.seed,
        rounds_total: result.metrics.rounds_total,
        main_phases: result.main_phases(),
        preprocess_phases: result.preprocess_phases(),
        max_ops_per_node: result.metrics.max_ops_per_node,
        correct,
    };
    Ok(RunOutput {
        record,
        trace_rows: st.trace_rows().to_vec(),
        result,
        violations,
    })
}

/// Append one row, writing the header first when the file is new or empty.
pub fn append_csv(path: &Path, record: &RunRecord) -> std::io::Result<()> {
    let need_header = match std::fs::metadata(path) {
        Ok(meta) => meta.len() == 0,
        Err(_) => true,
    };
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if need_header {
        writeln!(f, "{CSV_HEADER}")?;
    }
    writeln!(f, "{}", record.to_csv_row())?;
    Ok(())
}

/// Write the per-round trace as tab-separated text, one line per round.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> std::io::Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&row.to_tsv());
        out.push('\n');
    }
    std::fs::write(path, out)
}

// ---------------------------------------------------------------------------
// Phase-count bounds (shared by the sweep summary and the test suites)
// ---------------------------------------------------------------------------

/// Upper bound on main-loop phases for a run of this shape.
pub fn main_phase_bound(algo: Algo, n: u64, r: usize, phi: u32) -> u32 {
    match algo {
        Algo::Mom => ceil_log_four_thirds(n) + 1,
        Algo::Rs => log_star(LogStarMode::Power, 1u64 << phi, n) + 2,
        Algo::Opt => log_star(LogStarMode::Power, 2, n) + 2,
        Algo::Multi => log_star(LogStarMode::ShiftedPower, r as u64 + 1, n) + 2,
    }
}

/// Exact preprocessing phase count an `opt` or `multi` run must execute.
pub fn expected_preprocess_phases(algo: Algo, n: u64, p: usize, r: usize) -> u32 {
    match algo {
        Algo::Opt => {
            if n > p as u64 {
                let l = log_star(LogStarMode::Power, 2, n);
                ceil_log_four_thirds(u64::from(l.max(2)))
            } else {
                0
            }
        }
        Algo::Multi if (r as u64) < n / p as u64 => {
            let base = r as u64 + 1;
            let l = log_star(LogStarMode::ShiftedPower, base, n);
            ceil_log_base(base, u64::from(l.max(2)))
        }
        _ => 0,
    }
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

pub const SWEEP_NODE_COUNTS: &[usize] = &[4, 8, 16, 32];
pub const SWEEP_N_FACTORS: &[u64] = &[1, 4, 16];
pub const SWEEP_MULTI_RANK_COUNTS: &[usize] = &[2, 8];
pub const SWEEP_PHIS: &[u32] = &[1, 2, 4];

pub fn all_distributions() -> Vec<Distribution> {
    vec![
        Distribution::UniformRandom,
        Distribution::Sorted,
        Distribution::Reversed,
        Distribution::AllEqualKeys,
        Distribution::FewDistinct(16),
        Distribution::AdversarialHalves,
    ]
}

/// `r` ranks spread evenly over `1..=n`.
pub fn evenly_spaced_ranks(n: u64, r: usize) -> Vec<u64> {
    (1..=r as u64)
        .map(|i| div_ceil(i * n, r as u64 + 1))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub repeats: u32,
    pub seed_base: u64,
    pub bandwidth: u64,
    pub sort_mode: SortMode,
    pub c_sort: u64,
    pub strict: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            repeats: 3,
            seed_base: 1,
            bandwidth: 1,
            sort_mode: SortMode::Charged,
            c_sort: 3,
            strict: true,
        }
    }
}

/// One executed sweep cell (the heavyweight phase log is dropped).
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub spec: RunSpec,
    pub record: RunRecord,
    pub violations: Vec<Violation>,
}

/// The full grid, in deterministic execution order. Instance seeds and
/// single-target ranks are drawn from a generator seeded with `seed_base`,
/// so the whole sweep is a pure function of its options.
pub fn sweep_specs(opts: &SweepOptions) -> Vec<RunSpec> {
    let mut stream = SplitMix64::new(opts.seed_base);
    let mut specs = Vec::new();
    let mut push = |spec: RunSpec| specs.push(spec);
    for _rep in 0..opts.repeats {
        for &p in SWEEP_NODE_COUNTS {
            for &factor in SWEEP_N_FACTORS {
                let n = factor * (p as u64) * (p as u64);
                for dist in all_distributions() {
                    let base = |algo: Algo, ranks: Vec<u64>, phi: u32, seed: u64| {
                        let mut s = RunSpec::new(algo, n, p, ranks);
                        s.phi = phi;
                        s.bandwidth = opts.bandwidth;
                        s.sort_mode = opts.sort_mode;
                        s.c_sort = opts.c_sort;
                        s.dist = dist;
                        s.seed = seed;
                        s.strict = opts.strict;
                        s
                    };
                    let k = 1 + stream.next_below(n);
                    let seed = stream.next_u64();
                    push(base(Algo::Mom, vec![k], 1, seed));
                    for &phi in SWEEP_PHIS {
                        let k = 1 + stream.next_below(n);
                        let seed = stream.next_u64();
                        push(base(Algo::Rs, vec![k], phi, seed));
                    }
                    let k = 1 + stream.next_below(n);
                    let seed = stream.next_u64();
                    push(base(Algo::Opt, vec![k], 1, seed));
                    for &r in SWEEP_MULTI_RANK_COUNTS {
                        let seed = stream.next_u64();
                        push(base(Algo::Multi, evenly_spaced_ranks(n, r), 1, seed));
                    }
                }
            }
        }
    }
    specs
}

/// Execute the whole grid, invoking `on_run` after each cell.
pub fn run_sweep(opts: &SweepOptions, mut on_run: impl FnMut(&SweepRun)) -> Result<Vec<SweepRun>> {
    let mut runs = Vec::new();
    for spec in sweep_specs(opts) {
        let output = execute(&spec)?;
        let run = SweepRun {
            spec,
            record: output.record,
            violations: output.violations,
        };
        on_run(&run);
        runs.push(run);
    }
    Ok(runs)
}

/// One human-readable summary line per run: measured phases against the
/// predicted bound, and per-node work against the `n/p * log2(r+1)` budget.
pub fn summarize(run: &SweepRun) -> String {
    let spec = &run.spec;
    let rec = &run.record;
    let bound = main_phase_bound(spec.algo, spec.n, rec.r, spec.phi);
    let budget = (spec.n as f64 / spec.p as f64) * ((rec.r as f64 + 1.0).log2());
    let ratio = rec.max_ops_per_node as f64 / budget;
    format!(
        "{:<5} p={:<2} n={:<6} r={:<2} phi={} dist={:<8} seed={:>20} phases={:>2} bound={:>2} pre={:>2} ops_ratio={:>7.2} correct={}",
        rec.algorithm,
        spec.p,
        spec.n,
        rec.r,
        spec.phi,
        spec.dist.label(),
        spec.seed,
        rec.main_phases,
        bound,
        rec.preprocess_phases,
        ratio,
        rec.correct
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_flags_parse() {
        assert_eq!(
            parse_distribution("uniform").unwrap(),
            Distribution::UniformRandom
        );
        assert_eq!(
            parse_distribution("few:16").unwrap(),
            Distribution::FewDistinct(16)
        );
        assert!(parse_distribution("few:0").is_err());
        assert!(parse_distribution("zipf").is_err());
    }

    #[test]
    fn evenly_spaced_ranks_are_distinct_and_in_range() {
        for n in [16u64, 100, 65536] {
            for r in [1usize, 2, 8] {
                let ranks = evenly_spaced_ranks(n, r);
                assert_eq!(ranks.len(), r);
                assert!(ranks.windows(2).all(|w| w[0] < w[1]));
                assert!(*ranks.last().unwrap() <= n);
                assert!(ranks[0] >= 1);
            }
        }
    }

    #[test]
    fn execute_small_opt_run_is_correct() {
        let spec = RunSpec::new(Algo::Opt, 256, 4, vec![128]);
        let output = execute(&spec).unwrap();
        assert!(output.record.correct);
        assert!(output.violations.is_empty());
        assert_eq!(output.record.r, 1);
    }

    #[test]
    fn execute_rejects_multiple_ranks_for_single_selection() {
        let spec = RunSpec::new(Algo::Mom, 64, 4, vec![1, 2]);
        assert!(matches!(execute(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn csv_rows_are_stable() {
        let spec = RunSpec::new(Algo::Rs, 256, 4, vec![100]);
        let a = execute(&spec).unwrap().record.to_csv_row();
        let b = execute(&spec).unwrap().record.to_csv_row();
        assert_eq!(a, b);
        assert_eq!(a.split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn sweep_specs_are_deterministic_and_cover_the_grid() {
        let opts = SweepOptions::default();
        let a = sweep_specs(&opts);
        let b = sweep_specs(&opts);
        assert_eq!(a.len(), b.len());
        // 4 node counts x 3 sizes x 6 distributions x 7 runs per cell,
        // times 3 repeats.
        assert_eq!(a.len(), 4 * 3 * 6 * 7 * 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.ranks, y.ranks);
        }
    }
}
