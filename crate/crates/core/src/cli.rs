//! Command drivers and run reports: run a circuit file, run the factoring
//! pipeline, or time the built-in benchmark suites.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::algorithms::{
    gen_adder, gen_hadamard_sweep, gen_qft, run_shor, PeriodResult, ShorParams,
};
use crate::circuit::{parse_program, prepare, Instruction, Program};
use crate::engine::{execute_program, RunOptions, RunOutcome};
use crate::error::{Error, Result};
use crate::layout::EvictLowestPositions;
use crate::transport::{ExchangeStats, RankTopology, DEFAULT_TIMEOUT};

/// Which times go into the report: everything, or gate work only (the
/// per-gate figure excludes the measurement stage).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    #[default]
    WithMeasurement,
    GatesOnly,
}

/// Flag bundle shared by the commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Rank count; falls back to the program's declared count, then 1.
    pub n_ranks: Option<usize>,
    pub k_max: usize,
    pub chunk_count: usize,
    pub seed: u64,
    pub sample_count: usize,
    pub timing: TimingMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_ranks: None,
            k_max: 1,
            chunk_count: 4,
            seed: 0,
            sample_count: 0,
            timing: TimingMode::WithMeasurement,
        }
    }
}

/// Communication totals for one run.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ExchangeSummary {
    pub amplitudes_sent_total: u64,
    pub messages_sent_total: u64,
    pub per_rank: Vec<ExchangeStats>,
}

impl ExchangeSummary {
    fn from_stats(per_rank: &[ExchangeStats]) -> Self {
        ExchangeSummary {
            amplitudes_sent_total: per_rank.iter().map(|s| s.amplitudes_sent).sum(),
            messages_sent_total: per_rank.iter().map(|s| s.messages_sent).sum(),
            per_rank: per_rank.to_vec(),
        }
    }
}

/// Everything one run produced. Identical inputs and seed give identical
/// payloads except for the two timing fields.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub workload: String,
    pub l: usize,
    pub n_ranks: usize,
    pub k_max: usize,
    pub chunk_count: usize,
    pub seed: u64,
    pub timing_mode: TimingMode,
    pub n_ops: usize,
    pub wall_time_seconds: f64,
    /// Thread CPU time summed over ranks.
    pub cpu_time_seconds: f64,
    pub final_norm: f64,
    pub expectations: BTreeMap<u32, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<u64>>,
    pub exchange: ExchangeSummary,
}

impl RunReport {
    fn new(workload: &str, outcome: &RunOutcome, cfg: &RunConfig) -> Self {
        let (wall, cpu) = match cfg.timing {
            TimingMode::WithMeasurement => (
                outcome.wall_seconds,
                outcome.gate_cpu_seconds + outcome.measure_cpu_seconds,
            ),
            TimingMode::GatesOnly => (
                (outcome.wall_seconds - outcome.measure_wall_seconds).max(0.0),
                outcome.gate_cpu_seconds,
            ),
        };
        RunReport {
            workload: workload.to_string(),
            l: outcome.l,
            n_ranks: outcome.n_ranks,
            k_max: cfg.k_max,
            chunk_count: cfg.chunk_count,
            seed: cfg.seed,
            timing_mode: cfg.timing,
            n_ops: outcome.n_ops,
            wall_time_seconds: wall,
            cpu_time_seconds: cpu,
            final_norm: outcome.final_norm,
            expectations: outcome.expectations.clone(),
            samples: outcome.samples.clone(),
            exchange: ExchangeSummary::from_stats(&outcome.per_rank_stats),
        }
    }

    /// Ranks times elapsed over CPU time; near one when communication is
    /// cheap relative to kernel work.
    pub fn parallel_ratio(&self) -> f64 {
        self.n_ranks as f64 * self.wall_time_seconds / self.cpu_time_seconds.max(1e-12)
    }

    /// CPU seconds per rank per operation.
    pub fn cpu_per_rank_op(&self) -> f64 {
        self.cpu_time_seconds / (self.n_ranks as f64 * self.n_ops.max(1) as f64)
    }

    /// Human-readable block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "workload: {}  L={}  N={}  K={}  chunks={}  seed={}",
            self.workload, self.l, self.n_ranks, self.k_max, self.chunk_count, self.seed
        );
        let _ = writeln!(
            out,
            "ops: {}   t_E: {:.3} s   t_CPU: {:.3} s   norm: {:.12}",
            self.n_ops, self.wall_time_seconds, self.cpu_time_seconds, self.final_norm
        );
        let _ = writeln!(
            out,
            "exchange: {} amplitudes, {} messages total",
            self.exchange.amplitudes_sent_total, self.exchange.messages_sent_total
        );
        if !self.expectations.is_empty() {
            let _ = writeln!(out, "expectations:");
            for (q, v) in &self.expectations {
                let _ = writeln!(out, "  <Q_{q}> = {v:.6}");
            }
        }
        if let Some(samples) = &self.samples {
            let _ = writeln!(out, "samples: {samples:?}");
        }
        out
    }
}

/// Resolve the rank count: explicit flag, then the program's declaration,
/// then a single rank.
fn resolve_ranks(cfg: &RunConfig, program: &Program) -> usize {
    cfg.n_ranks.or(program.declared_ranks()).unwrap_or(1)
}

fn run_options(cfg: &RunConfig, n_ranks: usize) -> RunOptions {
    RunOptions {
        n_ranks,
        k_max: cfg.k_max,
        chunk_count: cfg.chunk_count,
        seed: cfg.seed,
        sample_count: cfg.sample_count,
        timeout: DEFAULT_TIMEOUT,
        gather_state: false,
    }
}

/// Run an already-parsed program: compile it for the chosen rank count if
/// it lacks swap commands, validate locality, execute, and report.
pub fn run_program_report(workload: &str, program: &Program, cfg: &RunConfig) -> Result<RunReport> {
    let n_ranks = resolve_ranks(cfg, program);
    let topology = RankTopology::new(program.l(), n_ranks)?;
    let prepared = prepare(program, topology.m(), cfg.k_max, &EvictLowestPositions)?;
    let outcome = execute_program(&prepared, &run_options(cfg, n_ranks))?;
    Ok(RunReport::new(workload, &outcome, cfg))
}

/// `run` command: execute a `.qc` file.
pub fn cmd_run(path: &Path, cfg: &RunConfig) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let program = parse_program(&text)?;
    run_program_report(&path.display().to_string(), &program, cfg)
}

/// `shor` command: factor `g` with base `y`.
pub fn cmd_shor(g: u64, y: u64, cfg: &RunConfig) -> Result<(RunReport, PeriodResult)> {
    let params = ShorParams::new(g, y, None)?;
    let n_ranks = cfg.n_ranks.unwrap_or(1);
    let outcome = run_shor(&params, &run_options(cfg, n_ranks))?;
    let workload = format!("shor G={g} y={y}");
    let report = match &outcome.run {
        Some(run) => RunReport::new(&workload, run, cfg),
        // The base shared a factor with G; nothing was simulated.
        None => RunReport {
            workload,
            l: params.l(),
            n_ranks,
            k_max: cfg.k_max,
            chunk_count: cfg.chunk_count,
            seed: cfg.seed,
            timing_mode: cfg.timing,
            n_ops: 0,
            wall_time_seconds: 0.0,
            cpu_time_seconds: 0.0,
            final_norm: 1.0,
            expectations: BTreeMap::new(),
            samples: None,
            exchange: ExchangeSummary::from_stats(&[]),
        },
    };
    Ok((report, outcome.period))
}

/// Render the period-analysis half of a `shor` run.
pub fn render_period(g: u64, y: u64, period: &PeriodResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "base y = {y}, modulus G = {g}");
    if !period.expectations.is_empty() {
        let _ = writeln!(out, "transform-bit expectations:");
        for (i, v) in period.expectations.iter().enumerate() {
            let _ = writeln!(out, "  <Q_{i}> = {v:.3}");
        }
    }
    if !period.samples_k.is_empty() {
        let _ = writeln!(out, "sampled k: {:?}", period.samples_k);
    }
    match (period.r, period.s) {
        (Some(r), Some(s)) => {
            let _ = writeln!(out, "period r = {r}   s = {s}");
        }
        _ => {
            let _ = writeln!(out, "period: not recovered");
        }
    }
    match (&period.factors, &period.retry) {
        (Some((p, q)), _) => {
            let _ = writeln!(out, "factors: {p} x {q}");
        }
        (None, Some(reason)) => {
            let _ = writeln!(out, "retry with another base: {reason:?}");
        }
        (None, None) => {}
    }
    out
}

/// The built-in benchmark workloads.
pub const BENCH_SUITES: &[&str] = &[
    "hadamard",
    "qft",
    "adder-3x11",
    "adder-2x17",
    "adder-5x7",
    "adder-3x12",
];

/// Generate one suite's logical program. `l` sizes the hadamard and qft
/// suites (default 20); the adder suites have fixed shapes.
pub fn bench_program(suite: &str, l: Option<usize>) -> Result<Program> {
    match suite {
        "hadamard" => gen_hadamard_sweep(l.unwrap_or(20)),
        "qft" => {
            let l = l.unwrap_or(20);
            let mut p = Program::new(l)?;
            for g in gen_qft(&(0..l).collect::<Vec<_>>()) {
                p.gate(g)?;
            }
            p.push(Instruction::BeginMeasurement)?;
            p.push(Instruction::DoMeasurement((0..l).collect()))?;
            p.push(Instruction::EndMeasurement)?;
            Ok(p)
        }
        "adder-3x11" => gen_adder(11, &[292, 585, 1170]),
        "adder-2x17" => gen_adder(17, &[26214, 104857]),
        "adder-5x7" => gen_adder(7, &[7, 9, 19, 35, 65]),
        "adder-3x12" => gen_adder(12, &[781, 1054, 3296]),
        other => Err(Error::Config(format!(
            "unknown suite '{other}'; expected one of {BENCH_SUITES:?}"
        ))),
    }
}

/// `bench` command: run one suite over a list of rank counts and report a
/// row per configuration.
pub fn cmd_bench(
    suite: &str,
    n_ranks_list: &[usize],
    l: Option<usize>,
    cfg: &RunConfig,
) -> Result<Vec<RunReport>> {
    if n_ranks_list.is_empty() {
        return Err(Error::Config("empty rank list".into()));
    }
    let program = bench_program(suite, l)?;
    let mut reports = Vec::with_capacity(n_ranks_list.len());
    for &n in n_ranks_list {
        let cfg_n = RunConfig {
            n_ranks: Some(n),
            ..cfg.clone()
        };
        reports.push(run_program_report(suite, &program, &cfg_n)?);
    }
    Ok(reports)
}

/// Table with the scaling metrics per configuration.
pub fn render_bench_table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>3} {:>5} {:>6} {:>10} {:>10} {:>12} {:>14}",
        "suite", "L", "N", "N_O", "t_E [s]", "t_CPU [s]", "N*t_E/t_CPU", "t_CPU/(N*N_O)"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<12} {:>3} {:>5} {:>6} {:>10.3} {:>10.3} {:>12.3} {:>14.6}",
            r.workload,
            r.l,
            r.n_ranks,
            r.n_ops,
            r.wall_time_seconds,
            r.cpu_time_seconds,
            r.parallel_ratio(),
            r.cpu_per_rank_op(),
        );
    }
    out
}

/// Write a machine-readable report file.
pub fn write_report_file<T: Serialize>(path: &Path, payload: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(payload)
        .map_err(|e| Error::Io(format!("serializing report: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
