//! Per-rank program execution and the run orchestrator.
//!
//! A [`Session`] owns one rank's shard and layout copy and steps through
//! instructions: gates run as local kernels, swap commands turn into
//! pairwise block exchanges, measurement lines reduce per-qubit
//! expectations across ranks. [`execute_program`] spawns one session per
//! rank and merges the per-rank results.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{phase_of_k, GateOp, Instruction, Program};
use crate::error::{Error, Result};
use crate::layout::{ExchangePlan, QubitPermutation};
use crate::statevec::{init_basis_state, Gate2x2, StateShard};
use crate::transport::{run_spmd, ExchangeStats, RankCtx, RankTopology, DEFAULT_TIMEOUT};

/// Global norm must stay within this of one after every measurement block.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Sampling refuses to draw from a state whose norm drifted further than
/// this from one.
pub const SAMPLE_NORM_TOLERANCE: f64 = 1e-6;

/// Knobs for one run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub n_ranks: usize,
    pub k_max: usize,
    pub chunk_count: usize,
    pub seed: u64,
    pub sample_count: usize,
    pub timeout: Duration,
    /// Collect the full state vector on return; only sensible at small L.
    pub gather_state: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n_ranks: 1,
            k_max: 1,
            chunk_count: 4,
            seed: 0,
            sample_count: 0,
            timeout: DEFAULT_TIMEOUT,
            gather_state: false,
        }
    }
}

/// Merged result of an SPMD run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub l: usize,
    pub n_ranks: usize,
    pub n_ops: usize,
    /// Expectation value per measured qubit.
    pub expectations: BTreeMap<u32, f64>,
    pub samples: Option<Vec<u64>>,
    pub per_rank_stats: Vec<ExchangeStats>,
    /// Thread CPU time spent in gate kernels and exchanges, summed over ranks.
    pub gate_cpu_seconds: f64,
    /// Thread CPU time spent measuring, summed over ranks.
    pub measure_cpu_seconds: f64,
    /// Wall time of the whole run.
    pub wall_seconds: f64,
    /// Rank 0's wall time inside measurement lines; subtract from
    /// `wall_seconds` for gate-only elapsed time.
    pub measure_wall_seconds: f64,
    pub final_norm: f64,
    /// Dense state in logical index order, when gathering was requested.
    pub state: Option<Vec<Complex64>>,
}

/// Thread CPU clock; falls back to a wall clock where unavailable.
pub fn thread_cpu_time() -> Duration {
    #[cfg(unix)]
    {
        let mut ts = libc::timespec {
            tv_sec: 0,
            tv_nsec: 0,
        };
        let ok = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
        if ok == 0 {
            return Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32);
        }
    }
    Duration::from_nanos(0)
}

struct CpuTimer(Duration);

impl CpuTimer {
    fn start() -> Self {
        CpuTimer(thread_cpu_time())
    }

    fn elapsed(&self) -> Duration {
        thread_cpu_time().saturating_sub(self.0)
    }
}

/// One rank's execution state: shard, layout copy, accumulated readouts and
/// timers. All ranks hold identical layouts at every step.
pub struct Session<'a> {
    ctx: &'a mut RankCtx,
    shard: StateShard,
    sigma: QubitPermutation,
    chunk_count: usize,
    expectations: BTreeMap<u32, f64>,
    gate_cpu: Duration,
    measure_cpu: Duration,
    measure_wall: Duration,
}

impl<'a> Session<'a> {
    pub fn new(ctx: &'a mut RankCtx, chunk_count: usize) -> Result<Self> {
        let topo = ctx.topology();
        let shard = StateShard::zeroed(topo.m(), ctx.rank())?;
        Ok(Session {
            ctx,
            shard,
            sigma: QubitPermutation::identity(topo.l(), topo.m()),
            chunk_count,
            expectations: BTreeMap::new(),
            gate_cpu: Duration::ZERO,
            measure_cpu: Duration::ZERO,
            measure_wall: Duration::ZERO,
        })
    }

    pub fn rank(&self) -> usize {
        self.ctx.rank()
    }

    pub fn sigma(&self) -> &QubitPermutation {
        &self.sigma
    }

    pub fn shard(&self) -> &StateShard {
        &self.shard
    }

    pub fn expectations(&self) -> &BTreeMap<u32, f64> {
        &self.expectations
    }

    /// Reset to basis state `index` under the current layout.
    pub fn init_basis(&mut self, index: u64) -> Result<()> {
        init_basis_state(&mut self.shard, &self.sigma, index)
    }

    fn local_position(&self, qubit: usize) -> Result<usize> {
        let pos = self.sigma.position_of(qubit);
        if pos < self.sigma.m() {
            Ok(pos)
        } else {
            Err(Error::Locality {
                position: pos,
                m: self.sigma.m(),
            })
        }
    }

    /// Apply one gate to the shard; all operands must be local.
    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        let timer = CpuTimer::start();
        match *gate {
            GateOp::H(q) => {
                let p = self.local_position(q)?;
                self.shard.apply_single_qubit(p, &Gate2x2::hadamard())?;
            }
            GateOp::X(q) => {
                let p = self.local_position(q)?;
                self.shard.apply_single_qubit(p, &Gate2x2::rot_x())?;
            }
            GateOp::Y(q) => {
                let p = self.local_position(q)?;
                self.shard.apply_single_qubit(p, &Gate2x2::rot_y())?;
            }
            GateOp::XDag(q) => {
                let p = self.local_position(q)?;
                self.shard
                    .apply_single_qubit(p, &Gate2x2::rot_x().dagger())?;
            }
            GateOp::YDag(q) => {
                let p = self.local_position(q)?;
                self.shard
                    .apply_single_qubit(p, &Gate2x2::rot_y().dagger())?;
            }
            GateOp::R { k, qubit } => {
                let p = self.local_position(qubit)?;
                self.shard.apply_phase_shift(p, phase_of_k(k))?;
            }
            GateOp::CNot { control, target } => {
                let c = self.local_position(control)?;
                let t = self.local_position(target)?;
                self.shard.apply_cnot(c, t)?;
            }
            GateOp::CPhase { k, control, target } => {
                let c = self.local_position(control)?;
                let t = self.local_position(target)?;
                self.shard.apply_controlled_phase(c, t, phase_of_k(k))?;
            }
            GateOp::CV { k, control, target } => {
                let c = self.local_position(control)?;
                let t = self.local_position(target)?;
                self.shard.apply_controlled_v(c, t, phase_of_k(k))?;
            }
            GateOp::Toffoli {
                control1,
                control2,
                target,
            } => {
                let c1 = self.local_position(control1)?;
                let c2 = self.local_position(control2)?;
                let t = self.local_position(target)?;
                self.shard.apply_toffoli(c1, c2, t)?;
            }
        }
        self.gate_cpu += timer.elapsed();
        Ok(())
    }

    /// Execute a swap command: trade amplitude blocks with the partner
    /// ranks, then update the layout. Partners are served in ascending rank
    /// order.
    pub fn swap_command(&mut self, pairs: &[(usize, usize)]) -> Result<()> {
        let timer = CpuTimer::start();
        let m = self.sigma.m();
        let mut local_positions = Vec::with_capacity(pairs.len());
        let mut rank_positions = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let (pa, pb) = (self.sigma.position_of(a), self.sigma.position_of(b));
            match (pa < m, pb < m) {
                (true, false) => {
                    local_positions.push(pa);
                    rank_positions.push(pb);
                }
                (false, true) => {
                    local_positions.push(pb);
                    rank_positions.push(pa);
                }
                _ => {
                    return Err(Error::Domain(format!(
                        "swap pair ({a}, {b}) does not join a local and a nonlocal qubit"
                    )));
                }
            }
        }
        let plan = ExchangePlan::new(
            local_positions,
            rank_positions,
            m,
            self.sigma.l(),
            self.chunk_count,
        )?;
        self.run_plan(&plan)?;
        self.gate_cpu += timer.elapsed();
        Ok(())
    }

    /// Execute a prepared exchange plan and apply its transpositions.
    pub fn run_plan(&mut self, plan: &ExchangePlan) -> Result<()> {
        for ex in plan.exchange_slots(self.ctx.rank()) {
            let out: Vec<Complex64> = ex
                .addresses
                .iter()
                .map(|&a| self.shard.amps()[a])
                .collect();
            let got = self.ctx.exchange(ex.partner_rank, &out, plan.chunk_count())?;
            for (&a, v) in ex.addresses.iter().zip(got) {
                self.shard.amps_mut()[a] = v;
            }
        }
        plan.apply_to(&mut self.sigma);
        Ok(())
    }

    /// Expectation value of one qubit, reduced across ranks.
    pub fn expectation(&mut self, qubit: usize) -> Result<f64> {
        let p = self.local_position(qubit)?;
        let partial = self.shard.partial_expectation(p)?;
        self.ctx.all_reduce_sum(partial)
    }

    /// Measure the listed qubits, recording their expectations.
    pub fn measure(&mut self, qubits: &[usize]) -> Result<()> {
        let wall = Instant::now();
        let timer = CpuTimer::start();
        for &q in qubits {
            let value = self.expectation(q)?;
            self.expectations.insert(q as u32, value);
        }
        self.measure_cpu += timer.elapsed();
        self.measure_wall += wall.elapsed();
        Ok(())
    }

    /// Global squared norm.
    pub fn global_norm(&mut self) -> Result<f64> {
        let partial = self.shard.norm_squared();
        self.ctx.all_reduce_sum(partial)
    }

    /// Check the global norm against the run tolerance.
    pub fn check_norm(&mut self) -> Result<f64> {
        let norm = self.global_norm()?;
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            Err(Error::StateNorm {
                norm,
                tolerance: NORM_TOLERANCE,
            })
        } else {
            Ok(norm)
        }
    }

    /// Rewrite every local slot from its global bit pattern and current
    /// value. Purely rank-parallel: no communication.
    pub fn map_amplitudes<F>(&mut self, f: F)
    where
        F: Fn(u64, Complex64) -> Complex64,
    {
        let timer = CpuTimer::start();
        let rank = self.ctx.rank();
        for addr in 0..self.shard.len() {
            let g = self.sigma.decode(rank, addr);
            self.shard.amps_mut()[addr] = f(g, self.shard.amps()[addr]);
        }
        self.gate_cpu += timer.elapsed();
    }

    /// Step through a full program.
    pub fn run_program(&mut self, program: &Program) -> Result<()> {
        self.run_instructions(program.instructions())
    }

    /// Step through a bare instruction list.
    pub fn run_instructions(&mut self, instructions: &[Instruction]) -> Result<()> {
        for inst in instructions {
            match inst {
                Instruction::Qubits(l) => {
                    if *l != self.sigma.l() {
                        return Err(Error::Config(format!(
                            "program declares {l} qubits, topology has {}",
                            self.sigma.l()
                        )));
                    }
                }
                Instruction::MpiProcesses(_) => {}
                Instruction::InitialState(idx) => self.init_basis(*idx)?,
                Instruction::Gate(g) => self.apply_gate(g)?,
                Instruction::Swap(pairs) => self.swap_command(pairs)?,
                Instruction::BeginMeasurement => {}
                Instruction::DoMeasurement(qs) => self.measure(qs)?,
                Instruction::EndMeasurement => {
                    self.check_norm()?;
                }
            }
        }
        Ok(())
    }

    /// Draw basis states with probability equal to their squared amplitude.
    /// Every rank walks the same seeded generator; the rank whose mass
    /// interval contains a draw resolves it locally. Returns this rank's
    /// resolved `(draw index, logical basis state)` pairs.
    pub fn sample(&mut self, count: usize, seed: u64) -> Result<Vec<(usize, u64)>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let my_mass = self.shard.norm_squared();
        let masses = self.ctx.all_gather(my_mass)?;
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > SAMPLE_NORM_TOLERANCE {
            return Err(Error::StateNorm {
                norm: total,
                tolerance: SAMPLE_NORM_TOLERANCE,
            });
        }

        let mut below_me = 0.0;
        for &m in &masses[..self.ctx.rank()] {
            below_me += m;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut resolver: Option<ShardResolver> = None;
        let mut owned = Vec::new();
        for draw in 0..count {
            let u: f64 = rng.gen::<f64>() * total;
            // Route the draw to the rank whose cumulative interval holds it.
            let mut owner = 0;
            let mut acc = 0.0;
            while owner + 1 < masses.len() && u >= acc + masses[owner] {
                acc += masses[owner];
                owner += 1;
            }
            if owner == self.ctx.rank() {
                let resolver =
                    resolver.get_or_insert_with(|| ShardResolver::new(self.shard.amps()));
                let addr = resolver.resolve(self.shard.amps(), u - below_me);
                owned.push((draw, self.sigma.decode(self.ctx.rank(), addr)));
            }
        }
        Ok(owned)
    }

    fn timings(&self) -> (Duration, Duration, Duration) {
        (self.gate_cpu, self.measure_cpu, self.measure_wall)
    }
}

/// Two-level cumulative index over a shard: coarse block sums, then a scan
/// inside one block. Keeps per-draw work at O(sqrt(len)) without copying
/// the whole shard.
struct ShardResolver {
    block: usize,
    block_sums: Vec<f64>,
}

impl ShardResolver {
    fn new(amps: &[Complex64]) -> Self {
        let block = (amps.len() as f64).sqrt().ceil() as usize;
        let block = block.max(1);
        let block_sums = amps
            .chunks(block)
            .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
            .collect();
        ShardResolver { block, block_sums }
    }

    fn resolve(&self, amps: &[Complex64], mut local_u: f64) -> usize {
        let mut base = 0;
        for (bi, &bs) in self.block_sums.iter().enumerate() {
            if local_u < bs || bi + 1 == self.block_sums.len() {
                base = bi * self.block;
                break;
            }
            local_u -= bs;
        }
        let end = (base + self.block).min(amps.len());
        for i in base..end {
            let p = amps[i].norm_sqr();
            if local_u < p {
                return i;
            }
            local_u -= p;
        }
        // Rounding pushed the residual past the last slot of the block;
        // fall back to the last nonzero slot at or before it.
        amps[..end]
            .iter()
            .rposition(|a| a.norm_sqr() > 0.0)
            .unwrap_or(end - 1)
    }
}

/// One stage of a run: either compiled instructions or a rank-parallel
/// amplitude rewrite (used for conditional oracles written directly into
/// the state).
pub enum Phase<'a> {
    Instructions(&'a [Instruction]),
    Map(&'a (dyn Fn(u64, Complex64) -> Complex64 + Sync)),
}

struct RankOutcome {
    expectations: BTreeMap<u32, f64>,
    samples: Vec<(usize, u64)>,
    gate_cpu: Duration,
    measure_cpu: Duration,
    measure_wall: Duration,
    final_norm: f64,
    shard: Option<(StateShard, QubitPermutation)>,
}

/// Run a prepared (locality-valid) program on `opts.n_ranks` virtual ranks
/// and merge the per-rank results. The caller is responsible for swap
/// insertion and validation; see [`crate::circuit::prepare`].
pub fn execute_program(program: &Program, opts: &RunOptions) -> Result<RunOutcome> {
    execute_phases(
        program.l(),
        &[Phase::Instructions(program.instructions())],
        opts,
    )
}

/// Run a sequence of phases on `opts.n_ranks` virtual ranks: every rank
/// starts one session, steps through the phases in order, passes the final
/// norm check, and draws any requested samples.
pub fn execute_phases(l: usize, phases: &[Phase], opts: &RunOptions) -> Result<RunOutcome> {
    let topology = RankTopology::new(l, opts.n_ranks)?;
    if opts.chunk_count == 0 {
        return Err(Error::Config("chunk count must be positive".into()));
    }
    let n_ops: usize = phases
        .iter()
        .map(|p| match p {
            Phase::Instructions(insts) => insts
                .iter()
                .filter(|i| matches!(i, Instruction::Gate(_)))
                .count(),
            Phase::Map(_) => 0,
        })
        .sum();
    let wall = Instant::now();
    let per_rank = run_spmd(topology, opts.timeout, |ctx| {
        let mut session = Session::new(ctx, opts.chunk_count)?;
        for phase in phases {
            match phase {
                Phase::Instructions(insts) => session.run_instructions(insts)?,
                Phase::Map(f) => session.map_amplitudes(f),
            }
        }
        let final_norm = session.check_norm()?;
        let samples = session.sample(opts.sample_count, opts.seed)?;
        let (gate_cpu, measure_cpu, measure_wall) = session.timings();
        let shard = opts
            .gather_state
            .then(|| (session.shard.clone(), session.sigma.clone()));
        Ok(RankOutcome {
            expectations: session.expectations.clone(),
            samples,
            gate_cpu,
            measure_cpu,
            measure_wall,
            final_norm,
            shard,
        })
    })?;
    let wall_seconds = wall.elapsed().as_secs_f64();
    merge_outcomes(l, n_ops, opts, per_rank, wall_seconds)
}

fn merge_outcomes(
    l: usize,
    n_ops: usize,
    opts: &RunOptions,
    per_rank: Vec<(RankOutcome, ExchangeStats)>,
    wall_seconds: f64,
) -> Result<RunOutcome> {
    let n_ranks = per_rank.len();
    let mut samples: Vec<(usize, u64)> = Vec::new();
    let mut gate_cpu = 0.0;
    let mut measure_cpu = 0.0;
    let mut stats = Vec::with_capacity(n_ranks);
    for (outcome, st) in &per_rank {
        samples.extend_from_slice(&outcome.samples);
        gate_cpu += outcome.gate_cpu.as_secs_f64();
        measure_cpu += outcome.measure_cpu.as_secs_f64();
        stats.push(*st);
    }
    samples.sort_by_key(|&(draw, _)| draw);
    debug_assert_eq!(samples.len(), opts.sample_count);

    let state = if opts.gather_state {
        let mut dense = vec![Complex64::new(0.0, 0.0); 1 << l];
        for (outcome, _) in &per_rank {
            let (shard, sigma) = outcome.shard.as_ref().expect("gather requested");
            for (addr, &a) in shard.amps().iter().enumerate() {
                dense[sigma.decode(shard.rank(), addr) as usize] = a;
            }
        }
        Some(dense)
    } else {
        None
    };

    let first = &per_rank[0].0;
    Ok(RunOutcome {
        l,
        n_ranks,
        n_ops,
        expectations: first.expectations.clone(),
        samples: (opts.sample_count > 0).then(|| samples.into_iter().map(|(_, v)| v).collect()),
        per_rank_stats: stats,
        gate_cpu_seconds: gate_cpu,
        measure_cpu_seconds: measure_cpu,
        wall_seconds,
        measure_wall_seconds: first.measure_wall.as_secs_f64(),
        final_norm: first.final_norm,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_program, prepare};
    use crate::layout::EvictLowestPositions;

    fn run_text(text: &str, n_ranks: usize, k_max: usize) -> RunOutcome {
        let program = parse_program(text).unwrap();
        let prepared = prepare(&program, // m for this rank count
            RankTopology::new(program.l(), n_ranks).unwrap().m(),
            k_max,
            &EvictLowestPositions,
        )
        .unwrap();
        let opts = RunOptions {
            n_ranks,
            k_max,
            gather_state: true,
            ..Default::default()
        };
        execute_program(&prepared, &opts).unwrap()
    }

    #[test]
    fn bell_pair_expectations() {
        let out = run_text(
            "QUBITS 2\nINITIAL STATE 0\nH 0\nCNOT 0 1\nBEGIN MEASUREMENT\nDO MEASUREMENT 0 1\nEND MEASUREMENT",
            1,
            1,
        );
        assert!((out.expectations[&0] - 0.5).abs() < 1e-12);
        assert!((out.expectations[&1] - 0.5).abs() < 1e-12);
        let state = out.state.unwrap();
        assert!((state[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((state[3].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(state[1].norm() < 1e-15 && state[2].norm() < 1e-15);
    }

    #[test]
    fn distributed_matches_single_rank_on_a_small_sweep() {
        let text = "QUBITS 4\nINITIAL STATE 0\nH 0\nH 1\nH 2\nH 3\nBEGIN MEASUREMENT\nDO MEASUREMENT 0 1 2 3\nEND MEASUREMENT";
        let single = run_text(text, 1, 1);
        let multi = run_text(text, 4, 1);
        for q in 0..4u32 {
            assert!((multi.expectations[&q] - 0.5).abs() < 1e-12);
            assert!((multi.expectations[&q] - single.expectations[&q]).abs() < 1e-15);
        }
        let a = single.state.unwrap();
        let b = multi.state.unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn nonlocal_basis_flip_relocates_the_amplitude() {
        // Flip the top qubit (nonlocal at N = 4) twice via rotations; the
        // state ends in |1000> with unit probability on qubit 3.
        let text = "QUBITS 4\nINITIAL STATE 0\nX 3\nX 3\nBEGIN MEASUREMENT\nDO MEASUREMENT 3 0\nEND MEASUREMENT";
        let out = run_text(text, 4, 1);
        assert!((out.expectations[&3] - 1.0).abs() < 1e-12);
        assert!(out.expectations[&0].abs() < 1e-12);
        let state = out.state.unwrap();
        assert!((state[0b1000].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_a_basis_state_is_deterministic() {
        let program = parse_program("QUBITS 3\nINITIAL STATE 5").unwrap();
        let opts = RunOptions {
            n_ranks: 2,
            sample_count: 17,
            seed: 42,
            ..Default::default()
        };
        let out = execute_program(&program, &opts).unwrap();
        assert_eq!(out.samples.as_deref().unwrap(), &[5u64; 17][..]);
    }

    #[test]
    fn sample_count_zero_yields_no_samples_field() {
        let program = parse_program("QUBITS 2\nINITIAL STATE 0").unwrap();
        let out = execute_program(&program, &RunOptions::default()).unwrap();
        assert!(out.samples.is_none());
    }

    #[test]
    fn runtime_locality_violation_is_caught() {
        // Unprepared program touching a nonlocal qubit at N = 2.
        let program = parse_program("QUBITS 3\nINITIAL STATE 0\nH 2").unwrap();
        let opts = RunOptions {
            n_ranks: 2,
            ..Default::default()
        };
        let err = execute_program(&program, &opts).unwrap_err();
        assert!(matches!(err, Error::Locality { .. }), "{err}");
    }

    #[test]
    fn swap_volume_counters() {
        // One 2-pair swap at L = 6, N = 4 (m = 4): each rank ships
        // (2^2 - 1) * 2^{4-2} = 12 amplitudes in 3 * chunk_count messages.
        let text = "QUBITS 6\nINITIAL STATE 0\nSWAP 2 0 1 4 5";
        let program = parse_program(text).unwrap();
        let opts = RunOptions {
            n_ranks: 4,
            chunk_count: 4,
            ..Default::default()
        };
        let out = execute_program(&program, &opts).unwrap();
        for st in out.per_rank_stats {
            assert_eq!(st.amplitudes_sent, 12);
            assert_eq!(st.messages_sent, 12);
        }
    }
}
