//! In-process SPMD rank engine: pairwise rendezvous exchange and
//! fixed-order reductions over crossbeam channels.
//!
//! This is the reference backend: one thread per rank, one zero-capacity
//! channel per ordered rank pair, so every transfer is a rendezvous with no
//! buffering beyond the chunk in flight. A binding to an external
//! message-passing runtime can implement the same calls behind the same
//! contract.
//!
//! Determinism: every collective runs on a fixed schedule (partners in
//! ascending rank order, reductions accumulated in rank order), so two runs
//! with the same inputs produce bit-identical results regardless of how the
//! threads are scheduled.

use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default rendezvous timeout; hitting it almost always means the ranks
/// disagree about the communication plan.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Shape of an SPMD run: `2^(l-m)` ranks of `2^m` amplitudes each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankTopology {
    l: usize,
    m: usize,
}

impl RankTopology {
    /// Topology for `n_ranks` ranks over `l` qubits. The rank count must be
    /// a power of two that leaves at least one local qubit.
    pub fn new(l: usize, n_ranks: usize) -> Result<Self> {
        if n_ranks == 0 || !n_ranks.is_power_of_two() {
            return Err(Error::Config(format!(
                "rank count {n_ranks} is not a power of two"
            )));
        }
        let rank_bits = n_ranks.trailing_zeros() as usize;
        if l == 0 || rank_bits >= l {
            return Err(Error::Config(format!(
                "{n_ranks} ranks leave no local qubits for L = {l}"
            )));
        }
        Ok(RankTopology {
            l,
            m: l - rank_bits,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Local qubits per rank.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_ranks(&self) -> usize {
        1 << (self.l - self.m)
    }
}

/// Per-rank communication counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ExchangeStats {
    /// Amplitudes shipped out of this rank.
    pub amplitudes_sent: u64,
    /// Messages (chunks) shipped out of this rank.
    pub messages_sent: u64,
}

enum Payload {
    Amps(Vec<Complex64>),
    Scalar(f64),
    Scalars(Vec<f64>),
}

/// One rank's handle onto the engine: its id, its channels, its counters.
pub struct RankCtx {
    rank: usize,
    topology: RankTopology,
    /// `senders[j]`: channel into rank j; `None` on the diagonal.
    senders: Vec<Option<Sender<Payload>>>,
    /// `receivers[j]`: channel from rank j.
    receivers: Vec<Option<Receiver<Payload>>>,
    stats: ExchangeStats,
    timeout: Duration,
}

impl RankCtx {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn topology(&self) -> RankTopology {
        self.topology
    }

    pub fn n_ranks(&self) -> usize {
        self.topology.n_ranks()
    }

    pub fn stats(&self) -> ExchangeStats {
        self.stats
    }

    fn send(&self, to: usize, payload: Payload) -> Result<()> {
        let tx = self.senders[to].as_ref().expect("no channel to self");
        tx.send_timeout(payload, self.timeout).map_err(|_| Error::Timeout {
            rank: self.rank,
            partner: to,
        })
    }

    fn recv(&self, from: usize) -> Result<Payload> {
        let rx = self.receivers[from].as_ref().expect("no channel to self");
        rx.recv_timeout(self.timeout).map_err(|_| Error::Timeout {
            rank: self.rank,
            partner: from,
        })
    }

    /// Trade `out_buffer` against the partner's equally long buffer. The
    /// transfer is split into `chunk_count` contiguous pieces (the later
    /// ones empty when the buffer is shorter than the chunk count); a
    /// zero-length buffer exchanges nothing and counts no messages. The
    /// lower rank of the pair sends each chunk first, so mirrored calls can
    /// never deadlock.
    pub fn exchange(
        &mut self,
        partner: usize,
        out_buffer: &[Complex64],
        chunk_count: usize,
    ) -> Result<Vec<Complex64>> {
        if partner == self.rank || partner >= self.n_ranks() {
            return Err(Error::Config(format!(
                "rank {} cannot exchange with rank {partner}",
                self.rank
            )));
        }
        if chunk_count == 0 {
            return Err(Error::Config("chunk count must be positive".into()));
        }
        if out_buffer.is_empty() {
            return Ok(Vec::new());
        }
        let len = out_buffer.len();
        let mut in_buffer = Vec::with_capacity(len);
        for c in 0..chunk_count {
            let lo = c * len / chunk_count;
            let hi = (c + 1) * len / chunk_count;
            let piece = out_buffer[lo..hi].to_vec();
            let expect = hi - lo;
            let got = if self.rank < partner {
                self.send(partner, Payload::Amps(piece))?;
                self.recv(partner)?
            } else {
                let got = self.recv(partner)?;
                self.send(partner, Payload::Amps(piece))?;
                got
            };
            let Payload::Amps(chunk) = got else {
                return Err(Error::Config("mismatched collective".into()));
            };
            if chunk.len() != expect {
                return Err(Error::Protocol {
                    rank: self.rank,
                    partner,
                    len_out: expect,
                    len_in: chunk.len(),
                });
            }
            in_buffer.extend_from_slice(&chunk);
            self.stats.messages_sent += 1;
        }
        self.stats.amplitudes_sent += len as u64;
        Ok(in_buffer)
    }

    /// Sum a value over all ranks, accumulated in fixed rank order on rank 0
    /// and broadcast back, so every rank sees the identical bits.
    pub fn all_reduce_sum(&mut self, value: f64) -> Result<f64> {
        let n = self.n_ranks();
        if n == 1 {
            return Ok(value);
        }
        if self.rank == 0 {
            let mut acc = value;
            for r in 1..n {
                let Payload::Scalar(v) = self.recv(r)? else {
                    return Err(Error::Config("mismatched collective".into()));
                };
                acc += v;
            }
            for r in 1..n {
                self.send(r, Payload::Scalar(acc))?;
            }
            Ok(acc)
        } else {
            self.send(0, Payload::Scalar(value))?;
            let Payload::Scalar(acc) = self.recv(0)? else {
                return Err(Error::Config("mismatched collective".into()));
            };
            Ok(acc)
        }
    }

    /// Collect one value per rank, in rank order, on every rank.
    pub fn all_gather(&mut self, value: f64) -> Result<Vec<f64>> {
        let n = self.n_ranks();
        if n == 1 {
            return Ok(vec![value]);
        }
        if self.rank == 0 {
            let mut all = Vec::with_capacity(n);
            all.push(value);
            for r in 1..n {
                let Payload::Scalar(v) = self.recv(r)? else {
                    return Err(Error::Config("mismatched collective".into()));
                };
                all.push(v);
            }
            for r in 1..n {
                self.send(r, Payload::Scalars(all.clone()))?;
            }
            Ok(all)
        } else {
            self.send(0, Payload::Scalar(value))?;
            let Payload::Scalars(all) = self.recv(0)? else {
                return Err(Error::Config("mismatched collective".into()));
            };
            Ok(all)
        }
    }
}

/// Run one closure per rank (SPMD) and collect each rank's value and
/// communication counters in rank order. The first error in rank order
/// wins; a failed rank drops its channels, which unblocks any peer waiting
/// on it.
pub fn run_spmd<T, F>(
    topology: RankTopology,
    timeout: Duration,
    f: F,
) -> Result<Vec<(T, ExchangeStats)>>
where
    T: Send,
    F: Fn(&mut RankCtx) -> Result<T> + Sync,
{
    let n = topology.n_ranks();
    // Dedicated rendezvous channel per ordered pair.
    let mut senders: Vec<Vec<Option<Sender<Payload>>>> = (0..n)
        .map(|_| (0..n).map(|_| None).collect())
        .collect();
    let mut receivers: Vec<Vec<Option<Receiver<Payload>>>> = (0..n)
        .map(|_| (0..n).map(|_| None).collect())
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (tx, rx) = bounded(0);
                senders[i][j] = Some(tx);
                receivers[j][i] = Some(rx);
            }
        }
    }

    let mut ctxs: Vec<RankCtx> = senders
        .into_iter()
        .zip(receivers)
        .enumerate()
        .map(|(rank, (s, r))| RankCtx {
            rank,
            topology,
            senders: s,
            receivers: r,
            stats: ExchangeStats::default(),
            timeout,
        })
        .collect();

    let results: Vec<Result<(T, ExchangeStats)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ctxs
            .iter_mut()
            .map(|ctx| {
                let f = &f;
                scope.spawn(move || {
                    let value = f(ctx)?;
                    Ok((value, ctx.stats))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r,
                Err(p) => std::panic::resume_unwind(p),
            })
            .collect()
    });

    results.into_iter().collect()
}
