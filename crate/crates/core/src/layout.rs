//! Qubit-to-bit-position bookkeeping and swap planning.
//!
//! The global amplitude index of an `L`-qubit state is split into an `m`-bit
//! local address and an `(L-m)`-bit rank id. A permutation maps each bit
//! position of that combined index to the logical qubit whose value it
//! carries: positions `0..m` are "local", positions `m..L` select the rank.
//! Relocating a nonlocal qubit means transposing two positions of the
//! permutation and trading the matching amplitude blocks between ranks.

use crate::error::{Error, Result};

/// Bijection between bit positions of the combined (rank, address) index and
/// logical qubit ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitPermutation {
    pos_to_qubit: Vec<usize>,
    qubit_to_pos: Vec<usize>,
    l: usize,
    m: usize,
}

impl QubitPermutation {
    /// Identity layout: qubit `q` sits at bit position `q`.
    pub fn identity(l: usize, m: usize) -> Self {
        assert!(m <= l, "local qubit count exceeds total");
        QubitPermutation {
            pos_to_qubit: (0..l).collect(),
            qubit_to_pos: (0..l).collect(),
            l,
            m,
        }
    }

    /// Build from an explicit position -> qubit table, validating that it is
    /// a bijection on `0..l`.
    pub fn from_pos_to_qubit(pos_to_qubit: Vec<usize>, m: usize) -> Result<Self> {
        let l = pos_to_qubit.len();
        if m > l {
            return Err(Error::Domain(format!("m = {m} exceeds l = {l}")));
        }
        let mut qubit_to_pos = vec![usize::MAX; l];
        for (pos, &q) in pos_to_qubit.iter().enumerate() {
            if q >= l || qubit_to_pos[q] != usize::MAX {
                return Err(Error::Domain(format!(
                    "position table is not a bijection at position {pos}"
                )));
            }
            qubit_to_pos[q] = pos;
        }
        Ok(QubitPermutation {
            pos_to_qubit,
            qubit_to_pos,
            l,
            m,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_ranks(&self) -> usize {
        1 << (self.l - self.m)
    }

    /// Logical qubit held at a bit position.
    pub fn qubit_at(&self, pos: usize) -> usize {
        self.pos_to_qubit[pos]
    }

    /// Bit position holding a logical qubit.
    pub fn position_of(&self, qubit: usize) -> usize {
        self.qubit_to_pos[qubit]
    }

    /// A qubit is local when its value indexes the shard address rather than
    /// the rank id.
    pub fn is_local(&self, qubit: usize) -> bool {
        self.qubit_to_pos[qubit] < self.m
    }

    /// Swap the qubits held at two bit positions.
    pub fn transpose_positions(&mut self, p1: usize, p2: usize) {
        self.pos_to_qubit.swap(p1, p2);
        self.qubit_to_pos[self.pos_to_qubit[p1]] = p1;
        self.qubit_to_pos[self.pos_to_qubit[p2]] = p2;
    }

    /// Where the amplitude of global bit pattern `global_bits` lives: bit
    /// position `i` of the combined index carries the value of qubit
    /// `pos_to_qubit[i]`.
    pub fn locate(&self, global_bits: u64) -> (usize, usize) {
        let mut combined = 0usize;
        for (pos, &q) in self.pos_to_qubit.iter().enumerate() {
            combined |= (((global_bits >> q) & 1) as usize) << pos;
        }
        (combined >> self.m, combined & ((1 << self.m) - 1))
    }

    /// Inverse of [`locate`](Self::locate): the global bit pattern stored at
    /// a given rank and address.
    pub fn decode(&self, rank: usize, address: usize) -> u64 {
        let combined = (rank << self.m) | address;
        let mut global = 0u64;
        for (pos, &q) in self.pos_to_qubit.iter().enumerate() {
            global |= (((combined >> pos) & 1) as u64) << q;
        }
        global
    }
}

/// Chooses which local positions to give up when nonlocal qubits are pulled
/// in. `pinned` lists qubits that must stay local (operands of the
/// instruction being compiled).
pub trait EvictionPolicy {
    fn evict(&self, sigma: &QubitPermutation, k: usize, pinned: &[usize]) -> Result<Vec<usize>>;
}

/// Default policy: give up the lowest local positions whose qubits are not
/// pinned, in ascending order. With nothing pinned this evicts position 0
/// first, matching the usual swap sequences.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvictLowestPositions;

impl EvictionPolicy for EvictLowestPositions {
    fn evict(&self, sigma: &QubitPermutation, k: usize, pinned: &[usize]) -> Result<Vec<usize>> {
        let positions: Vec<usize> = (0..sigma.m())
            .filter(|&p| !pinned.contains(&sigma.qubit_at(p)))
            .take(k)
            .collect();
        if positions.len() < k {
            Err(Error::Capacity {
                requested: k,
                available: positions.len(),
            })
        } else {
            Ok(positions)
        }
    }
}

/// A K-pair local/nonlocal position swap: which address bits trade places
/// with which rank bits, and how each partner buffer is chunked on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangePlan {
    local_positions: Vec<usize>,
    rank_positions: Vec<usize>,
    m: usize,
    chunk_count: usize,
}

/// One pairwise trade within a plan: the same addresses are sent and then
/// refilled with the partner's block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotExchange {
    pub partner_rank: usize,
    pub addresses: Vec<usize>,
}

impl ExchangePlan {
    /// Build a plan from explicit position pairs. Local positions must lie
    /// below `m`, rank positions at or above, all distinct.
    pub fn new(
        local_positions: Vec<usize>,
        rank_positions: Vec<usize>,
        m: usize,
        l: usize,
        chunk_count: usize,
    ) -> Result<Self> {
        let k = local_positions.len();
        if k != rank_positions.len() || k == 0 {
            return Err(Error::Domain(
                "swap needs equally many local and rank positions, at least one".into(),
            ));
        }
        if k > m.min(l - m) {
            return Err(Error::Capacity {
                requested: k,
                available: m.min(l - m),
            });
        }
        if chunk_count == 0 {
            return Err(Error::Config("chunk count must be positive".into()));
        }
        for (i, &p) in local_positions.iter().enumerate() {
            if p >= m || local_positions[..i].contains(&p) {
                return Err(Error::Domain(format!("bad local position {p}")));
            }
        }
        for (i, &p) in rank_positions.iter().enumerate() {
            if p < m || p >= l || rank_positions[..i].contains(&p) {
                return Err(Error::Domain(format!("bad rank position {p}")));
            }
        }
        Ok(ExchangePlan {
            local_positions,
            rank_positions,
            m,
            chunk_count,
        })
    }

    pub fn k(&self) -> usize {
        self.local_positions.len()
    }

    pub fn local_positions(&self) -> &[usize] {
        &self.local_positions
    }

    pub fn rank_positions(&self) -> &[usize] {
        &self.rank_positions
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_count
    }

    /// Amplitudes each rank sends when executing this plan:
    /// `(2^K - 1) * 2^{m-K}`.
    pub fn send_volume(&self) -> usize {
        ((1 << self.k()) - 1) * (1 << (self.m - self.k()))
    }

    /// Apply this plan's transpositions to a permutation, pairing the i-th
    /// local position with the i-th rank position.
    pub fn apply_to(&self, sigma: &mut QubitPermutation) {
        for (&lp, &rp) in self.local_positions.iter().zip(&self.rank_positions) {
            sigma.transpose_positions(lp, rp);
        }
    }

    /// K-bit pattern of `my_rank` over the plan's rank positions.
    fn rank_pattern(&self, my_rank: usize) -> usize {
        let mut c = 0;
        for (i, &rp) in self.rank_positions.iter().enumerate() {
            c |= ((my_rank >> (rp - self.m)) & 1) << i;
        }
        c
    }

    /// All addresses whose plan bits spell `pattern`, ascending. Both peers
    /// enumerate in the same order, so no header metadata is needed.
    fn addresses_with_pattern(&self, pattern: usize) -> Vec<usize> {
        let k = self.k();
        let free = self.m - k;
        let mut out = Vec::with_capacity(1 << free);
        let free_positions: Vec<usize> =
            (0..self.m).filter(|p| !self.local_positions.contains(p)).collect();
        for rest in 0..(1usize << free) {
            let mut addr = 0;
            for (i, &lp) in self.local_positions.iter().enumerate() {
                addr |= ((pattern >> i) & 1) << lp;
            }
            for (i, &fp) in free_positions.iter().enumerate() {
                addr |= ((rest >> i) & 1) << fp;
            }
            out.push(addr);
        }
        out
    }

    /// The pairwise trades `my_rank` takes part in, partner ranks ascending.
    ///
    /// The slot whose K local-position bits spell pattern `b`, on the rank
    /// whose K rank-position bits spell `c`, trades contents with the slot
    /// spelling `c` on the rank spelling `b`; slots with `b == c` stay put.
    /// Each of the `2^K - 1` partners exchanges `2^{m-K}` amplitudes.
    pub fn exchange_slots(&self, my_rank: usize) -> Vec<SlotExchange> {
        let k = self.k();
        let my_pattern = self.rank_pattern(my_rank);
        let mut out = Vec::with_capacity((1 << k) - 1);
        for partner_pattern in 0..(1usize << k) {
            if partner_pattern == my_pattern {
                continue;
            }
            let mut partner_rank = my_rank;
            for (i, &rp) in self.rank_positions.iter().enumerate() {
                let bit = rp - self.m;
                partner_rank &= !(1 << bit);
                partner_rank |= ((partner_pattern >> i) & 1) << bit;
            }
            out.push(SlotExchange {
                partner_rank,
                addresses: self.addresses_with_pattern(partner_pattern),
            });
        }
        out.sort_by_key(|e| e.partner_rank);
        out
    }
}

/// Plan the relocation of currently-nonlocal `qubits_needed`, returning the
/// plan and updating `sigma` by the corresponding transpositions. The i-th
/// needed qubit is paired with the i-th evicted local position.
pub fn plan_exchange(
    sigma: &mut QubitPermutation,
    qubits_needed: &[usize],
    policy: &dyn EvictionPolicy,
    pinned: &[usize],
    chunk_count: usize,
) -> Result<ExchangePlan> {
    let k = qubits_needed.len();
    let max_k = sigma.m().min(sigma.l() - sigma.m());
    if k > max_k {
        return Err(Error::Capacity {
            requested: k,
            available: max_k,
        });
    }
    let mut rank_positions = Vec::with_capacity(k);
    for &q in qubits_needed {
        let p = sigma.position_of(q);
        if p < sigma.m() {
            return Err(Error::Domain(format!("qubit {q} is already local")));
        }
        if rank_positions.contains(&p) {
            return Err(Error::DuplicateBits(q));
        }
        rank_positions.push(p);
    }
    let local_positions = policy.evict(sigma, k, pinned)?;
    let plan = ExchangePlan::new(
        local_positions,
        rank_positions,
        sigma.m(),
        sigma.l(),
        chunk_count,
    )?;
    plan.apply_to(sigma);
    Ok(plan)
}
