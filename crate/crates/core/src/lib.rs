//! Distributed state-vector simulator for a gate-model quantum computer.
//!
//! The state of `L` qubits is a vector of `2^L` complex amplitudes, sharded
//! over `N = 2^(L-M)` ranks of `2^M` amplitudes each. A qubit permutation
//! maps bit positions of the global amplitude index to logical qubits; gates
//! touch only local address bits, and swap commands relocalize qubits by
//! trading amplitude blocks between ranks. Circuits are plain text programs
//! (`.qc` files); a compiler inserts the swap commands a given rank count
//! requires.
//!
//! The crate ships a reference in-process rank engine (one thread per rank,
//! rendezvous channels), circuit generators for qubit adders and the quantum
//! Fourier transform, a period-finding pipeline with closed-form oracles,
//! and a small CLI (`qshard run | shor | bench`).

pub mod algorithms;
pub mod circuit;
pub mod cli;
pub mod engine;
pub mod error;
pub mod layout;
pub mod statevec;
pub mod transport;

pub use error::{Error, Result};
