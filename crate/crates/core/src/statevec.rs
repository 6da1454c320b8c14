//! Amplitude shards and the in-place gate kernels.
//!
//! One rank owns a contiguous block of `2^m` complex amplitudes. All kernels
//! act on *local bit positions* of the address — which logical qubit sits at
//! which position is the business of [`crate::layout`]. Every kernel updates
//! the shard in place; none allocates a second amplitude array.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::QubitPermutation;

/// One complex amplitude: two 8-byte reals.
pub type ComplexAmp = Complex64;

/// 2x2 single-qubit operator applied to amplitude pairs that differ in
/// exactly one address bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2x2 {
    pub u00: ComplexAmp,
    pub u01: ComplexAmp,
    pub u10: ComplexAmp,
    pub u11: ComplexAmp,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl Gate2x2 {
    /// Checked constructor: rejects matrices that deviate from unitarity by
    /// more than 1e-12 entrywise.
    pub fn new(u00: ComplexAmp, u01: ComplexAmp, u10: ComplexAmp, u11: ComplexAmp) -> Result<Self> {
        let g = Gate2x2 { u00, u01, u10, u11 };
        let dev = g.unitarity_deviation();
        if dev < 1e-12 {
            Ok(g)
        } else {
            Err(Error::Domain(format!(
                "matrix is not unitary (deviation {dev:.3e})"
            )))
        }
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let c = |z: ComplexAmp| z.conj();
        // U†U entries
        let a = c(self.u00) * self.u00 + c(self.u10) * self.u10;
        let b = c(self.u00) * self.u01 + c(self.u10) * self.u11;
        let d = c(self.u01) * self.u00 + c(self.u11) * self.u10;
        let e = c(self.u01) * self.u01 + c(self.u11) * self.u11;
        let one = Complex64::new(1.0, 0.0);
        [(a - one).norm(), b.norm(), d.norm(), (e - one).norm()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Hadamard: (a0, a1) -> ((a0+a1)/sqrt(2), (a0-a1)/sqrt(2)).
    pub fn hadamard() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Gate2x2 {
            u00: s,
            u01: s,
            u10: s,
            u11: -s,
        }
    }

    /// Quarter turn about x: (a0, a1) -> ((a0+i*a1)/sqrt(2), (a1+i*a0)/sqrt(2)).
    pub fn rot_x() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let is = Complex64::new(0.0, FRAC_1_SQRT_2);
        Gate2x2 {
            u00: s,
            u01: is,
            u10: is,
            u11: s,
        }
    }

    /// Quarter turn about y: (a0, a1) -> ((a0+a1)/sqrt(2), (a1-a0)/sqrt(2)).
    pub fn rot_y() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Gate2x2 {
            u00: s,
            u01: s,
            u10: -s,
            u11: s,
        }
    }

    /// Conjugate transpose; the inverse for a unitary matrix.
    pub fn dagger(&self) -> Self {
        Gate2x2 {
            u00: self.u00.conj(),
            u01: self.u10.conj(),
            u10: self.u01.conj(),
            u11: self.u11.conj(),
        }
    }
}

/// One rank's contiguous block of `2^m` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateShard {
    m: usize,
    rank: usize,
    amps: Vec<ComplexAmp>,
}

impl StateShard {
    /// Allocate an all-zero shard of `2^m` amplitudes for the given rank.
    /// Fails with a resource error instead of aborting when the allocation
    /// cannot be satisfied.
    pub fn zeroed(m: usize, rank: usize) -> Result<Self> {
        let len = 1usize
            .checked_shl(m as u32)
            .ok_or(Error::Resource { m })?;
        let mut amps = Vec::new();
        amps.try_reserve_exact(len)
            .map_err(|_| Error::Resource { m })?;
        amps.resize(len, Complex64::new(0.0, 0.0));
        Ok(StateShard { m, rank, amps })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length is 2^m >= 1 by construction
    }

    pub fn amps(&self) -> &[ComplexAmp] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [ComplexAmp] {
        &mut self.amps
    }

    /// Reset to all zeros and place a unit amplitude at `address` if `Some`.
    /// Ranks that do not own the basis state pass `None`.
    pub fn set_basis(&mut self, address: Option<usize>) -> Result<()> {
        if let Some(a) = address {
            if a >= self.amps.len() {
                return Err(Error::Domain(format!(
                    "address {a} out of range for 2^{} shard",
                    self.m
                )));
            }
        }
        self.amps.fill(Complex64::new(0.0, 0.0));
        if let Some(a) = address {
            self.amps[a] = Complex64::new(1.0, 0.0);
        }
        Ok(())
    }

    fn check_bit(&self, bit: usize) -> Result<()> {
        if bit >= self.m {
            Err(Error::Locality {
                position: bit,
                m: self.m,
            })
        } else {
            Ok(())
        }
    }

    fn check_distinct(bits: &[usize]) -> Result<()> {
        for (i, &b) in bits.iter().enumerate() {
            if bits[..i].contains(&b) {
                return Err(Error::DuplicateBits(b));
            }
        }
        Ok(())
    }

    /// Apply a 2x2 unitary to every amplitude pair differing only in
    /// `local_bit`. Touches all `2^m` amplitudes.
    pub fn apply_single_qubit(&mut self, local_bit: usize, u: &Gate2x2) -> Result<()> {
        self.check_bit(local_bit)?;
        let stride = 1usize << local_bit;
        let mut base = 0;
        while base < self.amps.len() {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = u.u00 * a0 + u.u01 * a1;
                self.amps[i + stride] = u.u10 * a0 + u.u11 * a1;
            }
            base += 2 * stride;
        }
        Ok(())
    }

    /// Multiply amplitudes whose address has `local_bit` set by `e^{i phi}`.
    /// Exactly `2^{m-1}` multiplications; the other half is untouched.
    pub fn apply_phase_shift(&mut self, local_bit: usize, phi: f64) -> Result<()> {
        self.check_bit(local_bit)?;
        let phase = Complex64::from_polar(1.0, phi);
        let stride = 1usize << local_bit;
        let mut base = stride;
        while base < self.amps.len() {
            for i in base..base + stride {
                self.amps[i] *= phase;
            }
            base += 2 * stride;
        }
        Ok(())
    }

    /// Swap the target-bit pair wherever the control bit is set.
    pub fn apply_cnot(&mut self, control_bit: usize, target_bit: usize) -> Result<()> {
        self.check_bit(control_bit)?;
        self.check_bit(target_bit)?;
        Self::check_distinct(&[control_bit, target_bit])?;
        let cm = 1usize << control_bit;
        let tm = 1usize << target_bit;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
        Ok(())
    }

    /// Multiply amplitudes with both bits set by `e^{i phi}`; `2^{m-2}`
    /// multiplications.
    pub fn apply_controlled_phase(
        &mut self,
        control_bit: usize,
        target_bit: usize,
        phi: f64,
    ) -> Result<()> {
        self.check_bit(control_bit)?;
        self.check_bit(target_bit)?;
        Self::check_distinct(&[control_bit, target_bit])?;
        let phase = Complex64::from_polar(1.0, phi);
        let mask = (1usize << control_bit) | (1usize << target_bit);
        for i in 0..self.amps.len() {
            if i & mask == mask {
                self.amps[i] *= phase;
            }
        }
        Ok(())
    }

    /// Controlled V: wherever the control bit is set, the target pair
    /// (b0, b1) maps to
    /// ((1+e^{i phi}) b0 + (1-e^{i phi}) b1, (1-e^{i phi}) b0 + (1+e^{i phi}) b1) / 2.
    /// The phi = pi case reproduces CNOT.
    pub fn apply_controlled_v(
        &mut self,
        control_bit: usize,
        target_bit: usize,
        phi: f64,
    ) -> Result<()> {
        self.check_bit(control_bit)?;
        self.check_bit(target_bit)?;
        Self::check_distinct(&[control_bit, target_bit])?;
        let e = Complex64::from_polar(1.0, phi);
        let p = (Complex64::new(1.0, 0.0) + e) * 0.5;
        let q = (Complex64::new(1.0, 0.0) - e) * 0.5;
        let cm = 1usize << control_bit;
        let tm = 1usize << target_bit;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                let b0 = self.amps[i];
                let b1 = self.amps[i | tm];
                self.amps[i] = p * b0 + q * b1;
                self.amps[i | tm] = q * b0 + p * b1;
            }
        }
        Ok(())
    }

    /// Swap the target-bit pair wherever both control bits are set; moves
    /// exactly `2^{m-2}` amplitudes.
    pub fn apply_toffoli(
        &mut self,
        control1: usize,
        control2: usize,
        target_bit: usize,
    ) -> Result<()> {
        self.check_bit(control1)?;
        self.check_bit(control2)?;
        self.check_bit(target_bit)?;
        Self::check_distinct(&[control1, control2, target_bit])?;
        let cm = (1usize << control1) | (1usize << control2);
        let tm = 1usize << target_bit;
        for i in 0..self.amps.len() {
            if i & cm == cm && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
        Ok(())
    }

    /// This rank's contribution to the expectation of the qubit sitting at
    /// `local_bit`: the summed squared modulus over addresses with the bit
    /// set. The caller reduces across ranks.
    pub fn partial_expectation(&self, local_bit: usize) -> Result<f64> {
        self.check_bit(local_bit)?;
        let stride = 1usize << local_bit;
        let mut sum = 0.0;
        let mut base = stride;
        while base < self.amps.len() {
            for i in base..base + stride {
                sum += self.amps[i].norm_sqr();
            }
            base += 2 * stride;
        }
        Ok(sum)
    }

    /// Summed squared modulus over this shard; the global sum across ranks
    /// must be one.
    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Place the whole machine in basis state `index`: the one rank whose id the
/// layout assigns to that bit pattern holds the unit amplitude, everyone
/// else zeros out. Each rank calls this on its own shard.
pub fn init_basis_state(
    shard: &mut StateShard,
    sigma: &QubitPermutation,
    index: u64,
) -> Result<()> {
    if sigma.l() < 64 && index >= (1u64 << sigma.l()) {
        return Err(Error::Domain(format!(
            "basis state {index} out of range for {} qubits",
            sigma.l()
        )));
    }
    let (rank, address) = sigma.locate(index);
    shard.set_basis((rank == shard.rank()).then_some(address))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shard_from(amps: &[(f64, f64)]) -> StateShard {
        let m = amps.len().trailing_zeros() as usize;
        assert_eq!(1 << m, amps.len());
        let mut s = StateShard::zeroed(m, 0).unwrap();
        for (i, &(re, im)) in amps.iter().enumerate() {
            s.amps_mut()[i] = Complex64::new(re, im);
        }
        s
    }

    fn assert_close(a: ComplexAmp, re: f64, im: f64, tol: f64) {
        assert!(
            (a.re - re).abs() <= tol && (a.im - im).abs() <= tol,
            "got {a}, want {re}+{im}i"
        );
    }

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn named_gates_are_unitary() {
        for g in [Gate2x2::hadamard(), Gate2x2::rot_x(), Gate2x2::rot_y()] {
            assert!(g.unitarity_deviation() < 1e-15);
            assert!(g.dagger().unitarity_deviation() < 1e-15);
        }
        let bad = Gate2x2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = shard_from(&[(1.0, 0.0), (0.0, 0.0)]);
        s.apply_single_qubit(0, &Gate2x2::hadamard()).unwrap();
        assert_close(s.amps()[0], S, 0.0, 1e-15);
        assert_close(s.amps()[1], S, 0.0, 1e-15);
    }

    #[test]
    fn rot_x_on_zero() {
        let mut s = shard_from(&[(1.0, 0.0), (0.0, 0.0)]);
        s.apply_single_qubit(0, &Gate2x2::rot_x()).unwrap();
        assert_close(s.amps()[0], S, 0.0, 1e-15);
        assert_close(s.amps()[1], 0.0, S, 1e-15);
    }

    #[test]
    fn rot_y_twice_gives_minus_one() {
        // Composing the printed 2x2 matrix with itself maps (1, 0) to (0, -1).
        let mut s = shard_from(&[(1.0, 0.0), (0.0, 0.0)]);
        s.apply_single_qubit(0, &Gate2x2::rot_y()).unwrap();
        s.apply_single_qubit(0, &Gate2x2::rot_y()).unwrap();
        assert_close(s.amps()[0], 0.0, 0.0, 1e-15);
        assert_close(s.amps()[1], -1.0, 0.0, 1e-15);
    }

    #[test]
    fn doubled_inverse_rotations_reach_one() {
        // XDAG XDAG and YDAG YDAG also bring |0> to |1> up to phase.
        for g in [Gate2x2::rot_x().dagger(), Gate2x2::rot_y().dagger()] {
            let mut s = shard_from(&[(1.0, 0.0), (0.0, 0.0)]);
            s.apply_single_qubit(0, &g).unwrap();
            s.apply_single_qubit(0, &g).unwrap();
            assert!(s.amps()[0].norm() < 1e-15);
            assert!((s.amps()[1].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_shift_multiplies_set_half() {
        let amps = [(0.1, 0.2), (0.3, -0.1), (0.5, 0.0), (-0.2, 0.4)];
        let phi = 0.731;
        let mut s = shard_from(&amps);
        s.apply_phase_shift(1, phi).unwrap();
        let ph = Complex64::from_polar(1.0, phi);
        assert_close(s.amps()[0], amps[0].0, amps[0].1, 1e-15);
        assert_close(s.amps()[1], amps[1].0, amps[1].1, 1e-15);
        let want2 = Complex64::new(amps[2].0, amps[2].1) * ph;
        let want3 = Complex64::new(amps[3].0, amps[3].1) * ph;
        assert_close(s.amps()[2], want2.re, want2.im, 1e-15);
        assert_close(s.amps()[3], want3.re, want3.im, 1e-15);
    }

    #[test]
    fn phase_shift_pi_negates_upper_half() {
        // m = 2, bit 1, phi = pi: (a0, a1, a2, a3) -> (a0, a1, -a2, -a3),
        // enumerated over the four addresses.
        let mut s = shard_from(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        s.apply_phase_shift(1, std::f64::consts::PI).unwrap();
        assert_close(s.amps()[0], 1.0, 0.0, 1e-15);
        assert_close(s.amps()[1], 2.0, 0.0, 1e-15);
        assert_close(s.amps()[2], -3.0, 0.0, 1e-15);
        assert_close(s.amps()[3], -4.0, 0.0, 1e-15);
    }

    #[test]
    fn phase_shift_zero_is_identity() {
        let amps = [(0.1, 0.2), (0.3, -0.1), (0.5, 0.0), (-0.2, 0.4)];
        let mut s = shard_from(&amps);
        s.apply_phase_shift(0, 0.0).unwrap();
        for (i, &(re, im)) in amps.iter().enumerate() {
            assert_close(s.amps()[i], re, im, 0.0);
        }
    }

    #[test]
    fn phase_shift_touches_exactly_half() {
        let m = 6;
        let mut s = StateShard::zeroed(m, 0).unwrap();
        for i in 0..s.len() {
            s.amps_mut()[i] = Complex64::new(1.0 + i as f64, 0.5);
        }
        let before = s.amps().to_vec();
        s.apply_phase_shift(3, 1.0).unwrap();
        let changed = s
            .amps()
            .iter()
            .zip(&before)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 1 << (m - 1));
    }

    #[test]
    fn cnot_swaps_control_set_pairs() {
        let mut s = shard_from(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        s.apply_cnot(0, 1).unwrap();
        // (a0, a1, a2, a3) -> (a0, a3, a2, a1)
        assert_close(s.amps()[0], 1.0, 0.0, 0.0);
        assert_close(s.amps()[1], 4.0, 0.0, 0.0);
        assert_close(s.amps()[2], 3.0, 0.0, 0.0);
        assert_close(s.amps()[3], 2.0, 0.0, 0.0);
    }

    #[test]
    fn cnot_leaves_basis_00() {
        let mut s = shard_from(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        s.apply_cnot(0, 1).unwrap();
        assert_close(s.amps()[0], 1.0, 0.0, 0.0);
    }

    #[test]
    fn cnot_and_toffoli_are_involutions() {
        let amps: Vec<(f64, f64)> = (0..16).map(|i| (i as f64 * 0.3, -(i as f64))).collect();
        let original = shard_from(&amps);

        let mut s = original.clone();
        s.apply_cnot(3, 1).unwrap();
        s.apply_cnot(3, 1).unwrap();
        assert_eq!(s, original);

        let mut s = original.clone();
        s.apply_toffoli(0, 2, 3).unwrap();
        s.apply_toffoli(0, 2, 3).unwrap();
        assert_eq!(s, original);
    }

    #[test]
    fn controlled_phase_hits_only_both_set() {
        let phi = 1.234;
        let mut s = shard_from(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        s.apply_controlled_phase(0, 1, phi).unwrap();
        let want = Complex64::new(4.0, 0.0) * Complex64::from_polar(1.0, phi);
        assert_close(s.amps()[0], 1.0, 0.0, 0.0);
        assert_close(s.amps()[1], 2.0, 0.0, 0.0);
        assert_close(s.amps()[2], 3.0, 0.0, 0.0);
        assert_close(s.amps()[3], want.re, want.im, 1e-15);
    }

    #[test]
    fn controlled_phase_is_symmetric_in_its_bits() {
        let amps = [(0.25, 0.1), (0.4, -0.3), (-0.5, 0.2), (0.3, 0.55)];
        let mut a = shard_from(&amps);
        let mut b = shard_from(&amps);
        a.apply_controlled_phase(0, 1, 0.91).unwrap();
        b.apply_controlled_phase(1, 0, 0.91).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn controlled_v_on_basis_01() {
        let phi = 0.62;
        let mut s = shard_from(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        s.apply_controlled_v(0, 1, phi).unwrap();
        let e = Complex64::from_polar(1.0, phi);
        let p = (Complex64::new(1.0, 0.0) + e) * 0.5;
        let q = (Complex64::new(1.0, 0.0) - e) * 0.5;
        assert_close(s.amps()[1], p.re, p.im, 1e-15);
        assert_close(s.amps()[3], q.re, q.im, 1e-15);
    }

    #[test]
    fn controlled_v_pi_equals_cnot() {
        let amps = [(0.25, 0.1), (0.4, -0.3), (-0.5, 0.2), (0.3, 0.55)];
        let mut v = shard_from(&amps);
        let mut c = shard_from(&amps);
        v.apply_controlled_v(0, 1, std::f64::consts::PI).unwrap();
        c.apply_cnot(0, 1).unwrap();
        for i in 0..4 {
            assert!((v.amps()[i] - c.amps()[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn controlled_v_zero_is_identity() {
        let amps = [(0.25, 0.1), (0.4, -0.3), (-0.5, 0.2), (0.3, 0.55)];
        let mut s = shard_from(&amps);
        s.apply_controlled_v(1, 0, 0.0).unwrap();
        for (i, &(re, im)) in amps.iter().enumerate() {
            assert_close(s.amps()[i], re, im, 1e-15);
        }
    }

    #[test]
    fn toffoli_exchanges_a3_a7() {
        let amps: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 0.0)).collect();
        let mut s = shard_from(&amps);
        s.apply_toffoli(0, 1, 2).unwrap();
        for i in 0..8 {
            let want = match i {
                3 => 7.0,
                7 => 3.0,
                _ => i as f64,
            };
            assert_close(s.amps()[i], want, 0.0, 0.0);
        }
    }

    #[test]
    fn toffoli_moves_exactly_a_quarter() {
        let m = 6;
        let mut s = StateShard::zeroed(m, 0).unwrap();
        for i in 0..s.len() {
            s.amps_mut()[i] = Complex64::new(i as f64 + 1.0, 0.0);
        }
        let before = s.amps().to_vec();
        s.apply_toffoli(1, 4, 2).unwrap();
        let moved = s
            .amps()
            .iter()
            .zip(&before)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(moved, 1 << (m - 2));
    }

    #[test]
    fn partial_expectation_basics() {
        let s = shard_from(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(s.partial_expectation(0).unwrap(), 1.0);
        let s = shard_from(&[(S, 0.0), (S, 0.0)]);
        assert!((s.partial_expectation(0).unwrap() - 0.5).abs() < 1e-15);
        let s = shard_from(&[(0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(s.partial_expectation(0).unwrap(), 0.0);
    }

    #[test]
    fn norm_squared_basics() {
        let mut s = StateShard::zeroed(3, 0).unwrap();
        assert_eq!(s.norm_squared(), 0.0);
        s.set_basis(Some(5)).unwrap();
        assert_eq!(s.norm_squared(), 1.0);
        let s = shard_from(&[(0.5, 0.0), (0.5, 0.0), (0.5, 0.0), (0.5, 0.0)]);
        assert!((s.norm_squared() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn locality_and_duplicate_errors() {
        let mut s = StateShard::zeroed(2, 0).unwrap();
        assert!(matches!(
            s.apply_single_qubit(2, &Gate2x2::hadamard()),
            Err(Error::Locality { position: 2, m: 2 })
        ));
        assert!(matches!(
            s.apply_cnot(1, 1),
            Err(Error::DuplicateBits(1))
        ));
        assert!(matches!(
            s.apply_toffoli(0, 1, 1),
            Err(Error::DuplicateBits(1))
        ));
        assert!(s.partial_expectation(7).is_err());
    }

    #[test]
    fn set_basis_rejects_out_of_range() {
        let mut s = StateShard::zeroed(2, 0).unwrap();
        assert!(s.set_basis(Some(4)).is_err());
    }

    #[test]
    fn basis_state_lands_on_the_layout_slot() {
        // L = 4, M = 2, identity layout, index 6 = 0110: rank 01, address 10.
        let sigma = QubitPermutation::identity(4, 2);
        for rank in 0..4 {
            let mut s = StateShard::zeroed(2, rank).unwrap();
            init_basis_state(&mut s, &sigma, 6).unwrap();
            if rank == 0b01 {
                assert_eq!(s.amps()[0b10], Complex64::new(1.0, 0.0));
                assert_eq!(s.norm_squared(), 1.0);
            } else {
                assert_eq!(s.norm_squared(), 0.0);
            }
        }

        // Interchanging qubits 0 and 2 moves the same pattern to rank 00,
        // address 11.
        let sigma = QubitPermutation::from_pos_to_qubit(vec![2, 1, 0, 3], 2).unwrap();
        let mut s = StateShard::zeroed(2, 0).unwrap();
        init_basis_state(&mut s, &sigma, 6).unwrap();
        assert_eq!(s.amps()[0b11], Complex64::new(1.0, 0.0));

        // All-zeros pattern always lands on rank 0, address 0.
        let mut s = StateShard::zeroed(2, 0).unwrap();
        init_basis_state(&mut s, &sigma, 0).unwrap();
        assert_eq!(s.amps()[0], Complex64::new(1.0, 0.0));

        // Out-of-range index is a domain error.
        let mut s = StateShard::zeroed(2, 0).unwrap();
        assert!(init_basis_state(&mut s, &sigma, 16).is_err());
    }
}
