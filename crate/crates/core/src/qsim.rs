//! Dense statevector simulator.
//!
//! Amplitudes are stored in a flat array indexed by the basis integer with
//! little-endian qubit order: qubit 0 is the least significant bit of the
//! index, so `|q1 q0> = |10>` is index 2.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default upper bound on register size (2^24 amplitudes, 256 MiB).
pub const DEFAULT_MAX_QUBITS: usize = 24;

/// Registers at or above this size run single-qubit kernels on the rayon pool.
const PARALLEL_MIN_QUBITS: usize = 14;

/// Tolerance on `|‖ψ‖² − 1|` accepted when constructing states from raw data.
pub const NORM_TOLERANCE: f64 = 1e-9;

pub type Amplitude = Complex64;

/// Histogram of measured basis indices.
pub type Histogram = BTreeMap<usize, usize>;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Hadamard(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Cnot {
        control: usize,
        target: usize,
    },
    /// One sign (+1 or −1) per basis index.
    DiagonalPhase(Vec<i8>),
}

impl Gate {
    fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q < n_qubits {
                Ok(())
            } else {
                Err(Error::QubitIndex { index: q, n_qubits })
            }
        };
        match self {
            Gate::Hadamard(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => check(*q),
            Gate::Cnot { control, target } => {
                check(*control)?;
                check(*target)?;
                if control == target {
                    return Err(Error::InvalidGate(format!("CNOT control and target are both qubit {control}")));
                }
                Ok(())
            }
            Gate::DiagonalPhase(signs) => {
                let dim = 1usize << n_qubits;
                if signs.len() != dim {
                    return Err(Error::Shape { expected: dim, actual: signs.len() });
                }
                if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
                    return Err(Error::InvalidGate(format!("diagonal phase sign {bad} is not ±1")));
                }
                Ok(())
            }
        }
    }

    /// 2×2 unitary for single-qubit gates.
    fn matrix(&self) -> Option<(usize, [[Complex64; 2]; 2])> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            Gate::Hadamard(q) => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                Some((q, [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]))
            }
            Gate::Rx(q, angle) => {
                let (s, co) = (angle / 2.0).sin_cos();
                Some((q, [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]))
            }
            Gate::Ry(q, angle) => {
                let (s, co) = (angle / 2.0).sin_cos();
                Some((q, [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]))
            }
            Gate::Rz(q, angle) => {
                let (s, co) = (angle / 2.0).sin_cos();
                Some((q, [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Shape { expected: self.n_qubits, actual: other.n_qubits });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_capacity(n_qubits: usize, capacity: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > capacity {
        return Err(Error::Capacity { requested: n_qubits, capacity });
    }
    Ok(())
}

impl StateVector {
    /// `|0…0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_with_capacity(n_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_with_capacity(n_qubits: usize, capacity: usize) -> Result<Self> {
        Self::basis_with_capacity(n_qubits, 0, capacity)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        Self::basis_with_capacity(n_qubits, index, DEFAULT_MAX_QUBITS)
    }

    fn basis_with_capacity(n_qubits: usize, index: usize, capacity: usize) -> Result<Self> {
        check_capacity(n_qubits, capacity)?;
        let dimension = 1usize << n_qubits;
        if index >= dimension {
            return Err(Error::BasisIndex { index, dimension });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dimension];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Equal-weight superposition over all `2^n` basis states (`H^⊗n |0…0>`).
    pub fn uniform(n_qubits: usize) -> Result<Self> {
        Self::uniform_with_capacity(n_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn uniform_with_capacity(n_qubits: usize, capacity: usize) -> Result<Self> {
        check_capacity(n_qubits, capacity)?;
        let dimension = 1usize << n_qubits;
        let a = 1.0 / (dimension as f64).sqrt();
        Ok(Self { n_qubits, amps: vec![Complex64::new(a, 0.0); dimension] })
    }

    /// Wraps raw amplitudes; the norm must already be 1 within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_capacity(n_qubits, DEFAULT_MAX_QUBITS)?;
        let dimension = 1usize << n_qubits;
        if amps.len() != dimension {
            return Err(Error::Shape { expected: dimension, actual: amps.len() });
        }
        let state = Self { n_qubits, amps };
        let drift = (state.norm_sqr() - 1.0).abs();
        if !drift.is_finite() || drift > NORM_TOLERANCE {
            return Err(Error::Numerical(format!("amplitudes not normalized (|‖ψ‖² − 1| = {drift:e})")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dimension(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if let Some((q, m)) = gate.matrix() {
            self.apply_single(q, &m);
            return Ok(());
        }
        match gate {
            Gate::Cnot { control, target } => {
                let (c, t) = (1usize << control, 1usize << target);
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            Gate::DiagonalPhase(signs) => self.flip_signs(|k| signs[k] < 0),
            _ => unreachable!("single-qubit gates handled above"),
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(Error::Shape { expected: self.n_qubits, actual: circuit.n_qubits() });
        }
        for gate in circuit.gates() {
            self.apply(gate)?;
        }
        Ok(())
    }

    fn apply_single(&mut self, qubit: usize, m: &[[Complex64; 2]; 2]) {
        let stride = 1usize << qubit;
        let kernel = |chunk: &mut [Complex64]| {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = m[0][0] * x0 + m[0][1] * x1;
                *a1 = m[1][0] * x0 + m[1][1] * x1;
            }
        };
        if self.n_qubits >= PARALLEL_MIN_QUBITS {
            self.amps.par_chunks_mut(2 * stride).for_each(kernel);
        } else {
            self.amps.chunks_mut(2 * stride).for_each(kernel);
        }
    }

    /// Negates every amplitude whose index satisfies `marked`.
    pub fn flip_signs<F>(&mut self, marked: F)
    where
        F: Fn(usize) -> bool + Sync,
    {
        if self.n_qubits >= PARALLEL_MIN_QUBITS {
            self.amps.par_iter_mut().enumerate().for_each(|(k, a)| {
                if marked(k) {
                    *a = -*a;
                }
            });
        } else {
            for (k, a) in self.amps.iter_mut().enumerate() {
                if marked(k) {
                    *a = -*a;
                }
            }
        }
    }

    /// Reflection about the uniform state: `a_k ← 2·mean(a) − a_k`.
    pub fn reflect_about_mean(&mut self) {
        // Sequential sum keeps the result independent of thread count.
        let sum: Complex64 = self.amps.iter().sum();
        let twice_mean = sum * (2.0 / self.amps.len() as f64);
        if self.n_qubits >= PARALLEL_MIN_QUBITS {
            self.amps.par_iter_mut().for_each(|a| *a = twice_mean - *a);
        } else {
            self.amps.iter_mut().for_each(|a| *a = twice_mean - *a);
        }
    }

    /// `Σ_k |a_k|² c_k` for a diagonal observable with eigenvalues `costs`.
    pub fn expectation_diagonal(&self, costs: &[f64]) -> Result<f64> {
        if costs.len() != self.amps.len() {
            return Err(Error::Shape { expected: self.amps.len(), actual: costs.len() });
        }
        Ok(self.amps.iter().zip(costs).map(|(a, c)| a.norm_sqr() * c).sum())
    }

    /// `<Z_q>` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        let bit = 1usize << qubit;
        Ok(self.amps.iter().enumerate().map(|(k, a)| if k & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum())
    }

    pub fn marked_probability(&self, marked: &[usize]) -> Result<f64> {
        let dimension = self.amps.len();
        let mut p = 0.0;
        for &k in marked {
            if k >= dimension {
                return Err(Error::BasisIndex { index: k, dimension });
            }
            p += self.amps[k].norm_sqr();
        }
        Ok(p.min(1.0))
    }

    /// Samples `shots` computational-basis outcomes with a seeded ChaCha8 stream.
    pub fn measure(&self, shots: usize, seed: u64) -> Result<Histogram> {
        if shots == 0 {
            return Err(Error::Contract("measurement needs at least one shot".into()));
        }
        let mut cumulative = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut histogram = Histogram::new();
        let last = cumulative.len() - 1;
        for _ in 0..shots {
            let u = rng.gen::<f64>() * acc;
            let k = cumulative.partition_point(|&c| c <= u).min(last);
            *histogram.entry(k).or_insert(0) += 1;
        }
        Ok(histogram)
    }
}

/// Formats a basis index as a bitstring, most significant qubit first.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).rev().map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn zero_state_layout() {
        let s = StateVector::zero(2).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        assert!(close(s.amplitudes()[0], 1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
        assert_eq!(StateVector::zero(1).unwrap().dimension(), 2);
        let s3 = StateVector::zero(3).unwrap();
        assert!((s3.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(StateVector::zero(0), Err(Error::Capacity { .. })));
        assert!(matches!(StateVector::zero(25), Err(Error::Capacity { .. })));
        assert!(matches!(StateVector::zero_with_capacity(5, 4), Err(Error::Capacity { .. })));
        assert!(StateVector::zero_with_capacity(4, 4).is_ok());
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::Hadamard(0)).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
    }

    #[test]
    fn rx_pi_on_zero() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::Rx(0, PI)).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, 0.0));
        assert!(close(s.amplitudes()[1], 0.0, -1.0));
    }

    #[test]
    fn rz_is_diagonal_phase() {
        let mut s = StateVector::uniform(1).unwrap();
        s.apply(&Gate::Rz(0, PI)).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, -FRAC_1_SQRT_2));
        assert!(close(s.amplitudes()[1], 0.0, FRAC_1_SQRT_2));
    }

    #[test]
    fn cnot_truth_table_little_endian() {
        // |q1 q0> = |10> is index 2; control 1 flips qubit 0 giving |11>.
        let mut s = StateVector::basis(2, 0b10).unwrap();
        s.apply(&Gate::Cnot { control: 1, target: 0 }).unwrap();
        assert!(close(s.amplitudes()[0b11], 1.0, 0.0));
        // control clear: nothing happens
        let mut s = StateVector::basis(2, 0b01).unwrap();
        s.apply(&Gate::Cnot { control: 1, target: 0 }).unwrap();
        assert!(close(s.amplitudes()[0b01], 1.0, 0.0));
    }

    #[test]
    fn invalid_gates_are_rejected() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(s.apply(&Gate::Hadamard(2)), Err(Error::QubitIndex { .. })));
        assert!(matches!(s.apply(&Gate::Cnot { control: 1, target: 1 }), Err(Error::InvalidGate(_))));
        assert!(matches!(s.apply(&Gate::DiagonalPhase(vec![1; 3])), Err(Error::Shape { .. })));
        assert!(matches!(s.apply(&Gate::DiagonalPhase(vec![1, 0, 1, 1])), Err(Error::InvalidGate(_))));
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::Ry(3, 0.1)).is_err());
    }

    #[test]
    fn circuit_application() {
        let input = StateVector::zero(2).unwrap();
        let mut s = input.clone();
        s.apply_circuit(&Circuit::new(2)).unwrap();
        assert_eq!(s, input);

        let mut hh = Circuit::new(1);
        hh.push(Gate::Hadamard(0)).unwrap().push(Gate::Hadamard(0)).unwrap();
        let mut s = StateVector::zero(1).unwrap();
        s.apply_circuit(&hh).unwrap();
        assert!(close(s.amplitudes()[0], 1.0, 0.0));
        assert!(close(s.amplitudes()[1], 0.0, 0.0));

        let mut bell = Circuit::new(2);
        bell.push(Gate::Hadamard(0)).unwrap().push(Gate::Cnot { control: 0, target: 1 }).unwrap();
        let mut s = StateVector::zero(2).unwrap();
        s.apply_circuit(&bell).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[3], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], 0.0, 0.0));
        assert!(close(s.amplitudes()[2], 0.0, 0.0));
        assert!((s.marked_probability(&[0, 3]).unwrap() - 1.0).abs() < 1e-12);

        let mut s = StateVector::zero(3).unwrap();
        assert!(matches!(s.apply_circuit(&bell), Err(Error::Shape { .. })));
    }

    #[test]
    fn uniform_amplitudes() {
        let s = StateVector::uniform(3).unwrap();
        assert!(s.amplitudes().iter().all(|a| close(*a, 1.0 / 8f64.sqrt(), 0.0)));
        assert!((s.amplitudes()[0].re - 0.35355).abs() < 1e-5);
        let s = StateVector::uniform(2).unwrap();
        assert!(s.amplitudes().iter().all(|a| close(*a, 0.5, 0.0)));
        let s = StateVector::uniform(1).unwrap();
        assert!(s.amplitudes().iter().all(|a| close(*a, FRAC_1_SQRT_2, 0.0)));
        // agrees with H on every qubit
        let mut h = StateVector::zero(3).unwrap();
        for q in 0..3 {
            h.apply(&Gate::Hadamard(q)).unwrap();
        }
        for (a, b) in h.amplitudes().iter().zip(StateVector::uniform(3).unwrap().amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn diagonal_expectations() {
        let u1 = StateVector::uniform(1).unwrap();
        assert!((u1.expectation_diagonal(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        let b = StateVector::basis(2, 2).unwrap();
        assert_eq!(b.expectation_diagonal(&[1.5, -3.0, 7.25, 9.0]).unwrap(), 7.25);
        let u2 = StateVector::uniform(2).unwrap();
        assert!((u2.expectation_diagonal(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 2.5).abs() < 1e-12);
        assert!(matches!(u2.expectation_diagonal(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn expectation_z_signs() {
        let s = StateVector::basis(2, 0b10).unwrap();
        assert_eq!(s.expectation_z(0).unwrap(), 1.0);
        assert_eq!(s.expectation_z(1).unwrap(), -1.0);
        assert!(s.expectation_z(2).is_err());
    }

    #[test]
    fn measurement_delta_and_determinism() {
        let s = StateVector::basis(3, 5).unwrap();
        let h = s.measure(100, 1).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[&5], 100);

        let u = StateVector::uniform(2).unwrap();
        let h1 = u.measure(4096, 42).unwrap();
        let h2 = u.measure(4096, 42).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.values().sum::<usize>(), 4096);
        for k in 0..4 {
            let c = h1[&k] as f64;
            assert!((c - 1024.0).abs() <= 150.0, "count {c}");
        }
        assert!(u.measure(0, 1).is_err());
    }

    #[test]
    fn marked_probability_bounds() {
        let u = StateVector::uniform(3).unwrap();
        assert!((u.marked_probability(&[0]).unwrap() - 0.125).abs() < 1e-15);
        let all: Vec<usize> = (0..8).collect();
        assert!((u.marked_probability(&all).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(u.marked_probability(&[8]), Err(Error::BasisIndex { .. })));
    }

    #[test]
    fn identity_phase_and_flip() {
        let mut s = StateVector::uniform(2).unwrap();
        let before = s.clone();
        s.apply(&Gate::DiagonalPhase(vec![1; 4])).unwrap();
        assert_eq!(s, before);
        s.apply(&Gate::DiagonalPhase(vec![1, 1, -1, 1])).unwrap();
        assert!(close(s.amplitudes()[2], -0.5, 0.0));
    }

    #[test]
    fn parallel_kernels_match_sequential() {
        // 14 qubits crosses the parallel threshold; compare against a
        // hand-rolled sequential application.
        let n = PARALLEL_MIN_QUBITS;
        let mut par = StateVector::uniform(n).unwrap();
        par.apply(&Gate::Ry(3, 0.7)).unwrap();
        par.apply(&Gate::Rx(n - 1, -1.3)).unwrap();

        let mut seq = StateVector::uniform(n).unwrap().amps;
        for (q, g) in [(3, Gate::Ry(3, 0.7)), (n - 1, Gate::Rx(n - 1, -1.3))] {
            let (_, m) = g.matrix().unwrap();
            let stride = 1 << q;
            for i in 0..seq.len() {
                if i & stride == 0 {
                    let (x0, x1) = (seq[i], seq[i | stride]);
                    seq[i] = m[0][0] * x0 + m[0][1] * x1;
                    seq[i | stride] = m[1][0] * x0 + m[1][1] * x1;
                }
            }
        }
        assert_eq!(par.amplitudes(), &seq[..]);
    }

    #[test]
    fn bitstring_is_msb_first() {
        assert_eq!(bitstring(2, 3), "010");
        assert_eq!(bitstring(5, 4), "0101");
    }
}
