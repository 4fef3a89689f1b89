//! Dense statevector simulation and shot sampling.
//!
//! Qubit `k` corresponds to bit `k` of a basis-state index. Outcome indices
//! returned by [`marginal_distribution`] and friends use the opposite, reading
//! order: the first listed qubit is the most significant bit.

use alloc::{string::String, vec, vec::Vec};
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng as _;
use thiserror::Error;

use crate::circuit::{Gate, Instruction, Qubit};
use crate::rng;
use crate::translate::Slice;
use crate::verify::MeasurementCounts;

pub use crate::rng::derive_seed;

/// Dense simulation refuses registers wider than this.
pub const MAX_QUBITS: usize = 24;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SimError {
    #[error("{0} qubits exceed the dense simulation cap of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("qubit index {index} out of range for {num_qubits} qubit(s)")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("qubit {0} listed more than once")]
    DuplicateQubit(usize),
    #[error("measurements cannot be simulated as unitaries")]
    Measurement,
    #[error("amplitude vector of length {0} is not a power of two")]
    BadLength(usize),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("slice bit `{0}` is not written by any measurement")]
    UnwrittenBit(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

type Matrix2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_qubit_matrix(gate: Gate) -> Option<Matrix2> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    Some(match gate {
        Gate::X => [[o, l], [l, o]],
        Gate::Y => [[o, c(0.0, -1.0)], [c(0.0, 1.0), o]],
        Gate::Z => [[l, o], [o, -l]],
        Gate::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        Gate::S => [[l, o], [o, c(0.0, 1.0)]],
        Gate::Sdg => [[l, o], [o, c(0.0, -1.0)]],
        Gate::T => [[l, o], [o, c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)]],
        Gate::Tdg => [[l, o], [o, c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)]],
        Gate::Rx(t) => {
            let (s, co) = (libm::sin(t / 2.0), libm::cos(t / 2.0));
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        Gate::Ry(t) => {
            let (s, co) = (libm::sin(t / 2.0), libm::cos(t / 2.0));
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        Gate::Rz(t) => {
            let (s, co) = (libm::sin(t / 2.0), libm::cos(t / 2.0));
            [[c(co, -s), o], [o, c(co, s)]]
        }
        Gate::P(t) => [[l, o], [o, c(libm::cos(t), libm::sin(t))]],
        Gate::Cx | Gate::Cz | Gate::Swap | Gate::Ccx => return None,
    })
}

impl StateVector {
    /// |0…0⟩ on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(num_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// Wraps raw amplitudes (qubit `k` = bit `k` of the index).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(SimError::BadLength(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(num_qubits));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: Qubit) -> Result<(), SimError> {
        if q.0 >= self.num_qubits {
            Err(SimError::QubitOutOfRange {
                index: q.0,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn check_distinct(&self, qubits: &[Qubit]) -> Result<(), SimError> {
        for (i, q) in qubits.iter().enumerate() {
            self.check_qubit(*q)?;
            if qubits[..i].contains(q) {
                return Err(SimError::DuplicateQubit(q.0));
            }
        }
        Ok(())
    }

    fn apply_matrix(&mut self, m: &Matrix2, target: usize, control_mask: usize) {
        let bit = 1usize << target;
        for i in 0..self.amps.len() {
            if i & bit != 0 || i & control_mask != control_mask {
                continue;
            }
            let j = i | bit;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_x(&mut self, target: usize, control_mask: usize) {
        let bit = 1usize << target;
        for i in 0..self.amps.len() {
            if i & bit == 0 && i & control_mask == control_mask {
                self.amps.swap(i, i | bit);
            }
        }
    }

    pub fn apply_gate(&mut self, gate: Gate, qubits: &[Qubit]) -> Result<(), SimError> {
        self.check_distinct(qubits)?;
        let info = gate.info();
        if qubits.len() != info.num_qubits {
            return Err(SimError::QubitOutOfRange {
                index: qubits.len(),
                num_qubits: info.num_qubits,
            });
        }
        match gate {
            Gate::Cx => self.apply_x(qubits[1].0, 1 << qubits[0].0),
            Gate::Ccx => self.apply_x(qubits[2].0, (1 << qubits[0].0) | (1 << qubits[1].0)),
            Gate::Cz => {
                let mask = (1usize << qubits[0].0) | (1usize << qubits[1].0);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
            Gate::Swap => {
                let (a, b) = (1usize << qubits[0].0, 1usize << qubits[1].0);
                for i in 0..self.amps.len() {
                    if i & a != 0 && i & b == 0 {
                        self.amps.swap(i, i ^ a ^ b);
                    }
                }
            }
            _ => {
                let m = single_qubit_matrix(gate).expect("single-qubit gate");
                self.apply_matrix(&m, qubits[0].0, 0);
            }
        }
        Ok(())
    }

    /// Applies a unitary instruction; barriers are no-ops.
    pub fn apply(&mut self, instr: &Instruction) -> Result<(), SimError> {
        match instr {
            Instruction::Gate { gate, qubits } => self.apply_gate(*gate, qubits),
            Instruction::Barrier { qubits } => {
                qubits.iter().try_for_each(|&q| self.check_qubit(q))
            }
            Instruction::Measure { .. } => Err(SimError::Measurement),
        }
    }

    /// Outcome probabilities over `qubits`, first qubit most significant.
    pub fn marginal(&self, qubits: &[Qubit]) -> Result<Vec<f64>, SimError> {
        self.check_distinct(qubits)?;
        let m = qubits.len();
        let mut out = vec![0.0; 1usize << m];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            out[outcome_index(i, qubits)] += p;
        }
        Ok(out)
    }

    /// Amplitudes re-indexed by `order` (a permutation of all qubits), first
    /// listed qubit most significant.
    pub fn amplitudes_in_order(&self, order: &[Qubit]) -> Result<Vec<Complex64>, SimError> {
        self.check_distinct(order)?;
        if order.len() != self.num_qubits {
            return Err(SimError::QubitOutOfRange {
                index: order.len(),
                num_qubits: self.num_qubits,
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            out[outcome_index(i, order)] = *a;
        }
        Ok(out)
    }
}

fn outcome_index(basis: usize, qubits: &[Qubit]) -> usize {
    let m = qubits.len();
    qubits
        .iter()
        .enumerate()
        .fold(0usize, |acc, (j, q)| acc | (((basis >> q.0) & 1) << (m - 1 - j)))
}

/// Applies `instructions` to |0…0⟩.
pub fn simulate(instructions: &[Instruction], num_qubits: usize) -> Result<StateVector, SimError> {
    let mut state = StateVector::zero(num_qubits)?;
    for instr in instructions {
        state.apply(instr)?;
    }
    Ok(state)
}

pub fn marginal_distribution(state: &StateVector, qubits: &[Qubit]) -> Result<Vec<f64>, SimError> {
    state.marginal(qubits)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleConfig {
    pub shots: u64,
    pub seed: u64,
    /// Probability that a shot is drawn from the ideal distribution rather
    /// than uniformly at random; 1 means noiseless.
    pub fidelity: f64,
}

impl SampleConfig {
    pub fn ideal(shots: u64, seed: u64) -> Self {
        SampleConfig {
            shots,
            seed,
            fidelity: 1.0,
        }
    }
}

/// Draws a histogram over `probabilities.len()` outcomes, mixing in uniform
/// noise with weight `1 - cfg.fidelity`.
pub fn sample_histogram(probabilities: &[f64], cfg: &SampleConfig) -> Vec<u64> {
    let n = probabilities.len();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &p in probabilities {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut hist = vec![0u64; n];
    let mut rng = rng::seeded(cfg.seed);
    let f = cfg.fidelity.clamp(0.0, 1.0);
    for _ in 0..cfg.shots {
        let idx = if f >= 1.0 || rng.gen::<f64>() < f {
            let u = rng.gen::<f64>() * total;
            cdf.partition_point(|&x| x <= u).min(n - 1)
        } else {
            rng.gen_range(0..n)
        };
        hist[idx] += 1;
    }
    hist
}

/// Samples measurement outcomes of `measured` from `state`. Bits are named
/// after the global qubit index (`q0`, `q1`, ...).
pub fn sample_counts(
    state: &StateVector,
    measured: &[Qubit],
    cfg: &SampleConfig,
) -> Result<MeasurementCounts, SimError> {
    let probs = state.marginal(measured)?;
    let hist = sample_histogram(&probs, cfg);
    let names = measured.iter().map(|q| alloc::format!("q{}", q.0)).collect();
    Ok(MeasurementCounts::from_histogram(names, &hist).expect("histogram matches bit count"))
}

/// Exact joint distribution of the classical bits `bits` (names as in
/// [`Slice::cregs`]) after running the slice, first bit most significant.
///
/// Measurements whose qubit is afterwards used only as a control (or not at
/// all) are deferred to the end of the circuit. Any other measurement is
/// replaced by a CX onto a fresh ancilla that is read out at the end, which
/// reproduces the statistics of a collapsing mid-circuit measurement.
pub fn slice_distribution(slice: &Slice, bits: &[String]) -> Result<Vec<f64>, SimError> {
    let nq = slice.num_qubits();
    let instrs = &slice.instructions;

    let mut extra = 0usize;
    let mut plan: Vec<Option<Qubit>> = Vec::with_capacity(instrs.len());
    for (k, instr) in instrs.iter().enumerate() {
        if let Instruction::Measure { qubit, .. } = instr {
            let disturbed = instrs[k + 1..]
                .iter()
                .any(|later| later.acted_qubits().targets.contains(qubit));
            if disturbed {
                plan.push(Some(Qubit(nq + extra)));
                extra += 1;
            } else {
                plan.push(None);
            }
        } else {
            plan.push(None);
        }
    }
    let total = nq + extra;
    if total > MAX_QUBITS {
        return Err(SimError::TooManyQubits(total));
    }

    let mut state = StateVector::zero(total)?;
    // clbit -> qubit that holds its value at the end
    let mut holder: Vec<Option<Qubit>> = vec![None; slice.num_clbits()];
    for (instr, copy) in instrs.iter().zip(&plan) {
        match (instr, copy) {
            (Instruction::Measure { qubit, clbit }, Some(anc)) => {
                state.apply_gate(Gate::Cx, &[*qubit, *anc])?;
                holder[clbit.0] = Some(*anc);
            }
            (Instruction::Measure { qubit, clbit }, None) => {
                holder[clbit.0] = Some(*qubit);
            }
            (other, _) => state.apply(other)?,
        }
    }

    let mut readout = Vec::with_capacity(bits.len());
    for name in bits {
        let q = slice
            .clbit_index(name)
            .and_then(|c| holder.get(c.0).copied().flatten())
            .ok_or_else(|| SimError::UnwrittenBit(name.clone()))?;
        readout.push(q);
    }
    // Deferred measurements may read the same qubit twice; marginal() wants
    // distinct qubits, so expand repeated reads afterwards.
    let mut distinct: Vec<Qubit> = Vec::new();
    for q in &readout {
        if !distinct.contains(q) {
            distinct.push(*q);
        }
    }
    let base = state.marginal(&distinct)?;
    if distinct.len() == readout.len() {
        return Ok(base);
    }
    let m = readout.len();
    let d = distinct.len();
    let mut out = vec![0.0; 1usize << m];
    for (idx, p) in base.iter().enumerate() {
        let mut o = 0usize;
        for (j, q) in readout.iter().enumerate() {
            let pos = distinct.iter().position(|x| x == q).unwrap();
            let bit = (idx >> (d - 1 - pos)) & 1;
            o |= bit << (m - 1 - j);
        }
        out[o] += p;
    }
    Ok(out)
}

/// Runs a slice for `cfg.shots` shots and records the metadata bits.
pub fn sample_slice(slice: &Slice, cfg: &SampleConfig) -> Result<MeasurementCounts, SimError> {
    let bits = slice.bit_order();
    let probs = slice_distribution(slice, &bits)?;
    let hist = sample_histogram(&probs, cfg);
    Ok(MeasurementCounts::from_histogram(bits, &hist).expect("histogram matches bit count"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(gate: Gate, qs: &[usize]) -> Instruction {
        Instruction::gate(gate, qs.iter().map(|&q| Qubit(q)).collect()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hadamard_on_zero() {
        let s = simulate(&[g(Gate::H, &[0])], 1).unwrap();
        for a in s.amplitudes() {
            assert!(close(a.re, FRAC_1_SQRT_2, 1e-15) && a.im == 0.0);
        }
    }

    #[test]
    fn bell_pair_probabilities() {
        let s = simulate(&[g(Gate::H, &[0]), g(Gate::Cx, &[0, 1])], 2).unwrap();
        let p = s.marginal(&[Qubit(0), Qubit(1)]).unwrap();
        assert!(close(p[0], 0.5, 1e-12) && close(p[3], 0.5, 1e-12));
        assert!(p[1] == 0.0 && p[2] == 0.0);
        let m = s.marginal(&[Qubit(0)]).unwrap();
        assert!(close(m[0], 0.5, 1e-12) && close(m[1], 0.5, 1e-12));
    }

    #[test]
    fn basis_state_marginal_uses_listing_order() {
        // |q0 q1 q2> = |101>
        let s = simulate(&[g(Gate::X, &[0]), g(Gate::X, &[2])], 3).unwrap();
        let p = s.marginal(&[Qubit(0), Qubit(2)]).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 0.0, 1.0]);
        let p = s.marginal(&[Qubit(0), Qubit(1), Qubit(2)]).unwrap();
        assert_eq!(p[5], 1.0);
    }

    #[test]
    fn marginal_of_split_superposition() {
        // (|00> + |01>)/sqrt2 with q0 the first (left) label: q0 = 0, q1 in superposition.
        let s = simulate(&[g(Gate::H, &[1])], 2).unwrap();
        let p = s.marginal(&[Qubit(0)]).unwrap();
        // direct summation: |a_00|^2 + |a_01|^2 = 1 for q0 = 0
        let direct: f64 = [0usize, 2].iter().map(|&i| s.amplitudes()[i].norm_sqr()).sum();
        assert!(close(p[0], direct, 1e-15) && close(p[0], 1.0, 1e-12));
        assert!(close(p[1], 0.0, 1e-15));
    }

    #[test]
    fn marginal_rejects_duplicates() {
        let s = StateVector::zero(2).unwrap();
        assert_eq!(s.marginal(&[Qubit(1), Qubit(1)]), Err(SimError::DuplicateQubit(1)));
    }

    #[test]
    fn guards() {
        assert_eq!(StateVector::zero(25), Err(SimError::TooManyQubits(25)));
        assert!(matches!(
            simulate(&[g(Gate::H, &[3])], 2),
            Err(SimError::QubitOutOfRange { index: 3, .. })
        ));
        assert_eq!(
            simulate(&[Instruction::measure(Qubit(0), crate::circuit::Clbit(0))], 1),
            Err(SimError::Measurement)
        );
    }

    #[test]
    fn gate_matrices_match_reference_values() {
        let s = simulate(&[g(Gate::Ry(1.2), &[0])], 1).unwrap();
        assert!(close(s.marginal(&[Qubit(0)]).unwrap()[1], libm::sin(0.6).powi(2), 1e-15));
        let s = simulate(&[g(Gate::H, &[0]), g(Gate::T, &[0]), g(Gate::T, &[0]), g(Gate::Sdg, &[0])], 1)
            .unwrap();
        // T·T = S, S·Sdg = I
        let back = simulate(&[g(Gate::H, &[0])], 1).unwrap();
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
        let s = simulate(&[g(Gate::X, &[0]), g(Gate::Swap, &[0, 2])], 3).unwrap();
        assert_eq!(s.marginal(&[Qubit(2)]).unwrap(), vec![0.0, 1.0]);
        let s = simulate(&[g(Gate::X, &[0]), g(Gate::X, &[1]), g(Gate::Ccx, &[0, 1, 2])], 3).unwrap();
        assert_eq!(s.marginal(&[Qubit(2)]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn deterministic_state_samples_one_outcome() {
        let s = simulate(&[g(Gate::X, &[1])], 2).unwrap();
        let counts = sample_counts(&s, &[Qubit(0), Qubit(1)], &SampleConfig::ideal(100, 7)).unwrap();
        assert_eq!(counts.get("01"), 100);
        assert_eq!(counts.shots(), 100);
    }

    #[test]
    fn pure_noise_is_uniform() {
        let s = StateVector::zero(2).unwrap();
        let cfg = SampleConfig {
            shots: 100_000,
            seed: 3,
            fidelity: 0.0,
        };
        let counts = sample_counts(&s, &[Qubit(0), Qubit(1)], &cfg).unwrap();
        for key in ["00", "01", "10", "11"] {
            let freq = counts.get(key) as f64 / 100_000.0;
            assert!(close(freq, 0.25, 0.01), "{key}: {freq}");
        }
    }

    #[test]
    fn same_seed_same_counts() {
        let s = simulate(&[g(Gate::H, &[0]), g(Gate::Cx, &[0, 1])], 2).unwrap();
        let cfg = SampleConfig {
            shots: 500,
            seed: 11,
            fidelity: 0.8,
        };
        let a = sample_counts(&s, &[Qubit(0), Qubit(1)], &cfg).unwrap();
        let b = sample_counts(&s, &[Qubit(0), Qubit(1)], &cfg).unwrap();
        assert_eq!(a, b);
    }
}
