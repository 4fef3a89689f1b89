//! Calibration data and slice fidelity.

use alloc::{collections::BTreeMap, string::String};

use thiserror::Error;

use crate::circuit::{bit_name, Instruction};
use crate::translate::Slice;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DeviceError {
    #[error("error rate for `{key}` is {rate}; rates must lie in [0, 1)")]
    RateOutOfRange { key: String, rate: f64 },
}

/// Per-gate-name error rates plus per-qubit measurement error rates.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    pub name: String,
    pub gate_default: f64,
    pub gate_error: BTreeMap<String, f64>,
    /// Used for multi-qubit gates without an explicit entry.
    pub two_qubit_default: Option<f64>,
    pub measurement_default: f64,
    /// Keyed by qubit name, either `q[0]` or `q0`.
    pub measurement_error: BTreeMap<String, f64>,
}

fn check(key: &str, rate: f64) -> Result<(), DeviceError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(DeviceError::RateOutOfRange {
            key: key.into(),
            rate,
        })
    }
}

impl DeviceModel {
    /// A device without errors.
    pub fn ideal() -> Self {
        DeviceModel {
            name: "ideal".into(),
            gate_default: 0.0,
            gate_error: BTreeMap::new(),
            two_qubit_default: None,
            measurement_default: 0.0,
            measurement_error: BTreeMap::new(),
        }
    }

    /// Uniform rates: `one_qubit` for single-qubit gates, `two_qubit` for
    /// the rest, `measurement` for every readout.
    pub fn uniform(name: &str, one_qubit: f64, two_qubit: f64, measurement: f64) -> Result<Self, DeviceError> {
        let model = DeviceModel {
            name: name.into(),
            gate_default: one_qubit,
            gate_error: BTreeMap::new(),
            two_qubit_default: Some(two_qubit),
            measurement_default: measurement,
            measurement_error: BTreeMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        check("gate_error.default", self.gate_default)?;
        check("measurement_error.default", self.measurement_default)?;
        if let Some(r) = self.two_qubit_default {
            check("two_qubit_default", r)?;
        }
        for (k, &r) in &self.gate_error {
            check(k, r)?;
        }
        for (k, &r) in &self.measurement_error {
            check(k, r)?;
        }
        Ok(())
    }

    pub fn gate_rate(&self, name: &str, num_qubits: usize) -> f64 {
        if let Some(&r) = self.gate_error.get(name) {
            return r;
        }
        match self.two_qubit_default {
            Some(r) if num_qubits >= 2 => r,
            _ => self.gate_default,
        }
    }

    /// Readout error of the qubit called `reg[index]`.
    pub fn measurement_rate(&self, reg: &str, index: usize) -> f64 {
        let bracketed = alloc::format!("{reg}[{index}]");
        let plain = alloc::format!("{reg}{index}");
        self.measurement_error
            .get(&bracketed)
            .or_else(|| self.measurement_error.get(&plain))
            .copied()
            .unwrap_or(self.measurement_default)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceFidelity {
    pub f: f64,
    pub gates: usize,
    pub measurements: usize,
}

/// Product of success probabilities over every gate and measurement.
pub fn slice_fidelity(slice: &Slice, model: &DeviceModel) -> SliceFidelity {
    let mut out = SliceFidelity {
        f: 1.0,
        gates: 0,
        measurements: 0,
    };
    for instr in &slice.instructions {
        match instr {
            Instruction::Gate { gate, qubits } => {
                out.f *= 1.0 - model.gate_rate(gate.name(), qubits.len());
                out.gates += 1;
            }
            Instruction::Measure { qubit, .. } => {
                let name = bit_name(&slice.qregs, qubit.0);
                let (reg, index) = split_bit_name(&name);
                out.f *= 1.0 - model.measurement_rate(reg, index);
                out.measurements += 1;
            }
            Instruction::Barrier { .. } => {}
        }
    }
    out
}

fn split_bit_name(name: &str) -> (&str, usize) {
    match name.split_once('[') {
        Some((reg, rest)) => (reg, rest.trim_end_matches(']').parse().unwrap_or(0)),
        None => (name, 0),
    }
}
