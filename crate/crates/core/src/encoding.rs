//! Discretization of continuous manipulator parameters onto basis indices.
//!
//! Each parameter owns a contiguous bit field of the basis index. Parameters
//! are laid out in declaration order starting from the least significant bit,
//! so parameter 0 occupies bits `0..n_0`, parameter 1 the next `n_1` bits, and
//! so on.

use std::f64::consts::TAU;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::DEFAULT_MAX_QUBITS;

/// Absorbs rounding when a decoded value sits exactly on a bin edge.
const BIN_EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub n_qubits: usize,
    #[serde(default)]
    pub angular: bool,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, min: f64, max: f64, n_qubits: usize, angular: bool) -> Result<Self> {
        let spec = Self { name: name.into(), min, max, n_qubits, angular };
        spec.validate()?;
        Ok(spec)
    }

    /// Full-turn joint angle on `[0, 2π)`.
    pub fn angle(name: impl Into<String>, n_qubits: usize) -> Result<Self> {
        Self::new(name, 0.0, TAU, n_qubits, true)
    }

    pub fn length(name: impl Into<String>, min: f64, max: f64, n_qubits: usize) -> Result<Self> {
        Self::new(name, min, max, n_qubits, false)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Domain(format!(
                "parameter {}: bounds [{}, {}] must be finite with min < max",
                self.name, self.min, self.max
            )));
        }
        if self.n_qubits == 0 || self.n_qubits > 32 {
            return Err(Error::Domain(format!("parameter {}: {} qubits is outside 1..=32", self.name, self.n_qubits)));
        }
        if self.angular && self.range() > TAU + 1e-12 {
            return Err(Error::Domain(format!("angular parameter {} spans more than one period", self.name)));
        }
        Ok(())
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn levels(&self) -> usize {
        1usize << self.n_qubits
    }

    /// Decoded spacing between neighbouring bins, `(max − min)/(2^n − 1)`.
    pub fn bin_width(&self) -> f64 {
        self.range() / (self.levels() - 1) as f64
    }

    /// True when the range covers a whole turn, so `max` and `min` coincide.
    pub fn full_period(&self) -> bool {
        self.angular && (self.range() - TAU).abs() <= 1e-12
    }

    pub fn encode_value(&self, z: f64) -> Result<usize> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("parameter {}: non-finite value", self.name)));
        }
        let z = if self.angular {
            let wrapped = self.min + (z - self.min).rem_euclid(TAU);
            if wrapped > self.max {
                return Err(Error::Domain(format!(
                    "parameter {}: angle {z} falls outside [{}, {}] after wrapping",
                    self.name, self.min, self.max
                )));
            }
            wrapped
        } else {
            if z < self.min || z > self.max {
                return Err(Error::Domain(format!(
                    "parameter {}: value {z} outside [{}, {}]",
                    self.name, self.min, self.max
                )));
            }
            z
        };
        let top = self.levels() - 1;
        let scaled = (z - self.min) / self.range() * top as f64;
        let k = (scaled + BIN_EDGE_SLACK).floor().max(0.0) as usize;
        Ok(k.min(top))
    }

    pub fn decode_value(&self, k: usize) -> f64 {
        let top = (self.levels() - 1) as f64;
        let z = self.min + k as f64 / top * self.range();
        if self.angular {
            self.min + (z - self.min).rem_euclid(TAU)
        } else {
            z
        }
    }
}

/// A point in parameter space, one value per grid parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    specs: Vec<ParamSpec>,
}

impl ParamGrid {
    pub fn new(specs: Vec<ParamSpec>) -> Result<Self> {
        Self::with_capacity(specs, DEFAULT_MAX_QUBITS)
    }

    pub fn with_capacity(specs: Vec<ParamSpec>, capacity: usize) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Domain("a grid needs at least one parameter".into()));
        }
        for spec in &specs {
            spec.validate()?;
        }
        let total: usize = specs.iter().map(|s| s.n_qubits).sum();
        if total > capacity {
            return Err(Error::Capacity { requested: total, capacity });
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn total_qubits(&self) -> usize {
        self.specs.iter().map(|s| s.n_qubits).sum()
    }

    /// Number of configurations, `2^N`.
    pub fn dimension(&self) -> usize {
        1usize << self.total_qubits()
    }

    pub fn pack(&self, sub_indices: &[usize]) -> Result<usize> {
        if sub_indices.len() != self.specs.len() {
            return Err(Error::Shape { expected: self.specs.len(), actual: sub_indices.len() });
        }
        let mut index = 0usize;
        let mut shift = 0;
        for (spec, &k) in self.specs.iter().zip(sub_indices) {
            if k >= spec.levels() {
                return Err(Error::BasisIndex { index: k, dimension: spec.levels() });
            }
            index |= k << shift;
            shift += spec.n_qubits;
        }
        Ok(index)
    }

    pub fn unpack(&self, index: usize) -> Vec<usize> {
        let mut shift = 0;
        self.specs
            .iter()
            .map(|spec| {
                let k = (index >> shift) & (spec.levels() - 1);
                shift += spec.n_qubits;
                k
            })
            .collect()
    }

    pub fn encode(&self, z: &[f64]) -> Result<usize> {
        if z.len() != self.specs.len() {
            return Err(Error::Shape { expected: self.specs.len(), actual: z.len() });
        }
        let ks = self.specs.iter().zip(z).map(|(spec, &v)| spec.encode_value(v)).collect::<Result<Vec<_>>>()?;
        self.pack(&ks)
    }

    pub fn decode(&self, index: usize) -> Result<ParamVector> {
        if index >= self.dimension() {
            return Err(Error::BasisIndex { index, dimension: self.dimension() });
        }
        Ok(ParamVector(self.specs.iter().zip(self.unpack(index)).map(|(spec, k)| spec.decode_value(k)).collect()))
    }

    /// Nearest-below grid point of `z`, i.e. `decode(encode(z))`.
    pub fn snap(&self, z: &[f64]) -> Result<ParamVector> {
        self.decode(self.encode(z)?)
    }

    /// Every `(index, configuration)` pair in ascending index order.
    pub fn enumerate(&self) -> impl Iterator<Item = (usize, ParamVector)> + '_ {
        (0..self.dimension()).map(move |k| {
            let z = self.decode(k).expect("index below dimension");
            (k, z)
        })
    }
}

pub fn bin_width(spec: &ParamSpec) -> f64 {
    spec.bin_width()
}
