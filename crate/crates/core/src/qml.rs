//! Parameterized-circuit surrogate of forward kinematics.
//!
//! A configuration is loaded into a product state with `RY` rotations, each
//! physical parameter driving one or more qubits, a hardware-efficient ansatz (RX/RY layers with a CNOT ring) is
//! applied, and each output coordinate is read from `<Z>` on a designated
//! qubit through an affine map onto its workspace interval. Training is
//! full-batch gradient descent with parameter-shift gradients.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{ParamGrid, ParamVector};
use crate::error::{Error, Result};
use crate::kinematics::{PoseWeights, RobotModel, Task};
use crate::qsim::{Circuit, Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ansatz {
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl Ansatz {
    pub fn new(n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits < 2 || n_layers < 1 {
            return Err(Error::Domain(format!("ansatz needs ≥ 2 qubits and ≥ 1 layer, got {n_qubits} and {n_layers}")));
        }
        Ok(Self { n_qubits, n_layers })
    }

    pub fn param_count(&self) -> usize {
        2 * self.n_qubits * self.n_layers
    }

    fn gates<'a>(&self, theta: &'a [f64]) -> impl Iterator<Item = Gate> + 'a {
        let n = self.n_qubits;
        (0..self.n_layers).flat_map(move |layer| {
            let base = 2 * n * layer;
            let rotations =
                (0..n).flat_map(move |q| [Gate::Rx(q, theta[base + 2 * q]), Gate::Ry(q, theta[base + 2 * q + 1])]);
            let ring = (0..n).map(move |q| Gate::Cnot { control: q, target: (q + 1) % n });
            rotations.chain(ring)
        })
    }

    /// Layer `l`, qubit `q`: `RX(θ[2(l·n+q)])` then `RY(θ[2(l·n+q)+1])`;
    /// after all rotations of a layer, `CNOT(q → q+1 mod n)` for each `q`.
    pub fn circuit(&self, theta: &[f64]) -> Result<Circuit> {
        self.check_params(theta)?;
        let mut c = Circuit::new(self.n_qubits);
        for g in self.gates(theta) {
            c.push(g)?;
        }
        Ok(c)
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::Shape { expected: self.param_count(), actual: theta.len() });
        }
        Ok(())
    }
}

/// Maps one physical parameter to an `RY` angle on one qubit.
///
/// Angular parameters are affine onto `[−π, π]`, so the Bloch vector carries
/// `cos z` and `sin z` up to sign. Length parameters use
/// `angle = asin(z / max(|min|, |max|))`, so the Bloch component
/// `sin(angle)` is proportional to the length with no constant offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputEncoding {
    /// Index of the physical parameter this rotation loads.
    pub param: usize,
    pub qubit: usize,
    pub min: f64,
    pub max: f64,
    pub angular: bool,
}

impl InputEncoding {
    pub fn angle(&self, z: f64) -> f64 {
        if self.angular {
            -PI + 2.0 * PI * (z - self.min) / (self.max - self.min)
        } else {
            (z / self.max.abs().max(self.min.abs())).clamp(-1.0, 1.0).asin()
        }
    }
}

/// Affine map from `<Z> ∈ [−1, 1]` onto `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub qubit: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Readout {
    pub fn value(&self, z_expectation: f64) -> f64 {
        self.lo + 0.5 * (z_expectation + 1.0) * (self.hi - self.lo)
    }

    fn slope(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub ansatz: Ansatz,
    pub params: Vec<f64>,
    pub inputs: Vec<InputEncoding>,
    pub readouts: Vec<Readout>,
}

/// Uniform `[−π, π)` initial parameters from a seeded stream.
pub fn init_params(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(-PI..PI)).collect()
}

impl Surrogate {
    pub fn new(ansatz: Ansatz, params: Vec<f64>, inputs: Vec<InputEncoding>, readouts: Vec<Readout>) -> Result<Self> {
        ansatz.check_params(&params)?;
        let n = ansatz.n_qubits;
        let mut seen_in = vec![false; n];
        for input in &inputs {
            if input.qubit >= n {
                return Err(Error::QubitIndex { index: input.qubit, n_qubits: n });
            }
            if std::mem::replace(&mut seen_in[input.qubit], true) {
                return Err(Error::Domain(format!("two inputs share qubit {}", input.qubit)));
            }
            if input.min.is_nan() || input.max.is_nan() || input.min >= input.max {
                return Err(Error::Domain("input range must have min < max".into()));
            }
        }
        let mut seen_out = vec![false; n];
        for r in &readouts {
            if r.qubit >= n {
                return Err(Error::QubitIndex { index: r.qubit, n_qubits: n });
            }
            if std::mem::replace(&mut seen_out[r.qubit], true) {
                return Err(Error::Domain(format!("two readouts share qubit {}", r.qubit)));
            }
        }
        Ok(Self { ansatz, params, inputs, readouts })
    }

    /// Surrogate for `model` over `grid`. Copy `c` of parameter `i` sits on
    /// qubit `c·P + i` for `P` grid parameters, output coordinate `j` is read
    /// on qubit `j`, and readout intervals span the analytic workspace of the
    /// grid plus a 10% margin.
    pub fn for_grid(grid: &ParamGrid, model: &RobotModel, ansatz: Ansatz, copies: usize, seed: u64) -> Result<Self> {
        let outputs = model.output_dim();
        let np = grid.len();
        if copies == 0 {
            return Err(Error::Domain("each parameter needs at least one encoding qubit".into()));
        }
        if ansatz.n_qubits < copies * np || ansatz.n_qubits < outputs {
            return Err(Error::Domain(format!(
                "surrogate needs at least {} qubits for {} × {np} inputs and {outputs} outputs",
                (copies * np).max(outputs),
                copies,
            )));
        }
        let inputs = (0..copies)
            .flat_map(|c| {
                grid.specs().iter().enumerate().map(move |(i, s)| InputEncoding {
                    param: i,
                    qubit: c * np + i,
                    min: s.min,
                    max: s.max,
                    angular: s.angular,
                })
            })
            .collect();
        let mut lo = vec![f64::INFINITY; outputs];
        let mut hi = vec![f64::NEG_INFINITY; outputs];
        for (_, z) in grid.enumerate() {
            for (j, v) in model.forward(&z)?.coordinates().into_iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let readouts = (0..outputs)
            .map(|j| {
                let margin = 0.1 * (hi[j] - lo[j]) + 1e-9;
                Readout { qubit: j, lo: lo[j] - margin, hi: hi[j] + margin }
            })
            .collect();
        Self::new(ansatz, init_params(ansatz.param_count(), seed), inputs, readouts)
    }

    pub fn output_dim(&self) -> usize {
        self.readouts.len()
    }

    /// One `RY` per input encoding on its assigned qubit.
    pub fn encode_input(&self, z: &[f64]) -> Result<Circuit> {
        self.check_input(z)?;
        let mut c = Circuit::new(self.ansatz.n_qubits);
        for enc in &self.inputs {
            c.push(Gate::Ry(enc.qubit, enc.angle(z[enc.param])))?;
        }
        Ok(c)
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        let expected = self.inputs.iter().map(|e| e.param + 1).max().unwrap_or(0);
        if z.len() != expected {
            return Err(Error::Shape { expected, actual: z.len() });
        }
        Ok(())
    }

    fn input_angles(&self, z: &[f64]) -> Result<Vec<(usize, f64)>> {
        self.check_input(z)?;
        Ok(self.inputs.iter().map(|enc| (enc.qubit, enc.angle(z[enc.param]))).collect())
    }

    /// `<Z>` on each readout qubit for parameters `theta`.
    fn z_expectations(&self, angles: &[(usize, f64)], theta: &[f64]) -> Result<Vec<f64>> {
        let mut state = StateVector::zero(self.ansatz.n_qubits)?;
        for &(q, a) in angles {
            state.apply(&Gate::Ry(q, a))?;
        }
        for g in self.ansatz.gates(theta) {
            state.apply(&g)?;
        }
        self.readouts.iter().map(|r| state.expectation_z(r.qubit)).collect()
    }

    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        let angles = self.input_angles(z)?;
        let ez = self.z_expectations(&angles, &self.params)?;
        Ok(self.readouts.iter().zip(ez).map(|(r, e)| r.value(e)).collect())
    }

    /// Prediction and its Jacobian w.r.t. the ansatz parameters, the latter
    /// from `∂<Z>/∂θ_j = (<Z>(θ_j + π/2) − <Z>(θ_j − π/2)) / 2`.
    fn predict_with_jacobian(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let angles = self.input_angles(z)?;
        let ez = self.z_expectations(&angles, &self.params)?;
        let pred = self.readouts.iter().zip(&ez).map(|(r, &e)| r.value(e)).collect();
        let mut theta = self.params.clone();
        let mut jac = vec![vec![0.0; self.params.len()]; self.readouts.len()];
        for j in 0..theta.len() {
            let original = theta[j];
            theta[j] = original + FRAC_PI_2;
            let plus = self.z_expectations(&angles, &theta)?;
            theta[j] = original - FRAC_PI_2;
            let minus = self.z_expectations(&angles, &theta)?;
            theta[j] = original;
            for (o, r) in self.readouts.iter().enumerate() {
                jac[o][j] = r.slope() * 0.5 * (plus[o] - minus[o]);
            }
        }
        Ok((pred, jac))
    }

    pub fn to_params_text(&self) -> String {
        let mut s = String::from("# qkopt surrogate parameters\n");
        let _ = writeln!(s, "n_qubits {}", self.ansatz.n_qubits);
        let _ = writeln!(s, "n_layers {}", self.ansatz.n_layers);
        let _ = writeln!(s, "count {}", self.params.len());
        for p in &self.params {
            let _ = writeln!(s, "{p:?}");
        }
        s
    }

    /// Replaces the parameters with those in a document from [`Surrogate::to_params_text`].
    pub fn load_params_text(&mut self, text: &str) -> Result<()> {
        let mut header = std::collections::HashMap::new();
        let mut values = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            match line.split_once(' ') {
                Some((key, v)) => {
                    let v: usize = v.trim().parse().map_err(|_| Error::Config(format!("bad header line `{line}`")))?;
                    header.insert(key.to_string(), v);
                }
                None => values.push(line.parse::<f64>().map_err(|_| Error::Config(format!("bad value `{line}`")))?),
            }
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::Config(format!("missing `{k}`")));
        let ansatz = Ansatz::new(get("n_qubits")?, get("n_layers")?)?;
        if ansatz != self.ansatz {
            return Err(Error::Config(format!(
                "parameter file is for a {}-qubit {}-layer ansatz, surrogate has {}×{}",
                ansatz.n_qubits, ansatz.n_layers, self.ansatz.n_qubits, self.ansatz.n_layers
            )));
        }
        if get("count")? != values.len() {
            return Err(Error::Shape { expected: get("count")?, actual: values.len() });
        }
        self.ansatz.check_params(&values)?;
        self.params = values;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Vec<ParamVector>,
    pub labels: Vec<Vec<f64>>,
}

impl TrainingSet {
    /// Labels every listed grid index (or the whole grid) with analytic FK.
    pub fn from_grid(grid: &ParamGrid, model: &RobotModel, indices: Option<&[usize]>) -> Result<Self> {
        let all: Vec<usize>;
        let indices = match indices {
            Some(ix) => ix,
            None => {
                all = (0..grid.dimension()).collect();
                &all
            }
        };
        let mut inputs = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            let z = grid.decode(k)?;
            labels.push(model.forward(&z)?.coordinates());
            inputs.push(z);
        }
        Ok(Self { inputs, labels })
    }

    /// `count` distinct grid indices drawn with a seeded stream, in ascending order.
    pub fn sample_indices(dimension: usize, count: usize, seed: u64) -> Vec<usize> {
        if count >= dimension {
            return (0..dimension).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, dimension, count).into_vec();
        picked.sort_unstable();
        picked
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn check(&self, surrogate: &Surrogate) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Contract("training set is empty".into()));
        }
        for label in &self.labels {
            if label.len() != surrogate.output_dim() {
                return Err(Error::Shape { expected: surrogate.output_dim(), actual: label.len() });
            }
        }
        Ok(())
    }
}

fn squared_error(pred: &[f64], label: &[f64]) -> f64 {
    pred.iter().zip(label).map(|(p, l)| (p - l) * (p - l)).sum()
}

/// Mean over samples of `‖prediction − label‖²`.
pub fn loss(surrogate: &Surrogate, data: &TrainingSet) -> Result<f64> {
    data.check(surrogate)?;
    let terms = data
        .inputs
        .par_iter()
        .zip(&data.labels)
        .map(|(z, label)| Ok(squared_error(&surrogate.predict(z)?, label)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>() / data.len() as f64)
}

/// Loss and its parameter-shift gradient. Per-sample terms are reduced
/// sequentially in sample order so the result does not depend on the
/// thread count.
pub fn loss_and_gradient(surrogate: &Surrogate, data: &TrainingSet) -> Result<(f64, Vec<f64>)> {
    data.check(surrogate)?;
    let per_sample = data
        .inputs
        .par_iter()
        .zip(&data.labels)
        .map(|(z, label)| {
            let (pred, jac) = surrogate.predict_with_jacobian(z)?;
            let mut grad = vec![0.0; surrogate.params.len()];
            for (o, row) in jac.iter().enumerate() {
                let residual = 2.0 * (pred[o] - label[o]);
                for (g, d) in grad.iter_mut().zip(row) {
                    *g += residual * d;
                }
            }
            Ok((squared_error(&pred, label), grad))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / data.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; surrogate.params.len()];
    for (l, g) in per_sample {
        total += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((total * scale, grad))
}

pub fn gradient(surrogate: &Surrogate, data: &TrainingSet) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(surrogate, data)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Re-draws the initial parameters from this seed when set.
    pub seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, learning_rate: 0.1, seed: None }
    }
}

/// Full-batch gradient descent. The returned trace holds the loss before
/// every epoch followed by the final loss (`epochs + 1` entries).
pub fn train(surrogate: &Surrogate, data: &TrainingSet, cfg: &TrainConfig) -> Result<(Surrogate, Vec<f64>)> {
    if cfg.epochs == 0 {
        return Err(Error::Domain("training needs at least one epoch".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::Domain(format!("learning rate {} is invalid", cfg.learning_rate)));
    }
    let mut model = surrogate.clone();
    if let Some(seed) = cfg.seed {
        model.params = init_params(model.ansatz.param_count(), seed);
    }
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..cfg.epochs {
        let (l, grad) = loss_and_gradient(&model, data)?;
        if !l.is_finite() {
            return Err(Error::Training { epoch, loss: l });
        }
        trace.push(l);
        for (p, g) in model.params.iter_mut().zip(grad) {
            *p -= cfg.learning_rate * g;
        }
    }
    let last = loss(&model, data)?;
    if !last.is_finite() {
        return Err(Error::Training { epoch: cfg.epochs, loss: last });
    }
    trace.push(last);
    Ok((model, trace))
}

/// Diagonal of the cost observable, one entry per basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable(pub Vec<f64>);

impl CostTable {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Lowest cost and its index, ties to the lowest index.
    pub fn argmin(&self) -> Option<(usize, f64)> {
        self.0.iter().copied().enumerate().fold(None, |best, (k, c)| match best {
            Some((_, b)) if b <= c => best,
            _ => Some((k, c)),
        })
    }
}

/// Where cost-table entries come from.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    /// Closed-form FK (the verification oracle).
    Analytic,
    /// Learned FK.
    Surrogate(&'a Surrogate),
}

pub fn build_cost_table(
    grid: &ParamGrid,
    model: &RobotModel,
    task: &Task,
    weights: &PoseWeights,
    predictor: Predictor<'_>,
) -> Result<CostTable> {
    weights.validate()?;
    let costs = (0..grid.dimension())
        .into_par_iter()
        .map(|k| {
            let z = grid.decode(k)?;
            match predictor {
                Predictor::Analytic => task.cost(&model.forward(&z)?, weights),
                Predictor::Surrogate(s) => task.cost_from_coordinates(&s.predict(&z)?, weights),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CostTable(costs))
}
