//! Amplitude amplification over a diagonal cost table.
//!
//! The oracle negates every basis state whose cost is at most `ε`, the
//! diffusion step reflects amplitudes about their mean, and the threshold is
//! lowered geometrically until the marked set is as small as it can get
//! without becoming empty. Candidates are checked against analytic forward
//! kinematics before they are accepted.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::encoding::{ParamGrid, ParamVector};
use crate::error::{Error, Result};
use crate::kinematics::{PoseWeights, RobotModel, Task};
use crate::qsim::{bitstring, Gate, Histogram, StateVector};

/// Upper bound on geometric shrink steps; reached only when the minimum cost is 0.
pub const DEFAULT_MAX_SHRINKS: usize = 64;
const MAX_BISECTIONS: usize = 64;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Domain(format!("threshold ε = {epsilon} must be finite and non-negative")));
    }
    Ok(())
}

/// `|{k : costs[k] ≤ ε}|`.
pub fn count_solutions(costs: &[f64], epsilon: f64) -> usize {
    costs.iter().filter(|&&c| c <= epsilon).count()
}

/// `⌊(π/4)·√(M/m)⌋`, at least 1 while `m < M/2`, and 0 once every state is marked.
pub fn iteration_count(dimension: usize, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::NoSolution { epsilon: f64::NAN });
    }
    if m > dimension {
        return Err(Error::Domain(format!("{m} marked states exceed the dimension {dimension}")));
    }
    if m == dimension {
        return Ok(0);
    }
    let k = (FRAC_PI_4 * (dimension as f64 / m as f64).sqrt()).floor() as usize;
    Ok(if 2 * m < dimension { k.max(1) } else { k })
}

/// `sin²((2K+1)·asin√(m/M))`.
pub fn success_probability_analytic(dimension: usize, m: usize, iterations: usize) -> f64 {
    let theta = (m as f64 / dimension as f64).sqrt().asin();
    let p = ((2 * iterations + 1) as f64 * theta).sin().powi(2);
    p.clamp(0.0, 1.0)
}

/// Threshold oracle over a cost table; `k` is marked iff `costs[k] ≤ ε`.
#[derive(Debug, Clone, Copy)]
pub struct OracleSpec<'a> {
    pub costs: &'a [f64],
    pub epsilon: f64,
}

impl<'a> OracleSpec<'a> {
    pub fn new(costs: &'a [f64], epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { costs, epsilon })
    }

    pub fn is_marked(&self, k: usize) -> bool {
        self.costs[k] <= self.epsilon
    }

    pub fn count(&self) -> usize {
        count_solutions(self.costs, self.epsilon)
    }

    pub fn marked(&self) -> Vec<usize> {
        (0..self.costs.len()).filter(|&k| self.is_marked(k)).collect()
    }

    /// The oracle as an explicit `±1` diagonal.
    pub fn gate(&self) -> Gate {
        Gate::DiagonalPhase(self.costs.iter().map(|&c| if c <= self.epsilon { -1 } else { 1 }).collect())
    }
}

pub fn apply_oracle(state: &mut StateVector, oracle: &OracleSpec<'_>) -> Result<()> {
    if oracle.costs.len() != state.dimension() {
        return Err(Error::Shape { expected: state.dimension(), actual: oracle.costs.len() });
    }
    state.flip_signs(|k| oracle.is_marked(k));
    Ok(())
}

pub fn apply_diffusion(state: &mut StateVector) {
    state.reflect_about_mean();
}

/// Uniform superposition after `iterations` oracle + diffusion rounds.
pub fn amplify(n_qubits: usize, oracle: &OracleSpec<'_>, iterations: usize) -> Result<StateVector> {
    let mut state = StateVector::uniform(n_qubits)?;
    for _ in 0..iterations {
        apply_oracle(&mut state, oracle)?;
        apply_diffusion(&mut state);
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroverPlan {
    /// Fixed round count; `None` schedules it with [`iteration_count`].
    #[serde(default)]
    pub iterations: Option<usize>,
    pub shots: usize,
    pub seed: u64,
}

impl GroverPlan {
    pub fn new(shots: usize, seed: u64) -> Self {
        Self { iterations: None, shots, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub e_actual: f64,
    pub position_error: f64,
    pub tolerance: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_index: usize,
    pub bitstring: String,
    pub params: ParamVector,
    pub epsilon: f64,
    pub marked: usize,
    /// Oracle queries, equal to the number of rounds.
    pub queries: usize,
    pub marked_probability: f64,
    pub analytic_probability: f64,
    pub best_count: usize,
    pub shots: usize,
    pub verification: Option<Verification>,
}

/// Most frequent outcome, ties to the lowest index.
pub fn most_frequent(histogram: &Histogram) -> Option<(usize, usize)> {
    histogram.iter().fold(None, |best, (&k, &n)| match best {
        Some((_, b)) if b >= n => best,
        _ => Some((k, n)),
    })
}

pub fn grover_search(grid: &ParamGrid, oracle: &OracleSpec<'_>, plan: &GroverPlan) -> Result<SearchResult> {
    let dimension = grid.dimension();
    if oracle.costs.len() != dimension {
        return Err(Error::Shape { expected: dimension, actual: oracle.costs.len() });
    }
    let m = oracle.count();
    if m == 0 {
        return Err(Error::NoSolution { epsilon: oracle.epsilon });
    }
    let iterations = match plan.iterations {
        Some(k) => k,
        // Amplification overshoots once most states are marked; sample uniformly.
        None if 2 * m > dimension => 0,
        None => iteration_count(dimension, m)?,
    };
    let state = amplify(grid.total_qubits(), oracle, iterations)?;
    let histogram = state.measure(plan.shots, plan.seed)?;
    let hits: usize = histogram.iter().filter(|(&k, _)| oracle.is_marked(k)).map(|(_, &n)| n).sum();
    let (best_index, best_count) = most_frequent(&histogram).expect("at least one shot");
    Ok(SearchResult {
        best_index,
        bitstring: bitstring(best_index, grid.total_qubits()),
        params: grid.decode(best_index)?,
        epsilon: oracle.epsilon,
        marked: m,
        queries: iterations,
        marked_probability: hits as f64 / plan.shots as f64,
        analytic_probability: success_probability_analytic(dimension, m, iterations),
        best_count,
        shots: plan.shots,
        verification: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub shrink: f64,
    #[serde(default = "default_max_shrinks")]
    pub max_shrinks: usize,
    /// Bisect between the last non-empty and the first empty threshold
    /// while more than one state stays marked.
    #[serde(default = "default_refine")]
    pub refine: bool,
}

fn default_max_shrinks() -> usize {
    DEFAULT_MAX_SHRINKS
}

fn default_refine() -> bool {
    true
}

impl AdaptiveConfig {
    pub fn new(shrink: f64) -> Self {
        Self { shrink, max_shrinks: DEFAULT_MAX_SHRINKS, refine: true }
    }
}

/// One threshold visited by the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStep {
    pub epsilon: f64,
    pub marked: usize,
    pub iterations: usize,
    /// `<H_cost>` of the amplified state at this threshold.
    pub expectation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveResult {
    pub search: SearchResult,
    pub epsilon: f64,
    pub steps: Vec<AdaptiveStep>,
}

impl AdaptiveResult {
    /// Oracle queries summed over every visited threshold.
    pub fn total_queries(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

fn scheduled_iterations(dimension: usize, m: usize) -> Result<usize> {
    if 2 * m > dimension {
        Ok(0)
    } else {
        iteration_count(dimension, m)
    }
}

/// Marked count, scheduled rounds and `<H_cost>` after amplification at `epsilon`.
pub fn threshold_step(grid: &ParamGrid, costs: &[f64], epsilon: f64) -> Result<AdaptiveStep> {
    let oracle = OracleSpec::new(costs, epsilon)?;
    let marked = oracle.count();
    if marked == 0 {
        return Err(Error::NoSolution { epsilon });
    }
    let iterations = scheduled_iterations(costs.len(), marked)?;
    let state = amplify(grid.total_qubits(), &oracle, iterations)?;
    Ok(AdaptiveStep { epsilon, marked, iterations, expectation: state.expectation_diagonal(costs)? })
}

/// Lowers `ε ← ε·shrink` until the next shrink would leave nothing marked,
/// then searches at the last non-empty threshold.
pub fn adaptive_search(
    grid: &ParamGrid,
    costs: &[f64],
    epsilon0: f64,
    config: &AdaptiveConfig,
    plan: &GroverPlan,
) -> Result<AdaptiveResult> {
    check_epsilon(epsilon0)?;
    if !(config.shrink > 0.0 && config.shrink < 1.0) {
        return Err(Error::Domain(format!("shrink factor {} must lie in (0, 1)", config.shrink)));
    }
    if costs.len() != grid.dimension() {
        return Err(Error::Shape { expected: grid.dimension(), actual: costs.len() });
    }
    if count_solutions(costs, epsilon0) == 0 {
        return Err(Error::NoSolution { epsilon: epsilon0 });
    }
    let mut epsilon = epsilon0;
    let mut steps = vec![threshold_step(grid, costs, epsilon)?];
    let mut empty_below = None;
    for _ in 0..config.max_shrinks {
        let next = epsilon * config.shrink;
        if count_solutions(costs, next) == 0 {
            empty_below = Some(next);
            break;
        }
        epsilon = next;
        steps.push(threshold_step(grid, costs, epsilon)?);
    }
    if let (true, Some(mut lo)) = (config.refine, empty_below) {
        for _ in 0..MAX_BISECTIONS {
            if count_solutions(costs, epsilon) <= 1 {
                break;
            }
            let mid = 0.5 * (lo + epsilon);
            if mid <= lo || mid >= epsilon {
                break;
            }
            if count_solutions(costs, mid) == 0 {
                lo = mid;
            } else {
                epsilon = mid;
                steps.push(threshold_step(grid, costs, epsilon)?);
            }
        }
    }
    let search = grover_search(grid, &OracleSpec::new(costs, epsilon)?, plan)?;
    Ok(AdaptiveResult { search, epsilon, steps })
}

/// Analytic check of a candidate: accepted iff its task cost is at most `tolerance`.
pub fn verify(
    index: usize,
    grid: &ParamGrid,
    model: &RobotModel,
    task: &Task,
    weights: &PoseWeights,
    tolerance: f64,
) -> Result<Verification> {
    let z = grid.decode(index)?;
    let tips = model.forward(&z)?;
    let e_actual = task.cost(&tips, weights)?;
    let in_bounds = grid.specs().iter().zip(z.iter()).all(|(s, &v)| v >= s.min && v <= s.max);
    Ok(Verification {
        e_actual,
        position_error: task.position_error(&tips)?,
        tolerance,
        accepted: in_bounds && e_actual <= tolerance,
    })
}
