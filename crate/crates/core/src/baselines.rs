//! Classical optimizers over the continuous task objective, instrumented
//! with exact evaluation counts.
//!
//! Optimizers work in unconstrained coordinates. [`Objective::evaluate`]
//! maps every point into the parameter box first (wrapping full-turn angles,
//! clamping everything else), so every evaluated configuration is feasible.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::ParamGrid;
use crate::error::{Error, Result};
use crate::kinematics::{PoseWeights, RobotModel, Task};
use crate::qml::{build_cost_table, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
    /// Coordinates outside the box wrap around instead of clamping.
    pub periodic: bool,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: false }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: true }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn project(&self, x: f64) -> f64 {
        if self.periodic {
            let w = self.lo + (x - self.lo).rem_euclid(self.width());
            // rem_euclid can round up to the period itself
            if w >= self.hi {
                self.lo
            } else {
                w
            }
        } else {
            x.clamp(self.lo, self.hi)
        }
    }
}

type CostFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

/// Box-bounded cost function with an exact evaluation counter.
pub struct Objective<'a> {
    bounds: Vec<Bound>,
    f: Box<CostFn<'a>>,
    evaluations: AtomicUsize,
}

impl<'a> Objective<'a> {
    pub fn new(bounds: Vec<Bound>, f: impl Fn(&[f64]) -> f64 + Sync + 'a) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Domain("objective needs at least one coordinate".into()));
        }
        for b in &bounds {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
                return Err(Error::Domain(format!("invalid bound [{}, {}]", b.lo, b.hi)));
            }
        }
        Ok(Self { bounds, f: Box::new(f), evaluations: AtomicUsize::new(0) })
    }

    /// Analytic task cost over the box of `grid`. Full-turn angles are periodic.
    pub fn for_task(grid: &ParamGrid, model: &'a RobotModel, task: &'a Task, weights: &'a PoseWeights) -> Result<Self> {
        weights.validate()?;
        let bounds = grid
            .specs()
            .iter()
            .map(|s| if s.full_period() { Bound::periodic(s.min, s.min + TAU) } else { Bound::new(s.min, s.max) })
            .collect();
        Self::new(bounds, move |z| model.forward(z).and_then(|tips| task.cost(&tips, weights)).unwrap_or(f64::INFINITY))
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(x).map(|(b, &v)| b.project(v)).collect()
    }

    /// Cost at the projection of `x`; counts one evaluation.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let c = (self.f)(&self.project(x));
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Uniform random point in the box.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.bounds.iter().map(|b| rng.gen_range(b.lo..b.hi)).collect()
    }

    fn check_start(&self, start: &[f64]) -> Result<()> {
        if start.len() != self.dimension() {
            return Err(Error::Shape { expected: self.dimension(), actual: start.len() });
        }
        if start.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("start point must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptRun {
    /// Best configuration, already projected into the box.
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub evaluations: usize,
    /// Best cost so far after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

struct Tracker<'o, 'a> {
    obj: &'o Objective<'a>,
    start_evals: usize,
    best: Vec<f64>,
    best_cost: f64,
    trace: Vec<f64>,
}

impl<'o, 'a> Tracker<'o, 'a> {
    fn new(obj: &'o Objective<'a>) -> Self {
        Self { obj, start_evals: obj.evaluations(), best: Vec::new(), best_cost: f64::INFINITY, trace: Vec::new() }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let c = self.obj.evaluate(x);
        if c < self.best_cost || self.best.is_empty() {
            self.best_cost = c;
            self.best = x.to_vec();
        }
        c
    }

    fn used(&self) -> usize {
        self.obj.evaluations() - self.start_evals
    }

    fn mark_iteration(&mut self) {
        self.trace.push(self.best_cost);
    }

    fn finish(self, converged: bool) -> OptRun {
        OptRun {
            best: self.obj.project(&self.best),
            best_cost: self.best_cost,
            evaluations: self.used(),
            trace: self.trace,
            converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub max_evaluations: usize,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evaluations: 2000, x_tolerance: 1e-8, f_tolerance: 1e-10, initial_step: 0.05 }
    }
}

/// Downhill simplex with reflection 1, expansion 2, contraction 0.5 and shrink 0.5.
/// Stops once the simplex diameter and the cost spread are both below tolerance.
pub fn nelder_mead(obj: &Objective<'_>, start: &[f64], cfg: &NelderMeadConfig) -> Result<OptRun> {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;
    obj.check_start(start)?;
    let n = obj.dimension();
    let mut t = Tracker::new(obj);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let c0 = t.eval(start);
    simplex.push((start.to_vec(), c0));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += cfg.initial_step * obj.bounds[i].width();
        let c = t.eval(&v);
        simplex.push((v, c));
    }
    t.mark_iteration();
    let converged = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread = simplex[n].1 - simplex[0].1;
        if diameter < cfg.x_tolerance && spread < cfg.f_tolerance {
            break true;
        }
        if t.used() >= cfg.max_evaluations {
            break false;
        }
        let centroid: Vec<f64> =
            (0..n).map(|i| simplex[..n].iter().map(|(v, _)| v[i]).sum::<f64>() / n as f64).collect();
        let along =
            |coef: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + coef * (c - w)).collect() };
        let xr = along(ALPHA);
        let fr = t.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(GAMMA);
            let fe = t.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(RHO * ALPHA);
                let fc = t.eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-RHO);
                let fc = t.eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + SIGMA * (x - b)).collect();
                    let c = t.eval(&v);
                    *vertex = (v, c);
                }
            }
        }
        t.mark_iteration();
    };
    Ok(t.finish(converged))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonConfig {
    pub max_evaluations: usize,
    pub gradient_tolerance: f64,
    pub fd_step: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        Self { max_evaluations: 2000, gradient_tolerance: 1e-8, fd_step: 1e-6, armijo: 1e-4, max_backtracks: 50 }
    }
}

fn central_gradient(t: &mut Tracker<'_, '_>, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = t.eval(&probe);
            probe[i] = x[i] - h;
            let minus = t.eval(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS on the inverse Hessian with central-difference gradients and
/// halving Armijo backtracking.
pub fn quasi_newton(obj: &Objective<'_>, start: &[f64], cfg: &QuasiNewtonConfig) -> Result<OptRun> {
    obj.check_start(start)?;
    let n = obj.dimension();
    let identity = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    };
    let mut t = Tracker::new(obj);
    let mut x = start.to_vec();
    let mut fx = t.eval(&x);
    let mut g = central_gradient(&mut t, &x, cfg.fd_step);
    let mut h = identity(n);
    t.mark_iteration();
    let converged = loop {
        if dot(&g, &g).sqrt() < cfg.gradient_tolerance {
            break true;
        }
        if t.used() >= cfg.max_evaluations || !fx.is_finite() {
            break false;
        }
        let mut p: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + alpha * pi).collect();
            let ft = t.eval(&trial);
            if ft <= fx + cfg.armijo * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent along the search direction at this resolution.
            t.mark_iteration();
            break false;
        };
        let g_new = central_gradient(&mut t, &x_new, cfg.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        t.mark_iteration();
    };
    Ok(t.finish(converged))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub iterations: usize,
    pub max_evaluations: usize,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self { swarm: 30, inertia: 0.7, cognitive: 1.5, social: 1.5, iterations: 200, max_evaluations: 100_000 }
    }
}

/// Global-best particle swarm with positions clamped to the box.
pub fn pso(obj: &Objective<'_>, cfg: &PsoConfig, seed: u64) -> Result<OptRun> {
    if cfg.swarm < 2 {
        return Err(Error::Domain(format!("swarm of {} is too small", cfg.swarm)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = obj.dimension();
    let bounds = obj.bounds().to_vec();
    let mut t = Tracker::new(obj);
    let mut pos: Vec<Vec<f64>> = (0..cfg.swarm).map(|_| obj.sample(&mut rng)).collect();
    let mut vel: Vec<Vec<f64>> =
        (0..cfg.swarm).map(|_| bounds.iter().map(|b| 0.1 * b.width() * rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut personal: Vec<(Vec<f64>, f64)> = pos.iter().map(|p| (p.clone(), t.eval(p))).collect();
    let mut global = personal.iter().min_by(|a, b| a.1.total_cmp(&b.1)).cloned().expect("non-empty swarm");
    t.mark_iteration();
    let mut exhausted = false;
    'outer: for _ in 0..cfg.iterations {
        for i in 0..cfg.swarm {
            if t.used() >= cfg.max_evaluations {
                exhausted = true;
                break 'outer;
            }
            for d in 0..n {
                let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
                vel[i][d] = cfg.inertia * vel[i][d]
                    + cfg.cognitive * r1 * (personal[i].0[d] - pos[i][d])
                    + cfg.social * r2 * (global.0[d] - pos[i][d]);
                let moved = pos[i][d] + vel[i][d];
                let clamped = moved.clamp(bounds[d].lo, bounds[d].hi);
                if clamped != moved {
                    vel[i][d] = 0.0;
                }
                pos[i][d] = clamped;
            }
            let c = t.eval(&pos[i]);
            if c < personal[i].1 {
                personal[i] = (pos[i].clone(), c);
                if c < global.1 {
                    global = personal[i].clone();
                }
            }
        }
        t.mark_iteration();
    }
    Ok(t.finish(!exhausted))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub index: usize,
    pub cost: f64,
    pub evaluations: usize,
}

/// Lowest entry of a cost table, ties to the lowest index.
pub fn scan_table(costs: &[f64]) -> Result<ScanResult> {
    let (index, cost) = costs
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (k, c)| match best {
            Some((_, b)) if b <= c => best,
            _ => Some((k, c)),
        })
        .ok_or_else(|| Error::Domain("empty cost table".into()))?;
    Ok(ScanResult { index, cost, evaluations: costs.len() })
}

/// Exact grid argmin of the analytic task cost, `2^N` evaluations.
pub fn exhaustive_scan(grid: &ParamGrid, model: &RobotModel, task: &Task, weights: &PoseWeights) -> Result<ScanResult> {
    let table = build_cost_table(grid, model, task, weights, Predictor::Analytic)?;
    scan_table(table.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMethod {
    NelderMead,
    QuasiNewton,
}

/// Best of `starts` local runs from seeded uniform starting points. Traces
/// are concatenated with the running best carried across restarts.
pub fn multi_start(
    obj: &Objective<'_>,
    method: LocalMethod,
    starts: usize,
    seed: u64,
    nm: &NelderMeadConfig,
    qn: &QuasiNewtonConfig,
) -> Result<OptRun> {
    if starts == 0 {
        return Err(Error::Domain("multi-start needs at least one start".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<OptRun> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut converged = false;
    for _ in 0..starts {
        let x0 = obj.sample(&mut rng);
        let run = match method {
            LocalMethod::NelderMead => nelder_mead(obj, &x0, nm)?,
            LocalMethod::QuasiNewton => quasi_newton(obj, &x0, qn)?,
        };
        let carried = best.as_ref().map_or(f64::INFINITY, |b| b.best_cost);
        trace.extend(run.trace.iter().map(|&c| c.min(carried)));
        evaluations += run.evaluations;
        converged |= run.converged;
        if run.best_cost < carried {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(OptRun { best: best.best, best_cost: best.best_cost, evaluations, trace, converged })
}
