//! Case-study pipelines: quantum search, classical baselines, comparison
//! tables and resolution sweeps.

mod config;
mod report;

pub use config::{BaselineSettings, CaseConfig, CaseId, GroverSettings, Mode, QmlSettings, TaskConfig};
pub use report::{
    comparison_csv, emit_baselines, emit_comparison, emit_run, parse_trace_csv, read_baselines, read_run_report,
    sweep_csv, trace_csv, write_sweep,
};

use serde::{Deserialize, Serialize};

use crate::baselines::{exhaustive_scan, multi_start, pso, LocalMethod, Objective, OptRun};
use crate::encoding::ParamGrid;
use crate::error::{Error, Result};
use crate::grover::{
    adaptive_search, grover_search, threshold_step, verify, AdaptiveConfig, AdaptiveStep, GroverPlan, OracleSpec,
    SearchResult,
};
use crate::kinematics::{RobotModel, Task};
use crate::qml::{build_cost_table, loss, train, Ansatz, CostTable, Predictor, Surrogate, TrainConfig, TrainingSet};

/// What one entry of the quantum cost trace stands for.
pub const ITERATION_DEFINITION: &str =
    "one adaptive-epsilon step: fix a threshold, count its marked set, amplify for the scheduled rounds, record <H_cost>";

/// `ε0 = 10 · max(floor, lowest table cost)` unless configured.
pub const EPSILON_HEADROOM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub qubits_per_param: Vec<usize>,
    pub total_qubits: usize,
    pub dimension: usize,
    pub bin_widths: Vec<f64>,
    pub cost_floor: f64,
}

impl Resolution {
    fn of(grid: &ParamGrid, cost_floor: f64) -> Self {
        Self {
            qubits_per_param: grid.specs().iter().map(|s| s.n_qubits).collect(),
            total_qubits: grid.total_qubits(),
            dimension: grid.dimension(),
            bin_widths: grid.specs().iter().map(|s| s.bin_width()).collect(),
            cost_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub encoding_copies: usize,
    pub samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
    pub loaded_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub case: CaseId,
    pub mode: Mode,
    pub seed: u64,
    pub iteration_definition: String,
    pub resolution: Resolution,
    pub adaptive: bool,
    pub epsilon0: f64,
    pub epsilon_final: f64,
    pub tolerance: f64,
    pub trace: Vec<AdaptiveStep>,
    pub search: SearchResult,
    pub params: Vec<f64>,
    pub e_actual: f64,
    pub position_error: f64,
    pub accepted: bool,
    /// Rounds of the final search.
    pub queries: usize,
    /// Rounds summed over every visited threshold.
    pub total_queries: usize,
    pub exhaustive_evaluations: usize,
    pub training: Option<TrainingSummary>,
}

/// Everything a quantum run produced.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: RunReport,
    pub costs: CostTable,
    pub surrogate: Option<Surrogate>,
}

fn case_parts(cfg: &CaseConfig) -> Result<(ParamGrid, RobotModel, Task)> {
    cfg.validate()?;
    Ok((cfg.grid()?, cfg.model, cfg.task.build()?))
}

/// Builds the case surrogate with seeded initial parameters and either loads
/// `qml.params_file` or trains it on a seeded sample of grid points.
pub fn train_surrogate(cfg: &CaseConfig) -> Result<(Surrogate, TrainingSummary)> {
    let (grid, model, _) = case_parts(cfg)?;
    let q = &cfg.qml;
    let n_qubits = q.n_qubits.unwrap_or((q.encoding_copies * grid.len()).max(model.output_dim())).max(2);
    let ansatz = Ansatz::new(n_qubits, q.n_layers)?;
    let mut surrogate = Surrogate::for_grid(&grid, &model, ansatz, q.encoding_copies, cfg.seed)?;
    let indices = TrainingSet::sample_indices(grid.dimension(), q.train_samples, cfg.seed);
    let data = TrainingSet::from_grid(&grid, &model, Some(&indices))?;
    let mut summary = TrainingSummary {
        n_qubits,
        n_layers: q.n_layers,
        encoding_copies: q.encoding_copies,
        samples: data.len(),
        epochs: 0,
        learning_rate: q.learning_rate,
        initial_loss: 0.0,
        final_loss: 0.0,
        loss_trace: Vec::new(),
        loaded_from: None,
    };
    if let Some(path) = &q.params_file {
        surrogate.load_params_text(&std::fs::read_to_string(path)?)?;
        summary.loaded_from = Some(path.clone());
        summary.loss_trace = vec![loss(&surrogate, &data)?];
    } else if q.epochs == 0 {
        summary.loss_trace = vec![loss(&surrogate, &data)?];
    } else {
        let cfg = TrainConfig { epochs: q.epochs, learning_rate: q.learning_rate, seed: None };
        let (trained, trace) = train(&surrogate, &data, &cfg)?;
        surrogate = trained;
        summary.epochs = q.epochs;
        summary.loss_trace = trace;
    }
    summary.initial_loss = summary.loss_trace[0];
    summary.final_loss = *summary.loss_trace.last().expect("non-empty trace");
    Ok((surrogate, summary))
}

/// Quantum path: optional surrogate training, cost table, threshold search
/// and analytic verification of the most frequent outcome.
pub fn run_case(cfg: &CaseConfig) -> Result<CaseRun> {
    let (grid, model, task) = case_parts(cfg)?;
    let (surrogate, training) = match cfg.mode {
        Mode::Analytic => (None, None),
        Mode::Surrogate => {
            let (s, t) = train_surrogate(cfg)?;
            (Some(s), Some(t))
        }
    };
    let predictor = surrogate.as_ref().map_or(Predictor::Analytic, Predictor::Surrogate);
    let costs = build_cost_table(&grid, &model, &task, &cfg.weights, predictor)?;
    let floor = cfg.resolution_floor();
    let g = &cfg.grover;
    let plan = GroverPlan::new(g.shots, cfg.seed);

    let (epsilon0, epsilon_final, trace, mut search) = match g.epsilon {
        Some(epsilon) => {
            let step = threshold_step(&grid, costs.values(), epsilon)?;
            let search = grover_search(&grid, &OracleSpec::new(costs.values(), epsilon)?, &plan)?;
            (epsilon, epsilon, vec![step], search)
        }
        None => {
            let lowest = costs.argmin().map_or(0.0, |(_, c)| c);
            let epsilon0 = g.epsilon0.unwrap_or(EPSILON_HEADROOM * floor.max(lowest));
            let adaptive = AdaptiveConfig { shrink: g.shrink, max_shrinks: g.max_shrinks, refine: g.refine };
            let r = adaptive_search(&grid, costs.values(), epsilon0, &adaptive, &plan)?;
            (epsilon0, r.epsilon, r.steps, r.search)
        }
    };
    let tolerance = g.tolerance.unwrap_or(epsilon_final);
    let check = verify(search.best_index, &grid, &model, &task, &cfg.weights, tolerance)?;
    search.verification = Some(check.clone());
    let report = RunReport {
        case: cfg.case,
        mode: cfg.mode,
        seed: cfg.seed,
        iteration_definition: ITERATION_DEFINITION.into(),
        resolution: Resolution::of(&grid, floor),
        adaptive: g.epsilon.is_none(),
        epsilon0,
        epsilon_final,
        tolerance,
        total_queries: trace.iter().map(|s| s.iterations).sum(),
        trace,
        params: search.params.0.clone(),
        e_actual: check.e_actual,
        position_error: check.position_error,
        accepted: check.accepted,
        queries: search.queries,
        exhaustive_evaluations: grid.dimension(),
        search,
        training,
    };
    Ok(CaseRun { report, costs, surrogate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: String,
    pub evaluations: usize,
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// Analytic cost of the grid point `best` snaps to.
    pub snapped_cost: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub case: CaseId,
    pub seed: u64,
    pub dimension: usize,
    pub grid_minimum: f64,
    pub grid_argmin: usize,
    pub runs: Vec<MethodRun>,
}

impl BaselineReport {
    pub fn method(&self, name: &str) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == name)
    }
}

type MethodFn<'a> = dyn Fn(&Objective<'_>) -> Result<OptRun> + 'a;

/// Multi-start Nelder-Mead, multi-start BFGS, PSO and the exhaustive grid
/// scan on the analytic objective. A failing method is recorded, not fatal.
pub fn run_baselines(cfg: &CaseConfig) -> Result<BaselineReport> {
    let (grid, model, task) = case_parts(cfg)?;
    let b = &cfg.baselines;
    let scan = exhaustive_scan(&grid, &model, &task, &cfg.weights)?;
    let snapped = |x: &[f64]| -> Result<f64> {
        let z = grid.snap(x)?;
        task.cost(&model.forward(&z)?, &cfg.weights)
    };
    let methods: [(&str, Box<MethodFn<'_>>); 3] = [
        (
            "nelder_mead",
            Box::new(|o| multi_start(o, LocalMethod::NelderMead, b.starts, cfg.seed, &b.nelder_mead, &b.quasi_newton)),
        ),
        (
            "quasi_newton",
            Box::new(|o| multi_start(o, LocalMethod::QuasiNewton, b.starts, cfg.seed, &b.nelder_mead, &b.quasi_newton)),
        ),
        ("pso", Box::new(|o| pso(o, &b.pso, cfg.seed))),
    ];
    let mut runs = Vec::with_capacity(4);
    for (name, method) in methods {
        let objective = Objective::for_task(&grid, &model, &task, &cfg.weights)?;
        let outcome = method(&objective).and_then(|run| Ok((snapped(&run.best)?, run)));
        runs.push(match outcome {
            Ok((snapped_cost, run)) => MethodRun {
                method: name.into(),
                evaluations: run.evaluations,
                best: run.best,
                best_cost: run.best_cost,
                snapped_cost,
                converged: run.converged,
                trace: run.trace,
                error: None,
            },
            Err(e) => MethodRun {
                method: name.into(),
                evaluations: objective.evaluations(),
                best: Vec::new(),
                best_cost: f64::MAX,
                snapped_cost: f64::MAX,
                converged: false,
                trace: Vec::new(),
                error: Some(e.to_string()),
            },
        });
    }
    runs.push(MethodRun {
        method: "exhaustive".into(),
        evaluations: scan.evaluations,
        best: grid.decode(scan.index)?.0,
        best_cost: scan.cost,
        snapped_cost: scan.cost,
        converged: true,
        trace: vec![scan.cost],
        error: None,
    });
    Ok(BaselineReport {
        case: cfg.case,
        seed: cfg.seed,
        dimension: grid.dimension(),
        grid_minimum: scan.cost,
        grid_argmin: scan.index,
        runs,
    })
}

/// `M / queries`, infinite when no queries were needed.
pub fn query_ratio(dimension: usize, queries: usize) -> f64 {
    if queries == 0 {
        f64::INFINITY
    } else {
        dimension as f64 / queries as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub evaluations: usize,
    pub total_evaluations: usize,
    pub best_cost: f64,
    pub accepted: bool,
    /// Exhaustive-scan evaluations divided by this method's evaluations.
    pub exhaustive_ratio: f64,
}

/// One row per method, the quantum search first.
pub fn compare(quantum: &RunReport, classical: &BaselineReport) -> Result<Vec<ComparisonRow>> {
    if quantum.case != classical.case || quantum.resolution.dimension != classical.dimension {
        return Err(Error::Contract("quantum and classical reports describe different cases or grids".into()));
    }
    let m = classical.dimension;
    let mut rows = vec![ComparisonRow {
        method: "grover".into(),
        evaluations: quantum.queries,
        total_evaluations: quantum.total_queries,
        best_cost: quantum.e_actual,
        accepted: quantum.accepted,
        exhaustive_ratio: query_ratio(m, quantum.queries),
    }];
    rows.extend(classical.runs.iter().map(|r| ComparisonRow {
        method: r.method.clone(),
        evaluations: r.evaluations,
        total_evaluations: r.evaluations,
        best_cost: r.best_cost,
        accepted: r.error.is_none() && r.best_cost <= quantum.tolerance,
        exhaustive_ratio: query_ratio(m, r.evaluations),
    }));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub qubits_per_param: usize,
    pub total_qubits: usize,
    pub dimension: usize,
    pub marked: usize,
    pub queries: usize,
    pub total_queries: usize,
    pub exhaustive_ratio: f64,
    pub e_actual: f64,
    pub position_error: f64,
    pub accepted: bool,
}

/// Runs the case once per resolution.
pub fn sweep(cfg: &CaseConfig, qubits_per_param: &[usize]) -> Result<Vec<SweepRow>> {
    qubits_per_param
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.set_qubits_per_param(n);
            let r = run_case(&c)?.report;
            Ok(SweepRow {
                qubits_per_param: n,
                total_qubits: r.resolution.total_qubits,
                dimension: r.resolution.dimension,
                marked: r.search.marked,
                queries: r.queries,
                total_queries: r.total_queries,
                exhaustive_ratio: query_ratio(r.resolution.dimension, r.queries),
                e_actual: r.e_actual,
                position_error: r.position_error,
                accepted: r.accepted,
            })
        })
        .collect()
}
