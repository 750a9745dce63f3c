//! Case-study configuration: built-in presets plus TOML or JSON overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{NelderMeadConfig, PsoConfig, QuasiNewtonConfig};
use crate::encoding::{ParamGrid, ParamSpec};
use crate::error::{Error, Result};
use crate::grover::DEFAULT_MAX_SHRINKS;
use crate::kinematics::{DualArm, GraspTask, PoseWeights, Position2, RobotModel, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    OneDof,
    TwoDof,
    DualArm,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::OneDof, CaseId::TwoDof, CaseId::DualArm];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::OneDof => "one_dof",
            CaseId::TwoDof => "two_dof",
            CaseId::DualArm => "dual_arm",
        }
    }

    pub fn default_qubits_per_param(self) -> usize {
        match self {
            CaseId::OneDof => 5,
            CaseId::TwoDof | CaseId::DualArm => 4,
        }
    }
}

impl std::str::FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown case `{s}` (one_dof, two_dof, dual_arm)")))
    }
}

/// Source of the cost-table entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    Surrogate,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "surrogate" => Ok(Mode::Surrogate),
            _ => Err(Error::Config(format!("unknown mode `{s}` (analytic, surrogate)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    Pose {
        target: Position2,
        #[serde(default)]
        heading: Option<f64>,
    },
    Grasp {
        center: Position2,
        radius: f64,
        #[serde(default)]
        axis: f64,
    },
}

impl TaskConfig {
    pub fn build(&self) -> Result<Task> {
        match *self {
            TaskConfig::Pose { target, heading } => Ok(Task::Pose { target, heading }),
            TaskConfig::Grasp { center, radius, axis } => Ok(Task::Grasp(GraspTask::new(center, radius, axis)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmlSettings {
    /// Defaults to `max(encoding_copies · parameters, outputs)`.
    pub n_qubits: Option<usize>,
    pub n_layers: usize,
    pub encoding_copies: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Grid points labelled for training; the whole grid when it is smaller.
    pub train_samples: usize,
    /// Load parameters from this file instead of training.
    pub params_file: Option<String>,
}

impl Default for QmlSettings {
    fn default() -> Self {
        Self {
            n_qubits: None,
            n_layers: 3,
            encoding_copies: 2,
            epochs: 500,
            learning_rate: 0.3,
            train_samples: 256,
            params_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroverSettings {
    pub shots: usize,
    pub shrink: f64,
    /// Starting threshold; derived from the resolution floor when absent.
    pub epsilon0: Option<f64>,
    /// Search once at this threshold instead of lowering it adaptively.
    pub epsilon: Option<f64>,
    /// Acceptance threshold of the analytic check; derived when absent.
    pub tolerance: Option<f64>,
    pub max_shrinks: usize,
    pub refine: bool,
}

impl Default for GroverSettings {
    fn default() -> Self {
        Self {
            shots: 10_000,
            shrink: 0.5,
            epsilon0: None,
            epsilon: None,
            tolerance: None,
            max_shrinks: DEFAULT_MAX_SHRINKS,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSettings {
    pub starts: usize,
    pub nelder_mead: NelderMeadConfig,
    pub quasi_newton: QuasiNewtonConfig,
    pub pso: PsoConfig,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            starts: 5,
            nelder_mead: NelderMeadConfig::default(),
            quasi_newton: QuasiNewtonConfig::default(),
            pso: PsoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case: CaseId,
    pub mode: Mode,
    pub seed: u64,
    pub params: Vec<ParamSpec>,
    pub model: RobotModel,
    pub task: TaskConfig,
    pub weights: PoseWeights,
    #[serde(default)]
    pub qml: QmlSettings,
    #[serde(default)]
    pub grover: GroverSettings,
    #[serde(default)]
    pub baselines: BaselineSettings,
}

fn spec(name: &str, min: f64, max: f64, n: usize, angular: bool) -> ParamSpec {
    ParamSpec { name: name.into(), min, max, n_qubits: n, angular }
}

fn angle(name: &str, n: usize) -> ParamSpec {
    spec(name, 0.0, std::f64::consts::TAU, n, true)
}

impl CaseConfig {
    /// Built-in settings for a case at its default resolution, analytic mode, seed 1.
    pub fn preset(case: CaseId) -> Self {
        let n = case.default_qubits_per_param();
        let (params, model, task, qml) = match case {
            CaseId::OneDof => (
                vec![spec("l1", 0.1, 2.0, n, false), angle("theta1", n)],
                RobotModel::OneLink { l1: 1.0 },
                TaskConfig::Pose { target: Position2::new(0.8, 0.6), heading: None },
                QmlSettings::default(),
            ),
            CaseId::TwoDof => (
                vec![
                    angle("theta1", n),
                    angle("theta2", n),
                    spec("l1", 0.5, 1.5, n, false),
                    spec("l2", 0.5, 1.5, n, false),
                ],
                RobotModel::TwoLink { l1: 1.0, l2: 1.0 },
                TaskConfig::Pose { target: Position2::new(1.0, 1.0), heading: None },
                QmlSettings { epochs: 150, ..QmlSettings::default() },
            ),
            CaseId::DualArm => (
                vec![angle("theta11", n), angle("theta12", n), angle("theta21", n), angle("theta22", n)],
                RobotModel::DualArm(DualArm {
                    base1: Position2::new(-0.8, 0.0),
                    base2: Position2::new(0.8, 0.0),
                    links1: [1.0, 1.0],
                    links2: [1.0, 1.0],
                }),
                TaskConfig::Grasp { center: Position2::new(0.0, 1.2), radius: 0.3, axis: 0.0 },
                QmlSettings { epochs: 150, ..QmlSettings::default() },
            ),
        };
        Self {
            case,
            mode: Mode::Analytic,
            seed: 1,
            params,
            model,
            task,
            weights: PoseWeights::position_only(),
            qml,
            grover: GroverSettings::default(),
            baselines: BaselineSettings::default(),
        }
    }

    /// Parses a TOML document (or JSON, by extension) naming a `case`; every
    /// other key overrides the preset of that case.
    pub fn from_text(text: &str, json: bool) -> Result<Self> {
        let doc: toml::Value = if json {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        let case: CaseId = doc
            .get("case")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("config must name a `case`".into()))?
            .parse()?;
        let mut merged = toml::Value::try_from(Self::preset(case)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, doc);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::from_text(&text, json)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn set_qubits_per_param(&mut self, n: usize) {
        self.params.iter_mut().for_each(|p| p.n_qubits = n);
    }

    /// Structural checks; qubit capacity is enforced later by [`CaseConfig::grid`].
    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            p.validate()?;
        }
        self.model.validate()?;
        self.weights.validate()?;
        let bad = |what: &str| Err(Error::Config(format!("case {}: {what}", self.case.name())));
        let ok_model = matches!(
            (self.case, &self.model),
            (CaseId::OneDof, RobotModel::OneLink { .. })
                | (CaseId::TwoDof, RobotModel::TwoLink { .. })
                | (CaseId::DualArm, RobotModel::DualArm(_))
        );
        if !ok_model {
            return bad("robot model does not match the case");
        }
        let expected = match self.case {
            CaseId::OneDof => 2,
            CaseId::TwoDof | CaseId::DualArm => 4,
        };
        if self.params.len() != expected {
            return bad(&format!("expected {expected} parameters, got {}", self.params.len()));
        }
        match (self.case, &self.task) {
            (CaseId::DualArm, TaskConfig::Grasp { .. })
            | (CaseId::OneDof | CaseId::TwoDof, TaskConfig::Pose { .. }) => {}
            _ => return bad("task kind does not match the case"),
        }
        if self.weights.alpha_r > 0.0 && !matches!(self.task, TaskConfig::Pose { heading: Some(_), .. }) {
            return bad("α_R > 0 needs a target heading");
        }
        if self.grover.shots == 0 {
            return bad("shots must be at least 1");
        }
        if !(self.grover.shrink > 0.0 && self.grover.shrink < 1.0) {
            return bad("shrink factor must lie in (0, 1)");
        }
        if self.baselines.starts == 0 {
            return bad("baselines need at least one start");
        }
        if self.qml.encoding_copies == 0 || self.qml.n_layers == 0 {
            return bad("surrogate needs at least one encoding copy and one layer");
        }
        self.task.build().map(|_| ())
    }

    /// The configuration grid; fails with a capacity error beyond 24 qubits.
    pub fn grid(&self) -> Result<ParamGrid> {
        ParamGrid::new(self.params.clone())
    }

    /// Cost floor from discretization alone: a grid point lies within half a
    /// bin of any reachable optimum in every coordinate, which moves the tip
    /// by at most `½·Σ s_i·w_i` with `s_i` the reach for angles and 1 for
    /// lengths.
    pub fn resolution_floor(&self) -> f64 {
        let reach = match self.model {
            RobotModel::OneLink { l1 } => self.params.iter().filter(|p| !p.angular).map(|p| p.max).fold(l1, f64::max),
            RobotModel::TwoLink { l1, l2 } => {
                let lengths: Vec<f64> = self.params.iter().filter(|p| !p.angular).map(|p| p.max).collect();
                if lengths.len() == 2 {
                    lengths[0] + lengths[1]
                } else {
                    l1 + l2
                }
            }
            RobotModel::DualArm(d) => (d.links1[0] + d.links1[1]).max(d.links2[0] + d.links2[1]),
        };
        let shift: f64 = self.params.iter().map(|p| 0.5 * p.bin_width() * if p.angular { reach } else { 1.0 }).sum();
        let heading: f64 = self.params.iter().filter(|p| p.angular).map(|p| 0.5 * p.bin_width()).sum();
        match self.task {
            TaskConfig::Pose { .. } => self.weights.alpha_p * shift * shift + self.weights.alpha_r * heading * heading,
            TaskConfig::Grasp { .. } => shift * shift,
        }
    }
}

/// Recursively overlays `over` onto `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
