use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qkopt::harness::{
    compare, emit_baselines, emit_comparison, emit_run, read_baselines, read_run_report, run_baselines, run_case,
    sweep, trace_csv, train_surrogate, write_sweep, CaseConfig, CaseId, Mode,
};

#[derive(Parser)]
#[command(name = "qkopt", version, about = "Grover-search kinematic optimization of planar manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the forward-kinematics surrogate and write its parameters.
    Train(Common),
    /// Run one case through the quantum search path.
    Run(Common),
    /// Run the classical baselines on one case.
    Baseline(Common),
    /// Merge a quantum report and a baseline report into comparison.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Quantum report (default: <out>/report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Baseline report (default: <out>/baselines.json).
        #[arg(long)]
        baselines: Option<PathBuf>,
    },
    /// Repeat the quantum run over several resolutions.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Qubits per parameter to visit.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        qubits: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON case file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in case when no config file is given.
    #[arg(long, default_value = "one_dof")]
    case: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
    /// surrogate | analytic
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    qubits_per_param: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<CaseConfig> {
        let mut cfg = match &self.config {
            Some(path) => CaseConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => CaseConfig::preset(self.case.parse::<CaseId>()?),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(shots) = self.shots {
            cfg.grover.shots = shots;
        }
        if let Some(mode) = &self.mode {
            cfg.mode = mode.parse::<Mode>()?;
        }
        if let Some(n) = self.qubits_per_param {
            cfg.set_qubits_per_param(n);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(c) => {
            let cfg = c.config()?;
            let (surrogate, summary) = train_surrogate(&cfg)?;
            std::fs::create_dir_all(&c.out)?;
            let params = c.out.join("surrogate.params");
            let loss = c.out.join("training_loss.csv");
            std::fs::write(&params, surrogate.to_params_text())?;
            std::fs::write(&loss, trace_csv(&summary.loss_trace))?;
            println!(
                "{}: {} samples, {} epochs, loss {:.6} -> {:.6}",
                cfg.case.name(),
                summary.samples,
                summary.epochs,
                summary.initial_loss,
                summary.final_loss
            );
            list(&[params, loss]);
        }
        Command::Run(c) => {
            let cfg = c.config()?;
            let run = run_case(&cfg)?;
            let r = &run.report;
            println!(
                "{}: best {} params {:?} e_actual {:.3e} (tolerance {:.3e}) accepted {} | eps {:.3e} -> {:.3e}, marked {}, K {}, total K {}, M {}",
                cfg.case.name(),
                r.search.bitstring,
                r.params,
                r.e_actual,
                r.tolerance,
                r.accepted,
                r.epsilon0,
                r.epsilon_final,
                r.search.marked,
                r.queries,
                r.total_queries,
                r.exhaustive_evaluations
            );
            list(&emit_run(&c.out, &run)?);
        }
        Command::Baseline(c) => {
            let cfg = c.config()?;
            let report = run_baselines(&cfg)?;
            for m in &report.runs {
                match &m.error {
                    None => println!("{:>12}: best cost {:.3e}, {} evaluations", m.method, m.best_cost, m.evaluations),
                    Some(e) => println!("{:>12}: failed: {e}", m.method),
                }
            }
            list(&emit_baselines(&c.out, &report)?);
        }
        Command::Compare { common, report, baselines } => {
            let report = report.unwrap_or_else(|| common.out.join("report.json"));
            let baselines = baselines.unwrap_or_else(|| common.out.join("baselines.json"));
            let quantum = read_run_report(&report).with_context(|| format!("reading {}", report.display()))?;
            let classical = read_baselines(&baselines).with_context(|| format!("reading {}", baselines.display()))?;
            let rows = compare(&quantum, &classical)?;
            for r in &rows {
                println!(
                    "{:>12}: {:>8} evaluations, best cost {:.3e}, accepted {}, exhaustive/this {:.1}",
                    r.method, r.evaluations, r.best_cost, r.accepted, r.exhaustive_ratio
                );
            }
            list(&[emit_comparison(&common.out, &rows)?]);
        }
        Command::Sweep { common, qubits } => {
            if qubits.is_empty() {
                bail!("--qubits needs at least one value");
            }
            let cfg = common.config()?;
            let rows = sweep(&cfg, &qubits)?;
            for r in &rows {
                println!(
                    "{} qubits/param: M {:>8}, marked {}, K {:>4}, M/K {:>8.1}, position error {:.3e}, accepted {}",
                    r.qubits_per_param,
                    r.dimension,
                    r.marked,
                    r.queries,
                    r.exhaustive_ratio,
                    r.position_error,
                    r.accepted
                );
            }
            list(&[write_sweep(&common.out, &rows)?]);
        }
    }
    Ok(())
}
