//! Monte Carlo sweeps over (trust regime, gamma) cells.
//!
//! Every run is an independent job keyed by its grid coordinates; seeds come
//! from [`super::seed`], so a run's result is a pure function of the master
//! seed and its indices. Cells aggregate per-run final-round maxima into
//! means and standard errors. With the `parallel` feature runs fan out over
//! a work-stealing pool; outcomes are collected in run order, which makes
//! the aggregation (and thus every output byte) identical for any thread
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analysis::deviation_metrics;
use crate::error::{Error, Result};
use crate::protocol::{run_protocol, LambdaSchedule, Recovery, RunTrace};
use crate::topology::generate_rgg;
use crate::trust::TrustModel;

use super::config::ExperimentConfig;
use super::seed::{run_seed, sub_seed, DYNAMICS_STREAM, TOPOLOGY_STREAM, X0_STREAM};
use super::trace::{write_trace, TraceMeta};

/// Initial legitimate states, uniform on [0, 1] from a dedicated stream.
pub fn draw_x0(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen::<f64>()).collect()
}

/// Final-round summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub regime_idx: usize,
    pub gamma_idx: usize,
    pub run_idx: usize,
    /// Max over agents of `|x_i(T) - x_ss|`.
    pub final_e: f64,
    pub final_e_legit: f64,
    pub final_e_malicious: f64,
    pub recovery: Recovery,
}

/// Runs one (regime, gamma, run) cell member from scratch: fresh topology,
/// initial states and dynamics, all seeded from the master seed and the
/// indices alone.
pub fn execute_run(
    cfg: &ExperimentConfig,
    regime_idx: usize,
    gamma_idx: usize,
    run_idx: usize,
) -> Result<(RunOutcome, RunTrace, TraceMeta)> {
    let &(mu_legit, mu_malicious) = cfg.regimes.get(regime_idx).ok_or_else(|| {
        Error::Config(format!("regime index {regime_idx} out of range"))
    })?;
    let &gamma = cfg
        .gammas
        .get(gamma_idx)
        .ok_or_else(|| Error::Config(format!("gamma index {gamma_idx} out of range")))?;
    let rs = run_seed(cfg.seed, regime_idx as u64, gamma_idx as u64, run_idx as u64);
    let topology_seed = sub_seed(rs, TOPOLOGY_STREAM);
    let x0_seed = sub_seed(rs, X0_STREAM);
    let dynamics_seed = sub_seed(rs, DYNAMICS_STREAM);

    let topo = generate_rgg(cfg.n, cfg.legit, cfg.radius, topology_seed)?;
    let x0 = draw_x0(x0_seed, cfg.legit);
    let model = TrustModel::new(mu_legit, mu_malicious)?;
    let schedule = LambdaSchedule::new(cfg.c, gamma)?;
    let trace = run_protocol(
        &topo,
        &model,
        &schedule,
        &x0,
        cfg.horizon,
        dynamics_seed,
        &cfg.malicious,
        cfg.eta,
    )?;
    let metrics = deviation_metrics(&trace, trace.nominal_consensus);

    let meta = TraceMeta {
        run_seed: rs,
        n: cfg.n,
        legit: cfg.legit,
        radius: cfg.radius,
        topology_seed,
        x0_seed,
        dynamics_seed,
        mu_legit,
        mu_malicious,
        c: cfg.c,
        gamma,
        horizon: cfg.horizon,
        eta: cfg.eta,
        rel_amplitude: cfg.malicious.rel_amplitude,
        period: cfg.malicious.period,
        noise_sigma: cfg.malicious.noise_sigma,
        nominal_consensus: trace.nominal_consensus,
        recovery: trace.recovery.resolved(),
    };
    let outcome = RunOutcome {
        regime_idx,
        gamma_idx,
        run_idx,
        final_e: metrics.final_max_e,
        final_e_legit: metrics.final_max_e_legit,
        final_e_malicious: metrics.final_max_e_malicious,
        recovery: trace.recovery,
    };
    Ok((outcome, trace, meta))
}

/// Aggregates of one (regime, gamma) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub mu_legit: f64,
    pub mu_malicious: f64,
    pub gamma: f64,
    pub e_mean: f64,
    pub e_se: f64,
    pub e_legit_mean: f64,
    pub e_legit_se: f64,
    pub e_malicious_mean: f64,
    pub e_malicious_se: f64,
    /// Mean empirical recovery time over resolved runs; NaN if none resolved.
    pub tf_mean: f64,
    pub unresolved: usize,
    pub runs: usize,
    /// Recovery times of the resolved runs, in run order.
    pub resolved_tf: Vec<u32>,
}

pub const SWEEP_CSV_HEADER: &str = "mu_legit,mu_malicious,gamma,e_mean,e_se,e_legit_mean,\
e_legit_se,e_malicious_mean,e_malicious_se,tf_mean,unresolved,runs";

impl CellStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mu_legit,
            self.mu_malicious,
            self.gamma,
            self.e_mean,
            self.e_se,
            self.e_legit_mean,
            self.e_legit_se,
            self.e_malicious_mean,
            self.e_malicious_se,
            self.tf_mean,
            self.unresolved,
            self.runs
        )
    }
}

/// All cells of a sweep, regime-major in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<CellStats>,
    pub gamma_count: usize,
}

impl SweepResult {
    pub fn cell(&self, regime_idx: usize, gamma_idx: usize) -> &CellStats {
        &self.cells[regime_idx * self.gamma_count + gamma_idx]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            out.push_str(&cell.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

fn aggregate_cell(cfg: &ExperimentConfig, regime_idx: usize, gamma_idx: usize, outcomes: &[RunOutcome]) -> CellStats {
    let (e_mean, e_se) = mean_se(outcomes.iter().map(|o| o.final_e));
    let (e_legit_mean, e_legit_se) = mean_se(outcomes.iter().map(|o| o.final_e_legit));
    let (e_malicious_mean, e_malicious_se) = mean_se(outcomes.iter().map(|o| o.final_e_malicious));
    let resolved_tf: Vec<u32> = outcomes
        .iter()
        .filter_map(|o| o.recovery.resolved().map(|k| k as u32))
        .collect();
    let unresolved = outcomes.len() - resolved_tf.len();
    let tf_mean = if resolved_tf.is_empty() {
        f64::NAN
    } else {
        resolved_tf.iter().map(|&t| t as f64).sum::<f64>() / resolved_tf.len() as f64
    };
    let (mu_legit, mu_malicious) = cfg.regimes[regime_idx];
    CellStats {
        mu_legit,
        mu_malicious,
        gamma: cfg.gammas[gamma_idx],
        e_mean,
        e_se,
        e_legit_mean,
        e_legit_se,
        e_malicious_mean,
        e_malicious_se,
        tf_mean,
        unresolved,
        runs: outcomes.len(),
        resolved_tf,
    }
}

fn run_one(cfg: &ExperimentConfig, regime_idx: usize, gamma_idx: usize, run_idx: usize) -> Result<RunOutcome> {
    let (outcome, trace, meta) = execute_run(cfg, regime_idx, gamma_idx, run_idx)?;
    if cfg.write_traces {
        let dir = cfg
            .output_dir
            .as_ref()
            .ok_or_else(|| Error::Config("trace output requires output.dir".into()))?;
        write_trace(&dir.join(trace_filename(regime_idx, gamma_idx, run_idx)), &meta, &trace)?;
    }
    Ok(outcome)
}

pub fn trace_filename(regime_idx: usize, gamma_idx: usize, run_idx: usize) -> String {
    format!("trace_r{regime_idx}_g{gamma_idx}_n{run_idx}.csv")
}

fn run_cell(
    cfg: &ExperimentConfig,
    regime_idx: usize,
    gamma_idx: usize,
    parallel: bool,
) -> Result<Vec<RunOutcome>> {
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..cfg.runs)
            .into_par_iter()
            .map(|run| run_one(cfg, regime_idx, gamma_idx, run))
            .collect();
    }
    let _ = parallel;
    (0..cfg.runs).map(|run| run_one(cfg, regime_idx, gamma_idx, run)).collect()
}

fn collect_cells(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepResult> {
    if cfg.write_traces {
        if let Some(dir) = &cfg.output_dir {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut cells = Vec::with_capacity(cfg.regimes.len() * cfg.gammas.len());
    for regime_idx in 0..cfg.regimes.len() {
        for gamma_idx in 0..cfg.gammas.len() {
            let outcomes = run_cell(cfg, regime_idx, gamma_idx, parallel)?;
            cells.push(aggregate_cell(cfg, regime_idx, gamma_idx, &outcomes));
        }
    }
    Ok(SweepResult { cells, gamma_count: cfg.gammas.len() })
}

/// Full sweep on the global thread pool (serial without the `parallel`
/// feature).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    collect_cells(cfg, cfg!(feature = "parallel"))
}

pub fn run_experiment_serial(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment_with_threads(cfg, 0)
}

/// Sweep with an explicit worker count; 0 means strictly serial. Without
/// the `parallel` feature any count falls back to serial execution.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        return pool.install(|| collect_cells(cfg, true));
    }
    let _ = threads;
    collect_cells(cfg, false)
}
