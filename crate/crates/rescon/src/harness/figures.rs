//! CSV exports behind the plotting scripts.
//!
//! Every figure is a long-format table `series,x,y,error` so one generic
//! plotting script can render all of them; `error` is 0 where a series has
//! no uncertainty.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{ell_profile, log_grid};
use crate::error::{Error, Result};
use crate::protocol::{nominal_weights, perron_vector, LambdaSchedule};
use crate::topology::generate_rgg;
use crate::trust::misclassification_bound;

use super::config::ExperimentConfig;
use super::sweep::run_experiment;

pub const FIGURE_CSV_HEADER: &str = "series,x,y,error";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Deviation means with standard errors per (regime, gamma) sweep cell.
    DeviationSweep,
    /// Deviation-bound summand against gamma for a span of recovery times.
    EllProfile,
    /// The confidence schedule over time for each configured gamma.
    LambdaSchedule,
    /// Per-round misclassification probability bound for each trust offset.
    MisclassificationBounds,
}

impl FigureKind {
    pub fn kind_name(self) -> &'static str {
        match self {
            FigureKind::DeviationSweep => "deviation-sweep",
            FigureKind::EllProfile => "ell-profile",
            FigureKind::LambdaSchedule => "lambda-schedule",
            FigureKind::MisclassificationBounds => "misclassification-bounds",
        }
    }
}

impl std::fmt::Display for FigureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.kind_name())
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deviation-sweep" => Ok(FigureKind::DeviationSweep),
            "ell-profile" => Ok(FigureKind::EllProfile),
            "lambda-schedule" => Ok(FigureKind::LambdaSchedule),
            "misclassification-bounds" => Ok(FigureKind::MisclassificationBounds),
            other => Err(Error::Config(format!(
                "unknown figure kind '{other}'; expected deviation-sweep, ell-profile, \
                 lambda-schedule, or misclassification-bounds"
            ))),
        }
    }
}

/// Computes the data behind one figure and writes `<kind>.csv` into
/// `out_dir`, returning the written path.
pub fn emit_figure_data(
    kind: FigureKind,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PathBuf> {
    let mut body = String::from(FIGURE_CSV_HEADER);
    body.push('\n');
    match kind {
        FigureKind::DeviationSweep => {
            let result = run_experiment(cfg)?;
            for (ri, &(mu_l, mu_m)) in cfg.regimes.iter().enumerate() {
                for (gi, &gamma) in cfg.gammas.iter().enumerate() {
                    let cell = result.cell(ri, gi);
                    for (metric, mean, se) in [
                        ("e", cell.e_mean, cell.e_se),
                        ("e_legit", cell.e_legit_mean, cell.e_legit_se),
                        ("e_malicious", cell.e_malicious_mean, cell.e_malicious_se),
                    ] {
                        writeln!(body, "{metric}:muL={mu_l}/muM={mu_m},{gamma},{mean},{se}")
                            .expect("writing to a string cannot fail");
                    }
                }
            }
        }
        FigureKind::EllProfile => {
            let topo = generate_rgg(cfg.n, cfg.legit, cfg.radius, cfg.seed)?;
            let v = perron_vector(&nominal_weights(&topo))?;
            let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let tf_values: Vec<u32> = (2..=10).collect();
            let gammas = log_grid(1e-3, 5.0, 200)?;
            let profile = ell_profile(cfg.c, topo.max_legit_degree(), v_min, &tf_values, &gammas)?;
            for (ti, &tf) in profile.tf_values.iter().enumerate() {
                for (gi, &gamma) in profile.gammas.iter().enumerate() {
                    writeln!(body, "Tf={tf},{gamma},{},0", profile.neg_ell[ti][gi])
                        .expect("writing to a string cannot fail");
                }
            }
        }
        FigureKind::LambdaSchedule => {
            for &gamma in &cfg.gammas {
                let schedule = LambdaSchedule::new(cfg.c, gamma)?;
                for t in 0..=cfg.horizon {
                    writeln!(body, "gamma={gamma},{t},{},0", schedule.lambda_at(t))
                        .expect("writing to a string cannot fail");
                }
            }
        }
        FigureKind::MisclassificationBounds => {
            let mut offsets: Vec<f64> = Vec::new();
            for &(mu_l, mu_m) in &cfg.regimes {
                for offset in [mu_l - 0.5, 0.5 - mu_m] {
                    // symmetric regimes should collapse to one series even
                    // though e.g. 0.7 - 0.5 != 0.5 - 0.3 in floats
                    if !offsets.iter().any(|&o| (o - offset).abs() < 1e-9) {
                        offsets.push(offset);
                    }
                }
            }
            offsets.sort_by(f64::total_cmp);
            for &offset in &offsets {
                // 0.7 - 0.5 displays as 0.19999999999999996; label it 0.2
                let label = format!("{offset:.6}");
                let label = label.trim_end_matches('0').trim_end_matches('.');
                for t in 0..=cfg.horizon {
                    writeln!(body, "E={label},{t},{},0", misclassification_bound(offset, t)?)
                        .expect("writing to a string cannot fail");
                }
            }
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", kind.kind_name()));
    std::fs::write(&path, body)?;
    Ok(path)
}
