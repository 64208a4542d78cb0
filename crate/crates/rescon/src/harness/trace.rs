//! Trace persistence and replay.
//!
//! A trace file is one JSON metadata line (`#meta {...}`) holding every
//! seed and parameter of the run, a CSV header, and one row per
//! (round, legitimate agent) with the state and its contribution split.
//! Values are written with Rust's shortest round-trip float formatting, so
//! parsing a file recovers bit-identical numbers; `replay` re-executes the
//! run from the metadata alone and demands exact agreement.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    recovery_from_flags, run_protocol, LambdaSchedule, MaliciousParams, Recovery, RoundState,
    RunTrace,
};
use crate::topology::generate_rgg;
use crate::trust::TrustModel;

use super::sweep::draw_x0;

/// Everything needed to reproduce a run, stored on the `#meta` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub run_seed: u64,
    pub n: usize,
    pub legit: usize,
    pub radius: f64,
    pub topology_seed: u64,
    pub x0_seed: u64,
    pub dynamics_seed: u64,
    pub mu_legit: f64,
    pub mu_malicious: f64,
    pub c: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub eta: f64,
    pub rel_amplitude: f64,
    pub period: f64,
    pub noise_sigma: f64,
    pub nominal_consensus: f64,
    /// Resolved recovery round, or None if classification was still wrong
    /// at the horizon.
    pub recovery: Option<usize>,
}

pub const TRACE_CSV_HEADER: &str = "round,agent,state,contrib_legit,contrib_malicious";

pub fn write_trace(path: &Path, meta: &TraceMeta, trace: &RunTrace) -> Result<()> {
    let mut out = String::with_capacity(64 * trace.rounds.len() * meta.legit.max(1));
    let json = serde_json::to_string(meta)
        .map_err(|e| Error::Parse(format!("trace metadata: {e}")))?;
    out.push_str("#meta ");
    out.push_str(&json);
    out.push('\n');
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for (t, round) in trace.rounds.iter().enumerate() {
        for i in 0..round.x.len() {
            writeln!(
                out,
                "{t},{i},{},{},{}",
                round.x[i], round.contrib_legit[i], round.contrib_malicious[i]
            )
            .expect("writing to a string cannot fail");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses a trace file back into its metadata and per-round states.
pub fn read_trace(path: &Path) -> Result<(TraceMeta, Vec<RoundState>)> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    let meta_line = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty trace file", path.display())))?;
    let json = meta_line
        .strip_prefix("#meta ")
        .ok_or_else(|| Error::Parse(format!("{}: missing #meta line", path.display())))?;
    let meta: TraceMeta =
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("trace metadata: {e}")))?;
    let header = lines.next().unwrap_or_default();
    if header != TRACE_CSV_HEADER {
        return Err(Error::Parse(format!(
            "{}: expected header {TRACE_CSV_HEADER:?}, got {header:?}",
            path.display()
        )));
    }

    let mut rounds: Vec<RoundState> = Vec::with_capacity(meta.horizon + 1);
    for (lineno, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("row {}: missing {name}", lineno + 3)))
        };
        let t: usize = parse_field(next("round")?, "round", lineno)?;
        let i: usize = parse_field(next("agent")?, "agent", lineno)?;
        let x: f64 = parse_field(next("state")?, "state", lineno)?;
        let a: f64 = parse_field(next("contrib_legit")?, "contrib_legit", lineno)?;
        let b: f64 = parse_field(next("contrib_malicious")?, "contrib_malicious", lineno)?;
        if fields.next().is_some() {
            return Err(Error::Parse(format!("row {}: too many fields", lineno + 3)));
        }
        if t == rounds.len() && i == 0 {
            rounds.push(RoundState {
                x: Vec::with_capacity(meta.legit),
                contrib_legit: Vec::with_capacity(meta.legit),
                contrib_malicious: Vec::with_capacity(meta.legit),
            });
        }
        if t + 1 != rounds.len() {
            return Err(Error::Parse(format!("row {}: round {t} out of order", lineno + 3)));
        }
        let round = rounds.last_mut().expect("nonempty by the check above");
        if i != round.x.len() {
            return Err(Error::Parse(format!("row {}: agent {i} out of order", lineno + 3)));
        }
        round.x.push(x);
        round.contrib_legit.push(a);
        round.contrib_malicious.push(b);
    }
    if rounds.len() != meta.horizon + 1 {
        return Err(Error::Parse(format!(
            "{}: expected {} rounds, found {}",
            path.display(),
            meta.horizon + 1,
            rounds.len()
        )));
    }
    for (t, round) in rounds.iter().enumerate() {
        if round.x.len() != meta.legit {
            return Err(Error::Parse(format!(
                "{}: round {t} has {} agents, expected {}",
                path.display(),
                round.x.len(),
                meta.legit
            )));
        }
    }
    Ok((meta, rounds))
}

/// Outcome of re-executing a stored trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub rounds_checked: usize,
    /// Largest |recomputed - stored| over all states; 0 means bit-exact.
    pub max_state_mismatch: f64,
    pub states_match: bool,
    /// Largest |x - (a + b)| over the stored rows.
    pub max_decomposition_error: f64,
    pub recovery: Recovery,
    pub recovery_matches_meta: bool,
    /// Weights equal the nominal matrix from the recovery round onward
    /// (vacuously true for unresolved runs).
    pub weight_recovery_ok: bool,
}

impl ReplayReport {
    /// Errors unless the stored trace is exactly reproducible and
    /// internally consistent.
    pub fn verify(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !self.states_match {
            problems.push(format!("states differ by up to {:e}", self.max_state_mismatch));
        }
        if self.max_decomposition_error > 1e-12 {
            problems.push(format!(
                "decomposition error {:e} exceeds 1e-12",
                self.max_decomposition_error
            ));
        }
        if !self.recovery_matches_meta {
            problems.push("recovery time does not match metadata".into());
        }
        if !self.weight_recovery_ok {
            problems.push("weights deviate from nominal after the recovery round".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Numerical(format!("replay failed: {}", problems.join("; "))))
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "rounds checked: {}\nstates match: {} (max mismatch {:e})\n\
             max decomposition error: {:e}\nrecovery: {:?} (matches metadata: {})\n\
             weight recovery: {}",
            self.rounds_checked,
            self.states_match,
            self.max_state_mismatch,
            self.max_decomposition_error,
            self.recovery,
            self.recovery_matches_meta,
            if self.weight_recovery_ok { "ok" } else { "violated" }
        )
    }
}

/// Re-executes the run described by a trace file's metadata and checks the
/// stored rows against the recomputation.
pub fn replay_trace(path: &Path) -> Result<ReplayReport> {
    let (meta, stored) = read_trace(path)?;
    let topo = generate_rgg(meta.n, meta.legit, meta.radius, meta.topology_seed)?;
    let x0 = draw_x0(meta.x0_seed, meta.legit);
    let model = TrustModel::new(meta.mu_legit, meta.mu_malicious)?;
    let schedule = LambdaSchedule::new(meta.c, meta.gamma)?;
    let params = MaliciousParams {
        rel_amplitude: meta.rel_amplitude,
        period: meta.period,
        noise_sigma: meta.noise_sigma,
    };
    let rerun = run_protocol(
        &topo,
        &model,
        &schedule,
        &x0,
        meta.horizon,
        meta.dynamics_seed,
        &params,
        meta.eta,
    )?;

    let mut max_state_mismatch = 0.0f64;
    for (fresh, old) in rerun.rounds.iter().zip(&stored) {
        for (series_fresh, series_old) in [
            (&fresh.x, &old.x),
            (&fresh.contrib_legit, &old.contrib_legit),
            (&fresh.contrib_malicious, &old.contrib_malicious),
        ] {
            for (f, o) in series_fresh.iter().zip(series_old.iter()) {
                max_state_mismatch = max_state_mismatch.max((f - o).abs());
            }
        }
    }
    let max_decomposition_error = stored
        .iter()
        .flat_map(|r| {
            r.x.iter()
                .zip(r.contrib_legit.iter().zip(&r.contrib_malicious))
                .map(|(x, (a, b))| (x - (a + b)).abs())
        })
        .fold(0.0, f64::max);
    let recovery = recovery_from_flags(&rerun.classification_ok);
    let weight_recovery_ok = match recovery {
        Recovery::Resolved(k) => rerun.classification_ok[k..].iter().all(|&ok| ok),
        Recovery::Unresolved(_) => true,
    };
    Ok(ReplayReport {
        rounds_checked: stored.len(),
        max_state_mismatch,
        states_match: max_state_mismatch == 0.0,
        max_decomposition_error,
        recovery,
        recovery_matches_meta: recovery.resolved() == meta.recovery,
        weight_recovery_ok,
    })
}

fn parse_field<T: std::str::FromStr>(value: &str, name: &str, lineno: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Parse(format!("row {}: cannot parse {name} from {value:?}", lineno + 3))
    })
}
