//! Stochastic trust observations and the per-edge trust ledger.
//!
//! Each round, every legitimate agent i receives a trust observation
//! `alpha_ij(t)` in [0,1] for every neighbor j. Observations are uniform
//! around a sender-kind mean, with mean above 1/2 for legitimate senders and
//! below 1/2 for malicious ones. The ledger accumulates
//! `beta_ij(t) = sum_{s=0..t} (alpha_ij(s) - 1/2)`; a neighbor is trusted
//! while its ledger entry is nonnegative. The probability of the ledger
//! having the wrong sign decays as `exp(-2 E^2 (t+1))` by Hoeffding's
//! inequality, where E is the sender-kind mean offset from 1/2.

use rand::Rng;

use crate::error::{Error, Result};
use crate::topology::NetworkTopology;

/// Ground-truth kind of the transmitting agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderKind {
    Legit,
    Malicious,
}

/// Uniform trust-observation model: observations are drawn on
/// `[mu - w, mu + w]` where `mu` is the sender-kind mean and the half-width
/// `w = min(1 - mu_legit, mu_malicious)` keeps both supports inside [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustModel {
    mu_legit: f64,
    mu_malicious: f64,
}

impl TrustModel {
    /// Requires an informative model: `mu_legit` in (1/2, 1] and
    /// `mu_malicious` in [0, 1/2).
    pub fn new(mu_legit: f64, mu_malicious: f64) -> Result<Self> {
        if !(mu_legit > 0.5 && mu_legit <= 1.0) {
            return Err(Error::Config(format!("mu_legit must be in (0.5, 1], got {mu_legit}")));
        }
        if !(mu_malicious >= 0.0 && mu_malicious < 0.5) {
            return Err(Error::Config(format!(
                "mu_malicious must be in [0, 0.5), got {mu_malicious}"
            )));
        }
        Ok(Self { mu_legit, mu_malicious })
    }

    pub fn mu_legit(&self) -> f64 {
        self.mu_legit
    }

    pub fn mu_malicious(&self) -> f64 {
        self.mu_malicious
    }

    pub fn mean(&self, kind: SenderKind) -> f64 {
        match kind {
            SenderKind::Legit => self.mu_legit,
            SenderKind::Malicious => self.mu_malicious,
        }
    }

    /// Positive mean offset `E_L = mu_legit - 1/2`.
    pub fn offset_legit(&self) -> f64 {
        self.mu_legit - 0.5
    }

    /// Negative mean offset `E_M = mu_malicious - 1/2`.
    pub fn offset_malicious(&self) -> f64 {
        self.mu_malicious - 0.5
    }

    /// Half-width of the uniform observation support.
    pub fn half_width(&self) -> f64 {
        (1.0 - self.mu_legit).min(self.mu_malicious)
    }
}

/// Draws one trust observation for a sender of the given kind.
pub fn sample_trust<R: Rng>(model: &TrustModel, kind: SenderKind, rng: &mut R) -> f64 {
    model.mean(kind) + model.half_width() * (2.0 * rng.gen::<f64>() - 1.0)
}

/// Running sums of centered trust observations, one entry per directed edge
/// (legitimate observer i, neighbor j), stored in the topology's neighbor
/// order.
#[derive(Debug, Clone)]
pub struct TrustLedger {
    beta: Vec<Vec<f64>>,
    rounds: usize,
}

/// One round of observations; same shape as the ledger.
pub type Observations = Vec<Vec<f64>>;

impl TrustLedger {
    /// Empty ledger (all beta zero, so every neighbor starts out trusted).
    pub fn new(topo: &NetworkTopology) -> Self {
        let beta =
            (0..topo.legit_count()).map(|i| vec![0.0; topo.neighbors(i).len()]).collect();
        Self { beta, rounds: 0 }
    }

    /// Number of observation rounds folded in so far.
    pub fn rounds_recorded(&self) -> usize {
        self.rounds
    }

    /// Ledger entries of observer `i`, aligned with `topo.neighbors(i)`.
    pub fn values(&self, observer: usize) -> &[f64] {
        &self.beta[observer]
    }

    /// Ledger entry for the directed edge `observer <- sender`, if monitored.
    pub fn beta(&self, topo: &NetworkTopology, observer: usize, sender: usize) -> Option<f64> {
        let k = topo.neighbors(observer).binary_search(&sender).ok()?;
        Some(self.beta[observer][k])
    }

    /// Folds in one round: `beta += observation - 1/2` on every monitored
    /// edge. The observation layout must match the ledger exactly; anything
    /// else means an edge went unobserved this round.
    pub fn update(&mut self, observations: &Observations) -> Result<()> {
        if observations.len() != self.beta.len() {
            return Err(Error::Protocol(format!(
                "observations cover {} observers, ledger has {}",
                observations.len(),
                self.beta.len()
            )));
        }
        for (i, (row, obs)) in self.beta.iter_mut().zip(observations).enumerate() {
            if obs.len() != row.len() {
                return Err(Error::Protocol(format!(
                    "observer {i}: {} observations for {} monitored edges",
                    obs.len(),
                    row.len()
                )));
            }
            for (b, &alpha) in row.iter_mut().zip(obs) {
                *b += alpha - 0.5;
            }
        }
        self.rounds += 1;
        Ok(())
    }

    /// FNV-1a hash of the ledger contents, for cheap per-round trace
    /// bookkeeping.
    pub fn snapshot_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for row in &self.beta {
            for &v in row {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        }
        h
    }
}

/// Samples a full round of observations in a fixed order: observers
/// ascending, each observer's neighbors ascending. The order is part of the
/// reproducibility contract.
pub fn sample_round<R: Rng>(
    model: &TrustModel,
    topo: &NetworkTopology,
    rng: &mut R,
) -> Observations {
    (0..topo.legit_count())
        .map(|i| {
            topo.neighbors(i)
                .iter()
                .map(|&j| {
                    let kind =
                        if topo.is_legit(j) { SenderKind::Legit } else { SenderKind::Malicious };
                    sample_trust(model, kind, rng)
                })
                .collect()
        })
        .collect()
}

/// Neighbors of `agent` whose ledger entry is nonnegative (ties count as
/// trusted). Only legitimate agents classify their neighbors.
pub fn trusted_neighborhood(
    ledger: &TrustLedger,
    topo: &NetworkTopology,
    agent: usize,
) -> Result<Vec<usize>> {
    if !topo.is_legit(agent) {
        return Err(Error::Domain(format!("agent {agent} is malicious and keeps no ledger")));
    }
    Ok(topo
        .neighbors(agent)
        .iter()
        .zip(ledger.values(agent))
        .filter(|&(_, &b)| b >= 0.0)
        .map(|(&j, _)| j)
        .collect())
}

/// Hoeffding bound `exp(-2 E^2 (t+1))` on the probability that a ledger entry
/// has the wrong sign at round `t`.
pub fn misclassification_bound(offset: f64, t: usize) -> Result<f64> {
    if offset == 0.0 || !offset.is_finite() {
        return Err(Error::Domain(format!("mean offset must be finite and nonzero, got {offset}")));
    }
    Ok((-2.0 * offset * offset * (t as f64 + 1.0)).exp())
}
