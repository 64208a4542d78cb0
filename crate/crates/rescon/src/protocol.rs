//! The confidence-anchored resilient update rule and the nominal oracle.
//!
//! Legitimate agents update as
//!
//! ```text
//! x(t+1) = lambda_t * x(0) + (1 - lambda_t) * (W^L_t x(t) + W^M_t x^M(t))
//! ```
//!
//! where the online weights give every trusted neighbor `1/(|trusted|+1)`
//! (remainder on the diagonal) and the confidence `lambda_t = c e^{-gamma t}`
//! anchors agents to their initial states while trust classification is
//! still unreliable. By linearity the state splits exactly into `x = a + b`,
//! with `a` driven by legitimate initial states only and `b` collecting
//! everything injected by malicious agents; the simulator maintains both
//! recursions alongside the direct one and exposes the split per round.
//!
//! The nominal oracle is the attack-free protocol `x(t+1) = Wbar^L x(t)`
//! whose Perron vector determines the consensus value legitimate agents
//! would reach without interference.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::topology::NetworkTopology;
use crate::trust::{sample_round, TrustLedger, TrustModel};

/// Exponentially decaying confidence parameter `lambda_t = c e^{-gamma t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSchedule {
    c: f64,
    gamma: f64,
}

impl LambdaSchedule {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Config(format!("c must be in (0, 1), got {c}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
        }
        Ok(Self { c, gamma })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda_at(&self, t: usize) -> f64 {
        self.c * (-self.gamma * t as f64).exp()
    }
}

/// Row-stochastic per-round weights over legitimate rows, split into the
/// legitimate-sender block (L x L) and the malicious-sender block (L x M).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    legit: Vec<f64>,
    malicious: Vec<f64>,
    l: usize,
    m: usize,
    round: usize,
}

impl WeightMatrix {
    fn zeros(l: usize, m: usize, round: usize) -> Self {
        Self { legit: vec![0.0; l * l], malicious: vec![0.0; l * m], l, m, round }
    }

    pub fn n_legit(&self) -> usize {
        self.l
    }

    pub fn n_malicious(&self) -> usize {
        self.m
    }

    /// Round these weights were computed for.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Weight agent `i` puts on legitimate agent `j`.
    pub fn legit(&self, i: usize, j: usize) -> f64 {
        self.legit[i * self.l + j]
    }

    /// Weight agent `i` puts on malicious agent `L + k`.
    pub fn malicious(&self, i: usize, k: usize) -> f64 {
        self.malicious[i * self.m + k]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let lsum: f64 = self.legit[i * self.l..(i + 1) * self.l].iter().sum();
        let msum: f64 = self.malicious[i * self.m..(i + 1) * self.m].iter().sum();
        lsum + msum
    }

    /// `W^L x` for a legitimate state vector.
    pub fn mul_legit(&self, x: &[f64]) -> Vec<f64> {
        (0..self.l)
            .map(|i| {
                self.legit[i * self.l..(i + 1) * self.l]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }

    /// `W^M x^M` for a malicious state vector (zero vector when M = 0).
    pub fn mul_malicious(&self, xm: &[f64]) -> Vec<f64> {
        (0..self.l)
            .map(|i| {
                self.malicious[i * self.m..(i + 1) * self.m]
                    .iter()
                    .zip(xm)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }

    /// `v^T W^L`, the transpose product used by the Perron iteration.
    pub fn tmul_legit(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.l];
        for (i, vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += vi * self.legit[i * self.l + j];
            }
        }
        out
    }

    /// Exact entrywise equality of the legitimate blocks. Nominal and online
    /// weights share the same arithmetic, so equality is bitwise once the
    /// trusted sets coincide with the legitimate neighborhoods.
    pub fn legit_equals(&self, other: &WeightMatrix) -> bool {
        self.l == other.l && self.legit == other.legit
    }

    pub fn malicious_is_zero(&self) -> bool {
        self.malicious.iter().all(|&w| w == 0.0)
    }
}

/// Weight given to each of `count` trusted neighbors, and the diagonal
/// remainder. Shared by the nominal and online constructions so that a
/// correct classification reproduces the nominal matrix exactly.
fn equal_share(count: usize) -> (f64, f64) {
    let w = 1.0 / (count as f64 + 1.0);
    (w, 1.0 - count as f64 * w)
}

/// Attack-free weights: every legitimate neighbor of agent i gets
/// `1/(|N_i ∩ legit| + 1)`, the rest stays on the diagonal. The malicious
/// block is zero.
pub fn nominal_weights(topo: &NetworkTopology) -> WeightMatrix {
    let l = topo.legit_count();
    let mut w = WeightMatrix::zeros(l, topo.malicious_count(), 0);
    for i in 0..l {
        let legit_nb = topo.legit_neighbors(i);
        let (share, diag) = equal_share(legit_nb.len());
        for &j in legit_nb {
            w.legit[i * l + j] = share;
        }
        w.legit[i * l + i] = diag;
    }
    w
}

/// Trust-classified weights: each neighbor with a nonnegative ledger entry
/// (legitimate or malicious) gets `1/(|trusted|+1)`, remainder on the
/// diagonal.
pub fn online_weights(ledger: &TrustLedger, topo: &NetworkTopology) -> WeightMatrix {
    let l = topo.legit_count();
    let m = topo.malicious_count();
    let round = ledger.rounds_recorded().saturating_sub(1);
    let mut w = WeightMatrix::zeros(l, m, round);
    for i in 0..l {
        let neighbors = topo.neighbors(i);
        let beta = ledger.values(i);
        let trusted = beta.iter().filter(|&&b| b >= 0.0).count();
        let (share, diag) = equal_share(trusted);
        for (&j, &b) in neighbors.iter().zip(beta) {
            if b >= 0.0 {
                if j < l {
                    w.legit[i * l + j] = share;
                } else {
                    w.malicious[i * m + (j - l)] = share;
                }
            }
        }
        w.legit[i * l + i] = diag;
    }
    w
}

/// Stationary (Perron) vector of the nominal legitimate block: the
/// stochastic `v` with `v^T Wbar^L = v^T`, found by power iteration on the
/// transpose from a uniform start. Converges whenever the legitimate
/// subgraph is connected, since positive diagonals make the block primitive.
pub fn perron_vector(weights: &WeightMatrix) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-12;
    const ITERATION_CAP: usize = 1_000_000;
    let l = weights.n_legit();
    if l == 0 {
        return Err(Error::Dimension("empty weight matrix".into()));
    }
    let mut v = vec![1.0 / l as f64; l];
    let mut residual = f64::INFINITY;
    for _ in 0..ITERATION_CAP {
        let next = weights.tmul_legit(&v);
        residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= TOL {
            return Ok(v);
        }
        let sum: f64 = next.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::Numerical(format!("power iteration degenerated (mass {sum})")));
        }
        v = next;
        for x in v.iter_mut() {
            *x /= sum;
        }
    }
    Err(Error::Numerical(format!(
        "power iteration residual {residual:.3e} above {TOL:.0e} after {ITERATION_CAP} iterations"
    )))
}

/// Consensus value `v^T x(0)` the nominal protocol converges to.
pub fn nominal_consensus_value(v: &[f64], x0_legit: &[f64]) -> Result<f64> {
    if v.len() != x0_legit.len() {
        return Err(Error::Dimension(format!(
            "perron vector has {} entries, initial state {}",
            v.len(),
            x0_legit.len()
        )));
    }
    Ok(v.iter().zip(x0_legit).map(|(a, b)| a * b).sum())
}

/// Legitimate states, their exact contribution split, and the malicious
/// broadcast values for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// Direct evaluation of the update rule.
    pub x_legit: Vec<f64>,
    /// Contribution `a` driven by legitimate initial states.
    pub contrib_legit: Vec<f64>,
    /// Contribution `b` injected by malicious agents; `x = a + b`.
    pub contrib_malicious: Vec<f64>,
    /// States malicious agents broadcast this round.
    pub x_malicious: Vec<f64>,
    pub round: usize,
}

impl SimulationState {
    pub fn initial(x0_legit: &[f64], malicious_count: usize) -> Self {
        Self {
            x_legit: x0_legit.to_vec(),
            contrib_legit: x0_legit.to_vec(),
            contrib_malicious: vec![0.0; x0_legit.len()],
            x_malicious: vec![0.0; malicious_count],
            round: 0,
        }
    }

    /// `max_i |x_i - (a_i + b_i)|`; zero up to rounding by construction.
    pub fn decomposition_error(&self) -> f64 {
        self.x_legit
            .iter()
            .zip(self.contrib_legit.iter().zip(&self.contrib_malicious))
            .map(|(x, (a, b))| (x - (a + b)).abs())
            .fold(0.0, f64::max)
    }
}

/// One synchronous round: advances the direct state together with both
/// contribution recursions,
///
/// ```text
/// a(t+1) = lambda x(0) + (1-lambda) W^L a(t)            a(0) = x(0)
/// b(t+1) = (1-lambda) (W^L b(t) + W^M x^M(t))           b(0) = 0
/// ```
///
/// so `a + b` reproduces the direct evaluation to rounding error.
pub fn decompose_step(
    state: &SimulationState,
    weights: &WeightMatrix,
    lambda: f64,
    x0_legit: &[f64],
) -> Result<SimulationState> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let l = weights.n_legit();
    if state.x_legit.len() != l || x0_legit.len() != l {
        return Err(Error::Dimension(format!(
            "weights are {l}x{l} but states have {} and {} entries",
            state.x_legit.len(),
            x0_legit.len()
        )));
    }
    if state.x_malicious.len() != weights.n_malicious() {
        return Err(Error::Dimension(format!(
            "weights expect {} malicious agents, state has {}",
            weights.n_malicious(),
            state.x_malicious.len()
        )));
    }
    let wx = weights.mul_legit(&state.x_legit);
    let wa = weights.mul_legit(&state.contrib_legit);
    let wb = weights.mul_legit(&state.contrib_malicious);
    let wm = weights.mul_malicious(&state.x_malicious);
    let x_legit = (0..l).map(|i| lambda * x0_legit[i] + (1.0 - lambda) * (wx[i] + wm[i])).collect();
    let contrib_legit = (0..l).map(|i| lambda * x0_legit[i] + (1.0 - lambda) * wa[i]).collect();
    let contrib_malicious = (0..l).map(|i| (1.0 - lambda) * (wb[i] + wm[i])).collect();
    Ok(SimulationState {
        x_legit,
        contrib_legit,
        contrib_malicious,
        x_malicious: state.x_malicious.clone(),
        round: state.round + 1,
    })
}

/// Oscillation shape of the simulated attack; all fields configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaliciousParams {
    /// Sinusoid amplitude as a fraction of the nominal consensus value.
    pub rel_amplitude: f64,
    /// Oscillation period in rounds.
    pub period: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
}

impl Default for MaliciousParams {
    fn default() -> Self {
        Self { rel_amplitude: 0.1, period: 50.0, noise_sigma: 0.05 }
    }
}

impl MaliciousParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Config(format!("period must be positive, got {}", self.period)));
        }
        if !(self.rel_amplitude >= 0.0 && self.rel_amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "rel_amplitude must be nonnegative, got {}",
                self.rel_amplitude
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// States malicious agents broadcast at round `t`: a noisy sinusoid around
/// twice the nominal consensus value (the attack model knows it), clamped to
/// the state bound. One fixed phase per agent.
pub fn malicious_trajectory<R: Rng>(
    nominal_consensus: f64,
    t: usize,
    params: &MaliciousParams,
    phases: &[f64],
    eta: f64,
    rng: &mut R,
) -> Vec<f64> {
    let amplitude = params.rel_amplitude * nominal_consensus;
    let noise = Normal::new(0.0, params.noise_sigma).expect("noise_sigma validated nonnegative");
    let angle = std::f64::consts::TAU * t as f64 / params.period;
    phases
        .iter()
        .map(|&phi| {
            (2.0 * nominal_consensus + amplitude * (angle + phi).sin() + noise.sample(rng))
                .clamp(-eta, eta)
        })
        .collect()
}

/// Recovery status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Weights equal the nominal ones from this round through the horizon.
    Resolved(usize),
    /// Classification was still wrong at the final round; carries the
    /// horizon, i.e. the `t+1` convention for a running recovery time that
    /// has not resolved yet.
    Unresolved(usize),
}

impl Recovery {
    pub fn resolved(self) -> Option<usize> {
        match self {
            Recovery::Resolved(k) => Some(k),
            Recovery::Unresolved(_) => None,
        }
    }

    pub fn value(self) -> usize {
        match self {
            Recovery::Resolved(k) | Recovery::Unresolved(k) => k,
        }
    }
}

/// Smallest round index from which every later weight matrix was nominal.
pub fn recovery_from_flags(classification_ok: &[bool]) -> Recovery {
    match classification_ok.iter().rposition(|&ok| !ok) {
        None => Recovery::Resolved(0),
        Some(last_bad) if last_bad + 1 == classification_ok.len() => {
            Recovery::Unresolved(classification_ok.len())
        }
        Some(last_bad) => Recovery::Resolved(last_bad + 1),
    }
}

/// Per-round snapshot of the legitimate states and their contribution split.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundState {
    pub x: Vec<f64>,
    pub contrib_legit: Vec<f64>,
    pub contrib_malicious: Vec<f64>,
}

/// Complete record of one protocol run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub seed: u64,
    pub horizon: usize,
    pub x0: Vec<f64>,
    /// `v^T x(0)` under the nominal weights of the run's topology.
    pub nominal_consensus: f64,
    /// `rounds[t]` is the state at round t; `horizon + 1` entries.
    pub rounds: Vec<RoundState>,
    /// `classification_ok[t]`: the weights applied at round t equal the
    /// nominal matrix and the malicious block is zero. `horizon` entries.
    pub classification_ok: Vec<bool>,
    /// Ledger digest after folding round t's observations.
    pub ledger_hashes: Vec<u64>,
    pub recovery: Recovery,
}

impl RunTrace {
    pub fn final_state(&self) -> &RoundState {
        self.rounds.last().expect("trace holds at least the initial round")
    }

    pub fn final_spread(&self) -> f64 {
        let x = &self.final_state().x;
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Worst `|x - (a + b)|` over all rounds and agents.
    pub fn max_decomposition_error(&self) -> f64 {
        self.rounds
            .iter()
            .flat_map(|r| {
                r.x.iter()
                    .zip(r.contrib_legit.iter().zip(&r.contrib_malicious))
                    .map(|(x, (a, b))| (x - (a + b)).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Runs the full protocol for `horizon` rounds.
///
/// Per round, in a fixed order that is part of the reproducibility contract:
/// malicious agents draw their broadcast states, every monitored edge draws a
/// trust observation (observers ascending, neighbors ascending), the ledger
/// folds them in, weights for the same round come from the updated ledger,
/// and finally the state advances. The RNG is seeded from `rng_seed` and the
/// per-agent oscillation phases are drawn once before the first round.
#[allow(clippy::too_many_arguments)]
pub fn run_protocol(
    topo: &NetworkTopology,
    model: &TrustModel,
    schedule: &LambdaSchedule,
    x0_legit: &[f64],
    horizon: usize,
    rng_seed: u64,
    malicious: &MaliciousParams,
    eta: f64,
) -> Result<RunTrace> {
    let l = topo.legit_count();
    let m = topo.malicious_count();
    if x0_legit.len() != l {
        return Err(Error::Dimension(format!(
            "{} initial states for {l} legitimate agents",
            x0_legit.len()
        )));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    if x0_legit.iter().any(|x| x.abs() > eta) {
        return Err(Error::Config("initial states must lie within [-eta, eta]".into()));
    }
    malicious.validate()?;

    let nominal = nominal_weights(topo);
    let v = perron_vector(&nominal)?;
    let nominal_consensus = nominal_consensus_value(&v, x0_legit)?;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let phases: Vec<f64> =
        (0..m).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();

    let mut ledger = TrustLedger::new(topo);
    let mut state = SimulationState::initial(x0_legit, m);
    let mut rounds = Vec::with_capacity(horizon + 1);
    let mut classification_ok = Vec::with_capacity(horizon);
    let mut ledger_hashes = Vec::with_capacity(horizon);
    rounds.push(RoundState {
        x: state.x_legit.clone(),
        contrib_legit: state.contrib_legit.clone(),
        contrib_malicious: state.contrib_malicious.clone(),
    });

    for t in 0..horizon {
        state.x_malicious = malicious_trajectory(nominal_consensus, t, malicious, &phases, eta, &mut rng);
        let obs = sample_round(model, topo, &mut rng);
        ledger.update(&obs)?;
        ledger_hashes.push(ledger.snapshot_hash());
        let weights = online_weights(&ledger, topo);
        classification_ok.push(weights.legit_equals(&nominal) && weights.malicious_is_zero());
        state = decompose_step(&state, &weights, schedule.lambda_at(t), x0_legit)?;
        rounds.push(RoundState {
            x: state.x_legit.clone(),
            contrib_legit: state.contrib_legit.clone(),
            contrib_malicious: state.contrib_malicious.clone(),
        });
    }

    let recovery = recovery_from_flags(&classification_ok);
    Ok(RunTrace {
        seed: rng_seed,
        horizon,
        x0: x0_legit.to_vec(),
        nominal_consensus,
        rounds,
        classification_ok,
        ledger_hashes,
        recovery,
    })
}
