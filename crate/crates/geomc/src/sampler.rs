//! Geodesic Monte Carlo: Hamiltonian Monte Carlo whose integrator alternates
//! an exact geodesic flow with tangent-space gradient kicks.
//!
//! One proposal refreshes the velocity from the tangent Gaussian, applies
//! `n_steps` half-kick / flow / half-kick steps, and accepts with probability
//! min(1, exp(-delta H)) for H = -log pi(q)/T + ||v||^2 / 2. Because the flow
//! is exact, the only energy error comes from the kicks, and it shrinks as
//! O(epsilon^2) at fixed trajectory length.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::{ball_to_sphere, sphere_to_ball, PhaseState};
use crate::targets::{BallDensity, LiftedBallTarget, Target};
use crate::{GmcError, Result};

/// Constraint tolerance every recorded sample is held to.
pub const RECORDED_SAMPLE_TOL: f64 = 1e-10;

/// Step-size, trajectory-length, temperature, and seed of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmcConfig {
    pub epsilon: f64,
    pub n_steps: usize,
    /// Sampling temperature; 1 is the target distribution. Only the potential
    /// is tempered, the kinetic term is untouched.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub seed: u64,
}

fn default_temperature() -> f64 {
    1.0
}

impl GmcConfig {
    pub fn new(epsilon: f64, n_steps: usize, seed: u64) -> Self {
        Self { epsilon, n_steps, temperature: 1.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(GmcError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.n_steps == 0 {
            return Err(GmcError::InvalidParameter(
                "n_steps must be at least 1".to_string(),
            ));
        }
        if self.temperature < 1.0 || !self.temperature.is_finite() {
            return Err(GmcError::InvalidParameter(format!(
                "temperature must be at least 1, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// One chain: current phase, cached log-density at the position, and the
/// generator that drives it.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub phase: PhaseState,
    /// Untempered log-density at `phase.q`; kept equal to recomputation.
    pub log_density: f64,
    pub rng: ChaCha8Rng,
}

impl ChainState {
    /// Validate the starting point, snap it exactly onto the constraint set,
    /// and cache its log-density.
    pub fn new<T: Target + ?Sized>(
        target: &T,
        initial: &DVector<f64>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let m = target.manifold();
        m.check_point(initial)?;
        // Snap within-tolerance input exactly onto the constraint so that
        // recorded samples meet the tighter output tolerance even if the chain
        // never moves.
        let q = m.project_to_manifold(initial)?;
        let log_density = target.log_density(&q);
        if !log_density.is_finite() {
            return Err(GmcError::InvalidParameter(
                "initial point has zero target density".to_string(),
            ));
        }
        let v = DVector::zeros(q.len());
        Ok(Self { phase: PhaseState { q, v }, log_density, rng })
    }
}

/// Per-pair swap bookkeeping from a tempered run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    pub temperatures: Vec<f64>,
    /// Swap attempts between rungs (i, i+1).
    pub attempts: Vec<usize>,
    pub accepts: Vec<usize>,
}

impl SwapStats {
    pub fn rates(&self) -> Vec<f64> {
        self.attempts
            .iter()
            .zip(&self.accepts)
            .map(|(&a, &acc)| if a == 0 { 0.0 } else { acc as f64 / a as f64 })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct LadderJson {
    temperatures: Vec<f64>,
    swap_interval: usize,
}

/// Temperature ladder for parallel tempering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LadderJson", into = "LadderJson")]
pub struct TemperingLadder {
    temperatures: Vec<f64>,
    swap_interval: usize,
}

impl TemperingLadder {
    pub fn new(temperatures: Vec<f64>, swap_interval: usize) -> Result<Self> {
        if temperatures.is_empty() {
            return Err(GmcError::InvalidParameter(
                "ladder needs at least one temperature".to_string(),
            ));
        }
        if temperatures[0] != 1.0 {
            return Err(GmcError::InvalidParameter(format!(
                "ladder must start at temperature 1, got {}",
                temperatures[0]
            )));
        }
        if temperatures.iter().any(|t| !t.is_finite()) {
            return Err(GmcError::InvalidParameter(
                "ladder temperatures must be finite".to_string(),
            ));
        }
        if temperatures.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GmcError::InvalidParameter(
                "ladder temperatures must be strictly ascending".to_string(),
            ));
        }
        if swap_interval == 0 {
            return Err(GmcError::InvalidParameter(
                "swap interval must be at least 1".to_string(),
            ));
        }
        Ok(Self { temperatures, swap_interval })
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn swap_interval(&self) -> usize {
        self.swap_interval
    }
}

impl TryFrom<LadderJson> for TemperingLadder {
    type Error = GmcError;

    fn try_from(j: LadderJson) -> Result<Self> {
        Self::new(j.temperatures, j.swap_interval)
    }
}

impl From<TemperingLadder> for LadderJson {
    fn from(l: TemperingLadder) -> Self {
        Self { temperatures: l.temperatures, swap_interval: l.swap_interval }
    }
}

/// Everything recorded about one chain run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub samples: Vec<DVector<f64>>,
    /// Accepted proposals among the recorded (post-burn-in) iterations.
    pub accept_count: usize,
    /// Recorded iterations; equals the number of requested draws.
    pub total: usize,
    /// Energy error of each recorded proposal (NaN when the trajectory failed).
    pub delta_h: Vec<f64>,
    /// Trajectories rejected because of non-finite gradients or energies.
    pub n_energy_failures: usize,
    pub config: GmcConfig,
}

impl RunRecord {
    pub fn accept_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.total as f64
        }
    }
}

/// Result of one Metropolis proposal.
#[derive(Debug, Clone, Copy)]
pub struct ProposalOutcome {
    pub accepted: bool,
    pub delta_h: f64,
    /// Trajectory produced a non-finite gradient or energy and was auto-rejected.
    pub energy_failure: bool,
}

fn kick_scaled<T: Target + ?Sized>(
    target: &T,
    s: &PhaseState,
    dt: f64,
    grad_scale: f64,
) -> Result<PhaseState> {
    if dt == 0.0 {
        return Ok(s.clone());
    }
    let g = target.grad_log_density(&s.q);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(GmcError::NonFiniteKick {
            at: format!("{:?}", s.q.as_slice()),
        });
    }
    let v = target
        .manifold()
        .project_to_tangent(&s.q, &(&s.v + g * (dt * grad_scale)))?;
    Ok(PhaseState { q: s.q.clone(), v })
}

/// Velocity update from the potential: v <- project(v + dt grad log pi(q)).
pub fn kick<T: Target + ?Sized>(target: &T, s: &PhaseState, dt: f64) -> Result<PhaseState> {
    kick_scaled(target, s, dt, 1.0)
}

fn splitting_step_scaled<T: Target + ?Sized>(
    target: &T,
    s: &PhaseState,
    epsilon: f64,
    grad_scale: f64,
) -> Result<PhaseState> {
    let half = kick_scaled(target, s, epsilon / 2.0, grad_scale)?;
    let flowed = target.manifold().flow_state(&half, epsilon)?;
    kick_scaled(target, &flowed, epsilon / 2.0, grad_scale)
}

/// One symmetric integrator step: half kick, exact geodesic flow, half kick.
pub fn splitting_step<T: Target + ?Sized>(
    target: &T,
    s: &PhaseState,
    epsilon: f64,
) -> Result<PhaseState> {
    splitting_step_scaled(target, s, epsilon, 1.0)
}

/// One full proposal on `chain`: velocity refresh, trajectory, accept test.
/// Non-finite gradients or energies reject the proposal and set the failure
/// flag instead of aborting the run.
pub fn propose_and_accept<T: Target + ?Sized>(
    target: &T,
    chain: &mut ChainState,
    cfg: &GmcConfig,
) -> Result<ProposalOutcome> {
    let m = target.manifold();
    let inv_t = 1.0 / cfg.temperature;
    let v = m.sample_tangent_gaussian(&chain.phase.q, &mut chain.rng)?;
    let h0 = -chain.log_density * inv_t + 0.5 * v.dot(&v);

    let mut s = PhaseState { q: chain.phase.q.clone(), v };
    for _ in 0..cfg.n_steps {
        match splitting_step_scaled(target, &s, cfg.epsilon, inv_t) {
            Ok(next) => s = next,
            Err(GmcError::NonFiniteKick { .. }) => {
                return Ok(ProposalOutcome {
                    accepted: false,
                    delta_h: f64::NAN,
                    energy_failure: true,
                });
            }
            Err(e) => return Err(e),
        }
    }

    let log_pi1 = target.log_density(&s.q);
    let h1 = -log_pi1 * inv_t + 0.5 * s.v.dot(&s.v);
    let delta_h = h1 - h0;
    if !delta_h.is_finite() {
        return Ok(ProposalOutcome {
            accepted: false,
            delta_h,
            energy_failure: true,
        });
    }
    let coin: f64 = chain.rng.random();
    let accepted = coin.ln() < -delta_h;
    if accepted {
        chain.phase = s;
        chain.log_density = log_pi1;
    }
    Ok(ProposalOutcome { accepted, delta_h, energy_failure: false })
}

struct ChainRun {
    chain: ChainState,
    cfg: GmcConfig,
    keep_samples: bool,
    samples: Vec<DVector<f64>>,
    delta_h: Vec<f64>,
    accept_count: usize,
    total: usize,
    n_energy_failures: usize,
    error: Option<GmcError>,
}

impl ChainRun {
    fn advance<T: Target + ?Sized>(
        &mut self,
        target: &T,
        iterations: usize,
        already_done: usize,
        n_burnin: usize,
    ) {
        if self.error.is_some() {
            return;
        }
        for k in 0..iterations {
            match propose_and_accept(target, &mut self.chain, &self.cfg) {
                Ok(out) => {
                    if already_done + k >= n_burnin {
                        if self.keep_samples {
                            self.samples.push(self.chain.phase.q.clone());
                            self.delta_h.push(out.delta_h);
                        }
                        self.total += 1;
                        self.accept_count += out.accepted as usize;
                        self.n_energy_failures += out.energy_failure as usize;
                    }
                }
                Err(e) => {
                    self.error = Some(e);
                    return;
                }
            }
        }
    }

    fn into_record(self) -> Result<RunRecord> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Ok(RunRecord {
            samples: self.samples,
            accept_count: self.accept_count,
            total: self.total,
            delta_h: self.delta_h,
            n_energy_failures: self.n_energy_failures,
            config: self.cfg,
        })
    }
}

fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run one chain and record `n_draws` post-burn-in positions.
pub fn sample<T: Target + ?Sized>(
    target: &T,
    cfg: &GmcConfig,
    n_draws: usize,
    n_burnin: usize,
    initial: &DVector<f64>,
) -> Result<RunRecord> {
    cfg.validate()?;
    let chain = ChainState::new(target, initial, seeded_rng(cfg.seed, 0))?;
    let mut run = ChainRun {
        chain,
        cfg: *cfg,
        keep_samples: true,
        samples: Vec::with_capacity(n_draws),
        delta_h: Vec::with_capacity(n_draws),
        accept_count: 0,
        total: 0,
        n_energy_failures: 0,
        error: None,
    };
    run.advance(target, n_burnin + n_draws, 0, n_burnin);
    run.into_record()
}

/// Sample a density on the unit ball through its spherical lift and return the
/// draws in ball coordinates.
///
/// Trajectories crossing the equator of the lifted sphere re-enter the ball
/// moving inward, so boundary "reflection" needs no special casing.
pub fn sample_on_ball<B: BallDensity>(
    target: &LiftedBallTarget<B>,
    cfg: &GmcConfig,
    n_draws: usize,
    n_burnin: usize,
    initial_theta: &DVector<f64>,
) -> Result<RunRecord> {
    let dim = target.manifold().ambient_dim() - 1;
    if initial_theta.len() != dim {
        return Err(GmcError::DimensionMismatch(format!(
            "initial point has {} coordinates, ball has {}",
            initial_theta.len(),
            dim
        )));
    }
    if initial_theta.norm() >= 1.0 - 1e-9 {
        return Err(GmcError::InvalidPoint {
            manifold: format!("BallViaSphere({dim})"),
            detail: "starting point must be strictly inside the unit ball".to_string(),
        });
    }
    let lifted_initial = ball_to_sphere(initial_theta, true)?;
    let mut record = sample(target, cfg, n_draws, n_burnin, &lifted_initial)?;
    for s in record.samples.iter_mut() {
        *s = sphere_to_ball(s)?;
    }
    Ok(record)
}

/// Log acceptance ratio of a swap between inverse temperatures `beta_lo` and
/// `beta_hi` at cached log-densities `logp_lo`, `logp_hi`.
pub fn swap_log_acceptance(beta_lo: f64, beta_hi: f64, logp_lo: f64, logp_hi: f64) -> f64 {
    (beta_lo - beta_hi) * (logp_hi - logp_lo)
}

/// Parallel tempering: one chain per ladder rung, swaps between adjacent rungs
/// every `swap_interval` iterations, cold-chain record returned.
///
/// Chain `i` draws from stream `i` of the seeded generator and swap decisions
/// from a dedicated stream, so a single-rung ladder reproduces [`sample`]
/// exactly and adding rungs never perturbs the cold chain's own randomness.
/// Chains advance concurrently between swap barriers.
pub fn parallel_tempering<T: Target + ?Sized>(
    target: &T,
    ladder: &TemperingLadder,
    cfg: &GmcConfig,
    n_draws: usize,
    n_burnin: usize,
    initial: &DVector<f64>,
) -> Result<(RunRecord, SwapStats)> {
    cfg.validate()?;
    if cfg.temperature != 1.0 {
        return Err(GmcError::InvalidParameter(
            "tempered runs take their temperatures from the ladder; set the config temperature to 1"
                .to_string(),
        ));
    }
    let temps = ladder.temperatures();
    let n_chains = temps.len();
    let mut runs = Vec::with_capacity(n_chains);
    for (i, &t) in temps.iter().enumerate() {
        let chain = ChainState::new(target, initial, seeded_rng(cfg.seed, i as u64))?;
        let mut chain_cfg = *cfg;
        chain_cfg.temperature = t;
        runs.push(ChainRun {
            chain,
            cfg: chain_cfg,
            keep_samples: i == 0,
            samples: Vec::new(),
            delta_h: Vec::new(),
            accept_count: 0,
            total: 0,
            n_energy_failures: 0,
            error: None,
        });
    }

    let mut swap_rng = seeded_rng(cfg.seed, u64::MAX);
    let mut stats = SwapStats {
        temperatures: temps.to_vec(),
        attempts: vec![0; n_chains.saturating_sub(1)],
        accepts: vec![0; n_chains.saturating_sub(1)],
    };

    let total_iters = n_burnin + n_draws;
    let mut done = 0;
    while done < total_iters {
        let block = ladder.swap_interval().min(total_iters - done);
        runs.par_iter_mut()
            .for_each(|run| run.advance(target, block, done, n_burnin));
        done += block;
        if let Some(pos) = runs.iter().position(|r| r.error.is_some()) {
            return Err(runs.swap_remove(pos).error.unwrap());
        }
        if done < total_iters {
            for i in 0..n_chains.saturating_sub(1) {
                let beta_lo = 1.0 / temps[i];
                let beta_hi = 1.0 / temps[i + 1];
                let log_ratio = swap_log_acceptance(
                    beta_lo,
                    beta_hi,
                    runs[i].chain.log_density,
                    runs[i + 1].chain.log_density,
                );
                stats.attempts[i] += 1;
                let coin: f64 = swap_rng.random();
                if coin.ln() < log_ratio {
                    stats.accepts[i] += 1;
                    let (a, b) = runs.split_at_mut(i + 1);
                    std::mem::swap(&mut a[i].chain.phase, &mut b[0].chain.phase);
                    std::mem::swap(&mut a[i].chain.log_density, &mut b[0].chain.log_density);
                }
            }
        }
    }

    let cold = runs.swap_remove(0);
    Ok((cold.into_record()?, stats))
}
