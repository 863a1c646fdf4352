//! Nested sampling over a uniform prior box.
//!
//! The engine estimates `Z = L^-dim * ∫_box exp(-beta_eff * V(x)) dx`, the
//! evidence of the Boltzmann likelihood under a normalized uniform prior on
//! `[-L/2, L/2]^dim`. Each iteration removes the live point with the highest
//! energy, credits it with the prior-mass shell `X_{i-1} - X_i` where
//! `X_i = (K / (K + 1))^i`, and replaces it by cloning a random survivor and
//! running a constrained random walk below the removed energy.
//!
//! With `walkers > 1` the replacement phase evolves the fresh clone together
//! with `walkers - 1` other randomly chosen live points, each for
//! `walk_steps / walkers` steps, so every point still sees roughly
//! `walk_steps` moves before it is removed. Each walker gets its own RNG
//! stream keyed by `(seed, walker, iteration)`, which makes the trace
//! independent of thread scheduling.
//!
//! The quality of the estimate is governed mostly by `K * S`; whether the
//! walks decorrelate enough is left to the caller, who can inspect
//! [`NsTrace::acceptance_history`].

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potentials::PotentialModel;

pub type WalkerRng = Xoshiro256PlusPlus;

/// Target window for the walk acceptance ratio.
pub const ACCEPT_LOW: f64 = 0.15;
pub const ACCEPT_HIGH: f64 = 0.25;
const STEP_FACTOR: f64 = 1.1;
const MIN_STEP_FRACTION: f64 = 1e-8;

/// Anything the sampler can compute an energy for.
pub trait EnergyFunction: Sync {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[f64]) -> Result<f64>;

    /// `Some(energy)` when the energy is strictly below `limit`, `None`
    /// otherwise. Implementations may stop early once the limit is known to
    /// be exceeded; the returned value must equal [`EnergyFunction::energy`].
    fn energy_below(&self, x: &[f64], limit: f64) -> Result<Option<f64>> {
        let e = self.energy(x)?;
        Ok((e < limit).then_some(e))
    }
}

impl EnergyFunction for PotentialModel {
    fn dim(&self) -> usize {
        PotentialModel::dim(self)
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        if self.is_analytic() && x.len() == self.dim() && x.iter().all(|v| v.is_finite()) {
            Ok(self.analytic_value(x))
        } else {
            self.evaluate(x)
        }
    }
}

/// Adapts a closure into an [`EnergyFunction`].
pub struct FnEnergy<F> {
    dim: usize,
    f: F,
}

impl<F> FnEnergy<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> EnergyFunction for FnEnergy<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, x.len())?;
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsParams {
    /// K
    pub live_points: usize,
    /// S, total MCMC steps per replacement, shared among walkers.
    pub walk_steps: usize,
    /// L, the edge of the prior box `[-L/2, L/2]^dim`.
    pub box_length: f64,
    /// n_p
    pub walkers: usize,
    /// Stop once `exp(-beta V_j) X_j < stop_factor * Z`.
    pub stop_factor: f64,
    pub seed: u64,
    pub max_iterations: usize,
    /// Starting step size; defaults to `L / 10`.
    pub initial_step: Option<f64>,
}

impl Default for NsParams {
    fn default() -> Self {
        Self {
            live_points: 1000,
            walk_steps: 800,
            box_length: 10.0,
            walkers: 1,
            stop_factor: 1e-5,
            seed: 0,
            max_iterations: 5_000_000,
            initial_step: None,
        }
    }
}

impl NsParams {
    pub fn half_width(&self) -> f64 {
        0.5 * self.box_length
    }

    pub fn validate(&self) -> Result<()> {
        if self.live_points < 2 {
            return Err(Error::invalid("live_points must be at least 2"));
        }
        if self.walk_steps < 1 {
            return Err(Error::invalid("walk_steps must be at least 1"));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::invalid("box length must be positive"));
        }
        if self.walkers < 1 || self.walkers > self.live_points - 1 {
            return Err(Error::invalid(format!(
                "walkers must be in 1..={}, got {}",
                self.live_points - 1,
                self.walkers
            )));
        }
        if !(self.stop_factor.is_finite() && self.stop_factor > 0.0) {
            return Err(Error::invalid("stop_factor must be positive"));
        }
        if let Some(s) = self.initial_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("initial step must be positive"));
            }
        }
        Ok(())
    }

    fn start_step(&self) -> f64 {
        let s = self.initial_step.unwrap_or(0.1 * self.box_length);
        s.clamp(MIN_STEP_FRACTION * self.box_length, self.box_length)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    Aborted { reason: String },
}

/// Record of one nested-sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct NsTrace {
    pub dim: usize,
    pub live_points: usize,
    pub beta_eff: f64,
    /// Energy of the point removed at each iteration.
    pub thresholds: Vec<f64>,
    /// `ln X_i` for each iteration `i = 1..`.
    pub log_prior_masses: Vec<f64>,
    /// Running `ln Z` after each iteration (remainder not included).
    pub log_evidence_history: Vec<f64>,
    /// Final `ln Z` including the live-point remainder.
    pub log_evidence: f64,
    /// `ln` of the live-point remainder that was added at the end.
    pub log_remainder: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Acceptance ratio of each replacement phase.
    pub acceptance_history: Vec<f64>,
    pub final_step_size: f64,
    /// Energies of the live set when the run stopped.
    pub final_live_energies: Vec<f64>,
}

impl NsTrace {
    fn new(dim: usize, live_points: usize, beta_eff: f64) -> Self {
        Self {
            dim,
            live_points,
            beta_eff,
            thresholds: Vec::new(),
            log_prior_masses: Vec::new(),
            log_evidence_history: Vec::new(),
            log_evidence: f64::NEG_INFINITY,
            log_remainder: f64::NEG_INFINITY,
            iterations: 0,
            termination: Termination::Converged,
            acceptance_history: Vec::new(),
            final_step_size: 0.0,
            final_live_energies: Vec::new(),
        }
    }

    pub fn evidence(&self) -> f64 {
        self.log_evidence.exp()
    }

    pub fn prior_masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_prior_masses.iter().map(|l| l.exp())
    }

    /// `ln w_i = ln(X_{i-1} - X_i)` for each iteration.
    pub fn log_weights(&self) -> Vec<f64> {
        let log_shell = -((self.live_points + 1) as f64).ln();
        (0..self.iterations)
            .map(|i| i as f64 * log_prior_step(self.live_points) + log_shell)
            .collect()
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.termination, Termination::Aborted { .. })
    }
}

/// `ln(K / (K + 1))`
fn log_prior_step(k: usize) -> f64 {
    -(1.0 / k as f64).ln_1p()
}

/// `X_i = (K / (K + 1))^i`, evaluated in log space.
pub fn prior_mass(i: usize, k: usize) -> f64 {
    log_prior_mass(i, k).exp()
}

pub fn log_prior_mass(i: usize, k: usize) -> f64 {
    i as f64 * log_prior_step(k)
}

/// `ln(e^a + e^b)`
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a sequence of integers into a 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5eed_u64, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// RNG stream of walker `walker` in iteration `iteration` of run `seed`.
pub fn walker_rng(seed: u64, walker: u64, iteration: u64) -> WalkerRng {
    WalkerRng::seed_from_u64(derive_seed(&[seed, walker, iteration]))
}

// stream used for the initial live set and clone/walker selection
fn orchestrator_rng(seed: u64) -> WalkerRng {
    WalkerRng::seed_from_u64(derive_seed(&[seed, u64::MAX]))
}

/// Draws `dim` coordinates uniformly from `[-half, half]`.
pub fn uniform_point<R: Rng>(dim: usize, half: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| (2.0 * rng.random::<f64>() - 1.0) * half)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome {
    pub energy: f64,
    pub accepted: usize,
    pub proposed: usize,
}

impl WalkOutcome {
    /// Accepted fraction; 1 for an empty walk.
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Constrained random walk. Every step displaces all coordinates by
/// `step * u` with `u ~ U[-1, 1)`; the move is accepted iff the proposal
/// stays in the box and its energy is strictly below `v_limit`. `x` is
/// updated in place.
#[allow(clippy::too_many_arguments)]
pub fn walk<E: EnergyFunction + ?Sized, R: Rng>(
    energy: &E,
    x: &mut [f64],
    start_energy: f64,
    v_limit: f64,
    steps: usize,
    step: f64,
    half_width: f64,
    rng: &mut R,
) -> Result<WalkOutcome> {
    let mut proposal = vec![0.0; x.len()];
    let mut current = start_energy;
    let mut accepted = 0;
    for _ in 0..steps {
        let mut inside = true;
        for (p, xi) in proposal.iter_mut().zip(x.iter()) {
            let v = xi + step * (2.0 * rng.random::<f64>() - 1.0);
            inside &= v.abs() <= half_width;
            *p = v;
        }
        if !inside {
            continue;
        }
        if let Some(e) = energy.energy_below(&proposal, v_limit)? {
            x.copy_from_slice(&proposal);
            current = e;
            accepted += 1;
        }
    }
    Ok(WalkOutcome {
        energy: current,
        accepted,
        proposed: steps,
    })
}

/// Step-size controller: grow by 10% above 25% acceptance, shrink by 10%
/// below 15%, clamp to `[1e-8 L, L]`.
pub fn adapt_step(window_acceptance: f64, step: f64, box_length: f64) -> f64 {
    let s = if window_acceptance > ACCEPT_HIGH {
        step * STEP_FACTOR
    } else if window_acceptance < ACCEPT_LOW {
        step / STEP_FACTOR
    } else {
        step
    };
    s.clamp(MIN_STEP_FRACTION * box_length, box_length)
}

/// One walker's share of a replacement phase.
#[derive(Debug, Clone)]
pub struct WalkerTask {
    pub slot: usize,
    pub coords: Vec<f64>,
    pub energy: f64,
    pub outcome: Option<WalkOutcome>,
}

/// Evolves every task for `steps_each` steps below `v_limit` on the rayon
/// pool. Walker `w` uses [`walker_rng`]`(seed, w, iteration)`, so the result
/// does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn parallel_walk_phase<E: EnergyFunction + ?Sized>(
    energy: &E,
    tasks: &mut [WalkerTask],
    v_limit: f64,
    steps_each: usize,
    step: f64,
    half_width: f64,
    seed: u64,
    iteration: u64,
) -> Result<()> {
    tasks
        .par_iter_mut()
        .enumerate()
        .map(|(w, task)| {
            let mut rng = walker_rng(seed, w as u64, iteration);
            let out = walk(
                energy,
                &mut task.coords,
                task.energy,
                v_limit,
                steps_each,
                step,
                half_width,
                &mut rng,
            )?;
            task.energy = out.energy;
            task.outcome = Some(out);
            Ok(())
        })
        .collect::<Result<Vec<()>>>()
        .map(|_| ())
}

#[derive(Debug, Clone, Copy)]
struct EnergyKey(f64, usize);

impl PartialEq for EnergyKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for EnergyKey {}
impl PartialOrd for EnergyKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EnergyKey {
    // highest energy last; ties broken towards the lowest slot
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

/// The K current samples with cached energies.
#[derive(Debug, Clone)]
pub struct LiveSet {
    dim: usize,
    coords: Vec<f64>,
    energies: Vec<f64>,
    order: BTreeSet<EnergyKey>,
}

impl LiveSet {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Slot with the highest energy.
    pub fn worst(&self) -> usize {
        self.order.last().expect("non-empty live set").1
    }

    fn set(&mut self, i: usize, coords: &[f64], energy: f64) {
        self.order.remove(&EnergyKey(self.energies[i], i));
        self.coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(coords);
        self.energies[i] = energy;
        self.order.insert(EnergyKey(energy, i));
    }
}

/// Draws K points uniformly from the prior box and evaluates their energies.
pub fn init_live_set<E: EnergyFunction + ?Sized, R: Rng>(
    energy: &E,
    params: &NsParams,
    rng: &mut R,
) -> Result<LiveSet> {
    let dim = energy.dim();
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let k = params.live_points;
    let mut coords = Vec::with_capacity(k * dim);
    let mut energies = Vec::with_capacity(k);
    for _ in 0..k {
        let p = uniform_point(dim, params.half_width(), rng);
        energies.push(energy.energy(&p)?);
        coords.extend_from_slice(&p);
    }
    let order = energies
        .iter()
        .enumerate()
        .map(|(i, &e)| EnergyKey(e, i))
        .collect();
    Ok(LiveSet {
        dim,
        coords,
        energies,
        order,
    })
}

/// Runs nested sampling for the likelihood `exp(-beta_eff * V)`.
///
/// Failures of the energy function do not panic or error out: the returned
/// trace carries [`Termination::Aborted`] and the data gathered so far.
pub fn ns_run<E: EnergyFunction + ?Sized>(energy: &E, beta_eff: f64, params: &NsParams) -> NsTrace {
    run_impl(energy, beta_eff, params, false)
}

/// [`ns_run`], but single-walker phases also go through the rayon pool.
/// The result is bit-identical to [`ns_run`]; this entry point exists so
/// that the equivalence can be checked.
pub fn ns_run_pooled<E: EnergyFunction + ?Sized>(energy: &E, beta_eff: f64, params: &NsParams) -> NsTrace {
    run_impl(energy, beta_eff, params, true)
}

fn run_impl<E: EnergyFunction + ?Sized>(
    energy: &E,
    beta_eff: f64,
    params: &NsParams,
    force_pool: bool,
) -> NsTrace {
    let dim = energy.dim();
    let mut trace = NsTrace::new(dim, params.live_points, beta_eff);
    let abort = |mut trace: NsTrace, reason: String| {
        trace.termination = Termination::Aborted { reason };
        trace
    };
    if let Err(e) = params.validate() {
        return abort(trace, e.to_string());
    }
    if !(beta_eff.is_finite() && beta_eff > 0.0) {
        return abort(trace, format!("beta_eff must be positive, got {beta_eff}"));
    }

    let k = params.live_points;
    let half = params.half_width();
    let mut rng = orchestrator_rng(params.seed);
    let mut live = match init_live_set(energy, params, &mut rng) {
        Ok(l) => l,
        Err(e) => return abort(trace, e.to_string()),
    };

    let ln_t = log_prior_step(k);
    let log_shell = -((k + 1) as f64).ln();
    let log_eps = params.stop_factor.ln();
    let n_walkers = params.walkers;
    let steps_each = (params.walk_steps / n_walkers).max(1);
    let mut step = params.start_step();
    let mut log_z = f64::NEG_INFINITY;
    let mut termination = Termination::MaxIterations;
    let mut tasks: Vec<WalkerTask> = Vec::with_capacity(n_walkers);

    for i in 1..=params.max_iterations {
        let worst = live.worst();
        let v_limit = live.energies()[worst];
        let log_x_prev = (i - 1) as f64 * ln_t;
        let log_x = i as f64 * ln_t;
        let log_l = -beta_eff * v_limit;
        log_z = log_add_exp(log_z, log_x_prev + log_shell + log_l);
        trace.thresholds.push(v_limit);
        trace.log_prior_masses.push(log_x);
        trace.log_evidence_history.push(log_z);
        trace.iterations = i;

        // clone a survivor into the removed slot, then pick the other walkers
        let survivor = {
            let r = rng.random_range(0..k - 1);
            if r >= worst {
                r + 1
            } else {
                r
            }
        };
        tasks.clear();
        tasks.push(WalkerTask {
            slot: worst,
            coords: live.point(survivor).to_vec(),
            energy: live.energies()[survivor],
            outcome: None,
        });
        if n_walkers > 1 {
            let others = rand::seq::index::sample(&mut rng, k - 1, n_walkers - 1);
            for o in others.iter() {
                let slot = if o >= worst { o + 1 } else { o };
                tasks.push(WalkerTask {
                    slot,
                    coords: live.point(slot).to_vec(),
                    energy: live.energies()[slot],
                    outcome: None,
                });
            }
        }

        let phase = if n_walkers == 1 && !force_pool {
            let task = &mut tasks[0];
            let mut wrng = walker_rng(params.seed, 0, i as u64);
            walk(
                energy,
                &mut task.coords,
                task.energy,
                v_limit,
                steps_each,
                step,
                half,
                &mut wrng,
            )
            .map(|out| {
                task.energy = out.energy;
                task.outcome = Some(out);
            })
        } else {
            parallel_walk_phase(
                energy,
                &mut tasks,
                v_limit,
                steps_each,
                step,
                half,
                params.seed,
                i as u64,
            )
        };
        if let Err(e) = phase {
            trace.log_evidence = log_z;
            trace.final_step_size = step;
            trace.final_live_energies = live.energies().to_vec();
            return abort(trace, e.to_string());
        }

        let (mut acc, mut prop) = (0usize, 0usize);
        for t in &tasks {
            live.set(t.slot, &t.coords, t.energy);
            let o = t.outcome.expect("walk ran");
            acc += o.accepted;
            prop += o.proposed;
        }
        let ratio = WalkOutcome {
            energy: 0.0,
            accepted: acc,
            proposed: prop,
        }
        .acceptance();
        trace.acceptance_history.push(ratio);
        step = adapt_step(ratio, step, params.box_length);

        if log_l + log_x < log_eps + log_z {
            termination = Termination::Converged;
            break;
        }
    }

    // remaining prior mass times the mean live-point likelihood
    let log_ls: Vec<f64> = live.energies().iter().map(|v| -beta_eff * v).collect();
    let log_x_final = trace.iterations as f64 * ln_t;
    trace.log_remainder = log_x_final + log_sum_exp(&log_ls) - (k as f64).ln();
    trace.log_evidence = log_add_exp(log_z, trace.log_remainder);
    trace.termination = termination;
    trace.final_step_size = step;
    trace.final_live_energies = live.energies().to_vec();
    trace
}
