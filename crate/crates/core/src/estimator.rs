//! Partition functions assembled from nested-sampling evidence.
//!
//! For a ring polymer with `dim = fn * M` coordinates sampled in a box of
//! edge `L`,
//!
//! ```text
//! ln Q = ln(prefactor) + dim ln L + ln Z + beta e0
//! ```
//!
//! where `Z` is the evidence under the normalized uniform prior and `e0`
//! moves the energy zero to the lowest vibrational level. Every piece stays
//! in log space until the final exponentiation.

use rayon::prelude::*;

use crate::coords::JacobiFrame;
use crate::error::{Error, Result};
use crate::potentials::PotentialModel;
use crate::ringpolymer::RingPolymerSystem;
use crate::sampler::{derive_seed, ns_run, NsParams, NsTrace, Termination};
use crate::units::beta_from_temperature;

/// Outcome of a single nested-sampling run turned into a partition function.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub temperature: f64,
    pub beta: f64,
    pub beads: usize,
    pub e0: f64,
    pub seed: u64,
    pub log_prefactor: f64,
    pub log_volume: f64,
    pub log_evidence: f64,
    pub log_q: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_seconds: f64,
    pub trace: NsTrace,
}

impl RunResult {
    pub fn q(&self) -> f64 {
        self.log_q.exp()
    }
}

/// `ln Q` from its log-space parts.
pub fn assemble_log_q(log_prefactor: f64, log_volume: f64, log_evidence: f64, beta: f64, e0: f64) -> f64 {
    log_prefactor + log_volume + log_evidence + beta * e0
}

/// Runs nested sampling on an already built ring-polymer system.
pub fn partition_from_system(sys: &RingPolymerSystem, e0: f64, ns: &NsParams) -> Result<RunResult> {
    if !e0.is_finite() {
        return Err(Error::invalid("e0 must be finite"));
    }
    let start = std::time::Instant::now();
    let trace = ns_run(sys, sys.beta_m(), ns);
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Termination::Aborted { reason } = &trace.termination {
        return Err(Error::RunAborted {
            reason: reason.clone(),
            trace: Box::new(trace),
        });
    }
    let log_prefactor = sys.log_prefactor();
    let log_volume = sys.dim() as f64 * ns.box_length.ln();
    let log_q = assemble_log_q(log_prefactor, log_volume, trace.log_evidence, sys.beta(), e0);
    Ok(RunResult {
        temperature: crate::units::temperature_from_beta(sys.beta()),
        beta: sys.beta(),
        beads: sys.beads(),
        e0,
        seed: ns.seed,
        log_prefactor,
        log_volume,
        log_evidence: trace.log_evidence,
        log_q,
        iterations: trace.iterations,
        termination: trace.termination.clone(),
        wall_seconds,
        trace,
    })
}

/// Builds the ring polymer for a molecule described by its Jacobi frame.
pub fn ring_polymer_for(
    frame: &JacobiFrame,
    pot: &PotentialModel,
    temperature: f64,
    beads: usize,
) -> Result<RingPolymerSystem> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    Error::check_dim(frame.n_dof(), pot.dim())?;
    RingPolymerSystem::new(pot.clone(), frame.masses_per_dof(), beads, beta_from_temperature(temperature))
}

/// Single-run path-integral estimate of the zero-shifted rovibrational
/// partition function with `beads` beads at `temperature` (K).
pub fn quantum_partition(
    frame: &JacobiFrame,
    pot: &PotentialModel,
    temperature: f64,
    beads: usize,
    e0: f64,
    ns: &NsParams,
) -> Result<RunResult> {
    let sys = ring_polymer_for(frame, pot, temperature, beads)?;
    partition_from_system(&sys, e0, ns)
}

/// The single-bead (classical) partition function.
pub fn classical_partition(
    frame: &JacobiFrame,
    pot: &PotentialModel,
    temperature: f64,
    e0: f64,
    ns: &NsParams,
) -> Result<RunResult> {
    quantum_partition(frame, pot, temperature, 1, e0, ns)
}

/// Thermal de Broglie wavelength `h (beta / (2 pi M))^(1/2)` with h = 2 pi.
pub fn thermal_wavelength(total_mass: f64, temperature: f64) -> f64 {
    let beta = beta_from_temperature(temperature);
    2.0 * std::f64::consts::PI * (beta / (2.0 * std::f64::consts::PI * total_mass)).sqrt()
}

/// Center-of-mass translational partition function `V / Lambda^3`.
pub fn translational_partition(total_mass: f64, temperature: f64, volume: f64) -> Result<f64> {
    if !(total_mass > 0.0 && temperature > 0.0 && volume > 0.0) {
        return Err(Error::invalid("mass, temperature and volume must be positive"));
    }
    Ok(volume / thermal_wavelength(total_mass, temperature).powi(3))
}

/// Arithmetic mean and standard error (sample standard deviation over
/// `sqrt(n)`).
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least two runs, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Multiplies by the spin-statistical weight.
pub fn apply_ssw(q: f64, n_ssw: u32) -> Result<f64> {
    if n_ssw == 0 {
        return Err(Error::invalid("n_ssw must be at least 1"));
    }
    Ok(q * n_ssw as f64)
}

/// Parameters echoed into every estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsEcho {
    pub live_points: usize,
    pub walk_steps: usize,
    pub box_length: f64,
    pub seeds: Vec<u64>,
}

/// Ensemble estimate over independent runs. All `q_*` values include the
/// spin-statistical weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEstimate {
    pub temperature: f64,
    pub beta: f64,
    pub beads: usize,
    pub q_value: f64,
    pub log_q: f64,
    pub n_runs: usize,
    pub q_mean: f64,
    /// NaN for a single run.
    pub q_sigma_of_mean: f64,
    pub log_evidence_mean: f64,
    pub iterations_mean: f64,
    pub wall_seconds: f64,
    pub run_values: Vec<f64>,
    pub params_echo: ParamsEcho,
    pub n_ssw: u32,
}

impl PartitionEstimate {
    pub fn from_runs(runs: &[RunResult], ns: &NsParams, n_ssw: u32) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::invalid("no runs to aggregate"))?;
        let values = runs
            .iter()
            .map(|r| apply_ssw(r.q(), n_ssw))
            .collect::<Result<Vec<f64>>>()?;
        let (q_mean, sigma) = match aggregate_runs(&values) {
            Ok(v) => v,
            Err(_) => (values[0], f64::NAN),
        };
        let n = runs.len() as f64;
        Ok(Self {
            temperature: first.temperature,
            beta: first.beta,
            beads: first.beads,
            q_value: q_mean,
            log_q: q_mean.ln(),
            n_runs: runs.len(),
            q_mean,
            q_sigma_of_mean: sigma,
            log_evidence_mean: runs.iter().map(|r| r.log_evidence).sum::<f64>() / n,
            iterations_mean: runs.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            wall_seconds: runs.iter().map(|r| r.wall_seconds).sum(),
            run_values: values,
            params_echo: ParamsEcho {
                live_points: ns.live_points,
                walk_steps: ns.walk_steps,
                box_length: ns.box_length,
                seeds: runs.iter().map(|r| r.seed).collect(),
            },
            n_ssw,
        })
    }
}

/// Seed of run `run_index` at temperature index `t_index`.
pub fn run_seed(seed: u64, t_index: usize, run_index: usize) -> u64 {
    derive_seed(&[seed, t_index as u64, run_index as u64])
}

/// Runs `n_runs` independent estimates (in parallel on the current rayon
/// pool) and aggregates them. Traces are emptied unless `keep_traces`.
pub fn run_ensemble(
    sys: &RingPolymerSystem,
    e0: f64,
    ns: &NsParams,
    n_runs: usize,
    t_index: usize,
    n_ssw: u32,
    keep_traces: bool,
) -> Result<(PartitionEstimate, Vec<RunResult>)> {
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be at least 1"));
    }
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let params = NsParams {
                seed: run_seed(ns.seed, t_index, r),
                ..ns.clone()
            };
            let mut res = partition_from_system(sys, e0, &params)?;
            if !keep_traces {
                res.trace = strip(res.trace);
            }
            Ok(res)
        })
        .collect::<Result<Vec<RunResult>>>()?;
    let est = PartitionEstimate::from_runs(&runs, ns, n_ssw)?;
    Ok((est, runs))
}

fn strip(mut t: NsTrace) -> NsTrace {
    t.thresholds = Vec::new();
    t.log_prior_masses = Vec::new();
    t.log_evidence_history = Vec::new();
    t.acceptance_history = Vec::new();
    t.final_live_energies = Vec::new();
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{temperature_from_beta, AMU_TO_ME, KB_HARTREE_PER_K};

    #[test]
    fn aggregate_small_cases() {
        assert_eq!(aggregate_runs(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        assert_eq!(aggregate_runs(&[1.0, 3.0]).unwrap(), (2.0, 1.0));
        assert!(aggregate_runs(&[1.0]).is_err());
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn aggregate_normal_draws() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let dist = Normal::new(10.0, 2.0).unwrap();
        let mut hits = 0;
        for s in 0..200 {
            let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(s);
            let v: Vec<f64> = (0..20).map(|_| dist.sample(&mut rng)).collect();
            let (m, sig) = aggregate_runs(&v).unwrap();
            // standard error of 20 draws with sd 2
            assert!(sig > 0.1 && sig < 1.0, "{sig}");
            if (m - 10.0).abs() < 2.0 * 2.0 / 20f64.sqrt() {
                hits += 1;
            }
        }
        // ~95% coverage for a 2-sigma interval
        assert!((175..=200).contains(&hits), "{hits}");
    }

    #[test]
    fn ssw_multiplier() {
        assert_eq!(apply_ssw(142.4, 1).unwrap(), 142.4);
        assert_eq!(apply_ssw(3.0, 2).unwrap(), 6.0);
        assert_eq!(apply_ssw(3.0, 6).unwrap(), 18.0);
        assert!(apply_ssw(3.0, 0).is_err());
    }

    #[test]
    fn translational_scaling() {
        let m = 1000.0;
        let l1 = thermal_wavelength(m, 400.0);
        let l2 = thermal_wavelength(m, 100.0);
        assert!((l2 / l1 - 2.0).abs() < 1e-14);
        let q1 = translational_partition(m, 300.0, 1.0).unwrap();
        let q5 = translational_partition(m, 300.0, 5.0).unwrap();
        assert!((q5 / q1 - 5.0).abs() < 1e-14);
    }

    #[test]
    fn translational_water_by_hand() {
        let m_u = 2.0 * 1.0072765 + 15.990526;
        let m = m_u * AMU_TO_ME;
        let beta = 1.0 / (KB_HARTREE_PER_K * 1000.0);
        let two_pi = 2.0 * std::f64::consts::PI;
        // (M / (2 pi beta))^(3/2) because Lambda = 2 pi sqrt(beta / (2 pi M))
        let expected = (m / (two_pi * beta)).powf(1.5);
        let q = translational_partition(m, 1000.0, 1.0).unwrap();
        assert!((q - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn log_assembly_association() {
        let parts = [-123.456, 98.7654, -3.21, 0.5];
        let beta = 315.77;
        let e0 = 0.0123;
        let a = assemble_log_q(parts[0], parts[1], parts[2], beta, e0);
        let b = parts[0] + (parts[1] + (parts[2] + beta * e0));
        let c = (beta * e0 + parts[2]) + parts[1] + parts[0];
        assert!((a - b).abs() <= 1e-12 * a.abs());
        assert!((a - c).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn zero_shift_is_exact() {
        let frame = JacobiFrame::new(&[2.0, 2.0]).unwrap();
        let pot = PotentialModel::harmonic_from_frequency(3, 1.0, 0.01).unwrap();
        let ns = NsParams { live_points: 40, walk_steps: 20, box_length: 200.0, seed: 3, ..NsParams::default() };
        let t = temperature_from_beta(100.0);
        let a = quantum_partition(&frame, &pot, t, 1, 0.0, &ns).unwrap();
        let delta = 0.004;
        let b = quantum_partition(&frame, &pot, t, 1, delta, &ns).unwrap();
        let ratio = b.q() / a.q();
        assert!((ratio / (a.beta * delta).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_reduction() {
        // beta = 1, mu = 2 pi so that the single-bead prefactor is one
        let two_pi = 2.0 * std::f64::consts::PI;
        let pot = PotentialModel::gaussian_test(3).unwrap();
        let sys = RingPolymerSystem::new(pot, vec![two_pi; 3], 1, 1.0).unwrap();
        assert!(sys.log_prefactor().abs() < 1e-14);
        let ns = NsParams { live_points: 400, walk_steps: 60, box_length: 10.0, seed: 1, ..NsParams::default() };
        let (est, _) = run_ensemble(&sys, 0.0, &ns, 8, 0, 1, false).unwrap();
        let exact = two_pi.powf(1.5);
        assert!((est.q_mean - exact).abs() < 4.0 * est.q_sigma_of_mean.max(0.01 * exact));
    }

    #[test]
    fn single_run_has_nan_sigma() {
        let frame = JacobiFrame::new(&[2.0, 2.0]).unwrap();
        let pot = PotentialModel::harmonic_from_frequency(3, 1.0, 0.01).unwrap();
        let ns = NsParams { live_points: 30, walk_steps: 10, box_length: 200.0, seed: 3, ..NsParams::default() };
        let sys = ring_polymer_for(&frame, &pot, temperature_from_beta(100.0), 1).unwrap();
        let (est, runs) = run_ensemble(&sys, 0.0, &ns, 1, 0, 2, false).unwrap();
        assert!(est.q_sigma_of_mean.is_nan());
        assert_eq!(est.q_mean, 2.0 * runs[0].q());
        assert!(runs[0].trace.thresholds.is_empty());
    }

    #[test]
    fn bad_inputs() {
        let frame = JacobiFrame::new(&[2.0, 2.0]).unwrap();
        let pot = PotentialModel::harmonic_from_frequency(3, 1.0, 0.01).unwrap();
        let ns = NsParams::default();
        assert!(quantum_partition(&frame, &pot, -5.0, 1, 0.0, &ns).is_err());
        assert!(quantum_partition(&frame, &pot, 100.0, 0, 0.0, &ns).is_err());
        assert!(quantum_partition(&frame, &pot, 100.0, 1, f64::NAN, &ns).is_err());
        let wrong = PotentialModel::gaussian_test(6).unwrap();
        assert!(quantum_partition(&frame, &wrong, 100.0, 1, 0.0, &ns).is_err());
        let bad_ns = NsParams { live_points: 1, ..NsParams::default() };
        assert!(matches!(
            quantum_partition(&frame, &pot, 100.0, 1, 0.0, &bad_ns),
            Err(Error::RunAborted { .. })
        ));
    }
}
