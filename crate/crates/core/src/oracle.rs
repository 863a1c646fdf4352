//! Reference values that do not go through the sampler: Boltzmann sums over
//! known spectra, a radial sine-DVR eigensolver for diatomics, the exact
//! Gaussian integral of a harmonic ring polymer, and brute-force
//! quadrature for low-dimensional classical integrals.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::potentials::PotentialModel;
use crate::ringpolymer::RingPolymerSystem;
use crate::sampler::log_sum_exp;
use crate::units::beta_from_temperature;

/// A discrete spectrum with degeneracies. Levels are kept sorted and `e0` is
/// the lowest level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumOracle {
    levels: Vec<f64>,
    degeneracies: Vec<u64>,
    e0: f64,
}

impl SpectrumOracle {
    pub fn new(levels: Vec<f64>, degeneracies: Vec<u64>) -> Result<Self> {
        Error::check_dim(levels.len(), degeneracies.len())?;
        if levels.is_empty() {
            return Err(Error::invalid("spectrum has no levels"));
        }
        if degeneracies.contains(&0) {
            return Err(Error::invalid("degeneracies must be at least 1"));
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("levels must be finite"));
        }
        let mut pairs: Vec<(f64, u64)> = levels.into_iter().zip(degeneracies).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (levels, degeneracies): (Vec<f64>, Vec<u64>) = pairs.into_iter().unzip();
        let e0 = levels[0];
        Ok(Self {
            levels,
            degeneracies,
            e0,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn degeneracies(&self) -> &[u64] {
        &self.degeneracies
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    /// `ln sum_n g_n exp(-beta (E_n - E_0))`
    pub fn log_boltzmann_sum_beta(&self, beta: f64) -> f64 {
        let terms: Vec<f64> = self
            .levels
            .iter()
            .zip(&self.degeneracies)
            .map(|(e, g)| (*g as f64).ln() - beta * (e - self.e0))
            .collect();
        log_sum_exp(&terms)
    }

    /// Zero-shifted partition function at temperature `t` (K).
    pub fn boltzmann_sum(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid(format!("temperature must be positive, got {t}")));
        }
        Ok(self.log_boltzmann_sum_beta(beta_from_temperature(t)).exp())
    }
}

/// Product spectrum of independent harmonic modes, each with quantum
/// numbers `0..=n_max`. Levels are not merged.
pub fn harmonic_levels(omegas: &[f64], n_max: usize) -> Result<SpectrumOracle> {
    if omegas.is_empty() || omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("harmonic frequencies must be positive"));
    }
    let mut levels = vec![0.5 * omegas.iter().sum::<f64>()];
    for w in omegas {
        levels = levels
            .iter()
            .flat_map(|base| (0..=n_max).map(move |n| base + n as f64 * w))
            .collect();
    }
    let g = vec![1; levels.len()];
    SpectrumOracle::new(levels, g)
}

/// Harmonic frequency `a sqrt(2D/mu)` and anharmonicity `a^2/(2 mu)` of a
/// Morse oscillator.
pub fn morse_constants(d: f64, a: f64, mu: f64) -> (f64, f64) {
    (a * (2.0 * d / mu).sqrt(), a * a / (2.0 * mu))
}

/// Rotationless (J = 0) Morse spectrum `w(n+1/2) - wx(n+1/2)^2`, measured
/// from the well bottom, for all bound `n < sqrt(2 D mu)/a - 1/2`.
pub fn morse_levels(d: f64, a: f64, r_e: f64, mu: f64) -> Result<SpectrumOracle> {
    if !(d > 0.0 && a > 0.0 && r_e > 0.0 && mu > 0.0) {
        return Err(Error::invalid("Morse parameters must be positive"));
    }
    let (w, wx) = morse_constants(d, a, mu);
    let n_bound = (2.0 * d * mu).sqrt() / a - 0.5;
    if n_bound <= 0.0 {
        return Err(Error::invalid("Morse well supports no bound level"));
    }
    let levels: Vec<f64> = (0..)
        .map(|n| n as f64)
        .take_while(|n| *n < n_bound)
        .map(|n| w * (n + 0.5) - wx * (n + 0.5) * (n + 0.5))
        .collect();
    let g = vec![1; levels.len()];
    SpectrumOracle::new(levels, g)
}

/// Uniform radial grid `r_min < r_i < r_max` with `n_pts` interior points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvrGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_pts: usize,
}

/// Bound levels of each rotational channel `J = 0..` from the sine DVR.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDvr {
    pub levels_by_j: Vec<Vec<f64>>,
    /// Largest shift of a retained level when the grid was refined.
    pub max_refinement_shift: f64,
}

impl RadialDvr {
    /// Flattens into a spectrum with degeneracy `2J + 1`.
    pub fn spectrum(&self) -> Result<SpectrumOracle> {
        let mut levels = Vec::new();
        let mut g = Vec::new();
        for (j, lv) in self.levels_by_j.iter().enumerate() {
            levels.extend_from_slice(lv);
            g.extend(std::iter::repeat_n(2 * j as u64 + 1, lv.len()));
        }
        SpectrumOracle::new(levels, g)
    }
}

/// Maximum level shift tolerated when the DVR grid is refined.
pub const DVR_REFINEMENT_TOL: f64 = 1e-8;

/// Colbert-Miller kinetic matrix for a particle of mass `mu` on `(a, b)`
/// with `n` interior points.
fn sine_dvr_kinetic(a: f64, b: f64, n: usize, mu: f64) -> DMatrix<f64> {
    let big_n = (n + 1) as f64;
    let pref = PI * PI / (4.0 * mu * (b - a) * (b - a));
    let s2 = |x: f64| {
        let s = x.sin();
        1.0 / (s * s)
    };
    DMatrix::from_fn(n, n, |r, c| {
        let (i, k) = ((r + 1) as f64, (c + 1) as f64);
        if r == c {
            pref * ((2.0 * big_n * big_n + 1.0) / 3.0 - s2(PI * i / big_n))
        } else {
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            pref * sign * (s2(PI * (i - k) / (2.0 * big_n)) - s2(PI * (i + k) / (2.0 * big_n)))
        }
    })
}

fn channel_levels<F: Fn(f64) -> f64>(pes: &F, mu: f64, j: usize, grid: &DvrGrid) -> Vec<f64> {
    let n = grid.n_pts;
    let dr = (grid.r_max - grid.r_min) / (n + 1) as f64;
    let mut h = sine_dvr_kinetic(grid.r_min, grid.r_max, n, mu);
    let jj = (j * (j + 1)) as f64;
    for i in 0..n {
        let r = grid.r_min + (i + 1) as f64 * dr;
        h[(i, i)] += pes(r) + jj / (2.0 * mu * r * r);
    }
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Solves the radial problem for `J = 0..=j_max` and keeps the levels below
/// `asymptote`; stops early at the first channel without bound levels. Each
/// channel is re-solved on a grid with twice the resolution and the run
/// fails if a retained level moves by more than [`DVR_REFINEMENT_TOL`].
pub fn radial_dvr_channels<F>(
    pes_1d: F,
    mu: f64,
    j_max: usize,
    grid: DvrGrid,
    asymptote: f64,
) -> Result<RadialDvr>
where
    F: Fn(f64) -> f64 + Sync,
{
    if grid.n_pts < 64 {
        return Err(Error::invalid(format!("DVR needs at least 64 points, got {}", grid.n_pts)));
    }
    if !(grid.r_min >= 0.0 && grid.r_max > grid.r_min) {
        return Err(Error::invalid("DVR grid must satisfy 0 <= r_min < r_max"));
    }
    if !(mu > 0.0) {
        return Err(Error::invalid("mass must be positive"));
    }
    let fine = DvrGrid {
        n_pts: 2 * grid.n_pts + 1,
        ..grid
    };
    let mut levels_by_j = Vec::new();
    let mut max_shift: f64 = 0.0;
    for j in 0..=j_max {
        let coarse: Vec<f64> = channel_levels(&pes_1d, mu, j, &grid)
            .into_iter()
            .take_while(|e| *e < asymptote)
            .collect();
        if coarse.is_empty() {
            break;
        }
        let refined = channel_levels(&pes_1d, mu, j, &fine);
        for (a, b) in coarse.iter().zip(&refined) {
            max_shift = max_shift.max((a - b).abs());
        }
        if max_shift > DVR_REFINEMENT_TOL {
            return Err(Error::Numerical(format!(
                "DVR grid too coarse: J={j} level moved by {max_shift:.3e} hartree on refinement"
            )));
        }
        levels_by_j.push(coarse);
    }
    if levels_by_j.is_empty() {
        return Err(Error::invalid("no bound levels below the asymptote"));
    }
    Ok(RadialDvr {
        levels_by_j,
        max_refinement_shift: max_shift,
    })
}

/// Rovibrational spectrum of a diatomic with degeneracy `2J + 1`.
pub fn radial_dvr_levels<F>(
    pes_1d: F,
    mu: f64,
    j_max: usize,
    grid: DvrGrid,
    asymptote: f64,
) -> Result<SpectrumOracle>
where
    F: Fn(f64) -> f64 + Sync,
{
    radial_dvr_channels(pes_1d, mu, j_max, grid, asymptote)?.spectrum()
}

/// Hessian of the extended potential of a harmonic ring polymer.
pub fn ring_polymer_hessian(sys: &RingPolymerSystem) -> Result<DMatrix<f64>> {
    let force_constants = match sys.potential() {
        PotentialModel::HarmonicIso { force_constants } => force_constants,
        _ => return Err(Error::invalid("exact ring-polymer integral needs a harmonic PES")),
    };
    let nd = sys.n_dof();
    let m = sys.beads();
    let dim = nd * m;
    let w2 = sys.omega_m() * sys.omega_m();
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..nd {
        let kspring = sys.masses_per_dof()[i] * w2;
        for j in 0..m {
            let a = j * nd + i;
            h[(a, a)] += force_constants[i];
            if m > 1 {
                // each neighbour pair (j, j-1) contributes k (x_j - x_{j-1})^2 / 2
                let b = ((j + m - 1) % m) * nd + i;
                h[(a, a)] += kspring;
                h[(b, b)] += kspring;
                h[(a, b)] -= kspring;
                h[(b, a)] -= kspring;
            }
        }
    }
    Ok(h)
}

/// Exact `ln Q_M` of a harmonic ring polymer with the box taken to
/// infinity: prefactor times `prod_k (2 pi / (beta_M lambda_k))^(1/2)`.
pub fn log_gaussian_rp_q(sys: &RingPolymerSystem) -> Result<f64> {
    let h = ring_polymer_hessian(sys)?;
    let eig = h.symmetric_eigenvalues();
    let beta_m = sys.beta_m();
    let mut log_q = sys.log_prefactor();
    for &lambda in eig.iter() {
        if !(lambda > 0.0) {
            return Err(Error::Numerical(format!(
                "non-positive ring-polymer eigenvalue {lambda}"
            )));
        }
        log_q += 0.5 * (2.0 * PI / (beta_m * lambda)).ln();
    }
    Ok(log_q)
}

pub fn gaussian_rp_q(sys: &RingPolymerSystem) -> Result<f64> {
    Ok(log_gaussian_rp_q(sys)?.exp())
}

/// Exact quantum partition function of one harmonic mode, unshifted.
pub fn quantum_harmonic_q(beta: f64, omega: f64) -> f64 {
    1.0 / (2.0 * (0.5 * beta * omega).sinh())
}

/// Trapezoidal rule on `[-L/2, L/2]^dims`, doubling the grid from
/// `initial_intervals` per axis until the relative change drops below
/// `rel_tol`.
pub fn quadrature_config_integral<F>(
    energy: F,
    beta: f64,
    dims: usize,
    box_length: f64,
    initial_intervals: usize,
    rel_tol: f64,
    max_refinements: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(1..=3).contains(&dims) {
        return Err(Error::invalid(format!("quadrature supports 1 to 3 dims, got {dims}")));
    }
    if initial_intervals < 2 || !(box_length > 0.0) {
        return Err(Error::invalid("quadrature needs >= 2 intervals and a positive box"));
    }
    let mut n = initial_intervals;
    let mut prev = trapezoid(&energy, beta, dims, box_length, n);
    for _ in 0..max_refinements {
        n *= 2;
        let cur = trapezoid(&energy, beta, dims, box_length, n);
        if (cur - prev).abs() <= rel_tol * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numerical(format!(
        "quadrature did not converge to {rel_tol:e} after {max_refinements} refinements"
    )))
}

fn trapezoid<F: Fn(&[f64]) -> f64>(energy: &F, beta: f64, dims: usize, l: f64, n: usize) -> f64 {
    let h = l / n as f64;
    let node = |i: usize| -0.5 * l + i as f64 * h;
    let weight = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
    let mut x = vec![0.0; dims];
    let mut total = 0.0;
    let count = (n + 1).pow(dims as u32);
    for flat in 0..count {
        let mut rem = flat;
        let mut w = 1.0;
        for xk in x.iter_mut() {
            let i = rem % (n + 1);
            rem /= n + 1;
            *xk = node(i);
            w *= weight(i);
        }
        total += w * (-beta * energy(&x)).exp();
    }
    total * h.powi(dims as i32)
}
