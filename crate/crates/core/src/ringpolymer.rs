//! The ring-polymer (Trotter-discretized) extended classical system.
//!
//! M copies of the `fn` physical coordinates are joined into a closed chain
//! by harmonic springs of angular frequency `omega_M = M / beta`. The
//! configurational integral of `exp(-beta_M V_rp)` over all `fn * M`
//! coordinates, multiplied by [`RingPolymerSystem::log_prefactor`], is the
//! M-bead approximation of the quantum partition function.

use crate::error::{Error, Result};
use crate::potentials::PotentialModel;
use crate::sampler::EnergyFunction;

/// Bead coordinates in bead-major order: bead `j` occupies
/// `[j * fn, (j + 1) * fn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeadConfiguration {
    coords: Vec<f64>,
    n_dof: usize,
}

impl BeadConfiguration {
    pub fn new(coords: Vec<f64>, n_dof: usize, beads: usize) -> Result<Self> {
        Error::check_dim(n_dof * beads, coords.len())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("bead coordinates must be finite"));
        }
        Ok(Self { coords, n_dof })
    }

    /// All beads placed at the same physical configuration.
    pub fn collapsed(x: &[f64], beads: usize) -> Result<Self> {
        Self::new(x.repeat(beads), x.len(), beads)
    }

    pub fn beads(&self) -> usize {
        self.coords.len() / self.n_dof
    }

    pub fn bead(&self, j: usize) -> &[f64] {
        &self.coords[j * self.n_dof..(j + 1) * self.n_dof]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.coords
    }
}

impl AsRef<[f64]> for BeadConfiguration {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Debug, Clone)]
pub struct RingPolymerSystem {
    potential: PotentialModel,
    masses_per_dof: Vec<f64>,
    beads: usize,
    beta: f64,
    beta_m: f64,
    omega_m: f64,
    // mu_i * omega_M^2 / 2
    half_spring: Vec<f64>,
}

impl RingPolymerSystem {
    /// `masses_per_dof` holds one mass per physical coordinate (for Jacobi
    /// coordinates, each reduced mass three times).
    pub fn new(
        potential: PotentialModel,
        masses_per_dof: Vec<f64>,
        beads: usize,
        beta: f64,
    ) -> Result<Self> {
        Error::check_dim(potential.dim(), masses_per_dof.len())?;
        if beads == 0 {
            return Err(Error::invalid("bead count must be at least 1"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if masses_per_dof.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::invalid("masses must be positive"));
        }
        let beta_m = beta / beads as f64;
        let omega_m = 1.0 / beta_m;
        let half_spring = masses_per_dof
            .iter()
            .map(|m| 0.5 * m * omega_m * omega_m)
            .collect();
        Ok(Self {
            potential,
            masses_per_dof,
            beads,
            beta,
            beta_m,
            omega_m,
            half_spring,
        })
    }

    pub fn potential(&self) -> &PotentialModel {
        &self.potential
    }

    pub fn masses_per_dof(&self) -> &[f64] {
        &self.masses_per_dof
    }

    pub fn beads(&self) -> usize {
        self.beads
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_m(&self) -> f64 {
        self.beta_m
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    /// Physical degrees of freedom per bead.
    pub fn n_dof(&self) -> usize {
        self.masses_per_dof.len()
    }

    /// Total number of sampled coordinates, `fn * M`.
    pub fn dim(&self) -> usize {
        self.n_dof() * self.beads
    }

    /// Spring part of the extended potential. Zero for a single bead.
    pub fn spring_energy(&self, c: &[f64]) -> f64 {
        let nd = self.n_dof();
        if self.beads == 1 {
            return 0.0;
        }
        let mut e = 0.0;
        for j in 0..self.beads {
            let prev = if j == 0 { self.beads - 1 } else { j - 1 };
            let cur = &c[j * nd..(j + 1) * nd];
            let before = &c[prev * nd..(prev + 1) * nd];
            for ((k, a), b) in self.half_spring.iter().zip(cur).zip(before) {
                let d = a - b;
                e += k * d * d;
            }
        }
        e
    }

    /// Sum of the physical potential over all beads.
    pub fn physical_energy(&self, c: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), c.len())?;
        let nd = self.n_dof();
        if self.potential.is_analytic() {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite bead coordinate"));
            }
            Ok(c.chunks_exact(nd).map(|b| self.potential.analytic_value(b)).sum())
        } else {
            let beads: Vec<&[f64]> = c.chunks_exact(nd).collect();
            Ok(self.potential.evaluate_batch(&beads)?.iter().sum())
        }
    }

    /// `(spring, physical)` parts of the extended potential.
    pub fn rp_parts(&self, c: &[f64]) -> Result<(f64, f64)> {
        let physical = self.physical_energy(c)?;
        Ok((self.spring_energy(c), physical))
    }

    /// The extended potential `V_rp,tot`, summed as spring part first and
    /// then bead by bead.
    pub fn rp_potential(&self, c: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), c.len())?;
        let nd = self.n_dof();
        let mut total = self.spring_energy(c);
        if self.potential.is_analytic() {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite bead coordinate"));
            }
            for bead in c.chunks_exact(nd) {
                total += self.potential.analytic_value(bead);
            }
        } else {
            let beads: Vec<&[f64]> = c.chunks_exact(nd).collect();
            for v in self.potential.evaluate_batch(&beads)? {
                total += v;
            }
        }
        Ok(total)
    }

    /// `ln[(2 pi beta_M)^(-fn M / 2) (prod_i mu_i)^(M / 2)]`.
    pub fn log_prefactor(&self) -> f64 {
        let m = self.beads as f64;
        let sum_ln_mass: f64 = self.masses_per_dof.iter().map(|mu| mu.ln()).sum();
        -0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI * self.beta_m).ln()
            + 0.5 * m * sum_ln_mass
    }

    pub fn rp_prefactor(&self) -> f64 {
        self.log_prefactor().exp()
    }
}

impl EnergyFunction for RingPolymerSystem {
    fn dim(&self) -> usize {
        RingPolymerSystem::dim(self)
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        self.rp_potential(x)
    }

    fn energy_below(&self, x: &[f64], limit: f64) -> Result<Option<f64>> {
        let floor = match self.potential.lower_bound() {
            Some(f) if self.potential.is_analytic() && x.len() == self.dim() => f,
            _ => {
                let e = self.rp_potential(x)?;
                return Ok((e < limit).then_some(e));
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite bead coordinate"));
        }
        // Bead energies are >= floor, so the running sum plus the floor for
        // the remaining beads bounds the total from below.
        let nd = self.n_dof();
        let mut total = self.spring_energy(x);
        let mut remaining = self.beads as f64 * floor;
        if total + remaining >= limit {
            return Ok(None);
        }
        for bead in x.chunks_exact(nd) {
            total += self.potential.analytic_value(bead);
            remaining -= floor;
            if total + remaining >= limit {
                return Ok(None);
            }
        }
        Ok(Some(total))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn harmonic_system(nd: usize, beads: usize, beta: f64) -> RingPolymerSystem {
        let pot = PotentialModel::harmonic((0..nd).map(|i| 1.0 + 0.5 * i as f64).collect()).unwrap();
        let masses = (0..nd).map(|i| 2.0 + i as f64).collect();
        RingPolymerSystem::new(pot, masses, beads, beta).unwrap()
    }

    #[test]
    fn frequency_times_beta_m_is_one() {
        for (m, beta) in [(1, 0.3), (7, 315.7), (16, 2.0), (64, 1e4)] {
            let s = harmonic_system(3, m, beta);
            assert!((s.omega_m() * s.beta_m() - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn collapsed_polymer() {
        let s = harmonic_system(3, 5, 1.3);
        let x = [0.4, -1.1, 0.7];
        let c = BeadConfiguration::collapsed(&x, 5).unwrap();
        let (spring, phys) = s.rp_parts(c.as_slice()).unwrap();
        assert_eq!(spring, 0.0);
        let v = s.potential().evaluate(&x).unwrap();
        assert!((phys - 5.0 * v).abs() < 1e-14);
        assert!((s.rp_potential(c.as_slice()).unwrap() - 5.0 * v).abs() < 1e-14);
    }

    #[test]
    fn single_bead_is_the_physical_potential() {
        let s = harmonic_system(3, 1, 2.0);
        let x = [0.3, 0.2, -0.9];
        assert_eq!(
            s.rp_potential(&x).unwrap().to_bits(),
            s.potential().evaluate(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn two_beads_by_hand() {
        // one coordinate, mass mu, force constant k, beads at +d and -d
        let (mu, k, beta, d) = (3.0, 2.0, 0.8, 0.37);
        let s = RingPolymerSystem::new(PotentialModel::harmonic(vec![k]).unwrap(), vec![mu], 2, beta)
            .unwrap();
        let omega_m = 2.0 / beta;
        let spring = 2.0 * 0.5 * mu * omega_m * omega_m * (2.0 * d) * (2.0 * d);
        let phys = 2.0 * 0.5 * k * d * d;
        let (sp, ph) = s.rp_parts(&[d, -d]).unwrap();
        assert!((sp - spring).abs() < 1e-13 * spring);
        assert!((ph - phys).abs() < 1e-15);
        assert!((s.rp_potential(&[d, -d]).unwrap() - (spring + phys)).abs() < 1e-13 * spring);
    }

    #[test]
    fn prefactor_special_cases() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let s = RingPolymerSystem::new(PotentialModel::gaussian_test(3).unwrap(), vec![two_pi; 3], 1, 1.0)
            .unwrap();
        assert!((s.rp_prefactor() - 1.0).abs() < 1e-14);
        for (m, beta) in [(1837.0, 0.5), (3.0, 1000.0)] {
            let s = RingPolymerSystem::new(PotentialModel::gaussian_test(1).unwrap(), vec![m], 1, beta).unwrap();
            let expected = (m / (two_pi * beta)).sqrt();
            assert!((s.rp_prefactor() - expected).abs() < 1e-14 * expected);
        }
    }

    #[test]
    fn dimension_checks() {
        let s = harmonic_system(3, 4, 1.0);
        assert!(matches!(s.rp_potential(&[0.0; 11]), Err(Error::DimensionMismatch { .. })));
        assert!(BeadConfiguration::new(vec![0.0; 5], 3, 2).is_err());
        assert!(RingPolymerSystem::new(PotentialModel::gaussian_test(3).unwrap(), vec![1.0; 2], 1, 1.0).is_err());
        assert!(RingPolymerSystem::new(PotentialModel::gaussian_test(1).unwrap(), vec![1.0], 0, 1.0).is_err());
        assert!(RingPolymerSystem::new(PotentialModel::gaussian_test(1).unwrap(), vec![1.0], 1, -1.0).is_err());
    }

    #[test]
    fn early_exit_agrees_with_full_evaluation() {
        let s = RingPolymerSystem::new(PotentialModel::morse(0.1, 0.64, 3.27).unwrap(), vec![1763.0; 3], 4, 300.0)
            .unwrap();
        let c: Vec<f64> = (0..12).map(|i| 3.0 * ((i as f64) * 0.7).sin()).collect();
        let full = s.rp_potential(&c).unwrap();
        assert_eq!(s.energy_below(&c, full * 1.0000001).unwrap().map(f64::to_bits), Some(full.to_bits()));
        assert_eq!(s.energy_below(&c, full).unwrap(), None);
        assert_eq!(s.energy_below(&c, 0.5 * full).unwrap(), None);
    }

    fn beads_strategy() -> impl Strategy<Value = (usize, Vec<f64>, usize)> {
        (1usize..9).prop_flat_map(|m| (Just(m), prop::collection::vec(-3.0f64..3.0, 3 * m), 0..m))
    }

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
    }

    proptest! {
        #[test]
        fn cyclic_shift_invariance((m, c, shift) in beads_strategy()) {
            let s = harmonic_system(3, m, 1.7);
            let mut rotated = c.clone();
            rotated.rotate_left(3 * shift);
            prop_assert!(rel_close(s.rp_potential(&c).unwrap(), s.rp_potential(&rotated).unwrap()));
        }

        #[test]
        fn bead_reversal_invariance((m, c, _s) in beads_strategy()) {
            let s = harmonic_system(3, m, 0.9);
            let reversed: Vec<f64> = c.chunks_exact(3).rev().flatten().copied().collect();
            prop_assert!(rel_close(s.rp_potential(&c).unwrap(), s.rp_potential(&reversed).unwrap()));
        }

        #[test]
        fn spring_translation_invariance((m, c, _s) in beads_strategy(), t in prop::array::uniform3(-2.0f64..2.0)) {
            let s = harmonic_system(3, m, 2.5);
            let shifted: Vec<f64> = c.iter().enumerate().map(|(i, v)| v + t[i % 3]).collect();
            let a = s.spring_energy(&c);
            let b = s.spring_energy(&shifted);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }
}
