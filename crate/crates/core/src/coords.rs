//! Jacobi coordinates for an N-atom system.
//!
//! The frame maps laboratory Cartesian positions `r` (N x 3) onto N-1 Jacobi
//! vectors plus the center of mass through `(x, R_cm) = (U ⊗ I3) r`. Row `i`
//! of `U` (for `i < N-1`) takes the center of mass of atoms `0..=i` minus the
//! position of atom `i+1`; the last row is the center-of-mass row. With this
//! choice the kinetic energy is diagonal in the Jacobi vectors with reduced
//! masses `1/mu_i = 1/m_{i+1} + 1/(m_1 + ... + m_i)` and `det U = 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::units::AMU_TO_ME;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone)]
pub struct JacobiFrame {
    masses: Vec<f64>,
    u_matrix: DMatrix<f64>,
    u_inverse: DMatrix<f64>,
    reduced_masses: Vec<f64>,
    total_mass: f64,
}

impl JacobiFrame {
    /// Builds the frame from masses in electron masses.
    pub fn new(masses: &[f64]) -> Result<Self> {
        let n = masses.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "a Jacobi frame needs at least two masses, got {n}"
            )));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::invalid(format!("masses must be positive, got {m}")));
        }

        let mut u = DMatrix::zeros(n, n);
        let mut reduced_masses = Vec::with_capacity(n - 1);
        let mut prefix = 0.0;
        for i in 0..n - 1 {
            prefix += masses[i];
            for j in 0..=i {
                u[(i, j)] = masses[j] / prefix;
            }
            u[(i, i + 1)] = -1.0;
            reduced_masses.push(1.0 / (1.0 / masses[i + 1] + 1.0 / prefix));
        }
        let total_mass = prefix + masses[n - 1];
        for j in 0..n {
            u[(n - 1, j)] = masses[j] / total_mass;
        }

        let u_inverse = u
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("Jacobi matrix is singular".into()))?;

        Ok(Self {
            masses: masses.to_vec(),
            u_matrix: u,
            u_inverse,
            reduced_masses,
            total_mass,
        })
    }

    /// Builds the frame from masses given in unified atomic mass units.
    pub fn from_amu(masses_u: &[f64]) -> Result<Self> {
        let me: Vec<f64> = masses_u.iter().map(|m| m * AMU_TO_ME).collect();
        Self::new(&me)
    }

    pub fn n_atoms(&self) -> usize {
        self.masses.len()
    }

    /// Number of scalar Jacobi coordinates, 3(N-1).
    pub fn n_dof(&self) -> usize {
        3 * (self.masses.len() - 1)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn u_matrix(&self) -> &DMatrix<f64> {
        &self.u_matrix
    }

    pub fn reduced_masses(&self) -> &[f64] {
        &self.reduced_masses
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Reduced mass for every scalar Jacobi coordinate (each mu_i repeated
    /// for x, y and z).
    pub fn masses_per_dof(&self) -> Vec<f64> {
        self.reduced_masses
            .iter()
            .flat_map(|&mu| [mu; 3])
            .collect()
    }

    pub fn determinant(&self) -> f64 {
        self.u_matrix.clone().determinant()
    }

    /// Lab-frame positions to Jacobi vectors and center of mass.
    pub fn lab_to_jacobi(&self, r: &[Vec3]) -> Result<(Vec<Vec3>, Vec3)> {
        Error::check_dim(self.n_atoms(), r.len())?;
        let mut out = apply(&self.u_matrix, r);
        let r_cm = out.pop().expect("n >= 2");
        Ok((out, r_cm))
    }

    /// Inverse of [`JacobiFrame::lab_to_jacobi`].
    pub fn jacobi_to_lab(&self, x: &[Vec3], r_cm: Vec3) -> Result<Vec<Vec3>> {
        Error::check_dim(self.n_atoms() - 1, x.len())?;
        let mut stacked = x.to_vec();
        stacked.push(r_cm);
        Ok(apply(&self.u_inverse, &stacked))
    }

    /// Flattens Jacobi vectors into the coordinate layout used by the
    /// potentials: x_1 (x, y, z), x_2 (x, y, z), ...
    pub fn flatten(x: &[Vec3]) -> Vec<f64> {
        x.iter().flatten().copied().collect()
    }
}

fn apply(m: &DMatrix<f64>, v: &[Vec3]) -> Vec<Vec3> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = [0.0; 3];
            for (j, vj) in v.iter().enumerate() {
                let c = m[(i, j)];
                if c != 0.0 {
                    for a in 0..3 {
                        acc[a] += c * vj[a];
                    }
                }
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn equal_mass_two_body() {
        let f = JacobiFrame::new(&[1.0, 1.0]).unwrap();
        assert_eq!(f.reduced_masses(), &[0.5]);
        let u = f.u_matrix();
        assert_eq!(
            (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]),
            (1.0, -1.0, 0.5, 0.5)
        );
        assert!(close(f.determinant(), 1.0, 1e-12));
    }

    #[test]
    fn mgh_reduced_mass() {
        let (m_mg, m_h) = (23.9850417, 1.0078250);
        let f = JacobiFrame::from_amu(&[m_mg, m_h]).unwrap();
        let mu_u = f.reduced_masses()[0] / AMU_TO_ME;
        // two-body reduced mass m1 m2 / (m1 + m2), evaluated by hand
        let expected = m_mg * m_h / (m_mg + m_h);
        assert!(close(mu_u, expected, 1e-14));
        assert!((mu_u - 0.967185).abs() < 5e-7, "{mu_u}");
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(matches!(JacobiFrame::new(&[1.0]), Err(Error::InvalidInput(_))));
        assert!(JacobiFrame::new(&[1.0, 0.0]).is_err());
        assert!(JacobiFrame::new(&[1.0, -2.0, 3.0]).is_err());
        assert!(JacobiFrame::new(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn origin_maps_to_zero() {
        let f = JacobiFrame::new(&[1.0, 2.0, 3.0]).unwrap();
        let (x, r_cm) = f.lab_to_jacobi(&[[0.0; 3]; 3]).unwrap();
        assert!(x.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r_cm, [0.0; 3]);
        let r = f.jacobi_to_lab(&[[0.0; 3]; 2], [0.0; 3]).unwrap();
        assert!(r.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn two_body_relative_vector() {
        let f = JacobiFrame::new(&[3.0, 7.0]).unwrap();
        let r1 = [0.3, -1.2, 2.0];
        let r2 = [1.0, 0.5, -0.25];
        let (x, _) = f.lab_to_jacobi(&[r1, r2]).unwrap();
        for a in 0..3 {
            assert!(close(x[0][a], r1[a] - r2[a], 1e-15));
        }
    }

    #[test]
    fn two_body_symmetric_placement() {
        let f = JacobiFrame::new(&[1.0, 1.0]).unwrap();
        let d = 1.7;
        let r = f.jacobi_to_lab(&[[d, 0.0, 0.0]], [0.0; 3]).unwrap();
        assert!(close(r[0][0], d / 2.0, 1e-15) && close(r[1][0], -d / 2.0, 1e-15));
        assert_eq!((r[0][1], r[0][2], r[1][1], r[1][2]), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let f = JacobiFrame::new(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            f.lab_to_jacobi(&[[0.0; 3]; 2]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(f.jacobi_to_lab(&[[0.0; 3]; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn determinant_is_one_for_random_masses() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.random_range(2..=6);
            let masses: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..3.0))).collect();
            let f = JacobiFrame::new(&masses).unwrap();
            assert!((f.determinant() - 1.0).abs() < 1e-12, "{masses:?}");
        }
    }

    fn masses_and_points() -> impl Strategy<Value = (Vec<f64>, Vec<Vec3>, Vec3)> {
        (2usize..=6).prop_flat_map(|n| {
            (
                prop::collection::vec(0.5f64..5000.0, n),
                prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), n),
                prop::array::uniform3(-10.0f64..10.0),
            )
        })
    }

    proptest! {
        #[test]
        fn round_trip((masses, r, _t) in masses_and_points()) {
            let f = JacobiFrame::new(&masses).unwrap();
            let (x, r_cm) = f.lab_to_jacobi(&r).unwrap();
            let back = f.jacobi_to_lab(&x, r_cm).unwrap();
            for (a, b) in r.iter().flatten().zip(back.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn kinetic_energy_is_preserved((masses, v, _t) in masses_and_points()) {
            let f = JacobiFrame::new(&masses).unwrap();
            let lab: f64 = masses.iter().zip(&v)
                .map(|(m, vi)| 0.5 * m * vi.iter().map(|c| c * c).sum::<f64>())
                .sum();
            let (xdot, rdot) = f.lab_to_jacobi(&v).unwrap();
            let internal: f64 = f.reduced_masses().iter().zip(&xdot)
                .map(|(mu, xi)| 0.5 * mu * xi.iter().map(|c| c * c).sum::<f64>())
                .sum();
            let cm = 0.5 * f.total_mass() * rdot.iter().map(|c| c * c).sum::<f64>();
            prop_assert!(((internal + cm) - lab).abs() <= 1e-10 * lab.max(1e-300));
        }

        #[test]
        fn translation_shifts_only_center_of_mass((masses, r, t) in masses_and_points()) {
            let f = JacobiFrame::new(&masses).unwrap();
            let shifted: Vec<Vec3> = r.iter().map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]]).collect();
            let (x0, c0) = f.lab_to_jacobi(&r).unwrap();
            let (x1, c1) = f.lab_to_jacobi(&shifted).unwrap();
            for (a, b) in x0.iter().flatten().zip(x1.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-11);
            }
            for k in 0..3 {
                prop_assert!((c1[k] - c0[k] - t[k]).abs() < 1e-11);
            }
        }

        #[test]
        fn last_row_and_reduced_masses(masses in prop::collection::vec(0.1f64..100.0, 2..8)) {
            let f = JacobiFrame::new(&masses).unwrap();
            let n = masses.len();
            let total: f64 = masses.iter().sum();
            for j in 0..n {
                prop_assert!((f.u_matrix()[(n - 1, j)] - masses[j] / total).abs() < 1e-14);
            }
            for (i, mu) in f.reduced_masses().iter().enumerate() {
                let prefix: f64 = masses[..=i].iter().sum();
                prop_assert!(*mu > 0.0);
                prop_assert!((1.0 / mu - (1.0 / masses[i + 1] + 1.0 / prefix)).abs() < 1e-12 / mu);
            }
        }
    }
}
