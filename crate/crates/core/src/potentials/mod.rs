//! Potential energy surfaces over flattened Jacobi coordinates.
//!
//! The analytic models exist to give the sampler problems with known answers;
//! [`ExternalPes`] wraps any program that speaks the line protocol in
//! [`external`].

pub mod external;

use std::sync::Arc;

use crate::error::{Error, Result};

pub use external::{ExternalEvaluator, ExternalPes};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    HarmonicIso,
    MorseDiatomic,
    CoupledQuartic,
    GaussianTest,
    External,
}

/// Morse parameters: well depth `d` (hartree), range `a` (1/bohr) and
/// equilibrium distance `r_e` (bohr).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Morse {
    pub d: f64,
    pub a: f64,
    pub r_e: f64,
}

impl Morse {
    pub fn new(d: f64, a: f64, r_e: f64) -> Result<Self> {
        if !(d > 0.0 && a > 0.0 && r_e > 0.0) || ![d, a, r_e].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "Morse parameters must be finite and positive (D={d}, a={a}, r_e={r_e})"
            )));
        }
        Ok(Self { d, a, r_e })
    }

    /// Energy at bond length `r`.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        let y = 1.0 - (-self.a * (r - self.r_e)).exp();
        self.d * y * y
    }
}

#[derive(Debug, Clone)]
pub enum PotentialModel {
    /// `sum_i k_i x_i^2 / 2`
    HarmonicIso { force_constants: Vec<f64> },
    /// Morse in the length of the single Jacobi vector of a diatomic.
    MorseDiatomic(Morse),
    /// `sum_i k_i x_i^2 / 2 + sum_{i<j} c_ij x_i^2 x_j^2`, with `c` stored
    /// densely (row-major, only `i < j` read).
    CoupledQuartic {
        force_constants: Vec<f64>,
        couplings: Vec<f64>,
    },
    /// `sum_i x_i^2 / 2`
    GaussianTest { dim: usize },
    External(Arc<ExternalPes>),
}

impl PotentialModel {
    pub fn harmonic(force_constants: Vec<f64>) -> Result<Self> {
        if force_constants.is_empty() {
            return Err(Error::invalid("harmonic model needs at least one coordinate"));
        }
        if force_constants.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::invalid("harmonic force constants must be positive"));
        }
        Ok(Self::HarmonicIso { force_constants })
    }

    /// Isotropic harmonic well with angular frequency `omega` for a
    /// coordinate of mass `mass` (k = mass * omega^2), repeated `dim` times.
    pub fn harmonic_from_frequency(dim: usize, mass: f64, omega: f64) -> Result<Self> {
        Self::harmonic(vec![mass * omega * omega; dim])
    }

    pub fn morse(d: f64, a: f64, r_e: f64) -> Result<Self> {
        Ok(Self::MorseDiatomic(Morse::new(d, a, r_e)?))
    }

    pub fn coupled_quartic(force_constants: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        let n = force_constants.len();
        if n == 0 {
            return Err(Error::invalid("quartic model needs at least one coordinate"));
        }
        Error::check_dim(n * n, couplings.len())?;
        if force_constants.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::invalid("quartic force constants must be positive"));
        }
        if couplings.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("quartic couplings must be non-negative"));
        }
        Ok(Self::CoupledQuartic {
            force_constants,
            couplings,
        })
    }

    pub fn gaussian_test(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("gaussian test needs dim >= 1"));
        }
        Ok(Self::GaussianTest { dim })
    }

    pub fn external(pes: ExternalPes) -> Self {
        Self::External(Arc::new(pes))
    }

    pub fn kind(&self) -> PotentialKind {
        match self {
            Self::HarmonicIso { .. } => PotentialKind::HarmonicIso,
            Self::MorseDiatomic(_) => PotentialKind::MorseDiatomic,
            Self::CoupledQuartic { .. } => PotentialKind::CoupledQuartic,
            Self::GaussianTest { .. } => PotentialKind::GaussianTest,
            Self::External(_) => PotentialKind::External,
        }
    }

    /// Number of scalar coordinates the model expects.
    pub fn dim(&self) -> usize {
        match self {
            Self::HarmonicIso { force_constants } => force_constants.len(),
            Self::MorseDiatomic(_) => 3,
            Self::CoupledQuartic {
                force_constants, ..
            } => force_constants.len(),
            Self::GaussianTest { dim } => *dim,
            Self::External(pes) => pes.dim(),
        }
    }

    /// Known global minimum of the model, if any. Used to cut energy
    /// evaluations short once a constraint is already violated.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            Self::External(_) => None,
            _ => Some(0.0),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Self::External(_))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {v}")));
        }
        match self {
            Self::External(pes) => Ok(pes.evaluate_batch(&[x])?[0]),
            _ => Ok(self.analytic_value(x)),
        }
    }

    /// Evaluates several points; for external models this is a single
    /// request to the child process.
    pub fn evaluate_batch(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        match self {
            Self::External(pes) => {
                for x in xs {
                    Error::check_dim(pes.dim(), x.len())?;
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid("non-finite coordinate in batch"));
                    }
                }
                pes.evaluate_batch(xs)
            }
            _ => xs.iter().map(|x| self.evaluate(x)).collect(),
        }
    }

    /// Unchecked evaluation for analytic models. `x` must have length
    /// `dim()`; panics for external models.
    #[inline]
    pub(crate) fn analytic_value(&self, x: &[f64]) -> f64 {
        match self {
            Self::HarmonicIso { force_constants } => {
                0.5 * force_constants
                    .iter()
                    .zip(x)
                    .map(|(k, xi)| k * xi * xi)
                    .sum::<f64>()
            }
            Self::MorseDiatomic(m) => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                m.radial(r)
            }
            Self::CoupledQuartic {
                force_constants,
                couplings,
            } => {
                let n = force_constants.len();
                let mut e = 0.0;
                for i in 0..n {
                    let xi2 = x[i] * x[i];
                    e += 0.5 * force_constants[i] * xi2;
                    for j in i + 1..n {
                        e += couplings[i * n + j] * xi2 * x[j] * x[j];
                    }
                }
                e
            }
            Self::GaussianTest { .. } => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Self::External(_) => unreachable!("external models have no analytic value"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_minimum() {
        let p = PotentialModel::gaussian_test(9).unwrap();
        assert_eq!(p.evaluate(&[0.0; 9]).unwrap(), 0.0);
        assert_eq!(p.kind(), PotentialKind::GaussianTest);
    }

    #[test]
    fn morse_asymptotics() {
        let p = PotentialModel::morse(0.1, 0.64, 3.27).unwrap();
        assert_eq!(p.evaluate(&[3.27, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p.evaluate(&[0.0, 0.0, -3.27]).unwrap(), 0.0);
        let far = p.evaluate(&[1e4, 0.0, 0.0]).unwrap();
        assert!((far - 0.1).abs() < 1e-15);
    }

    #[test]
    fn harmonic_unit_displacement() {
        let p = PotentialModel::harmonic(vec![1.0; 4]).unwrap();
        assert_eq!(p.evaluate(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn quartic_by_hand() {
        let couplings = vec![0.0, 0.3, 0.0, 0.0];
        let p = PotentialModel::coupled_quartic(vec![1.0, 2.0], couplings).unwrap();
        // 0.5*1*1 + 0.5*2*4 + 0.3*1*4
        let e = p.evaluate(&[1.0, -2.0]).unwrap();
        assert!((e - (0.5 + 4.0 + 1.2)).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_and_inputs() {
        assert!(PotentialModel::morse(0.0, 1.0, 1.0).is_err());
        assert!(PotentialModel::morse(1.0, -1.0, 1.0).is_err());
        assert!(PotentialModel::morse(1.0, 1.0, 0.0).is_err());
        assert!(PotentialModel::harmonic(vec![]).is_err());
        assert!(PotentialModel::coupled_quartic(vec![1.0], vec![-1.0]).is_err());
        let p = PotentialModel::gaussian_test(2).unwrap();
        assert!(matches!(p.evaluate(&[f64::NAN, 0.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(p.evaluate(&[f64::INFINITY, 0.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(
            p.evaluate(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    proptest! {
        #[test]
        fn morse_rotation_invariance(
            v in prop::array::uniform3(-6.0f64..6.0),
            axis in prop::array::uniform3(0.1f64..1.0),
            angle in 0.0f64..6.3,
        ) {
            let p = PotentialModel::morse(0.1, 0.64, 3.27).unwrap();
            let r = rotation(axis, angle);
            let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| r[i][j] * v[j]).sum()).collect();
            let e0 = p.evaluate(&v).unwrap();
            let e1 = p.evaluate(&w).unwrap();
            prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1e-12));
        }

        #[test]
        fn builtins_bounded_below(x in prop::collection::vec(-20.0f64..20.0, 3)) {
            let models = [
                PotentialModel::harmonic(vec![0.5, 1.0, 2.0]).unwrap(),
                PotentialModel::morse(0.1, 0.64, 3.27).unwrap(),
                PotentialModel::coupled_quartic(vec![1.0; 3], vec![0.1; 9]).unwrap(),
                PotentialModel::gaussian_test(3).unwrap(),
            ];
            for m in &models {
                prop_assert!(m.evaluate(&x).unwrap() >= m.lower_bound().unwrap());
            }
        }

        #[test]
        fn batch_matches_pointwise(pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 0..10)) {
            let m = PotentialModel::coupled_quartic(vec![1.0, 2.0, 3.0], vec![0.2; 9]).unwrap();
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let batch = m.evaluate_batch(&refs).unwrap();
            prop_assert_eq!(batch.len(), pts.len());
            for (p, e) in pts.iter().zip(&batch) {
                prop_assert_eq!(m.evaluate(p).unwrap().to_bits(), e.to_bits());
            }
        }
    }
}
