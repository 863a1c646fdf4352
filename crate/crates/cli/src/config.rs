//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pins::coords::JacobiFrame;
use pins::oracle::morse_levels;
use pins::potentials::{ExternalPes, PotentialModel};
use pins::sampler::NsParams;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub run: RunSection,
    #[serde(default)]
    pub ssw: SswConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub masses_u: Vec<f64>,
    pub pes: PesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PesConfig {
    /// Either explicit force constants per Jacobi coordinate or a single
    /// frequency `omega` shared by all of them.
    HarmonicIso {
        #[serde(default)]
        force_constants: Option<Vec<f64>>,
        #[serde(default)]
        omega: Option<f64>,
    },
    MorseDiatomic { d: f64, a: f64, r_e: f64 },
    CoupledQuartic { force_constants: Vec<f64>, couplings: Vec<Vec<f64>> },
    GaussianTest,
    External { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beads {
    One(usize),
    PerTemperature(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZeroPoint {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "temperatures_K")]
    pub temperatures_k: Vec<f64>,
    pub beads: Beads,
    pub live_points: usize,
    pub walk_steps: usize,
    #[serde(rename = "box_L")]
    pub box_l: f64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_walkers")]
    pub walkers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stop_factor")]
    pub stop_factor: f64,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// Energy zero: a number in hartree or the string `"oracle"`.
    #[serde(default)]
    pub e0: Option<ZeroPoint>,
    #[serde(default)]
    pub e0_hartree: Option<f64>,
}

fn default_runs() -> usize {
    20
}
fn default_walkers() -> usize {
    1
}
fn default_stop_factor() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SswConfig {
    pub n_ssw: u32,
}

impl Default for SswConfig {
    fn default() -> Self {
        Self { n_ssw: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default)]
    pub write_traces: bool,
    /// Record elapsed seconds in the `wall_s` column. Switch off for
    /// byte-reproducible output.
    #[serde(default = "default_true")]
    pub wall_time: bool,
}

fn default_format() -> Format {
    Format::Csv
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: None, format: Format::Csv, write_traces: false, wall_time: true }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let r = &self.run;
        if r.temperatures_k.is_empty() {
            return bad("temperatures_K must not be empty".into());
        }
        if let Some(t) = r.temperatures_k.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("temperature {t} is not positive"));
        }
        match &r.beads {
            Beads::One(0) => return bad("beads must be positive".into()),
            Beads::PerTemperature(list) => {
                if list.len() != r.temperatures_k.len() {
                    return bad(format!(
                        "beads has {} entries but temperatures_K has {}",
                        list.len(),
                        r.temperatures_k.len()
                    ));
                }
                if list.contains(&0) {
                    return bad("beads must be positive".into());
                }
            }
            Beads::One(_) => {}
        }
        if r.n_runs == 0 {
            return bad("n_runs must be positive".into());
        }
        if self.ssw.n_ssw == 0 {
            return bad("n_ssw must be positive".into());
        }
        if r.e0.is_some() && r.e0_hartree.is_some() {
            return bad("give either e0 or e0_hartree, not both".into());
        }
        if let Some(ZeroPoint::Named(s)) = &r.e0 {
            if s != "oracle" {
                return bad(format!("e0 must be a number or \"oracle\", got {s:?}"));
            }
        }
        self.ns_params().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn beads_for(&self, t_index: usize) -> usize {
        match &self.run.beads {
            Beads::One(m) => *m,
            Beads::PerTemperature(list) => list[t_index],
        }
    }

    pub fn ns_params(&self) -> NsParams {
        let r = &self.run;
        let mut p = NsParams {
            live_points: r.live_points,
            walk_steps: r.walk_steps,
            box_length: r.box_l,
            walkers: r.walkers,
            stop_factor: r.stop_factor,
            seed: r.seed,
            ..NsParams::default()
        };
        if let Some(n) = r.max_iterations {
            p.max_iterations = n;
        }
        p
    }

    pub fn frame(&self) -> Result<JacobiFrame, CliError> {
        JacobiFrame::from_amu(&self.system.masses_u).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Builds the potential over the Jacobi coordinates of `frame`.
    pub fn potential(&self, frame: &JacobiFrame) -> Result<PotentialModel, CliError> {
        let n = frame.n_dof();
        let cfg = |e: pins::Error| CliError::Config(e.to_string());
        let pot = match &self.system.pes {
            PesConfig::HarmonicIso { force_constants, omega } => match (force_constants, omega) {
                (Some(k), None) => PotentialModel::harmonic(k.clone()).map_err(cfg)?,
                (None, Some(w)) => {
                    let k = frame.masses_per_dof().iter().map(|mu| mu * w * w).collect();
                    PotentialModel::harmonic(k).map_err(cfg)?
                }
                _ => {
                    return Err(CliError::Config(
                        "harmonic_iso needs exactly one of force_constants or omega".into(),
                    ))
                }
            },
            PesConfig::MorseDiatomic { d, a, r_e } => PotentialModel::morse(*d, *a, *r_e).map_err(cfg)?,
            PesConfig::CoupledQuartic { force_constants, couplings } => {
                let m = force_constants.len();
                if couplings.len() != m || couplings.iter().any(|row| row.len() != m) {
                    return Err(CliError::Config(format!("couplings must be a {m}x{m} matrix")));
                }
                PotentialModel::coupled_quartic(force_constants.clone(), couplings.concat()).map_err(cfg)?
            }
            PesConfig::GaussianTest => PotentialModel::gaussian_test(n).map_err(cfg)?,
            PesConfig::External { command } => {
                let pes = ExternalPes::new(command.clone(), n).map_err(|e| CliError::Config(e.to_string()))?;
                PotentialModel::external(pes)
            }
        };
        if pot.dim() != n {
            return Err(CliError::Config(format!(
                "PES has {} coordinates but {} atoms give {n}",
                pot.dim(),
                self.system.masses_u.len()
            )));
        }
        Ok(pot)
    }

    /// Energy zero in hartree.
    pub fn zero_point(&self, frame: &JacobiFrame) -> Result<f64, CliError> {
        match (self.run.e0.as_ref(), self.run.e0_hartree.as_ref()) {
            (None, None) => Ok(0.0),
            (None, Some(&v)) | (Some(&ZeroPoint::Value(v)), None) => {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CliError::Config("e0 must be finite".into()))
                }
            }
            (Some(ZeroPoint::Named(_)), None) => self.oracle_zero_point(frame),
            _ => Err(CliError::Config("give either e0 or e0_hartree, not both".into())),
        }
    }

    fn oracle_zero_point(&self, frame: &JacobiFrame) -> Result<f64, CliError> {
        let masses = frame.masses_per_dof();
        match &self.system.pes {
            PesConfig::HarmonicIso { force_constants, omega } => Ok(match (force_constants, omega) {
                (Some(k), _) => k.iter().zip(&masses).map(|(k, mu)| 0.5 * (k / mu).sqrt()).sum(),
                (None, Some(w)) => 0.5 * w * masses.len() as f64,
                (None, None) => 0.0,
            }),
            PesConfig::MorseDiatomic { d, a, r_e } => {
                let s = morse_levels(*d, *a, *r_e, frame.reduced_masses()[0])
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(s.e0())
            }
            _ => Err(CliError::Config(
                "e0 = \"oracle\" is only available for harmonic_iso and morse_diatomic".into(),
            )),
        }
    }
}
