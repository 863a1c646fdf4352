//! Physical constants. Everything inside the crate works in atomic units
//! (hbar = 1, energies in hartree, lengths in bohr, masses in electron masses).

/// Electron masses per unified atomic mass unit.
pub const AMU_TO_ME: f64 = 1822.888486209;

/// Boltzmann constant in hartree per kelvin.
pub const KB_HARTREE_PER_K: f64 = 3.166811563e-6;

/// Converts a mass in u to electron masses.
pub fn amu_to_me(m: f64) -> f64 {
    m * AMU_TO_ME
}

/// Inverse temperature 1/(k_B T) in 1/hartree.
pub fn beta_from_temperature(t_kelvin: f64) -> f64 {
    1.0 / (KB_HARTREE_PER_K * t_kelvin)
}

/// Temperature in kelvin for a given inverse temperature in 1/hartree.
pub fn temperature_from_beta(beta: f64) -> f64 {
    1.0 / (KB_HARTREE_PER_K * beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_temperature_round_trip() {
        for t in [1.0, 300.0, 1000.0, 4000.0] {
            let back = temperature_from_beta(beta_from_temperature(t));
            assert!((back - t).abs() / t < 1e-14);
        }
    }
}
