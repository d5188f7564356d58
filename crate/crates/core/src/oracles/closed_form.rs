//! Textbook closed forms: 2×2 generalized eigenproblem, Rabi flopping,
//! Landau–Zener transitions and stationary-state phases.

use std::f64::consts::PI;

use crate::oracles::OracleResult;
use crate::units::HBAR;
use crate::C64;

/// Roots of det(H - E S) = 0 for real symmetric 2×2 H and S, ascending.
pub fn generalized_eigen_2x2(h: [[f64; 2]; 2], s: [[f64; 2]; 2]) -> [f64; 2] {
    // (h11 - E s11)(h22 - E s22) - (h12 - E s12)² = a E² + b E + c
    let a = s[0][0] * s[1][1] - s[0][1] * s[0][1];
    let b = -(h[0][0] * s[1][1] + h[1][1] * s[0][0]) + 2.0 * h[0][1] * s[0][1];
    let c = h[0][0] * h[1][1] - h[0][1] * h[0][1];
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * disc);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
    if r1 <= r2 {
        [r1, r2]
    } else {
        [r2, r1]
    }
}

/// Symmetric dimer of identical orbitals: E± = (ε ± β)/(1 ± s) with β = Kεs.
pub fn symmetric_dimer(epsilon: f64, k: f64, s: f64) -> [f64; 2] {
    let beta = k * epsilon * s;
    let plus = (epsilon + beta) / (1.0 + s);
    let minus = (epsilon - beta) / (1.0 - s);
    if plus <= minus {
        [plus, minus]
    } else {
        [minus, plus]
    }
}

/// Upper-level population of a two-level system driven with Rabi frequency Ω
/// and detuning δ (rotating-wave approximation).
pub fn rabi_population(omega_r: f64, detuning: f64, t: f64) -> f64 {
    let w = (omega_r * omega_r + detuning * detuning).sqrt();
    if w == 0.0 {
        return 0.0;
    }
    (omega_r / w).powi(2) * (0.5 * w * t).sin().powi(2)
}

pub fn rabi_series(omega_r: f64, times: &[f64]) -> OracleResult {
    OracleResult {
        values: times.iter().map(|&t| rabi_population(omega_r, 0.0, t)).collect(),
        error: 0.0,
        method: "sin²(Ωt/2), resonant rotating-wave two-level system".into(),
    }
}

/// Probability of staying on the diabatic state when the diabatic energy
/// difference sweeps at rate `sweep_rate` through a coupling `v`.
pub fn landau_zener(v: f64, sweep_rate: f64) -> f64 {
    (-2.0 * PI * v * v / (HBAR * sweep_rate.abs())).exp()
}

pub fn landau_zener_series(v: f64, force_difference: f64, velocities: &[f64]) -> OracleResult {
    OracleResult {
        values: velocities.iter().map(|&u| landau_zener(v, force_difference * u)).collect(),
        error: 0.0,
        method: "exp(-2πV²/ħ|v·ΔF|)".into(),
    }
}

/// e^{-iEt/ħ}.
pub fn free_phase(energy: f64, t: f64) -> C64 {
    C64::new(0.0, -energy * t / HBAR).exp()
}

pub fn free_phase_series(energy: f64, times: &[f64]) -> OracleResult {
    OracleResult {
        values: times
            .iter()
            .flat_map(|&t| {
                let z = free_phase(energy, t);
                [z.re, z.im]
            })
            .collect(),
        error: 0.0,
        method: "stationary phase e^{-iEt/ħ} as (re, im) pairs".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_matches_symmetric_dimer() {
        let (eps, k, s) = (-0.5, 1.75, 0.4);
        let beta = k * eps * s;
        let e = generalized_eigen_2x2([[eps, beta], [beta, eps]], [[1.0, s], [s, 1.0]]);
        let f = symmetric_dimer(eps, k, s);
        assert!((e[0] - f[0]).abs() < 1e-14 && (e[1] - f[1]).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_limit_is_ordinary_eigenproblem() {
        let e = generalized_eigen_2x2([[1.0, 0.5], [0.5, -1.0]], [[1.0, 0.0], [0.0, 1.0]]);
        assert!((e[1] - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rabi_and_lz_limits() {
        assert!((rabi_population(0.1, 0.0, PI / 0.1) - 1.0).abs() < 1e-15);
        assert!(landau_zener(0.0, 1.0) == 1.0);
        assert!(landau_zener(1.0, 1e-6) < 1e-100);
    }
}
