//! One-way ionization sink.
//!
//! A single extra orbital is coupled from every bound orbital with strength
//! w_ℓ = α_ℓ (e/mc)|Ā| p_ref and never couples back. In the propagation the
//! sink enters as the rank-one absorber Γ = (τ/ħ) w wᵀ on the bound block, so
//! bound norm leaks at rate τ|w·ψ|²/ħ² while |Ā| > 0. The removed probability
//! and the sink amplitude are kept as an accounting register.

use serde::{Deserialize, Serialize};

use crate::coupling::MatrixSet;
use crate::units::{ELECTRON_MASS, HBAR, SPEED_OF_LIGHT};
use crate::{CMatrix, CVector, Error, Result, Vec3, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SinkAlpha {
    Uniform(f64),
    PerOrbital(Vec<f64>),
}

impl Default for SinkAlpha {
    fn default() -> Self {
        SinkAlpha::Uniform(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub alpha: SinkAlpha,
    /// Reference continuum momentum, ħ/a₀ by default.
    #[serde(default = "one")]
    pub p_ref: f64,
    /// Dwell time τ converting the sink coupling into a loss rate.
    #[serde(default = "one")]
    pub escape_time: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SinkSpec {
    fn default() -> Self {
        SinkSpec {
            enabled: false,
            alpha: SinkAlpha::default(),
            p_ref: 1.0,
            escape_time: 1.0,
        }
    }
}

impl SinkSpec {
    pub fn uniform(alpha: f64) -> Self {
        SinkSpec {
            enabled: true,
            alpha: SinkAlpha::Uniform(alpha),
            ..Default::default()
        }
    }

    pub fn validate(&self, n_orbitals: usize) -> Result<()> {
        let ok = match &self.alpha {
            SinkAlpha::Uniform(a) => *a >= 0.0 && a.is_finite(),
            SinkAlpha::PerOrbital(v) => {
                if v.len() != n_orbitals {
                    return Err(Error::config(
                        "ionization.alpha",
                        format!("expected {n_orbitals} per-orbital values, found {}", v.len()),
                    ));
                }
                v.iter().all(|a| *a >= 0.0 && a.is_finite())
            }
        };
        if !ok {
            return Err(Error::config("ionization.alpha", "couplings must be finite and >= 0"));
        }
        if !(self.p_ref > 0.0) || !(self.escape_time > 0.0) {
            return Err(Error::config("ionization", "p_ref and escape_time must be positive"));
        }
        Ok(())
    }

    pub fn alpha_of(&self, l: usize) -> f64 {
        match &self.alpha {
            SinkAlpha::Uniform(a) => *a,
            SinkAlpha::PerOrbital(v) => v[l],
        }
    }

    /// Sink-row couplings H(sink, ℓ) = α_ℓ (e/mc)|Ā| p_ref.
    pub fn coupling_row(&self, n: usize, abar: &Vec3) -> Vec<f64> {
        let scale = abar.norm() / (ELECTRON_MASS * SPEED_OF_LIGHT) * self.p_ref;
        (0..n).map(|l| self.alpha_of(l) * scale).collect()
    }

    /// Absorber vector a with Γ = a a†, or `None` when nothing can leak.
    pub fn absorber(&self, n: usize, abar: &Vec3) -> Option<CVector> {
        if !self.enabled {
            return None;
        }
        let w = self.coupling_row(n, abar);
        if w.iter().all(|x| *x == 0.0) {
            return None;
        }
        let k = (self.escape_time / HBAR).sqrt();
        Some(CVector::from_iterator(n, w.into_iter().map(|x| C64::new(k * x, 0.0))))
    }

    /// Per-channel loss rates τ|w_ℓ ψ_ℓ|²/ħ² for one state.
    pub fn channel_rates(&self, psi: &CVector, abar: &Vec3) -> Vec<f64> {
        let w = self.coupling_row(psi.len(), abar);
        w.iter()
            .zip(psi.iter())
            .map(|(w, c)| self.escape_time * (w * c).norm_sqr() / (HBAR * HBAR))
            .collect()
    }
}

/// Appends the sink orbital as the last row and column: S gets an identity
/// extension, H(sink, ℓ) = w_ℓ, H(ℓ, sink) = 0 and H(sink, sink) = 0.
pub fn extend_matrices(m: &MatrixSet, sink: &SinkSpec, abar: &Vec3) -> MatrixSet {
    let n = m.s.nrows();
    let grow = |a: &CMatrix| {
        let mut b = CMatrix::zeros(n + 1, n + 1);
        b.view_mut((0, 0), (n, n)).copy_from(a);
        b
    };
    let mut s = grow(&m.s);
    s[(n, n)] = C64::new(1.0, 0.0);
    let mut h = grow(&m.h);
    if sink.enabled {
        for (l, w) in sink.coupling_row(n, abar).into_iter().enumerate() {
            h[(n, l)] = C64::new(w, 0.0);
        }
    }
    MatrixSet {
        s,
        h,
        mu: m.mu.clone().map(|x| grow(&x)),
        p: m.p.clone().map(|x| grow(&x)),
        big_p: m.big_p.clone().map(|x| grow(&x)),
        t: m.t,
        abar: m.abar,
        flags: m.flags,
    }
}
