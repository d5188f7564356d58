//! Applied vector potential in the long-wavelength limit.
//!
//! Ā(t) = A₀·env(t)·cos(ω(t - t₀) + φ)·ê + ΔĀ carries no spatial
//! dependence, so the bond average of A is A itself. Ē = -(1/c) dĀ/dt.

use serde::{Deserialize, Serialize};

use crate::units::{field_amplitude_from_intensity, SPEED_OF_LIGHT};
use crate::{Error, Result, Vec3};

/// Gaussian envelopes are clipped where they drop below this fraction of peak.
pub const GAUSSIAN_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// exp(-2 ln2 (t - t₀)²/τ²): τ is the intensity FWHM.
    Gaussian,
    /// cos²(π (t - t₀)/τ) on |t - t₀| < τ/2: τ is the full duration.
    Sin2,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Peak vector-potential amplitude A₀ (a.u.).
    pub amplitude: f64,
    /// Carrier angular frequency (hartree/ħ).
    pub omega: f64,
    pub envelope: Envelope,
    /// Envelope duration (a.u. time).
    pub tau: f64,
    /// Carrier-envelope phase (rad).
    pub phase: f64,
    pub polarization: [f64; 3],
    /// Envelope center (a.u. time).
    pub t0: f64,
    /// Constant gauge offset ΔĀ.
    pub delta_a: [f64; 3],
}

impl PulseSpec {
    pub fn new(
        amplitude: f64,
        omega: f64,
        envelope: Envelope,
        tau: f64,
        polarization: [f64; 3],
        t0: f64,
    ) -> Result<Self> {
        let p = PulseSpec {
            amplitude,
            omega,
            envelope,
            tau,
            phase: 0.0,
            polarization,
            t0,
            delta_a: [0.0; 3],
        };
        p.validate()?;
        Ok(p)
    }

    /// A₀ = (c/ω)·E₀ for a peak intensity in W/cm².
    pub fn amplitude_from_intensity(intensity_wcm2: f64, omega: f64) -> f64 {
        SPEED_OF_LIGHT * field_amplitude_from_intensity(intensity_wcm2) / omega
    }

    pub fn zero() -> Self {
        PulseSpec {
            amplitude: 0.0,
            omega: 1.0,
            envelope: Envelope::Constant,
            tau: 1.0,
            phase: 0.0,
            polarization: [0.0, 0.0, 1.0],
            t0: 0.0,
            delta_a: [0.0; 3],
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_offset(mut self, delta_a: [f64; 3]) -> Self {
        self.delta_a = delta_a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let norm = Vec3::from(self.polarization).norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "pulse.polarization",
                format!("must be a unit vector (|ê| = {norm})"),
            ));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("pulse.tau_fs", "duration must be positive"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::config("pulse.omega", "carrier frequency must be positive"));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::config("pulse.amplitude", "must be finite"));
        }
        Ok(())
    }

    fn gaussian_half_width(&self) -> f64 {
        self.tau * ((1.0 / GAUSSIAN_CLIP).ln() / (2.0 * std::f64::consts::LN_2)).sqrt()
    }

    /// Time interval outside of which the envelope is exactly zero.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.envelope {
            Envelope::Constant => None,
            Envelope::Sin2 => Some((self.t0 - 0.5 * self.tau, self.t0 + 0.5 * self.tau)),
            Envelope::Gaussian => {
                let w = self.gaussian_half_width();
                Some((self.t0 - w, self.t0 + w))
            }
        }
    }

    pub fn end_time(&self) -> Option<f64> {
        self.support().map(|(_, end)| end)
    }

    /// Envelope value and its time derivative.
    pub fn envelope_at(&self, t: f64) -> (f64, f64) {
        let s = t - self.t0;
        match self.envelope {
            Envelope::Constant => (1.0, 0.0),
            Envelope::Sin2 => {
                if s.abs() >= 0.5 * self.tau {
                    (0.0, 0.0)
                } else {
                    let x = std::f64::consts::PI * s / self.tau;
                    let c = x.cos();
                    (
                        c * c,
                        -std::f64::consts::PI / self.tau * (2.0 * x).sin(),
                    )
                }
            }
            Envelope::Gaussian => {
                let k = 2.0 * std::f64::consts::LN_2 / (self.tau * self.tau);
                let env = (-k * s * s).exp();
                if env < GAUSSIAN_CLIP {
                    (0.0, 0.0)
                } else {
                    (env, -2.0 * k * s * env)
                }
            }
        }
    }

    pub fn a_bar(&self, t: f64) -> Vec3 {
        let (env, _) = self.envelope_at(t);
        let carrier = (self.omega * (t - self.t0) + self.phase).cos();
        Vec3::from(self.polarization) * (self.amplitude * env * carrier) + Vec3::from(self.delta_a)
    }

    /// Ā without the constant gauge offset.
    pub fn a_pulse(&self, t: f64) -> Vec3 {
        self.a_bar(t) - Vec3::from(self.delta_a)
    }

    pub fn e_bar(&self, t: f64) -> Vec3 {
        let (env, denv) = self.envelope_at(t);
        let theta = self.omega * (t - self.t0) + self.phase;
        let da_dt = self.amplitude * (denv * theta.cos() - env * self.omega * theta.sin());
        Vec3::from(self.polarization) * (-da_dt / SPEED_OF_LIGHT)
    }

    /// Peak electric-field amplitude A₀ω/c.
    pub fn peak_field(&self) -> f64 {
        self.amplitude * self.omega / SPEED_OF_LIGHT
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.omega
    }

    /// Warning text when the carrier wavelength is not long compared with
    /// the molecule, i.e. when a uniform Ā is a poor approximation.
    pub fn wavelength_warning(&self, max_distance: f64) -> Option<String> {
        let lambda = self.wavelength();
        if lambda <= 100.0 * max_distance {
            Some(format!(
                "carrier wavelength {lambda:.1} bohr is not ≫ molecular size {max_distance:.2} bohr; \
                 the uniform vector-potential approximation is questionable"
            ))
        } else {
            None
        }
    }
}
