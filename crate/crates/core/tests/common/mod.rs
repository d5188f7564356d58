//! Fixtures shared by the integration tests and the acceptance gate.
#![allow(dead_code)]

use std::path::PathBuf;

use lumen_core::adiabatic::{classify, eigensolve_matrices, numerators, AdiabaticParams, AdiabaticSnapshot};
use lumen_core::branching::{EventDetector, Trigger};
use lumen_core::driver::config::RunConfig;
use lumen_core::propagator::{step, ElectronState, FnSource, StepControl};
use lumen_core::{CMatrix, C64};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load(name: &str) -> RunConfig {
    RunConfig::load(&fixture_path(name)).expect("fixture config")
}

/// Two diabatic states crossing linearly, H = [[Fx/2, V], [V, -Fx/2]] with
/// x = x0 + vt and an orthonormal basis.
#[derive(Debug, Clone, Copy)]
pub struct Crossing {
    pub v_coupling: f64,
    pub force_difference: f64,
    pub x_max: f64,
}

impl Default for Crossing {
    fn default() -> Self {
        Crossing { v_coupling: 0.01, force_difference: 0.05, x_max: 50.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Passage {
    /// Final population of the upper adiabatic state.
    pub upper: f64,
    pub triggers: Vec<Trigger>,
    pub final_norm: f64,
}

impl Crossing {
    pub fn hamiltonian(&self, x: f64) -> CMatrix {
        let a = 0.5 * self.force_difference * x;
        CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(a, 0.0), C64::new(self.v_coupling, 0.0), C64::new(self.v_coupling, 0.0), C64::new(-a, 0.0)],
        )
    }

    /// Sweeps from -x_max to x_max at speed `v`, starting in the lower
    /// adiabatic state, with the event detector watching the pair.
    pub fn sweep(&self, v: f64) -> Passage {
        let s = CMatrix::identity(2, 2);
        let t_total = 2.0 * self.x_max / v;
        // Keep the largest phase increment per step small.
        let e_max = (0.25 * (self.force_difference * self.x_max).powi(2) + self.v_coupling.powi(2)).sqrt();
        let n_steps = ((t_total * e_max / 0.05).ceil() as usize).max(2000);
        let dt = t_total / n_steps as f64;
        let x_at = |t: f64| -self.x_max + v * t;
        let source = FnSource(|t: f64| Ok((CMatrix::identity(2, 2), self.hamiltonian(x_at(t)))));
        let basis = eigensolve_matrices(&s, &self.hamiltonian(x_at(0.0))).unwrap();
        let mut state = ElectronState::from_columns(&basis.vectors, &[0], &[1.0], 0.0);
        let mut detector = EventDetector::new(0.01, None, vec![]);
        let params = AdiabaticParams::default();
        let dh = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5 * self.force_difference, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-0.5 * self.force_difference, 0.0),
            ],
        );
        let control = StepControl::default();
        let mut triggers = Vec::new();
        let stride = (n_steps / 4000).max(1);
        let mut upper = 0.0;
        for k in 1..=n_steps {
            state = step(&state, &source, dt, &control).unwrap().state;
            state.t = k as f64 * dt;
            if k % stride == 0 || k == n_steps {
                let basis = eigensolve_matrices(&s, &self.hamiltonian(x_at(state.t))).unwrap();
                let num = numerators(&basis, &[CMatrix::zeros(2, 2)], &[dh.clone()]);
                let pairs = classify(&basis.energies, &num, &[v], &[1.0], &params);
                let snap = AdiabaticSnapshot::from_parts(state.t, &basis, None, &s, &state, pairs);
                let pops = snap.weighted_populations(&state.occupations);
                upper = pops[1];
                if let Some(t) = detector.observe(&snap, &pops) {
                    triggers.push(t);
                }
            }
        }
        Passage { upper, triggers, final_norm: state.norms(&s)[0] }
    }
}

/// Velocities spanning transition probabilities of roughly 0.1 to 0.9.
pub fn lz_velocities(c: &Crossing) -> Vec<f64> {
    let a = 2.0 * std::f64::consts::PI * c.v_coupling.powi(2) / c.force_difference;
    let p: Vec<f64> = (0..10).map(|k| 0.1 + 0.8 * k as f64 / 9.0).collect();
    p.iter().map(|p| -a / p.ln()).collect()
}

pub fn rms(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()
}
