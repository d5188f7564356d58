//! Classical nuclei: pair repulsion, Ehrenfest forces and velocity Verlet.
//!
//! The force is
//!
//!   F = -Σ_n f_n Re[ψ_n†(∂H/∂X)ψ_n - ψ_n†(∂S/∂X)S⁻¹Hψ_n] - ∂U_rep/∂X,
//!
//! i.e. the matrix-element derivatives alone; there is no Pulay correction
//! because the position dependence of S and H already follows the basis.

use serde::{Deserialize, Serialize};

use crate::coupling::{assemble_overlap, assemble_sh, contract_gradients, CouplingFlags};
use crate::field::PulseSpec;
use crate::geometry::SystemGeometry;
use crate::ionization::SinkSpec;
use crate::linalg::cholesky;
use crate::model_basis::PairTable;
use crate::propagator::{ElectronState, OperatorSource, Operators};
use crate::{CMatrix, Error, Result, Vec3, C64};

/// Shifted-force exponential repulsion between one species pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepulsionPair {
    pub a: String,
    pub b: String,
    /// Prefactor B (hartree).
    #[serde(rename = "B")]
    pub b_coef: f64,
    /// Decay λ (1/bohr).
    pub lambda: f64,
    pub cutoff: f64,
}

impl RepulsionPair {
    /// U(r) = B e^{-λr} - B e^{-λr_c} + λB e^{-λr_c}(r - r_c), zero beyond r_c.
    pub fn energy(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            return 0.0;
        }
        let ec = self.b_coef * (-self.lambda * self.cutoff).exp();
        self.b_coef * (-self.lambda * r).exp() - ec + self.lambda * ec * (r - self.cutoff)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            return 0.0;
        }
        let ec = self.b_coef * (-self.lambda * self.cutoff).exp();
        -self.lambda * self.b_coef * (-self.lambda * r).exp() + self.lambda * ec
    }

    fn matches(&self, x: &str, y: &str) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepulsionSpec {
    #[serde(default)]
    pub pairs: Vec<RepulsionPair>,
}

impl RepulsionSpec {
    pub fn new(pairs: Vec<RepulsionPair>) -> Self {
        RepulsionSpec { pairs }
    }

    pub fn lookup(&self, x: &str, y: &str) -> Option<&RepulsionPair> {
        self.pairs.iter().find(|p| p.matches(x, y))
    }

    /// Every species pair present in `geom` must have parameters.
    pub fn validate(&self, table: &PairTable, geom: &SystemGeometry) -> Result<()> {
        for p in &self.pairs {
            if !(p.b_coef >= 0.0 && p.lambda > 0.0 && p.cutoff > 0.0) {
                return Err(Error::config(
                    format!("repulsion.{}-{}", p.a, p.b),
                    "need B >= 0, lambda > 0 and cutoff > 0",
                ));
            }
        }
        for i in 0..geom.n_atoms() {
            for j in i + 1..geom.n_atoms() {
                let x = &table.species(geom.atoms[i].species).name;
                let y = &table.species(geom.atoms[j].species).name;
                if self.lookup(x, y).is_none() {
                    return Err(Error::config(
                        "repulsion.pairs",
                        format!("no parameters for species pair {x}-{y}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn each_pair(&self, table: &PairTable, geom: &SystemGeometry, mut f: impl FnMut(usize, usize, &RepulsionPair, Vec3)) {
        for i in 0..geom.n_atoms() {
            for j in i + 1..geom.n_atoms() {
                let x = &table.species(geom.atoms[i].species).name;
                let y = &table.species(geom.atoms[j].species).name;
                if let Some(p) = self.lookup(x, y) {
                    f(i, j, p, geom.atoms[i].position - geom.atoms[j].position);
                }
            }
        }
    }

    pub fn energy(&self, table: &PairTable, geom: &SystemGeometry) -> f64 {
        let mut e = 0.0;
        self.each_pair(table, geom, |_, _, p, d| e += p.energy(d.norm()));
        e
    }

    /// ∂U/∂X per atom.
    pub fn gradient(&self, table: &PairTable, geom: &SystemGeometry) -> Vec<Vec3> {
        let mut g = vec![Vec3::zeros(); geom.n_atoms()];
        self.each_pair(table, geom, |i, j, p, d| {
            let r = d.norm();
            let v = d * (p.derivative(r) / r);
            g[i] += v;
            g[j] -= v;
        });
        g
    }
}

/// Σ_n f_n Re(ψ_n†Hψ_n)/(ψ_n†Sψ_n).
pub fn electronic_energy(state: &ElectronState, s: &CMatrix, h: &CMatrix) -> f64 {
    state
        .psi
        .iter()
        .zip(&state.occupations)
        .map(|(p, f)| f * p.dotc(&(h * p)).re / p.dotc(&(s * p)).re)
        .sum()
}

/// Ehrenfest forces at the geometry (positions and velocities) in `geom`.
pub fn forces(
    geom: &SystemGeometry,
    table: &PairTable,
    state: &ElectronState,
    abar: Vec3,
    ebar: Vec3,
    flags: CouplingFlags,
    repulsion: &RepulsionSpec,
) -> Result<Vec<Vec3>> {
    let (s, h) = assemble_sh(geom, table, abar, ebar, flags);
    let chol = cholesky(&s)?;
    let n = geom.n_orbitals();
    let mut wh = CMatrix::zeros(n, n);
    let mut ws = CMatrix::zeros(n, n);
    for (p, &f) in state.psi.iter().zip(&state.occupations) {
        let chi = chol.solve(&(&h * p));
        let f = C64::new(f, 0.0);
        wh += (p.conjugate() * p.transpose()) * f;
        ws += (p.conjugate() * chi.transpose()) * f;
    }
    let el = contract_gradients(geom, table, abar, ebar, flags, &wh, &ws);
    let rep = repulsion.gradient(table, geom);
    Ok(el.iter().zip(&rep).map(|(e, r)| -e - r).collect())
}

/// Electronic + kinetic + repulsion energy.
pub fn total_energy(
    geom: &SystemGeometry,
    table: &PairTable,
    state: &ElectronState,
    abar: Vec3,
    ebar: Vec3,
    flags: CouplingFlags,
    repulsion: &RepulsionSpec,
) -> f64 {
    let (s, h) = assemble_sh(geom, table, abar, ebar, flags);
    electronic_energy(state, &s, &h) + geom.kinetic_energy() + repulsion.energy(table, geom)
}

pub fn accelerations(geom: &SystemGeometry, forces: &[Vec3]) -> Vec<Vec3> {
    forces.iter().zip(&geom.masses).map(|(f, m)| f / *m).collect()
}

/// Nuclear trajectory within one Verlet step, X(t) = X₀ + V₀τ + ½a₀τ² with
/// τ = t - t₀, and the field-dressed operators along it.
pub struct NuclearPath<'a> {
    pub table: &'a PairTable,
    pub start: SystemGeometry,
    pub t0: f64,
    pub accel: Vec<Vec3>,
    pub pulse: &'a PulseSpec,
    pub flags: CouplingFlags,
    pub sink: Option<&'a SinkSpec>,
}

impl<'a> NuclearPath<'a> {
    pub fn geometry_at(&self, t: f64) -> SystemGeometry {
        let tau = t - self.t0;
        let mut g = self.start.clone();
        for (atom, a) in g.atoms.iter_mut().zip(&self.accel) {
            atom.position = predict_position(atom.position, atom.velocity, *a, tau);
            atom.velocity += a * tau;
        }
        g
    }
}

/// Shared by the path and the Verlet update so both land on the same bits.
fn predict_position(x: Vec3, v: Vec3, a: Vec3, tau: f64) -> Vec3 {
    x + v * tau + a * (0.5 * tau * tau)
}

impl<'a> OperatorSource for NuclearPath<'a> {
    fn operators(&self, t: f64) -> Result<Operators> {
        let g = self.geometry_at(t);
        let abar = self.pulse.a_bar(t);
        let (s, h) = assemble_sh(&g, self.table, abar, self.pulse.e_bar(t), self.flags);
        // The sink sees the pulse only; a constant gauge offset must not ionize.
        let absorber = self.sink.and_then(|sk| sk.absorber(g.n_orbitals(), &self.pulse.a_pulse(t)));
        Ok(Operators { s, h, absorber })
    }

    fn overlap(&self, t: f64) -> Result<CMatrix> {
        let g = self.geometry_at(t);
        Ok(assemble_overlap(&g, self.table, self.pulse.a_bar(t)))
    }
}

/// Velocity Verlet: positions from (V₀, a₀), then `forces_at` evaluated at the
/// new positions (with predicted velocities V₀ + a₀dt) completes the velocity.
/// Returns the new geometry and its accelerations.
pub fn verlet_step<F>(geom: &SystemGeometry, accel: &[Vec3], dt: f64, mut forces_at: F) -> Result<(SystemGeometry, Vec<Vec3>)>
where
    F: FnMut(&SystemGeometry) -> Result<Vec<Vec3>>,
{
    let mut next = geom.clone();
    for (atom, a) in next.atoms.iter_mut().zip(accel) {
        atom.position = predict_position(atom.position, atom.velocity, *a, dt);
        atom.velocity += a * dt;
    }
    next.check_separation()?;
    let f1 = forces_at(&next)?;
    let a1 = accelerations(&next, &f1);
    for ((atom, v0), (a0, a1)) in next.atoms.iter_mut().zip(&geom.atoms).zip(accel.iter().zip(&a1)) {
        atom.velocity = v0.velocity + (a0 + a1) * (0.5 * dt);
    }
    Ok((next, a1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::generalized_eigen;
    use crate::model_basis::{OrbitalSpec, ShellKind, Species};

    fn table() -> PairTable {
        PairTable::new(vec![
            Species {
                name: "A".into(),
                mass: 1836.0,
                hueckel_k: 1.75,
                orbitals: vec![OrbitalSpec::new("A", ShellKind::S, 0.4, -0.5)],
            },
            Species {
                name: "B".into(),
                mass: 3000.0,
                hueckel_k: 1.6,
                orbitals: vec![
                    OrbitalSpec::new("B", ShellKind::S, 0.3, -0.6),
                    OrbitalSpec::new("B", ShellKind::Pz, 0.25, -0.3),
                ],
            },
        ])
        .unwrap()
    }

    fn repulsion() -> RepulsionSpec {
        let p = |a: &str, b: &str| RepulsionPair {
            a: a.into(),
            b: b.into(),
            b_coef: 2.0,
            lambda: 1.2,
            cutoff: 12.0,
        };
        RepulsionSpec::new(vec![p("A", "A"), p("A", "B"), p("B", "B")])
    }

    #[test]
    fn repulsion_is_c1_at_cutoff() {
        let p = &repulsion().pairs[0];
        assert!(p.energy(p.cutoff - 1e-9).abs() < 1e-12);
        assert!(p.derivative(p.cutoff - 1e-9).abs() < 1e-10);
        assert!(p.energy(3.0) > p.energy(4.0));
    }

    #[test]
    fn missing_repulsion_pair_is_config_error() {
        let t = table();
        let g = SystemGeometry::from_positions(&t, &[("A", [0.0; 3]), ("B", [0.0, 0.0, 2.0])]).unwrap();
        let partial = RepulsionSpec::new(vec![repulsion().pairs[0].clone()]);
        assert!(matches!(partial.validate(&t, &g), Err(Error::Config { .. })));
        assert!(repulsion().validate(&t, &g).is_ok());
    }

    #[test]
    fn homonuclear_forces_are_opposite() {
        let t = table();
        let g = SystemGeometry::from_positions(&t, &[("A", [0.0; 3]), ("A", [0.3, -0.2, 1.9])]).unwrap();
        let (s, h) = crate::coupling::field_free(&g, &t);
        let (_, v) = generalized_eigen(&s, &h).unwrap();
        let st = ElectronState::from_columns(&v, &[0], &[2.0], 0.0);
        let f = forces(&g, &t, &st, Vec3::zeros(), Vec3::zeros(), CouplingFlags::default(), &repulsion()).unwrap();
        assert!((f[0] + f[1]).norm() < 1e-14 * f[0].norm().max(1.0));
    }

    #[test]
    fn forces_are_energy_gradient_for_eigenstates() {
        let t = table();
        let g = SystemGeometry::from_positions(&t, &[("A", [0.0; 3]), ("B", [0.4, 0.1, 2.2]), ("A", [-1.0, 1.5, 3.1])]).unwrap();
        let (s, h) = crate::coupling::field_free(&g, &t);
        let (_, v) = generalized_eigen(&s, &h).unwrap();
        let st = ElectronState::from_columns(&v, &[0, 1], &[2.0, 1.0], 0.0);
        let flags = CouplingFlags::default();
        let rep = repulsion();
        let f = forces(&g, &t, &st, Vec3::zeros(), Vec3::zeros(), flags, &rep).unwrap();
        let step = 1e-4;
        for atom in 0..3 {
            for k in 0..3 {
                let e = |d: f64| {
                    let mut gg = g.clone();
                    let mut x = g.positions();
                    x[atom][k] += d;
                    gg.set_positions(&x);
                    total_energy(&gg, &t, &st, Vec3::zeros(), Vec3::zeros(), flags, &rep)
                };
                let fd = -(e(step) - e(-step)) / (2.0 * step);
                assert!((f[atom][k] - fd).abs() < 1e-6 * fd.abs().max(1e-3), "atom {atom} axis {k}: {} vs {fd}", f[atom][k]);
            }
        }
    }

    #[test]
    fn free_flight_is_uniform_translation() {
        let t = table();
        let mut g = SystemGeometry::from_positions(&t, &[("A", [0.0; 3]), ("B", [0.0, 0.0, 3.0])]).unwrap();
        g.set_velocities(&[Vec3::new(1e-3, 0.0, 0.0), Vec3::new(1e-3, 0.0, 0.0)]);
        let zero = vec![Vec3::zeros(); 2];
        let mut cur = g.clone();
        let mut a = zero.clone();
        for _ in 0..10 {
            let (n, a1) = verlet_step(&cur, &a, 2.0, |_| Ok(vec![Vec3::zeros(); 2])).unwrap();
            cur = n;
            a = a1;
        }
        assert!((cur.atoms[0].position - Vec3::new(0.02, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(cur.atoms[1].velocity, g.atoms[1].velocity);
    }

    #[test]
    fn overlapping_atoms_abort() {
        let t = table();
        let mut g = SystemGeometry::from_positions(&t, &[("A", [0.0; 3]), ("A", [0.0, 0.0, 0.15])]).unwrap();
        g.set_velocities(&[Vec3::zeros(), Vec3::new(0.0, 0.0, -0.1)]);
        let r = verlet_step(&g, &[Vec3::zeros(), Vec3::zeros()], 1.0, |_| Ok(vec![Vec3::zeros(); 2]));
        assert!(matches!(r, Err(Error::AtomOverlap { .. })));
    }
}
