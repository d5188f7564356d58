//! Side-by-side table of oracle values and the production results for one
//! configuration. This is the only place where oracles meet the model code.

use crate::adiabatic::eigensolve;
use crate::driver::config::RunConfig;
use crate::model_basis::{dipole_mu0, hamiltonian_h0, momentum_p0, overlap_s0, OrbitalSpec};
use crate::oracles::closed_form::generalized_eigen_2x2;
use crate::oracles::quadrature::{matrix_element, ElementKind};
use crate::units::{ELECTRON_CHARGE, HBAR};
use crate::{Result, Vec3, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub quantity: String,
    pub oracle: f64,
    pub error: f64,
    pub model: f64,
    pub method: String,
}

impl Row {
    pub fn difference(&self) -> f64 {
        (self.model - self.oracle).abs()
    }

    /// Agreement within ten estimated errors (and never tighter than 1e-9).
    pub fn agrees(&self) -> bool {
        self.difference() <= (10.0 * self.error).max(1e-9)
    }
}

fn dot(v: [f64; 3], e: Vec3) -> f64 {
    v[0] * e[0] + v[1] * e[1] + v[2] * e[2]
}

/// Overlap, dipole and momentum elements along the polarization for every
/// orbital pair inside the cutoff, the two-level spectrum when the basis has
/// two orbitals, and the reference Rabi frequency when a pulse is present.
pub fn report(config: &RunConfig, tol: f64) -> Result<Vec<Row>> {
    let table = config.pair_table()?;
    let geom = config.geometry(&table)?;
    let pulse = config.pulse()?;
    let e = Vec3::from(pulse.polarization);
    let n = geom.n_orbitals();
    let orb = |l: usize| -> &OrbitalSpec {
        let site = &geom.roster[l];
        &table.species(site.species).orbitals[site.orbital]
    };
    let mut rows = Vec::new();
    // Dipole matrix along ê from quadrature, for the Rabi check below.
    let mut mu_quad = vec![vec![0.0; n]; n];
    for b in 0..n {
        for a in 0..n {
            let d: [f64; 3] = (geom.center(a) - geom.center(b)).into();
            let (bra, ket) = (orb(a), orb(b));
            if Vec3::from(d).norm() > crate::model_basis::cutoff_radius(bra, ket) {
                continue;
            }
            let mut mu = 0.0;
            for k in 0..3 {
                if e[k] != 0.0 {
                    mu += e[k] * matrix_element(ElementKind::Moment(k), bra, ket, d, tol)?.value();
                }
            }
            mu_quad[a][b] = ELECTRON_CHARGE * mu;
            if a > b {
                continue;
            }
            let s = matrix_element(ElementKind::Overlap, bra, ket, d, tol)?;
            rows.push(Row {
                quantity: format!("S[{a},{b}]"),
                oracle: s.value(),
                error: s.error,
                model: overlap_s0(bra, ket, d).re,
                method: s.method,
            });
            let mut err = 0.0;
            let mut grad = 0.0;
            for k in 0..3 {
                if e[k] != 0.0 {
                    let g = matrix_element(ElementKind::Gradient(k), bra, ket, d, tol)?;
                    grad += e[k] * g.value();
                    err += e[k].abs() * g.error;
                }
            }
            let model_mu = dot(dipole_mu0(bra, ket, d).map(|c| c.re), e);
            rows.push(Row {
                quantity: format!("mu.e[{a},{b}]"),
                oracle: ELECTRON_CHARGE * mu,
                error: tol,
                model: model_mu,
                method: "adaptive G7K15 per axis, ket-centered moment".into(),
            });
            rows.push(Row {
                quantity: format!("Im p.e[{a},{b}]"),
                oracle: -HBAR * grad,
                error: err,
                model: dot(momentum_p0(bra, ket, d).map(|c| c.im), e),
                method: "adaptive G7K15 per axis, 4-point stencil on ket".into(),
            });
        }
    }

    let basis = eigensolve(&geom, &table)?;
    if n == 2 {
        let mut h = [[0.0; 2]; 2];
        let mut s = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let d: [f64; 3] = (geom.center(a) - geom.center(b)).into();
                let k = table.pair_k(geom.roster[a].species, geom.roster[b].species);
                h[a][b] = hamiltonian_h0(orb(a), orb(b), d, k).re;
                s[a][b] = overlap_s0(orb(a), orb(b), d).re;
            }
        }
        for (i, root) in generalized_eigen_2x2(h, s).into_iter().enumerate() {
            rows.push(Row {
                quantity: format!("E[{i}]"),
                oracle: root,
                error: 1e-14 * root.abs().max(1.0),
                model: basis.energies[i],
                method: "quadratic det(H - ES) = 0".into(),
            });
        }
    }

    if n >= 2 && pulse.amplitude != 0.0 {
        let (v0, v1) = (basis.vectors.column(0), basis.vectors.column(1));
        let mut m = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                m += v0[a].conj() * mu_quad[a][b] * v1[b];
            }
        }
        let oracle = pulse.peak_field() * m.norm() / HBAR;
        let model = crate::driver::Simulation::new(config.clone())?.header().reference_rabi.unwrap_or(0.0);
        rows.push(Row {
            quantity: "Rabi frequency".into(),
            oracle,
            error: pulse.peak_field() * tol * n as f64,
            model,
            method: "E0 |<0|mu.e|1>| with quadrature dipoles".into(),
        });
    }
    Ok(rows)
}

pub fn to_text(rows: &[Row]) -> String {
    let mut out = format!(
        "{:<16} {:>22} {:>10} {:>22} {:>10}  {}\n",
        "quantity", "oracle", "est.err", "model", "|diff|", "ok"
    );
    for r in rows {
        out += &format!(
            "{:<16} {:>22.15e} {:>10.2e} {:>22.15e} {:>10.2e}  {}\n",
            r.quantity,
            r.oracle,
            r.error,
            r.model,
            r.difference(),
            if r.agrees() { "yes" } else { "NO" }
        );
    }
    out
}
