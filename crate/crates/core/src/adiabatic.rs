//! Born–Oppenheimer analysis: field-free eigenstates, nonadiabatic couplings,
//! the adiabaticity classification and population projections.
//!
//! Eigenvectors are solved at Ā = 0 and then carried into the gauge of the
//! propagated state with D = diag(exp(iqĀ·X_ℓ/ħc)), so that projections
//! c_i = Ψ̃_i†S(Ā)ψ do not depend on the gauge.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coupling::{assemble_gradients, field_free, gauge_phases, CouplingFlags};
use crate::geometry::SystemGeometry;
use crate::linalg::generalized_eigen;
use crate::model_basis::PairTable;
use crate::propagator::ElectronState;
use crate::units::HBAR;
use crate::{CMatrix, CVector, Error, Result, Vec3, C64};

/// How the momentum scale in the closeness criterion is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MomentumModel {
    /// ħ/P replaced by the distance the nuclei travel along the coupling in
    /// time ħ/|ΔE|, giving ρ = ħ|Ẋ·N|/ΔE² (a Massey parameter).
    #[default]
    VelocityProjected,
    /// P_i = (2 M |E_i|)^½ with a representative mass M.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Adiabatic,
    Nonadiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticParams {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_eps_deg")]
    pub eps_deg: f64,
    #[serde(default)]
    pub momentum: MomentumModel,
    /// Mass for the literal momentum model; lightest atom when absent.
    #[serde(default)]
    pub representative_mass: Option<f64>,
}

fn default_theta() -> f64 {
    0.1
}

fn default_eps_deg() -> f64 {
    1e-8
}

impl Default for AdiabaticParams {
    fn default() -> Self {
        AdiabaticParams {
            theta: default_theta(),
            eps_deg: default_eps_deg(),
            momentum: MomentumModel::default(),
            representative_mass: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub ratio: f64,
    pub class: PairClass,
}

#[derive(Debug, Clone)]
pub struct Eigenbasis {
    pub energies: Vec<f64>,
    /// S₀-orthonormal eigenvectors as columns, Ā = 0 gauge.
    pub vectors: CMatrix,
}

/// Solves H₀Ψ = E S₀Ψ at the current nuclear positions.
pub fn eigensolve(geom: &SystemGeometry, table: &PairTable) -> Result<Eigenbasis> {
    let (s0, h0) = field_free(geom, table);
    eigensolve_matrices(&s0, &h0)
}

pub fn eigensolve_matrices(s0: &CMatrix, h0: &CMatrix) -> Result<Eigenbasis> {
    let (energies, vectors) = generalized_eigen(s0, h0)?;
    Ok(Eigenbasis { energies, vectors })
}

/// N_ij = Ψ_i†(∂H₀ - E_j ∂S₀)Ψ_j for each nuclear coordinate.
pub fn numerators(basis: &Eigenbasis, ds0: &[CMatrix], dh0: &[CMatrix]) -> Vec<CMatrix> {
    let v = &basis.vectors;
    let n = basis.energies.len();
    ds0.iter()
        .zip(dh0)
        .map(|(ds, dh)| {
            let hv = v.adjoint() * dh * v;
            let sv = v.adjoint() * ds * v;
            CMatrix::from_fn(n, n, |i, j| hv[(i, j)] - sv[(i, j)] * basis.energies[j])
        })
        .collect()
}

/// F_ij = N_ij/(E_j - E_i) per coordinate; undefined on the diagonal and for
/// pairs closer than ε_deg.
#[derive(Debug, Clone)]
pub struct Couplings {
    pub energies: Vec<f64>,
    pub eps_deg: f64,
    pub values: Vec<CMatrix>,
}

impl Couplings {
    pub fn new(energies: &[f64], numerators: &[CMatrix], eps_deg: f64) -> Self {
        let n = energies.len();
        let values = numerators
            .iter()
            .map(|num| {
                CMatrix::from_fn(n, n, |i, j| {
                    let gap = energies[j] - energies[i];
                    if i == j || gap.abs() <= eps_deg {
                        C64::new(0.0, 0.0)
                    } else {
                        num[(i, j)] / gap
                    }
                })
            })
            .collect();
        Couplings {
            energies: energies.to_vec(),
            eps_deg,
            values,
        }
    }

    /// F_ij over all coordinates; `None` for i = j.
    pub fn pair(&self, i: usize, j: usize) -> Result<Option<Vec<C64>>> {
        if i == j {
            return Ok(None);
        }
        let gap = (self.energies[j] - self.energies[i]).abs();
        if gap <= self.eps_deg {
            return Err(Error::DegeneratePair { i, j, gap });
        }
        Ok(Some(self.values.iter().map(|m| m[(i, j)]).collect()))
    }
}

/// Couplings F_ij at the current geometry.
pub fn couplings(geom: &SystemGeometry, table: &PairTable, params: &AdiabaticParams) -> Result<(Eigenbasis, Couplings)> {
    let basis = eigensolve(geom, table)?;
    let g = assemble_gradients(geom, table, Vec3::zeros(), Vec3::zeros(), CouplingFlags::field_free());
    let num = numerators(&basis, &g.ds, &g.dh);
    let c = Couplings::new(&basis.energies, &num, params.eps_deg);
    Ok((basis, c))
}

/// Closeness ratio ρ_ij for every pair i < j and its classification
/// (nonadiabatic when ρ ≥ θ or the pair is degenerate).
pub fn classify(
    energies: &[f64],
    numerators: &[CMatrix],
    velocities: &[f64],
    masses: &[f64],
    params: &AdiabaticParams,
) -> Vec<PairRecord> {
    let n = energies.len();
    let moving = velocities.iter().any(|v| *v != 0.0);
    let mass = params
        .representative_mass
        .unwrap_or_else(|| masses.iter().cloned().fold(f64::INFINITY, f64::min));
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let gap = (energies[j] - energies[i]).abs();
            let ratio = if gap <= params.eps_deg {
                f64::INFINITY
            } else if !moving {
                0.0
            } else {
                match params.momentum {
                    MomentumModel::VelocityProjected => {
                        let rate: C64 = numerators
                            .iter()
                            .zip(velocities)
                            .map(|(m, v)| m[(i, j)] * *v)
                            .sum();
                        HBAR * rate.norm() / (gap * gap)
                    }
                    MomentumModel::Literal => {
                        let coupling = numerators.iter().map(|m| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
                        let p = (2.0 * mass * energies[i].abs()).sqrt();
                        if p > 0.0 {
                            HBAR * coupling / (p * gap)
                        } else {
                            f64::INFINITY
                        }
                    }
                }
            };
            let class = if ratio >= params.theta {
                PairClass::Nonadiabatic
            } else {
                PairClass::Adiabatic
            };
            out.push(PairRecord { i, j, ratio, class });
        }
    }
    out
}

/// Complete analysis of one instant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdiabaticSnapshot {
    pub t: f64,
    pub energies: Vec<f64>,
    /// Eigenvectors in the gauge of the propagated state.
    #[serde(skip)]
    pub vectors: CMatrix,
    /// |c_i|² per occupied state n, as `populations[n][i]`.
    pub populations: Vec<Vec<f64>>,
    pub pairs: Vec<PairRecord>,
}

impl AdiabaticSnapshot {
    /// `s` is the overlap in the state's gauge and `dressing` the diagonal
    /// carrying Ā = 0 eigenvectors into it.
    pub fn from_parts(
        t: f64,
        basis: &Eigenbasis,
        dressing: Option<&[C64]>,
        s: &CMatrix,
        state: &ElectronState,
        pairs: Vec<PairRecord>,
    ) -> Self {
        let mut vectors = basis.vectors.clone();
        if let Some(d) = dressing {
            for (l, mut row) in vectors.row_iter_mut().enumerate() {
                row *= d[l];
            }
        }
        let populations = state
            .psi
            .iter()
            .map(|p| project(&vectors, s, p).iter().map(|c| c.norm_sqr()).collect())
            .collect();
        AdiabaticSnapshot {
            t,
            energies: basis.energies.clone(),
            vectors,
            populations,
            pairs,
        }
    }

    /// Geometry-based snapshot; velocities come from `geom`.
    pub fn new(
        geom: &SystemGeometry,
        table: &PairTable,
        abar: Vec3,
        s: &CMatrix,
        state: &ElectronState,
        params: &AdiabaticParams,
    ) -> Result<Self> {
        let (basis, couplings_needed) = (eigensolve(geom, table)?, geom.n_atoms() > 1);
        let pairs = if couplings_needed {
            let g = assemble_gradients(geom, table, Vec3::zeros(), Vec3::zeros(), CouplingFlags::field_free());
            let num = numerators(&basis, &g.ds, &g.dh);
            let v: Vec<f64> = geom.velocities().iter().flat_map(|v| [v[0], v[1], v[2]]).collect();
            let m: Vec<f64> = geom.masses.clone();
            classify(&basis.energies, &num, &v, &m, params)
        } else {
            classify(&basis.energies, &[], &[], &geom.masses, params)
        };
        let d = gauge_phases(geom, abar);
        Ok(AdiabaticSnapshot::from_parts(state.t, &basis, Some(&d), s, state, pairs))
    }

    /// Occupation-weighted populations Σ_n f_n|c_ni|² / Σ_n f_n.
    pub fn weighted_populations(&self, occupations: &[f64]) -> Vec<f64> {
        let total: f64 = occupations.iter().sum();
        let mut out = vec![0.0; self.energies.len()];
        for (pops, f) in self.populations.iter().zip(occupations) {
            for (o, p) in out.iter_mut().zip(pops) {
                *o += f * p / total;
            }
        }
        out
    }

    pub fn nonadiabatic_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter(|p| p.class == PairClass::Nonadiabatic)
            .map(|p| (p.i, p.j))
            .collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// c_i = Ψ_i†Sψ.
pub fn project(vectors: &CMatrix, s: &CMatrix, psi: &CVector) -> CVector {
    vectors.adjoint() * (s * psi)
}

/// Greedy maximum-overlap assignment: `result[i]` is the index in `next`
/// that continues state i of `prev`.
pub fn track(prev: &CMatrix, next: &CMatrix, s: &CMatrix) -> Vec<usize> {
    let n = prev.ncols();
    let o: DMatrix<f64> = (prev.adjoint() * s * next).map(|z| z.norm());
    let mut entries: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    entries.sort_by(|a, b| o[*b].total_cmp(&o[*a]).then(a.cmp(b)));
    let mut result = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (i, j) in entries {
        if result[i] == usize::MAX && !used[j] {
            result[i] = j;
            used[j] = true;
        }
    }
    result
}
