//! Field-dressed matrices S, H, μ, p, P in the moving nonorthogonal basis.
//!
//! Element (ℓ', ℓ) carries the Peierls phase exp(iqĀ·(X' - X)/ħc). In full
//! mode
//!
//!   H = H₀·phase - Ē·μ₀·phase - Ẋ·(p₀·phase + (q/c)Ā S)
//!
//! where Ẋ is the velocity of the atom carrying the ket orbital ℓ.

use serde::{Deserialize, Serialize};

use crate::geometry::SystemGeometry;
use crate::model_basis::{PairElements, PairTable};
use crate::propagator::ElectronState;
use crate::units::{ELECTRON_CHARGE, ELECTRON_MASS, HBAR, SPEED_OF_LIGHT};
use crate::{CMatrix, Vec3, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    #[default]
    Full,
    /// Hopping phases only; no intra-atomic channel.
    PeierlsOnly,
    /// Phases exp((i/ħ)[(q/c)A + mẊ]·X) on either side of H₀.
    GeneralizedPeierls,
}

/// Which nuclear velocity multiplies P(ℓ', ℓ) in the velocity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VelocityConvention {
    #[default]
    Ket,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingFlags {
    pub mode: CouplingMode,
    pub dipole: bool,
    pub velocity: bool,
    pub convention: VelocityConvention,
}

impl Default for CouplingFlags {
    fn default() -> Self {
        CouplingFlags {
            mode: CouplingMode::Full,
            dipole: true,
            velocity: true,
            convention: VelocityConvention::Ket,
        }
    }
}

impl CouplingFlags {
    pub fn with_mode(mode: CouplingMode) -> Self {
        CouplingFlags {
            mode,
            ..Default::default()
        }
    }

    pub fn field_free() -> Self {
        CouplingFlags {
            mode: CouplingMode::PeierlsOnly,
            dipole: false,
            velocity: false,
            convention: VelocityConvention::Ket,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixSet {
    pub s: CMatrix,
    pub h: CMatrix,
    pub mu: [CMatrix; 3],
    pub p: [CMatrix; 3],
    pub big_p: [CMatrix; 3],
    pub t: f64,
    pub abar: Vec3,
    pub flags: CouplingFlags,
}

pub fn peierls_phase(abar: &Vec3, d: &Vec3) -> C64 {
    (I * (ELECTRON_CHARGE * abar.dot(d) / (HBAR * SPEED_OF_LIGHT))).exp()
}

/// Phase (q/c)Ā·X + mẊ·X of one center in generalized-Peierls mode.
fn generalized_angle(abar: &Vec3, x: &Vec3, v: &Vec3) -> f64 {
    ((abar * (ELECTRON_CHARGE / SPEED_OF_LIGHT)) + v * ELECTRON_MASS).dot(x) / HBAR
}

/// Everything needed to dress one pair element.
pub(crate) struct PairContext<'a> {
    pub e: &'a PairElements,
    pub d: Vec3,
    pub abar: &'a Vec3,
    pub ebar: &'a Vec3,
    pub velocity: Vec3,
    pub bra_x: Vec3,
    pub bra_v: Vec3,
    pub ket_x: Vec3,
    pub ket_v: Vec3,
    pub flags: CouplingFlags,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dressed {
    pub s: C64,
    pub h: C64,
    pub mu: [C64; 3],
    pub p: [C64; 3],
    pub big_p: [C64; 3],
}

/// Derivatives of a dressed element with respect to the bra and ket centers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DressedGradient {
    pub ds_bra: [C64; 3],
    pub dh_bra: [C64; 3],
    pub ds_ket: [C64; 3],
    pub dh_ket: [C64; 3],
}

impl<'a> PairContext<'a> {
    fn qa_over_c(&self) -> Vec3 {
        self.abar * (ELECTRON_CHARGE / SPEED_OF_LIGHT)
    }

    pub fn dress(&self) -> Dressed {
        let e = self.e;
        let ph = peierls_phase(self.abar, &self.d);
        let s = ph * e.s0;
        let p0 = e.p0();
        let qa = self.qa_over_c();
        let mu = [0, 1, 2].map(|j| ph * e.mu0[j]);
        let p = [0, 1, 2].map(|j| ph * p0[j]);
        let big_p = [0, 1, 2].map(|j| p[j] + s * qa[j]);
        let h = match self.flags.mode {
            CouplingMode::PeierlsOnly => ph * e.h0,
            CouplingMode::Full => {
                let mut h = ph * e.h0;
                if self.flags.dipole {
                    h -= (0..3).map(|j| mu[j] * self.ebar[j]).sum::<C64>();
                }
                if self.flags.velocity {
                    h -= (0..3).map(|j| big_p[j] * self.velocity[j]).sum::<C64>();
                }
                h
            }
            CouplingMode::GeneralizedPeierls => {
                let a_bra = generalized_angle(self.abar, &self.bra_x, &self.bra_v);
                let a_ket = generalized_angle(self.abar, &self.ket_x, &self.ket_v);
                (I * (a_bra - a_ket)).exp() * e.h0
            }
        };
        Dressed {
            s,
            h,
            mu,
            p,
            big_p,
        }
    }

    /// Off-site derivatives. Everything depends on d = X' - X except the
    /// generalized-Peierls velocity phases, which depend on X and X' directly.
    pub fn gradient(&self, dressed: &Dressed) -> DressedGradient {
        let e = self.e;
        let ph = peierls_phase(self.abar, &self.d);
        let qa = self.qa_over_c();
        let mut ds = [C64::new(0.0, 0.0); 3];
        let mut dh = [C64::new(0.0, 0.0); 3];
        for k in 0..3 {
            let dphase = I * qa[k] / HBAR;
            ds[k] = ph * e.ds0[k] + dressed.s * dphase;
            dh[k] = match self.flags.mode {
                CouplingMode::PeierlsOnly => ph * e.dh0[k] + dressed.h * dphase,
                CouplingMode::Full => {
                    let mut raw = C64::new(e.dh0[k], 0.0);
                    if self.flags.dipole {
                        raw -= (0..3).map(|j| self.ebar[j] * e.dmu0[j][k]).sum::<f64>();
                    }
                    if self.flags.velocity {
                        raw -= (0..3)
                            .map(|j| self.velocity[j] * (e.dp0(j, k) + qa[j] * e.ds0[k]))
                            .sum::<C64>();
                    }
                    ph * raw + dressed.h * dphase
                }
                CouplingMode::GeneralizedPeierls => {
                    // The A-dependent parts of the two end phases combine to the Peierls phase.
                    let a_bra = ELECTRON_MASS * self.bra_v.dot(&self.bra_x) / HBAR;
                    let a_ket = ELECTRON_MASS * self.ket_v.dot(&self.ket_x) / HBAR;
                    (I * (a_bra - a_ket)).exp() * (ph * e.dh0[k] + ph * e.h0 * dphase)
                }
            };
        }
        let mut out = DressedGradient {
            ds_bra: ds,
            dh_bra: dh,
            ds_ket: ds.map(|z| -z),
            dh_ket: dh.map(|z| -z),
        };
        if self.flags.mode == CouplingMode::GeneralizedPeierls {
            for k in 0..3 {
                out.dh_bra[k] += I * ELECTRON_MASS * self.bra_v[k] / HBAR * dressed.h;
                out.dh_ket[k] -= I * ELECTRON_MASS * self.ket_v[k] / HBAR * dressed.h;
            }
        }
        out
    }
}

fn velocity_for(geom: &SystemGeometry, bra_atom: usize, ket_atom: usize, c: VelocityConvention) -> Vec3 {
    match c {
        VelocityConvention::Ket => geom.atoms[ket_atom].velocity,
        VelocityConvention::Average => {
            0.5 * (geom.atoms[ket_atom].velocity + geom.atoms[bra_atom].velocity)
        }
    }
}

/// Visits every ordered orbital pair with its context.
pub(crate) fn for_each_pair<F>(
    geom: &SystemGeometry,
    table: &PairTable,
    abar: &Vec3,
    ebar: &Vec3,
    flags: CouplingFlags,
    mut f: F,
) where
    F: FnMut(usize, usize, &PairContext),
{
    let n = geom.n_orbitals();
    for lb in 0..n {
        let sb = geom.roster[lb];
        let bra_atom = &geom.atoms[sb.atom];
        for lk in 0..n {
            let sk = geom.roster[lk];
            let ket_atom = &geom.atoms[sk.atom];
            let d = bra_atom.position - ket_atom.position;
            // Distinct atoms never coincide; the exact zero marks on-site pairs.
            let d_arr = if sb.atom == sk.atom { [0.0; 3] } else { [d[0], d[1], d[2]] };
            let e = table.elements(
                (sb.species, sb.orbital),
                (sk.species, sk.orbital),
                d_arr,
                lb == lk,
            );
            let ctx = PairContext {
                e: &e,
                d: Vec3::from(d_arr),
                abar,
                ebar,
                velocity: velocity_for(geom, sb.atom, sk.atom, flags.convention),
                bra_x: bra_atom.position,
                bra_v: bra_atom.velocity,
                ket_x: ket_atom.position,
                ket_v: ket_atom.velocity,
                flags,
            };
            f(lb, lk, &ctx);
        }
    }
}

/// Assembles the field-dressed matrix set at time `t`.
///
/// Nuclear velocities are taken from `geom`.
pub fn assemble(
    geom: &SystemGeometry,
    table: &PairTable,
    abar: Vec3,
    ebar: Vec3,
    flags: CouplingFlags,
    t: f64,
) -> MatrixSet {
    let n = geom.n_orbitals();
    let z = || CMatrix::zeros(n, n);
    let mut m = MatrixSet {
        s: z(),
        h: z(),
        mu: [z(), z(), z()],
        p: [z(), z(), z()],
        big_p: [z(), z(), z()],
        t,
        abar,
        flags,
    };
    for_each_pair(geom, table, &abar, &ebar, flags, |i, j, ctx| {
        let d = ctx.dress();
        m.s[(i, j)] = d.s;
        m.h[(i, j)] = d.h;
        for k in 0..3 {
            m.mu[k][(i, j)] = d.mu[k];
            m.p[k][(i, j)] = d.p[k];
            m.big_p[k][(i, j)] = d.big_p[k];
        }
    });
    m
}

/// Overlap and Hamiltonian only.
pub fn assemble_sh(
    geom: &SystemGeometry,
    table: &PairTable,
    abar: Vec3,
    ebar: Vec3,
    flags: CouplingFlags,
) -> (CMatrix, CMatrix) {
    let n = geom.n_orbitals();
    let mut s = CMatrix::zeros(n, n);
    let mut h = CMatrix::zeros(n, n);
    for_each_pair(geom, table, &abar, &ebar, flags, |i, j, ctx| {
        let d = ctx.dress();
        s[(i, j)] = d.s;
        h[(i, j)] = d.h;
    });
    (s, h)
}

pub fn assemble_overlap(geom: &SystemGeometry, table: &PairTable, abar: Vec3) -> CMatrix {
    let n = geom.n_orbitals();
    let mut s = CMatrix::zeros(n, n);
    let zero = Vec3::zeros();
    for_each_pair(geom, table, &abar, &zero, CouplingFlags::field_free(), |i, j, ctx| {
        s[(i, j)] = peierls_phase(ctx.abar, &ctx.d) * ctx.e.s0;
    });
    s
}

/// Field-free S₀ and H₀.
pub fn field_free(geom: &SystemGeometry, table: &PairTable) -> (CMatrix, CMatrix) {
    assemble_sh(
        geom,
        table,
        Vec3::zeros(),
        Vec3::zeros(),
        CouplingFlags::field_free(),
    )
}

/// ∂S/∂X and ∂H/∂X for every nuclear coordinate, indexed `3·atom + axis`.
#[derive(Debug, Clone)]
pub struct NuclearGradient {
    pub ds: Vec<CMatrix>,
    pub dh: Vec<CMatrix>,
}

pub fn assemble_gradients(
    geom: &SystemGeometry,
    table: &PairTable,
    abar: Vec3,
    ebar: Vec3,
    flags: CouplingFlags,
) -> NuclearGradient {
    let n = geom.n_orbitals();
    let ncoord = 3 * geom.n_atoms();
    let mut g = NuclearGradient {
        ds: vec![CMatrix::zeros(n, n); ncoord],
        dh: vec![CMatrix::zeros(n, n); ncoord],
    };
    for_each_pair(geom, table, &abar, &ebar, flags, |i, j, ctx| {
        let (ab, ak) = (geom.roster[i].atom, geom.roster[j].atom);
        if ab == ak {
            return;
        }
        let dressed = ctx.dress();
        let grad = ctx.gradient(&dressed);
        for k in 0..3 {
            g.ds[3 * ab + k][(i, j)] += grad.ds_bra[k];
            g.dh[3 * ab + k][(i, j)] += grad.dh_bra[k];
            g.ds[3 * ak + k][(i, j)] += grad.ds_ket[k];
            g.dh[3 * ak + k][(i, j)] += grad.dh_ket[k];
        }
    });
    g
}

/// Re Σ_{ℓ'ℓ} [wh(ℓ',ℓ) ∂H(ℓ',ℓ) - ws(ℓ',ℓ) ∂S(ℓ',ℓ)] per atom, without
/// forming the derivative matrices.
pub fn contract_gradients(
    geom: &SystemGeometry,
    table: &PairTable,
    abar: Vec3,
    ebar: Vec3,
    flags: CouplingFlags,
    wh: &CMatrix,
    ws: &CMatrix,
) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); geom.n_atoms()];
    for_each_pair(geom, table, &abar, &ebar, flags, |i, j, ctx| {
        let (ab, ak) = (geom.roster[i].atom, geom.roster[j].atom);
        if ab == ak {
            return;
        }
        let dressed = ctx.dress();
        let grad = ctx.gradient(&dressed);
        let (h, s) = (wh[(i, j)], ws[(i, j)]);
        for k in 0..3 {
            out[ab][k] += (h * grad.dh_bra[k] - s * grad.ds_bra[k]).re;
            out[ak][k] += (h * grad.dh_ket[k] - s * grad.ds_ket[k]).re;
        }
    });
    out
}

/// ψ'(ℓ) = exp(iqΔĀ·X_ℓ/ħc) ψ(ℓ).
pub fn gauge_shift(state: &ElectronState, geom: &SystemGeometry, delta_a: Vec3) -> ElectronState {
    let phases = gauge_phases(geom, delta_a);
    let mut out = state.clone();
    for psi in out.psi.iter_mut() {
        for (l, c) in psi.iter_mut().enumerate() {
            *c *= phases[l];
        }
    }
    out
}

/// Diagonal of the gauge transformation for a constant shift of Ā.
pub fn gauge_phases(geom: &SystemGeometry, a: Vec3) -> Vec<C64> {
    (0..geom.n_orbitals())
        .map(|l| (I * (ELECTRON_CHARGE * a.dot(&geom.center(l)) / (HBAR * SPEED_OF_LIGHT))).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Atom;
    use crate::model_basis::{OrbitalSpec, ShellKind, Species};

    fn table() -> PairTable {
        let mk = |name: &str, shells: &[(ShellKind, f64, f64)]| Species {
            name: name.into(),
            mass: 1836.0,
            hueckel_k: 1.75,
            orbitals: shells
                .iter()
                .map(|&(k, a, e)| OrbitalSpec::new(name, k, a, e))
                .collect(),
        };
        PairTable::new(vec![
            mk("H", &[(ShellKind::S, 0.4, -0.5)]),
            mk(
                "C",
                &[
                    (ShellKind::S, 0.3, -0.7),
                    (ShellKind::Px, 0.25, -0.4),
                    (ShellKind::Py, 0.25, -0.4),
                    (ShellKind::Pz, 0.25, -0.4),
                ],
            ),
        ])
        .unwrap()
    }

    fn geometry(t: &PairTable) -> SystemGeometry {
        let mut g = SystemGeometry::from_positions(
            t,
            &[("H", [0.0, 0.0, 0.0]), ("C", [0.3, 0.2, 2.1]), ("H", [-0.4, 1.8, 3.0])],
        )
        .unwrap();
        let v = [Vec3::new(1e-3, -2e-3, 5e-4), Vec3::new(-3e-4, 1e-4, 2e-4), Vec3::new(0.0, 4e-4, -1e-3)];
        g.set_velocities(&v);
        g
    }

    #[test]
    fn zero_field_reproduces_field_free_matrices() {
        let t = table();
        let mut g = geometry(&t);
        g.set_velocities(&vec![Vec3::zeros(); 3]);
        let (s0, h0) = field_free(&g, &t);
        let m = assemble(&g, &t, Vec3::zeros(), Vec3::zeros(), CouplingFlags::default(), 0.0);
        assert_eq!(m.s, s0);
        assert_eq!(m.h, h0);
        assert_eq!((&m.h - m.h.adjoint()).norm(), 0.0);
    }

    #[test]
    fn peierls_phases_keep_overlap_moduli() {
        let t = table();
        let g = geometry(&t);
        let (s0, _) = field_free(&g, &t);
        let a = Vec3::new(0.0, 3.0, 7.0);
        let m = assemble(&g, &t, a, Vec3::new(0.0, 0.01, 0.0), CouplingFlags::default(), 0.0);
        for i in 0..s0.nrows() {
            for j in 0..s0.ncols() {
                assert!((m.s[(i, j)].norm() - s0[(i, j)].norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_atom_peierls_only_is_field_free() {
        let t = table();
        let g = SystemGeometry::from_positions(&t, &[("C", [1.0, 2.0, 3.0])]).unwrap();
        let (_, h0) = field_free(&g, &t);
        let flags = CouplingFlags::with_mode(CouplingMode::PeierlsOnly);
        let m = assemble(&g, &t, Vec3::new(5.0, 1.0, -3.0), Vec3::new(0.1, 0.0, 0.2), flags, 0.0);
        assert_eq!(m.h, h0);
        let full = assemble(&g, &t, Vec3::new(5.0, 1.0, -3.0), Vec3::new(0.1, 0.0, 0.2), CouplingFlags::default(), 0.0);
        assert!((&full.h - &h0).norm() > 1e-3);
    }

    #[test]
    fn full_mode_without_dipole_or_momentum_equals_peierls_only() {
        let t = table();
        let mut g = geometry(&t);
        g.set_velocities(&vec![Vec3::zeros(); 3]);
        let abar = Vec3::new(1.0, -2.0, 4.0);
        let ebar = Vec3::new(0.02, 0.01, -0.03);
        for_each_pair(&g, &t, &abar, &ebar, CouplingFlags::default(), |_, _, ctx| {
            let mut e = *ctx.e;
            e.mu0 = [0.0; 3];
            e.grad = [0.0; 3];
            let mut full = PairContext { e: &e, ..*ctx };
            full.flags = CouplingFlags::default();
            let mut peierls = PairContext { e: &e, ..*ctx };
            peierls.flags = CouplingFlags::with_mode(CouplingMode::PeierlsOnly);
            let (a, b) = (full.dress(), peierls.dress());
            assert_eq!(a.h.re.to_bits(), b.h.re.to_bits());
            assert_eq!(a.h.im.to_bits(), b.h.im.to_bits());
        });
    }

    #[test]
    fn anti_hermitian_part_tracks_overlap_rate() {
        // H - H† = -iħ dS/dt along the motion, for a changing field and moving nuclei.
        let t = table();
        let g = geometry(&t);
        let pulse = crate::field::PulseSpec::new(4.0, 0.3, crate::field::Envelope::Constant, 1.0, [0.0, 0.6, 0.8], 0.0)
            .unwrap()
            .with_phase(0.4);
        let t0 = 2.0;
        let h = 1e-5;
        let s_at = |dt: f64| {
            let mut gg = g.clone();
            let x: Vec<Vec3> = g.atoms.iter().map(|a| a.position + a.velocity * dt).collect();
            gg.set_positions(&x);
            assemble_overlap(&gg, &t, pulse.a_bar(t0 + dt))
        };
        let sdot = (s_at(h) - s_at(-h)) / C64::new(2.0 * h, 0.0);
        let m = assemble(&g, &t, pulse.a_bar(t0), pulse.e_bar(t0), CouplingFlags::default(), t0);
        let lhs = &m.h - m.h.adjoint();
        let rhs = sdot * C64::new(0.0, -1.0);
        assert!((&lhs - &rhs).norm() < 1e-8 * rhs.norm().max(1e-3), "{}", (&lhs - &rhs).norm());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let t = table();
        let g = geometry(&t);
        let abar = Vec3::new(2.0, -1.0, 3.0);
        let ebar = Vec3::new(0.03, -0.01, 0.02);
        for mode in [CouplingMode::Full, CouplingMode::PeierlsOnly, CouplingMode::GeneralizedPeierls] {
            let flags = CouplingFlags::with_mode(mode);
            let grad = assemble_gradients(&g, &t, abar, ebar, flags);
            let h = 1e-5;
            for atom in 0..3 {
                for k in 0..3 {
                    let shifted = |delta: f64| {
                        let mut gg = g.clone();
                        let mut x = g.positions();
                        x[atom][k] += delta;
                        gg.set_positions(&x);
                        assemble_sh(&gg, &t, abar, ebar, flags)
                    };
                    let (sp, hp) = shifted(h);
                    let (sm, hm) = shifted(-h);
                    let scale = C64::new(1.0 / (2.0 * h), 0.0);
                    let fds = (sp - sm) * scale;
                    let fdh = (hp - hm) * scale;
                    let c = 3 * atom + k;
                    assert!((&grad.ds[c] - fds).norm() < 1e-8, "{mode:?} dS atom {atom} axis {k}");
                    assert!((&grad.dh[c] - fdh).norm() < 1e-8, "{mode:?} dH atom {atom} axis {k}");
                }
            }
        }
    }

    #[test]
    fn gauge_shift_identity_cases() {
        let t = table();
        let g = SystemGeometry::new(
            &t,
            vec![Atom { species: 1, position: Vec3::zeros(), velocity: Vec3::zeros() }],
        )
        .unwrap();
        let psi = crate::CVector::from_fn(4, |i, _| C64::new(i as f64, 1.0));
        let st = ElectronState::new(vec![psi], vec![2.0], 0.0);
        let shifted = gauge_shift(&st, &g, Vec3::new(0.3, 0.2, 0.5));
        assert_eq!(shifted.psi[0], st.psi[0]);
        let g2 = geometry(&t);
        let psi = crate::CVector::from_fn(g2.n_orbitals(), |i, _| C64::new(1.0, i as f64));
        let st = ElectronState::new(vec![psi], vec![2.0], 0.0);
        assert_eq!(gauge_shift(&st, &g2, Vec3::zeros()).psi[0], st.psi[0]);
    }
}
