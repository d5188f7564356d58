//! Electron propagation for iħ S ∂ψ/∂t = H ψ in a moving nonorthogonal basis.
//!
//! With the Cholesky factor S = L L† the coefficients φ = L†ψ obey
//! iħ ∂φ/∂t = K φ with K = L⁻¹ H L⁻† + iħ L̇† L⁻†. Because H - H† = -iħ Ṡ for
//! the assembled matrices, K is Hermitian. Each step evaluates K at the
//! midpoint (L̇ by the difference of the endpoint factors, Hermitian part
//! enforced) and applies the Cayley transform, which is unitary in φ and hence
//! conserves ψ†Sψ and pairwise S-orthogonality exactly. For constant S it is
//! ordinary implicit midpoint. An optional rank-one absorber Γ = a a† adds
//! -(i/2)Γ to H and removes norm at rate |a†ψ|²/ħ.

use nalgebra::LU;
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, congruence_inverse, hermitian_part, metric_inner, solve_lower, solve_lower_adjoint};
use crate::{CMatrix, CVector, Error, Result, C64};
use crate::units::HBAR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectronState {
    pub psi: Vec<CVector>,
    pub occupations: Vec<f64>,
    pub t: f64,
}

impl ElectronState {
    pub fn new(psi: Vec<CVector>, occupations: Vec<f64>, t: f64) -> Self {
        assert_eq!(psi.len(), occupations.len(), "one occupation per state");
        ElectronState { psi, occupations, t }
    }

    /// Occupies the columns `indices` of `vectors`.
    pub fn from_columns(vectors: &CMatrix, indices: &[usize], occupations: &[f64], t: f64) -> Self {
        let psi = indices.iter().map(|&i| vectors.column(i).into_owned()).collect();
        ElectronState::new(psi, occupations.to_vec(), t)
    }

    pub fn n_states(&self) -> usize {
        self.psi.len()
    }

    pub fn dim(&self) -> usize {
        self.psi.first().map_or(0, |p| p.len())
    }

    pub fn electron_count(&self) -> f64 {
        self.occupations.iter().sum()
    }

    /// ψ_n†Sψ_n for every state.
    pub fn norms(&self, s: &CMatrix) -> Vec<f64> {
        self.psi.iter().map(|p| metric_inner(p, s, p).re).collect()
    }

    /// Largest |ψ_n†Sψ_m| over n ≠ m.
    pub fn max_cross_overlap(&self, s: &CMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..self.psi.len() {
            let sp = s * &self.psi[n];
            for m in 0..self.psi.len() {
                if m != n {
                    worst = worst.max(self.psi[m].dotc(&sp).norm());
                }
            }
        }
        worst
    }

    /// Σ_n f_n ψ_n ψ_n^† transposed into pair weights w(ℓ', ℓ) = Σ f ψ*(ℓ')ψ(ℓ).
    pub fn pair_weights(&self) -> CMatrix {
        let n = self.dim();
        let mut w = CMatrix::zeros(n, n);
        for (p, &f) in self.psi.iter().zip(&self.occupations) {
            w += (p.conjugate() * p.transpose()) * C64::new(f, 0.0);
        }
        w
    }
}

/// Operators at one instant: overlap, (non-Hermitian) Hamiltonian and an
/// optional absorber vector `a` with Γ = a a†.
#[derive(Debug, Clone)]
pub struct Operators {
    pub s: CMatrix,
    pub h: CMatrix,
    pub absorber: Option<CVector>,
}

/// Supplies S(t) and H(t) along a known path of nuclei and field.
pub trait OperatorSource {
    fn operators(&self, t: f64) -> Result<Operators>;

    fn overlap(&self, t: f64) -> Result<CMatrix> {
        Ok(self.operators(t)?.s)
    }
}

/// Time-independent operators.
#[derive(Debug, Clone)]
pub struct StaticSource {
    pub s: CMatrix,
    pub h: CMatrix,
}

impl OperatorSource for StaticSource {
    fn operators(&self, _t: f64) -> Result<Operators> {
        Ok(Operators {
            s: self.s.clone(),
            h: self.h.clone(),
            absorber: None,
        })
    }
}

/// Wraps a closure `t -> (S, H)`.
pub struct FnSource<F>(pub F);

impl<F> OperatorSource for FnSource<F>
where
    F: Fn(f64) -> Result<(CMatrix, CMatrix)>,
{
    fn operators(&self, t: f64) -> Result<Operators> {
        let (s, h) = (self.0)(t)?;
        Ok(Operators { s, h, absorber: None })
    }

    fn overlap(&self, t: f64) -> Result<CMatrix> {
        Ok((self.0)(t)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Largest tolerated one-step change of any ψ†Sψ that the absorber does not account for.
    pub drift_tolerance: f64,
    pub max_halvings: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            drift_tolerance: 1e-6,
            max_halvings: 8,
        }
    }
}

/// Result of one accepted step (possibly made of several halved substeps).
#[derive(Debug, Clone)]
pub struct StepReport {
    pub state: ElectronState,
    /// Norm removed by the absorber, per state.
    pub absorbed: Vec<f64>,
    /// Time-integrated absorber projection a†ψ̄ per state, scaled by -i dt.
    pub sink_amplitude: Vec<C64>,
    pub substeps: u32,
}

struct RawStep {
    psi: Vec<CVector>,
    absorbed: Vec<f64>,
    amplitude: Vec<C64>,
    drift: f64,
}

fn factor(s: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(s)?.l())
}

fn raw_step(psi: &[CVector], source: &dyn OperatorSource, t: f64, dt: f64) -> Result<RawStep> {
    let l0 = factor(&source.overlap(t)?)?;
    let l1 = factor(&source.overlap(t + dt)?)?;
    let mid = source.operators(t + 0.5 * dt)?;
    let lm = factor(&mid.s)?;
    let n = lm.nrows();

    let a = congruence_inverse(&lm, &mid.h)?;
    let c = solve_lower(&lm, &((&l1 - &l0) / C64::new(dt, 0.0)))?;
    let mut k = hermitian_part(&(a + c.adjoint() * C64::new(0.0, HBAR)));
    let b = match &mid.absorber {
        Some(av) => {
            let b = lm
                .solve_lower_triangular(av)
                .ok_or_else(|| Error::Singular("absorber transform".into()))?;
            k -= (&b * b.adjoint()) * C64::new(0.0, 0.5);
            Some(b)
        }
        None => None,
    };

    let half = C64::new(0.0, 0.5 * dt / HBAR);
    let eye = CMatrix::identity(n, n);
    let lhs = LU::new(&eye + &k * half);
    let rhs = &eye - &k * half;

    let phi0: Vec<CVector> = psi.iter().map(|p| l0.adjoint() * p).collect();
    let mut phi1 = Vec::with_capacity(psi.len());
    for p in &phi0 {
        let x = lhs
            .solve(&(&rhs * p))
            .ok_or_else(|| Error::Singular(format!("Cayley solve at t = {t}")))?;
        phi1.push(x);
    }
    let mut out = Vec::with_capacity(psi.len());
    let mut absorbed = Vec::with_capacity(psi.len());
    let mut amplitude = Vec::with_capacity(psi.len());
    let mut drift: f64 = 0.0;
    for (p0, p1) in phi0.iter().zip(&phi1) {
        let x1 = solve_lower_adjoint(&l1, &CMatrix::from_column_slice(n, 1, p1.as_slice()))?;
        out.push(x1.column(0).into_owned());
        let (loss, amp) = match &b {
            Some(b) => {
                let proj = b.dotc(&((p0 + p1) * C64::new(0.5, 0.0)));
                (dt * proj.norm_sqr() / HBAR, C64::new(0.0, -dt / HBAR) * proj)
            }
            None => (0.0, C64::new(0.0, 0.0)),
        };
        let change = p1.norm_squared() - p0.norm_squared();
        drift = drift.max((change + loss).abs());
        absorbed.push(loss);
        amplitude.push(amp);
    }
    Ok(RawStep {
        psi: out,
        absorbed,
        amplitude,
        drift,
    })
}

/// Advances every state from `state.t` to `state.t + dt`. `dt` may be
/// negative (exact time reversal of a forward step).
pub fn step(
    state: &ElectronState,
    source: &dyn OperatorSource,
    dt: f64,
    control: &StepControl,
) -> Result<StepReport> {
    let mut halvings = 0;
    loop {
        let pieces = 1u32 << halvings;
        let h = dt / pieces as f64;
        match try_substeps(state, source, h, pieces, control.drift_tolerance) {
            Ok(mut report) => {
                report.substeps = pieces;
                report.state.t = state.t + dt;
                return Ok(report);
            }
            Err(Error::NormDrift { drift, .. }) => {
                if halvings >= control.max_halvings {
                    return Err(Error::NormDrift {
                        t: state.t,
                        drift,
                        halvings,
                    });
                }
                halvings += 1;
                log::debug!("norm drift {drift:e} at t = {}; halving dt", state.t);
            }
            Err(e) => return Err(e),
        }
    }
}

fn try_substeps(
    state: &ElectronState,
    source: &dyn OperatorSource,
    h: f64,
    pieces: u32,
    tolerance: f64,
) -> Result<StepReport> {
    let n = state.n_states();
    let mut psi = state.psi.clone();
    let mut absorbed = vec![0.0; n];
    let mut amplitude = vec![C64::new(0.0, 0.0); n];
    for i in 0..pieces {
        let t = state.t + h * i as f64;
        let raw = raw_step(&psi, source, t, h)?;
        if !(raw.drift <= tolerance) {
            return Err(Error::NormDrift {
                t,
                drift: raw.drift,
                halvings: 0,
            });
        }
        psi = raw.psi;
        for k in 0..n {
            absorbed[k] += raw.absorbed[k];
            amplitude[k] += raw.amplitude[k];
        }
    }
    Ok(StepReport {
        state: ElectronState::new(psi, state.occupations.clone(), state.t),
        absorbed,
        sink_amplitude: amplitude,
        substeps: pieces,
    })
}

/// One recorded sample of a free propagation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub norms: Vec<f64>,
    pub max_cross_overlap: f64,
}

/// Repeated steps until `t_end`, sampling norms every `stride` steps and at the end.
pub fn propagate(
    state: &ElectronState,
    source: &dyn OperatorSource,
    t_end: f64,
    dt: f64,
    stride: usize,
    control: &StepControl,
) -> Result<(ElectronState, Vec<NormSample>)> {
    if !(t_end > state.t) || !(dt > 0.0) {
        return Err(Error::config("integrator", "propagation needs t_end > t and dt > 0"));
    }
    let stride = stride.max(1);
    let steps = ((t_end - state.t) / dt - 1e-9).ceil().max(1.0) as usize;
    let h = (t_end - state.t) / steps as f64;
    let t0 = state.t;
    let mut current = state.clone();
    let mut samples = Vec::new();
    let sample = |st: &ElectronState| -> Result<NormSample> {
        let s = source.overlap(st.t)?;
        Ok(NormSample {
            t: st.t,
            norms: st.norms(&s),
            max_cross_overlap: st.max_cross_overlap(&s),
        })
    };
    samples.push(sample(&current)?);
    for i in 0..steps {
        let mut next = step(&current, source, h, control)?.state;
        // Avoid accumulating rounding in the clock.
        next.t = t0 + h * (i + 1) as f64;
        current = next;
        if (i + 1) % stride == 0 || i + 1 == steps {
            samples.push(sample(&current)?);
        }
    }
    Ok((current, samples))
}
