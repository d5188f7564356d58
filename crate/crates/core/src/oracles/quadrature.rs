//! Adaptive Gauss–Kronrod quadrature of two-center matrix elements.
//!
//! The orbitals are Cartesian Gaussians, so every integrand used here is a
//! product of one-dimensional factors. `matrix_element` integrates each axis
//! with adaptive G7/K15 and multiplies (Fubini); `cube` is a plain nested 3D
//! integration kept for spot checks of that factorization. Normalization is
//! obtained numerically as well.

use crate::model_basis::OrbitalSpec;
use crate::oracles::OracleResult;
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |K - G|).
fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive integration until the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    const MAX_PANELS: usize = 2000;
    let mut panels = vec![{
        let (v, e) = kronrod(&mut f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                error: err,
                evaluations: panels.len(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (pa + pb);
        let (v1, e1) = kronrod(&mut f, pa, m);
        let (v2, e2) = kronrod(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
}

/// Nested 3D integration over a box.
pub fn cube<F: Fn(f64, f64, f64) -> f64>(f: F, lo: [f64; 3], hi: [f64; 3], abs_tol: f64) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    let (v, e) = integrate(
        |x| {
            let r = integrate(
                |y| {
                    let r = integrate(|z| f(x, y, z), lo[2], hi[2], abs_tol * 1e-2, 1e-12);
                    match r {
                        Ok((v, _)) => v,
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                },
                lo[1],
                hi[1],
                abs_tol * 1e-1,
                1e-12,
            );
            match r {
                Ok((v, e)) => {
                    worst = worst.max(e);
                    v
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        lo[0],
        hi[0],
        abs_tol,
        1e-12,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((v, e + worst * (hi[0] - lo[0])))
}

/// Which operator sits between the orbitals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Overlap,
    /// Moment (x - X)_axis about the ket center, without the charge.
    Moment(usize),
    /// ∂/∂x_axis acting on the ket, taken numerically.
    Gradient(usize),
}

fn powers(o: &OrbitalSpec) -> [i32; 3] {
    o.kind.powers().map(|p| p as i32)
}

/// Unnormalized 1D factor xᵖ e^{-αx²}.
fn factor(p: i32, alpha: f64, x: f64) -> f64 {
    x.powi(p) * (-alpha * x * x).exp()
}

const STENCIL_STEP: f64 = 1e-3;

/// Fourth-order central difference of the 1D ket factor.
fn factor_derivative(p: i32, alpha: f64, x: f64) -> f64 {
    let h = STENCIL_STEP;
    (-factor(p, alpha, x + 2.0 * h) + 8.0 * factor(p, alpha, x + h) - 8.0 * factor(p, alpha, x - h)
        + factor(p, alpha, x - 2.0 * h))
        / (12.0 * h)
}

fn half_width(alpha: f64) -> f64 {
    12.0 / alpha.sqrt()
}

/// 1/√∫φ² for the unnormalized Gaussian, by quadrature.
pub fn normalization(o: &OrbitalSpec, tol: f64) -> Result<f64> {
    let w = half_width(o.alpha);
    let mut prod = 1.0;
    for p in powers(o) {
        let (v, _) = integrate(|x| factor(p, o.alpha, x).powi(2), -w, w, tol * 1e-2, tol * 1e-2)?;
        prod *= v;
    }
    Ok(1.0 / prod.sqrt())
}

/// ∫ φ_bra(x - d) Ô φ_ket(x) d³x, real part only (all such integrands are real).
/// For `Gradient` the caller multiplies by -iħ to obtain the momentum element.
pub fn matrix_element(kind: ElementKind, bra: &OrbitalSpec, ket: &OrbitalSpec, d: [f64; 3], tol: f64) -> Result<OracleResult> {
    let nb = normalization(bra, tol)?;
    let nk = normalization(ket, tol)?;
    let (pb, pk) = (powers(bra), powers(ket));
    let w = half_width(bra.alpha.min(ket.alpha));
    let mut value = nb * nk;
    let mut rel_err = 0.0;
    for axis in 0..3 {
        let lo = d[axis].min(0.0) - w;
        let hi = d[axis].max(0.0) + w;
        let bra_f = |x: f64| factor(pb[axis], bra.alpha, x - d[axis]);
        let (v, e) = match kind {
            ElementKind::Moment(k) if k == axis => {
                integrate(|x| bra_f(x) * x * factor(pk[axis], ket.alpha, x), lo, hi, tol * 1e-2, tol * 1e-2)?
            }
            ElementKind::Gradient(k) if k == axis => {
                integrate(|x| bra_f(x) * factor_derivative(pk[axis], ket.alpha, x), lo, hi, tol * 1e-2, tol * 1e-2)?
            }
            _ => integrate(|x| bra_f(x) * factor(pk[axis], ket.alpha, x), lo, hi, tol * 1e-2, tol * 1e-2)?,
        };
        value *= v;
        rel_err += e / v.abs().max(1e-300);
    }
    let mut error = (rel_err * value.abs()).max(tol * 1e-2);
    if let ElementKind::Gradient(_) = kind {
        // Truncation of the 4-point stencil, h⁴ f⁽⁵⁾/30 with f⁽⁵⁾ ~ α^{5/2}.
        let a = ket.alpha.max(bra.alpha);
        error += STENCIL_STEP.powi(4) * a.powf(2.5) * value.abs().max(1.0);
    }
    let method = match kind {
        ElementKind::Overlap => "adaptive G7K15 per axis, overlap",
        ElementKind::Moment(_) => "adaptive G7K15 per axis, ket-centered moment",
        ElementKind::Gradient(_) => "adaptive G7K15 per axis, 4-point stencil on ket",
    };
    Ok(OracleResult::scalar(value, error, method))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_basis::ShellKind;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        let (v, _) = integrate(|x| x.powi(10) - 3.0 * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 1.5 * (4.0 - 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn self_overlap_is_one() {
        let o = OrbitalSpec::new("X", ShellKind::Py, 0.45, 0.0);
        let r = matrix_element(ElementKind::Overlap, &o, &o, [0.0; 3], 1e-10).unwrap();
        assert!((r.value() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nested_cube_agrees_with_factorized_overlap() {
        let a = OrbitalSpec::new("X", ShellKind::S, 0.5, 0.0);
        let b = OrbitalSpec::new("X", ShellKind::Pz, 0.6, 0.0);
        let d = [0.3, -0.2, 1.1];
        let r = matrix_element(ElementKind::Overlap, &a, &b, d, 1e-10).unwrap();
        let na = normalization(&a, 1e-10).unwrap();
        let nb = normalization(&b, 1e-10).unwrap();
        let g = |x: f64, y: f64, z: f64| {
            let bra = (-a.alpha * ((x - d[0]).powi(2) + (y - d[1]).powi(2) + (z - d[2]).powi(2))).exp();
            let ket = z * (-b.alpha * (x * x + y * y + z * z)).exp();
            na * nb * bra * ket
        };
        let w = 9.0;
        let (v, _) = cube(g, [-w; 3], [w; 3], 1e-9).unwrap();
        assert!((v - r.value()).abs() < 1e-8, "{v} vs {}", r.value());
    }
}
