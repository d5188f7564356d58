//! Closed-form two-center integrals over normalized Cartesian Gaussians.
//!
//! The bra orbital sits at displacement `d` from the ket orbital, which is
//! placed at the origin. Every quantity below is a function of `d` only.
//! One-dimensional factors come from the Obara–Saika recurrence; derivatives
//! with respect to `d` shift the bra power, moments and gradients shift the
//! ket power.

use std::f64::consts::PI;

/// Highest 1D power needed: l ≤ 1 plus two bra derivatives or one moment
/// and one gradient.
const MAX_POWER: usize = 4;

/// A primitive normalized Cartesian Gaussian N·xⁱyʲzᵏ·exp(-α r²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub alpha: f64,
    pub powers: [usize; 3],
}

impl Primitive {
    pub fn new(alpha: f64, powers: [usize; 3]) -> Self {
        Primitive { alpha, powers }
    }

    pub fn angular_momentum(&self) -> usize {
        self.powers.iter().sum()
    }

    pub fn normalization(&self) -> f64 {
        let l = self.angular_momentum() as i32;
        let double_factorial: f64 = self
            .powers
            .iter()
            .map(|&p| (1..=p).map(|k| (2 * k - 1) as f64).product::<f64>())
            .product();
        (2.0 * self.alpha / PI).powf(0.75) * (4.0 * self.alpha).powf(l as f64 / 2.0)
            / double_factorial.sqrt()
    }
}

/// 1D overlap table I[i][j] = ∫ (y-d)ⁱ yʲ exp(-a(y-d)² - b y²) dy.
struct Overlap1d {
    table: [[f64; MAX_POWER + 1]; MAX_POWER + 1],
    a: f64,
    b: f64,
}

impl Overlap1d {
    fn new(a: f64, b: f64, d: f64) -> Self {
        let p = a + b;
        let mu = a * b / p;
        let pa = -b * d / p;
        let pb = a * d / p;
        let mut t = [[0.0; MAX_POWER + 1]; MAX_POWER + 1];
        t[0][0] = (PI / p).sqrt() * (-mu * d * d).exp();
        let half_inv_p = 0.5 / p;
        for i in 0..=MAX_POWER {
            for j in 0..=MAX_POWER {
                if i == 0 && j == 0 {
                    continue;
                }
                t[i][j] = if i > 0 {
                    let (ii, jj) = (i - 1, j);
                    let mut v = pa * t[ii][jj];
                    if ii > 0 {
                        v += half_inv_p * ii as f64 * t[ii - 1][jj];
                    }
                    if jj > 0 {
                        v += half_inv_p * jj as f64 * t[ii][jj - 1];
                    }
                    v
                } else {
                    let (ii, jj) = (i, j - 1);
                    let mut v = pb * t[ii][jj];
                    if jj > 0 {
                        v += half_inv_p * jj as f64 * t[ii][jj - 1];
                    }
                    v
                };
            }
        }
        Overlap1d { table: t, a, b }
    }

    fn get(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 {
            0.0
        } else {
            self.table[i as usize][j as usize]
        }
    }

    /// ∂/∂d of I(i, j).
    fn d_bra(&self, i: isize, j: isize) -> f64 {
        -(i as f64) * self.get(i - 1, j) + 2.0 * self.a * self.get(i + 1, j)
    }

    /// ∂²/∂d² of I(i, j).
    fn d2_bra(&self, i: isize, j: isize) -> f64 {
        let a = self.a;
        let fi = i as f64;
        fi * (fi - 1.0) * self.get(i - 2, j) - 2.0 * a * (2.0 * fi + 1.0) * self.get(i, j)
            + 4.0 * a * a * self.get(i + 2, j)
    }

    /// ∫ bra · ∂_y ket.
    fn ket_gradient(&self, i: isize, j: isize) -> f64 {
        j as f64 * self.get(i, j - 1) - 2.0 * self.b * self.get(i, j + 1)
    }
}

/// All two-center quantities for one ordered orbital pair at displacement `d`.
///
/// `mu` is the first moment about the ket center without the charge factor;
/// `grad` is ∫ φ' ∇φ. Derivative indices are `[component][d-axis]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairIntegrals {
    pub s: f64,
    pub ds: [f64; 3],
    pub d2s: [[f64; 3]; 3],
    pub mu: [f64; 3],
    pub dmu: [[f64; 3]; 3],
    pub grad: [f64; 3],
}

pub fn pair_integrals(bra: &Primitive, ket: &Primitive, d: [f64; 3]) -> PairIntegrals {
    let norm = bra.normalization() * ket.normalization();
    let mut o = [0.0; 3];
    let mut dov = [0.0; 3];
    let mut d2o = [0.0; 3];
    let mut m = [0.0; 3];
    let mut dm = [0.0; 3];
    let mut g = [0.0; 3];
    for axis in 0..3 {
        let t = Overlap1d::new(bra.alpha, ket.alpha, d[axis]);
        let i = bra.powers[axis] as isize;
        let j = ket.powers[axis] as isize;
        o[axis] = t.get(i, j);
        dov[axis] = t.d_bra(i, j);
        d2o[axis] = t.d2_bra(i, j);
        m[axis] = t.get(i, j + 1);
        dm[axis] = t.d_bra(i, j + 1);
        g[axis] = t.ket_gradient(i, j);
    }
    // Product of the plain overlap factors on the axes not listed.
    let rest = |skip: &[usize]| -> f64 {
        (0..3)
            .filter(|a| !skip.contains(a))
            .map(|a| o[a])
            .product::<f64>()
    };
    let mut out = PairIntegrals {
        s: norm * o[0] * o[1] * o[2],
        ..Default::default()
    };
    for k in 0..3 {
        out.ds[k] = norm * dov[k] * rest(&[k]);
        out.mu[k] = norm * m[k] * rest(&[k]);
        out.grad[k] = norm * g[k] * rest(&[k]);
        for l in 0..3 {
            out.d2s[k][l] = if k == l {
                norm * d2o[k] * rest(&[k])
            } else {
                norm * dov[k] * dov[l] * rest(&[k, l])
            };
            out.dmu[k][l] = if k == l {
                norm * dm[k] * rest(&[k])
            } else {
                norm * m[k] * dov[l] * rest(&[k, l])
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn self_overlap_is_one() {
        for powers in [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            let g = Primitive::new(0.7, powers);
            let ints = pair_integrals(&g, &g, [0.0; 3]);
            assert_relative_eq!(ints.s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn equal_exponent_s_overlap_closed_form() {
        let g = Primitive::new(0.5, [0, 0, 0]);
        let d = [0.3, -1.2, 0.7];
        let r2: f64 = d.iter().map(|x| x * x).sum();
        let ints = pair_integrals(&g, &g, d);
        assert_relative_eq!(ints.s, (-0.5 * 0.5 * r2).exp(), epsilon = 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let bra = Primitive::new(0.45, [1, 0, 0]);
        let ket = Primitive::new(0.8, [0, 0, 1]);
        let d = [0.9, 0.4, -1.1];
        let h = 1e-5;
        let base = pair_integrals(&bra, &ket, d);
        for k in 0..3 {
            let mut dp = d;
            let mut dm = d;
            dp[k] += h;
            dm[k] -= h;
            let p = pair_integrals(&bra, &ket, dp);
            let m = pair_integrals(&bra, &ket, dm);
            assert_relative_eq!(base.ds[k], (p.s - m.s) / (2.0 * h), epsilon = 1e-9);
            for j in 0..3 {
                assert_relative_eq!(
                    base.d2s[j][k],
                    (p.ds[j] - m.ds[j]) / (2.0 * h),
                    epsilon = 1e-8
                );
                assert_relative_eq!(
                    base.dmu[j][k],
                    (p.mu[j] - m.mu[j]) / (2.0 * h),
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn ket_gradient_equals_displacement_derivative() {
        let bra = Primitive::new(0.3, [0, 1, 0]);
        let ket = Primitive::new(0.6, [0, 1, 0]);
        let ints = pair_integrals(&bra, &ket, [0.2, 1.5, -0.4]);
        for k in 0..3 {
            assert_relative_eq!(ints.grad[k], ints.ds[k], epsilon = 1e-13);
        }
    }
}
