//! Finite differences and a one-dimensional minimizer.

use crate::{Error, Result};

/// Central difference (f(x+h) - f(x-h))/2h.
pub fn central<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Gradient of a function of many variables by central differences.
pub fn gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Golden-section minimization on [a, b] to absolute tolerance `tol`.
pub fn golden_minimize<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Root of `g` in [a, b] by bisection; `g(a)` and `g(b)` must differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut g: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut ga = g(a);
    let gb = g(b);
    if ga * gb > 0.0 {
        return Err(Error::Singular(format!("no sign change on [{a}, {b}]")));
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if ga * gm < 0.0 {
            b = m;
        } else {
            a = m;
            ga = gm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Minimizer of a smooth 1D function: golden section to bracket, then the
/// root of the finite-difference derivative, which is far more precise than
/// the flat minimum itself.
pub fn minimize<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, h: f64) -> Result<f64> {
    let rough = golden_minimize(&mut f, a, b, 1e-3);
    let w = 0.05 * (b - a);
    bisect(|x| central(&mut f, x, h), rough - w, rough + w, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizer_finds_parabola_vertex() {
        let x = minimize(|x| (x - 1.2345).powi(2) + 3.0, 0.0, 3.0, 1e-4).unwrap();
        assert!((x - 1.2345).abs() < 1e-10);
    }

    #[test]
    fn gradient_of_quadratic_form() {
        let g = gradient(|x| x[0] * x[0] + 3.0 * x[0] * x[1], &[1.0, 2.0], 1e-5);
        assert!((g[0] - 8.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }
}
