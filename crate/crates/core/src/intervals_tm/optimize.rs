//! Bounded scalar minimization: golden-section search accelerated by
//! parabolic interpolation (Brent's method).

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

/// Minimizes `f` on `[a, b]` to an abscissa tolerance of about `xtol`.
/// Fails on a non-finite function value or when `max_evaluations` is hit.
pub fn brent_minimize<F>(mut f: F, a: f64, b: f64, xtol: f64, max_evaluations: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Optimizer(format!("invalid bracket [{a}, {b}]")));
    }
    if !(xtol > 0.0) {
        return Err(Error::Optimizer(format!("tolerance must be positive, got {xtol}")));
    }
    let evals = std::cell::Cell::new(0usize);
    let mut eval = |x: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Optimizer(format!("objective is {y} at {x}")))
        }
    };

    let (mut lo, mut hi) = (a, b);
    let mut x = lo + GOLDEN * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        let tol1 = f64::EPSILON.sqrt() * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        if evals.get() >= max_evaluations {
            return Err(Error::Optimizer(format!(
                "no convergence after {} evaluations, bracket [{lo}, {hi}]",
                evals.get()
            )));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through (x, fx), (w, fw), (v, fv)
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { lo - x } else { hi - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = eval(u)?;
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(Minimum {
        x,
        value: fx,
        evaluations: evals.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_and_cosine() {
        let m = brent_minimize(|x| (x - 0.3) * (x - 0.3) + 1.0, -2.0, 5.0, 1e-12, 200).unwrap();
        assert!((m.x - 0.3).abs() < 1e-7, "{m:?}");
        assert!(m.evaluations < 30);
        let m = brent_minimize(f64::cos, 2.0, 4.0, 1e-12, 200).unwrap();
        assert!((m.x - std::f64::consts::PI).abs() < 1e-7);
        assert!((m.value + 1.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_objective_ends_at_boundary() {
        let m = brent_minimize(|x| x, 1.0, 2.0, 1e-10, 200).unwrap();
        assert!(m.x - 1.0 < 1e-7);
    }

    #[test]
    fn failures_are_reported() {
        assert!(brent_minimize(|x| x, 2.0, 1.0, 1e-10, 100).is_err());
        assert!(brent_minimize(|_| f64::NAN, 0.0, 1.0, 1e-10, 100).is_err());
        assert!(brent_minimize(|x| (x * 1e3).sin(), 0.0, 1.0, 1e-15, 3).is_err());
    }
}
