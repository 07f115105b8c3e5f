//! Remainder formulas.
//!
//! All high-precision functions evaluate at the precision of their `v`
//! argument; the expansion's own coefficients are only used by
//! [`measured_error`].

use rayon::prelude::*;

use super::{factorial, ActivationKind, AmiteExpansion};
use crate::mpcore::{hyp2f1_complex, hypergeometric, integrate, sine_integral, Complex, Real, GUARD_DIGITS};
use crate::{Error, Result};

/// Error curves of one expansion on a grid of `v` values.
#[derive(Clone, Debug, Default)]
pub struct ErrorReport {
    pub grid: Vec<f64>,
    /// `phi(v)` in double precision.
    pub phi: Vec<f64>,
    /// Polynomial evaluated in double precision.
    pub phi_approx: Vec<f64>,
    /// `E = phi - phi_a` evaluated at high precision.
    pub measured: Vec<f64>,
    /// `phi - phi_a` with the polynomial evaluated in double precision.
    pub measured_double: Vec<f64>,
    /// Exact remainder `H`.
    pub exact: Vec<f64>,
    /// Exact oscillating component.
    pub oscillating: Vec<f64>,
    /// Cheap approximation `I` of the oscillating component.
    pub approximate: Vec<f64>,
    /// `E - H`, subtracted before rounding to double.
    pub measured_minus_exact: Vec<f64>,
    /// `E - I`, subtracted before rounding to double.
    pub measured_minus_approximate: Vec<f64>,
}

fn kernel_at(expansion: &AmiteExpansion, digits: u32) -> Real {
    expansion.kernel_bound().with_digits(digits)
}

/// `phi(v) - phi_a(v)` at the wider of the precisions of `v` and the
/// coefficients.
pub fn measured_error(expansion: &AmiteExpansion, v: &Real) -> Real {
    let d = v.digits().max(expansion.digits());
    let v = v.with_digits(d);
    expansion.kind().apply_real(&v) - expansion.evaluate_real(&v)
}

/// Oscillating tanh error `int_tau^inf csch(pi xi/2) sin(xi v) dxi` in closed
/// form `P (U F + U* F*)` with `P = e^{pi tau/2}/(e^{pi tau} - 1)`,
/// `U = e^{-i tau v}/(v - i pi/2)` and
/// `F = 2F1(1, 1; 3/2 + i v/pi; 1/(1 - e^{pi tau}))`.
///
/// `F` and its conjugate are summed independently; an imaginary part above
/// `10^{5-D}` (relative to the result, or absolute below 1) is reported as
/// [`Error::ImaginaryResidue`].
pub fn tanh_error_oscillating_exact(expansion: &AmiteExpansion, v: &Real) -> Result<Real> {
    let d = v.digits();
    if v.is_zero() {
        return Ok(Real::zero(d));
    }
    let work = d + GUARD_DIGITS;
    let v = v.with_digits(work);
    let tau = kernel_at(expansion, work);
    let pi = Real::pi(work);
    let e = (&pi * &tau).exp();
    let prefactor = (&pi * &tau / 2i64).exp() / (&e - 1i64);
    let w = Real::one(work) / (Real::one(work) - &e);

    let one = Complex::from_real(Real::one(work));
    let c = Complex::new(Real::from_f64(1.5, work), &v / &pi);
    let f = hyp2f1_complex(&one, &one, &c, &w)?;
    let f_conj = hyp2f1_complex(&one, &one, &c.conj(), &w)?;
    let u = &Complex::cis(&-(&tau * &v)) / &Complex::new(v.clone(), -(&pi / 2i64));
    let sum = &(&u * &f) + &(&u.conj() * &f_conj);
    let value = &sum.re * &prefactor;
    let residue = (&sum.im * &prefactor).abs();
    let tolerance = 10f64.powi(5 - d as i32) * value.abs().to_f64().max(1.0);
    if residue.to_f64() > tolerance {
        return Err(Error::ImaginaryResidue {
            residue: residue.to_f64(),
            tolerance,
        });
    }
    Ok(value.with_digits(d))
}

/// The same oscillating integral by tanh-sinh quadrature over half-period
/// panels, truncated where the `csch` envelope drops below `10^{-D-10}`.
/// Independent of the hypergeometric route.
pub fn tanh_error_oscillating_quadrature(expansion: &AmiteExpansion, v: &Real) -> Result<Real> {
    let d = v.digits();
    if v.is_zero() {
        return Ok(Real::zero(d));
    }
    let work = d + 5;
    let v = v.with_digits(work);
    let tau = kernel_at(expansion, work);
    let half_pi = Real::pi(work) / 2i64;
    // 2 e^{-pi xi/2} < 10^{-D-10}
    let xi_max = ((d as f64 + 10.0) * std::f64::consts::LN_10 + 2f64.ln()) / std::f64::consts::FRAC_PI_2;
    let panel = (std::f64::consts::PI / v.abs().to_f64()).min(2.0);
    let mut lo = tau.clone();
    let mut total = Real::zero(work);
    while lo.to_f64() < xi_max {
        let hi = &lo + panel;
        total += integrate(|x| (&half_pi * x).csch() * (x * &v).sin(), &lo, &hi, work)?;
        lo = hi;
    }
    Ok(total.with_digits(d))
}

/// Closed-form approximation of the oscillating tanh error:
/// `4 e^{pi tau/2} (pi sin(tau v) + 2 v cos(tau v)) / ((e^{pi tau} - 1)(4 v^2 + pi^2))`.
pub fn tanh_error_approx(expansion: &AmiteExpansion, v: &Real) -> Real {
    let d = v.digits();
    let work = d + GUARD_DIGITS;
    let v = v.with_digits(work);
    let tau = kernel_at(expansion, work);
    let pi = Real::pi(work);
    let (s, c) = (&tau * &v).sin_cos();
    let num = (&pi * s + &v * c * 2i64) * 4i64 * (&pi * &tau / 2i64).exp();
    let den = ((&pi * &tau).exp() - 1i64) * (&v * &v * 4i64 + &pi * &pi);
    (num / den).with_digits(d)
}

/// Double-precision form of [`tanh_error_approx`] for a kernel bound `tau`.
pub fn tanh_error_approx_f64(tau: f64, v: f64) -> f64 {
    use std::f64::consts::PI;
    let p = (-PI * tau / 2.0).exp() / (-(-PI * tau).exp_m1());
    let (s, c) = (tau * v).sin_cos();
    4.0 * p * (PI * s + 2.0 * v * c) / (4.0 * v * v + PI * PI)
}

/// Exact tanh remainder: the oscillating integral plus
/// `((-1)^{M+1} v^L / L!) int_0^tau xi^L csch(pi xi/2) 1F2(1; M+2, M+5/2; -v^2 xi^2/4) dxi`
/// with `L = 2M + 3`.
pub fn tanh_error_exact(expansion: &AmiteExpansion, v: &Real) -> Result<Real> {
    let d = v.digits();
    if v.is_zero() {
        return Ok(Real::zero(d));
    }
    let oscillating = tanh_error_oscillating_exact(expansion, v)?;
    let work = d + GUARD_DIGITS;
    let m = expansion.terms();
    let l = 2 * m + 3;
    let vw = v.with_digits(work);
    let tau = kernel_at(expansion, work);
    let half_pi = Real::pi(work) / 2i64;
    let a = [Real::one(work)];
    let b = [Real::from_i64(m as i64 + 2, work), Real::from_f64(m as f64 + 2.5, work)];
    let neg_v2_4 = -(&vw * &vw) / 4i64;
    let integral = integrate(
        |x| {
            let z = &neg_v2_4 * x * x;
            let f = hypergeometric(&a, &b, &z).unwrap_or_else(|_| Real::from_f64(f64::NAN, work));
            x.powu(l) * (&half_pi * x).csch() * f
        },
        &Real::zero(work),
        &tau,
        work,
    )?;
    if !integral.is_finite() {
        return Err(Error::QuadratureNonconvergence { estimate: f64::NAN });
    }
    let sign = if m % 2 == 0 { -1i64 } else { 1i64 };
    let second = integral * vw.powu(l) * sign / factorial(l, work);
    Ok((oscillating.with_digits(work) + second).with_digits(d))
}

/// Oscillating ReLU error `|v|/2 - v Si(sigma v)/pi - cos(sigma v)/(pi sigma)`.
pub fn relu_error_oscillating(expansion: &AmiteExpansion, v: &Real) -> Real {
    let d = v.digits();
    let work = d + GUARD_DIGITS;
    let v = v.with_digits(work);
    let sigma = kernel_at(expansion, work);
    let pi = Real::pi(work);
    let sv = &sigma * &v;
    let value = v.abs() / 2i64 - &v * sine_integral(&sv) / &pi - sv.cos() / (&pi * &sigma);
    value.with_digits(d)
}

/// Exact ReLU remainder: the oscillating part plus
/// `(-1)^M sigma^{2M+1} v^{2M+2} / (pi (2M+2)! (2M+1))
///  2F3(1, M+1/2; M+3/2, M+3/2, M+2; -sigma^2 v^2/4)`.
pub fn relu_error_exact(expansion: &AmiteExpansion, v: &Real) -> Result<Real> {
    let d = v.digits();
    let work = d + GUARD_DIGITS;
    let oscillating = relu_error_oscillating(expansion, &v.with_digits(work));
    let m = expansion.terms();
    let vw = v.with_digits(work);
    let sigma = kernel_at(expansion, work);
    let pi = Real::pi(work);
    let mf = m as f64;
    let a = [Real::one(work), Real::from_f64(mf + 0.5, work)];
    let b = [
        Real::from_f64(mf + 1.5, work),
        Real::from_f64(mf + 1.5, work),
        Real::from_f64(mf + 2.0, work),
    ];
    let z = -(&sigma * &sigma * &vw * &vw) / 4i64;
    let f = hypergeometric(&a, &b, &z)?;
    let sign = if m % 2 == 0 { 1i64 } else { -1i64 };
    let prefactor =
        sigma.powu(2 * m + 1) * vw.powu(2 * m + 2) * sign / (&pi * factorial(2 * m + 2, work) * (2 * m as i64 + 1));
    Ok((oscillating + prefactor * f).with_digits(d))
}

/// Exact remainder `H` for either activation.
pub fn error_exact(expansion: &AmiteExpansion, v: &Real) -> Result<Real> {
    match expansion.kind() {
        ActivationKind::Tanh => tanh_error_exact(expansion, v),
        ActivationKind::Relu => relu_error_exact(expansion, v),
    }
}

/// Exact oscillating component for either activation.
pub fn error_oscillating(expansion: &AmiteExpansion, v: &Real) -> Result<Real> {
    match expansion.kind() {
        ActivationKind::Tanh => tanh_error_oscillating_exact(expansion, v),
        ActivationKind::Relu => Ok(relu_error_oscillating(expansion, v)),
    }
}

/// Cheap approximation `I`: the closed form for tanh, the oscillating part
/// itself for ReLU.
pub fn error_approx(expansion: &AmiteExpansion, v: &Real) -> Real {
    match expansion.kind() {
        ActivationKind::Tanh => tanh_error_approx(expansion, v),
        ActivationKind::Relu => relu_error_oscillating(expansion, v),
    }
}

/// Evaluates every error curve on `grid`, with `H` and `I` at
/// `eval_digits` and `E` at the expansion's precision.
pub fn error_report(expansion: &AmiteExpansion, grid: &[f64], eval_digits: u32) -> Result<ErrorReport> {
    let rows: Vec<Result<[f64; 9]>> = grid
        .par_iter()
        .map(|&x| {
            let v = Real::from_f64(x, eval_digits);
            let phi = expansion.kind().apply(x);
            let phi_a = expansion.evaluate(x);
            let measured = measured_error(expansion, &v);
            let exact = error_exact(expansion, &v)?;
            let oscillating = error_oscillating(expansion, &v)?.to_f64();
            let approximate = error_approx(expansion, &v);
            Ok([
                phi,
                phi_a,
                measured.to_f64(),
                phi - phi_a,
                exact.to_f64(),
                oscillating,
                approximate.to_f64(),
                (&measured - &exact).to_f64(),
                (&measured - &approximate).to_f64(),
            ])
        })
        .collect();
    let mut report = ErrorReport {
        grid: grid.to_vec(),
        ..Default::default()
    };
    for row in rows {
        let [phi, phi_a, measured, measured_double, exact, oscillating, approximate, e_h, e_i] = row?;
        report.phi.push(phi);
        report.phi_approx.push(phi_a);
        report.measured.push(measured);
        report.measured_double.push(measured_double);
        report.exact.push(exact);
        report.oscillating.push(oscillating);
        report.approximate.push(approximate);
        report.measured_minus_exact.push(e_h);
        report.measured_minus_approximate.push(e_i);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{relu_coefficients, tanh_coefficients};
    use proptest::prelude::*;

    fn diff(a: &Real, b: &Real) -> f64 {
        (a - b).abs().to_f64()
    }

    #[test]
    fn tanh_errors_vanish_at_zero() {
        let e = tanh_coefficients(3, 4.0, 40).unwrap();
        let z = Real::zero(30);
        assert!(tanh_error_exact(&e, &z).unwrap().is_zero());
        assert!(tanh_error_oscillating_exact(&e, &z).unwrap().is_zero());
        assert!(tanh_error_approx(&e, &z).is_zero());
    }

    #[test]
    fn tanh_exact_error_matches_measured() {
        let e = tanh_coefficients(4, 3.0, 60).unwrap();
        for x in [-3.3, -1.2, 0.4, 2.9] {
            let v = Real::from_f64(x, 40);
            let h = tanh_error_exact(&e, &v).unwrap();
            let m = measured_error(&e, &v);
            assert!(diff(&h, &m) < 1e-35, "v={x}: {h} vs {m}");
        }
    }

    #[test]
    fn tanh_oscillating_closed_form_matches_quadrature() {
        for (terms, vmax) in [(4u32, 3.0), (2, 20.0)] {
            // (2, 20) puts the 2F1 argument outside the unit disc.
            let e = tanh_coefficients(terms, vmax, 40).unwrap();
            for x in [-2.5, 0.7, 5.0] {
                let v = Real::from_f64(x, 30);
                let closed = tanh_error_oscillating_exact(&e, &v).unwrap();
                let quad = tanh_error_oscillating_quadrature(&e, &v).unwrap();
                assert!(diff(&closed, &quad) < 1e-27, "M={terms} V={vmax} v={x}");
            }
        }
    }

    #[test]
    fn relu_error_at_zero_is_minus_r0() {
        let e = relu_coefficients(3, 2.0, 40).unwrap();
        let z = Real::zero(40);
        let h = relu_error_exact(&e, &z).unwrap();
        let osc = relu_error_oscillating(&e, &z);
        let r0 = e.coefficients()[0].clone();
        assert!(diff(&h, &-&r0) < 1e-38);
        assert!(diff(&osc, &-&r0) < 1e-38);
    }

    #[test]
    fn relu_oscillating_matches_integral() {
        // -(1/pi) int_sigma^inf cos(xi v)/xi^2 dxi: quadrature up to X with
        // v X = 60, then the asymptotic tail
        // int_X^inf e^{i v xi}/xi^2 = -e^{i v X}/(i v) sum_k (k+1)! / ((i v)^k X^{k+2}).
        let e = relu_coefficients(3, 2.0, 40).unwrap();
        let d = 30;
        let w = d + 5;
        let sigma = e.kernel_bound().with_digits(w);
        for x in [0.3, 1.7] {
            let v = Real::from_f64(x, w);
            let big_x = Real::from_f64(60.0 / x, w);
            let panel = std::f64::consts::PI / x;
            let mut lo = sigma.clone();
            let mut total = Real::zero(w);
            while lo < big_x {
                let hi = (&lo + panel).min(big_x.clone());
                total += integrate(|t| (t * &v).cos() / (t * t), &lo, &hi, w).unwrap();
                lo = hi;
            }
            let iv = Complex::new(Real::zero(w), v.clone());
            let mut tail = Complex::from_real(Real::zero(w));
            let mut term = Complex::from_real(big_x.powi(-2));
            let mut k = 0i64;
            while term.abs().log10_abs() > -(w as f64) - 5.0 && k < 80 {
                tail = &tail + &term;
                k += 1;
                term = (&term / &iv).scale(&(Real::from_i64(k + 1, w) / &big_x));
            }
            let lead = &Complex::cis(&(&v * &big_x)) / &iv;
            total -= (&lead * &tail).re;
            let expected = -total / Real::pi(w);
            let got = relu_error_oscillating(&e, &Real::from_f64(x, d));
            assert!(diff(&got, &expected) < 1e-25, "v={x}: {got} vs {expected}");
        }
    }

    #[test]
    fn relu_exact_error_matches_measured() {
        let e = relu_coefficients(5, 3.0, 60).unwrap();
        for x in [-3.1, -0.5, 0.0, 1.1, 2.8] {
            let v = Real::from_f64(x, 40);
            let h = relu_error_exact(&e, &v).unwrap();
            let m = measured_error(&e, &v);
            assert!(diff(&h, &m) < 1e-35, "v={x}");
        }
    }

    #[test]
    fn tanh_oscillating_shrinks_with_terms() {
        let v = Real::from_f64(1.3, 30);
        let small = tanh_error_oscillating_exact(&tanh_coefficients(2, 4.0, 40).unwrap(), &v).unwrap();
        let large = tanh_error_oscillating_exact(&tanh_coefficients(10, 4.0, 60).unwrap(), &v).unwrap();
        assert!(large.abs() < small.abs());
    }

    #[test]
    fn approx_f64_matches_high_precision() {
        let e = tanh_coefficients(6, 5.0, 50).unwrap();
        let tau = e.kernel_bound().to_f64();
        for x in [-4.0, -0.3, 2.2] {
            let hp = tanh_error_approx(&e, &Real::from_f64(x, 30)).to_f64();
            let lp = tanh_error_approx_f64(tau, x);
            assert!((hp - lp).abs() <= 1e-13 * hp.abs().max(1e-300));
        }
    }

    #[test]
    fn report_columns_have_equal_length() {
        let e = relu_coefficients(2, 2.0, 30).unwrap();
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.5).collect();
        let r = error_report(&e, &grid, 25).unwrap();
        for col in [
            &r.phi,
            &r.phi_approx,
            &r.measured,
            &r.measured_double,
            &r.exact,
            &r.oscillating,
            &r.approximate,
        ] {
            assert_eq!(col.len(), grid.len());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn tanh_errors_are_odd(x in 0.05f64..6.0) {
            let e = tanh_coefficients(3, 5.0, 40).unwrap();
            let v = Real::from_f64(x, 25);
            let a = tanh_error_exact(&e, &v).unwrap();
            let b = tanh_error_exact(&e, &-&v).unwrap();
            prop_assert!(diff(&a, &-&b) < 1e-22);
            let a = tanh_error_approx(&e, &v);
            let b = tanh_error_approx(&e, &-&v);
            prop_assert!(diff(&a, &-&b) < 1e-24);
        }

        #[test]
        fn relu_errors_are_even(x in 0.05f64..6.0) {
            let e = relu_coefficients(3, 5.0, 40).unwrap();
            let v = Real::from_f64(x, 25);
            let a = relu_error_exact(&e, &v).unwrap();
            let b = relu_error_exact(&e, &-&v).unwrap();
            prop_assert!(diff(&a, &b) < 1e-22);
        }
    }
}
