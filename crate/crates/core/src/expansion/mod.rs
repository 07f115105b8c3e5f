//! Polynomial expansions of tanh and ReLU obtained by truncating the
//! Taylor-expanded kernel of their Fourier-type integral representations.
//!
//! For tanh the expansion is odd, `sum_m T_{2m+1} v^{2m+1}`; for ReLU it is
//! `v/2 + sum_m R_{2m} v^{2m}`. Both are tuned to a domain of validity
//! `[-V, V]` through the kernel bound (`tau` for tanh, `sigma` for ReLU).
//! [`errors`] holds the exact and approximate remainder formulas and
//! [`io`] the exact text format.

pub mod errors;
pub mod io;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rug::{Integer, Rational};

use crate::mpcore::{bernoulli, factorial_root, legendre_chi_range, zeta, Real, GUARD_DIGITS};
use crate::{Error, Result};

pub use errors::{
    error_approx, error_exact, error_oscillating, error_report, measured_error, relu_error_exact,
    relu_error_oscillating, tanh_error_approx, tanh_error_approx_f64, tanh_error_exact, tanh_error_oscillating_exact,
    tanh_error_oscillating_quadrature, ErrorReport,
};

/// Minimum number of significant digits that must survive the subtraction in
/// the tanh coefficient formula.
pub const REQUIRED_SURVIVING_DIGITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    Tanh,
    Relu,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
        }
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            ActivationKind::Tanh => v.tanh(),
            ActivationKind::Relu => v.max(0.0),
        }
    }

    pub fn apply_real(self, v: &Real) -> Real {
        match self {
            ActivationKind::Tanh => v.tanh(),
            ActivationKind::Relu => {
                if v.is_sign_negative() {
                    Real::zero(v.digits())
                } else {
                    v.clone()
                }
            }
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(ActivationKind::Tanh),
            "relu" => Ok(ActivationKind::Relu),
            other => Err(Error::Parameter(format!(
                "unknown activation {other:?} (expected tanh or relu)"
            ))),
        }
    }
}

/// Which powers the coefficient list refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// Coefficient `m` multiplies `v^{2m+1}`.
    Odd,
    /// Coefficient `m` multiplies `v^{2m}`; the polynomial also carries `v/2`.
    EvenPlusHalfV,
}

/// Coefficients of one expansion together with the parameters that produced
/// them. Immutable once built.
#[derive(Clone, Debug)]
pub struct AmiteExpansion {
    kind: ActivationKind,
    terms: u32,
    vmax: f64,
    digits: u32,
    kernel_bound: Real,
    coefficients: Vec<Real>,
    coefficients_f64: Vec<f64>,
}

impl AmiteExpansion {
    /// Validates and assembles an expansion from stored parts.
    pub fn from_parts(
        kind: ActivationKind,
        terms: u32,
        vmax: f64,
        digits: u32,
        kernel_bound: Real,
        coefficients: Vec<Real>,
    ) -> Result<Self> {
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(Error::Parameter(format!("vmax must be positive, got {vmax}")));
        }
        if coefficients.len() != terms as usize + 1 {
            return Err(Error::Dimension {
                expected: terms as usize + 1,
                got: coefficients.len(),
            });
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::Parameter(format!("coefficient {i} is not finite")));
        }
        let check_digits = digits.min(30);
        let (sigma, tau) = kernel_bounds(terms, vmax, check_digits)?;
        let expected = match kind {
            ActivationKind::Tanh => tau,
            ActivationKind::Relu => sigma,
        };
        let rel = ((&kernel_bound.with_digits(check_digits) - &expected) / &expected)
            .abs()
            .to_f64();
        if rel > 10f64.powi(5 - check_digits as i32) {
            return Err(Error::Parameter(format!(
                "kernel bound {} does not match M={terms}, V={vmax}",
                kernel_bound.to_f64()
            )));
        }
        let coefficients_f64 = coefficients.iter().map(Real::to_f64).collect();
        Ok(AmiteExpansion {
            kind,
            terms,
            vmax,
            digits,
            kernel_bound,
            coefficients,
            coefficients_f64,
        })
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    /// Number of terms `M`; the coefficient list has `M + 1` entries.
    pub fn terms(&self) -> u32 {
        self.terms
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// `tau` for tanh, `sigma` for ReLU.
    pub fn kernel_bound(&self) -> &Real {
        &self.kernel_bound
    }

    pub fn coefficients(&self) -> &[Real] {
        &self.coefficients
    }

    /// Coefficients rounded once to double precision.
    pub fn coefficients_f64(&self) -> &[f64] {
        &self.coefficients_f64
    }

    pub fn parity(&self) -> Parity {
        match self.kind {
            ActivationKind::Tanh => Parity::Odd,
            ActivationKind::Relu => Parity::EvenPlusHalfV,
        }
    }

    /// Highest power of `v` in the polynomial.
    pub fn degree(&self) -> u32 {
        match self.kind {
            ActivationKind::Tanh => 2 * self.terms + 1,
            ActivationKind::Relu => (2 * self.terms).max(1),
        }
    }

    /// Dense power-basis coefficients (`result[k]` multiplies `v^k`), in
    /// double precision.
    pub fn power_coefficients_f64(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.degree() as usize + 1];
        for (m, c) in self.coefficients_f64.iter().enumerate() {
            match self.kind {
                ActivationKind::Tanh => out[2 * m + 1] = *c,
                ActivationKind::Relu => out[2 * m] = *c,
            }
        }
        if self.kind == ActivationKind::Relu {
            out[1] += 0.5;
        }
        out
    }

    /// Dense power-basis coefficients at full precision.
    pub fn power_coefficients(&self) -> Vec<Real> {
        let mut out = vec![Real::zero(self.digits); self.degree() as usize + 1];
        for (m, c) in self.coefficients.iter().enumerate() {
            match self.kind {
                ActivationKind::Tanh => out[2 * m + 1] = c.clone(),
                ActivationKind::Relu => out[2 * m] = c.clone(),
            }
        }
        if self.kind == ActivationKind::Relu {
            out[1] = &out[1] + 0.5;
        }
        out
    }

    /// Double-precision Horner evaluation in the parity basis.
    pub fn evaluate(&self, v: f64) -> f64 {
        let v2 = v * v;
        let even = self.coefficients_f64.iter().rev().fold(0.0, |acc, c| acc * v2 + c);
        match self.kind {
            ActivationKind::Tanh => v * even,
            ActivationKind::Relu => 0.5 * v + even,
        }
    }

    /// High-precision evaluation at the wider of the precisions of `v` and
    /// the coefficients.
    pub fn evaluate_real(&self, v: &Real) -> Real {
        let d = v.digits().max(self.digits);
        let v = v.with_digits(d);
        let v2 = &v * &v;
        let mut acc = Real::zero(d);
        for c in self.coefficients.iter().rev() {
            acc = acc * &v2 + c;
        }
        match self.kind {
            ActivationKind::Tanh => acc * &v,
            ActivationKind::Relu => acc + &v / 2i64,
        }
    }
}

/// Free-function form of [`AmiteExpansion::evaluate`].
pub fn evaluate_expansion(expansion: &AmiteExpansion, v: f64) -> f64 {
    expansion.evaluate(v)
}

fn check_vmax(vmax: f64) -> Result<()> {
    if vmax > 0.0 && vmax.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("V must be positive and finite, got {vmax}")))
    }
}

/// Kernel bounds `sigma = ((2M+2)!)^{1/(2M+2)} / V` and
/// `tau = ((2M+3)!)^{1/(2M+3)} / V`.
pub fn kernel_bounds(terms: u32, vmax: f64, digits: u32) -> Result<(Real, Real)> {
    check_vmax(vmax)?;
    let v = Real::from_f64(vmax, digits);
    let sigma = factorial_root(2 * terms + 2, digits)? / &v;
    let tau = factorial_root(2 * terms + 3, digits)? / &v;
    Ok((sigma, tau))
}

fn factorial(n: u32, digits: u32) -> Real {
    Real::from_integer(&Integer::from(Integer::factorial(n)), digits)
}

/// Closed-form antiderivative of `xi^j csch(a xi)`:
/// `-(2/a) sum_{k=0}^{j} j! xi^{j-k} chi_{k+1}(e^{-a xi}) / (a^k (j-k)!)`.
///
/// Evaluated at the precision of `xi`.
pub fn lambda_integral(j: u32, xi: &Real, a: &Real) -> Result<Real> {
    if !(*xi > 0.0) || !(*a > 0.0) {
        return Err(Error::Domain("lambda_integral requires xi > 0 and a > 0".into()));
    }
    let d = xi.digits();
    let work = d + GUARD_DIGITS;
    let xi = xi.with_digits(work);
    let a = a.with_digits(work);
    let z = (-(&a * &xi)).exp();
    let chi = legendre_chi_range(1, j + 1, &z)?;
    let jf = factorial(j, work);
    let mut sum = Real::zero(work);
    for k in 0..=j {
        let term = &jf * xi.powu(j - k) * &chi[k as usize] / (a.powu(k) * factorial(j - k, work));
        sum += term;
    }
    Ok((-(sum * 2i64) / &a).with_digits(d))
}

/// `lim_{xi -> 0+} lambda_integral(j, xi, a)` for `j >= 1`:
/// `-(2/a) j! (1 - 2^{-j-1}) zeta(j+1) / a^j`.
pub fn lambda_limit_at_zero(j: u32, a: &Real) -> Result<Real> {
    if j == 0 {
        return Err(Error::Domain(
            "the antiderivative of csch diverges at zero (j = 0)".into(),
        ));
    }
    let d = a.digits();
    let work = d + GUARD_DIGITS;
    let a = a.with_digits(work);
    let factor = Real::one(work) - Real::from_i64(2, work).powi(-(j as i32) - 1);
    let value = -(factorial(j, work) * factor * zeta(j + 1, work)? * 2i64) / a.powu(j + 1);
    Ok(value.with_digits(d))
}

/// Tanh expansion coefficients `T_{2m+1}`, `m = 0..=M`.
///
/// Each coefficient is the difference of a Bernoulli term and a Legendre-chi
/// sum that agree to many leading digits. The cancellation is measured and
/// [`Error::PrecisionExhausted`] returned unless at least
/// [`REQUIRED_SURVIVING_DIGITS`] digits remain.
pub fn tanh_coefficients(terms: u32, vmax: f64, digits: u32) -> Result<AmiteExpansion> {
    check_vmax(vmax)?;
    let work = digits + GUARD_DIGITS;
    let (_, tau) = kernel_bounds(terms, vmax, work)?;
    let pi = Real::pi(work);
    let half_pi = &pi / 2i64;
    let z = (-(&half_pi * &tau)).exp();
    let chi = legendre_chi_range(1, 2 * terms + 2, &z)?;

    let results: Vec<Result<(Real, f64)>> = (0..=terms)
        .into_par_iter()
        .map(|m| {
            let n = 2 * m + 1;
            let b = Real::from_rational(&bernoulli(2 * m + 2), work);
            let four_pow = Integer::from(Integer::u_pow_u(4, m + 1)) - 1u32;
            let bern_term = Real::from_i64(2, work).powu(n) * Real::from_integer(&four_pow, work) * b
                / (factorial(n, work) * (m as i64 + 1));
            let mut chi_sum = Real::zero(work);
            for k in 0..=n {
                chi_sum += Real::from_i64(2, work).powu(k) * tau.powu(n - k) * &chi[k as usize]
                    / (pi.powu(k) * factorial(n - k, work));
            }
            let sign = if m % 2 == 0 { -4i64 } else { 4i64 };
            let chi_term = chi_sum * sign / &pi;
            let value = &bern_term + &chi_term;
            let big = bern_term.log10_abs().max(chi_term.log10_abs());
            let cancelled = (big - value.log10_abs()).max(0.0);
            Ok((value, cancelled))
        })
        .collect();

    let mut coefficients = Vec::with_capacity(terms as usize + 1);
    let mut worst: f64 = 0.0;
    for r in results {
        let (c, cancelled) = r?;
        worst = worst.max(cancelled);
        coefficients.push(c.with_digits(digits));
    }
    let cancelled = worst.ceil() as u32;
    if digits < cancelled + REQUIRED_SURVIVING_DIGITS {
        return Err(Error::PrecisionExhausted {
            digits,
            cancelled,
            required: REQUIRED_SURVIVING_DIGITS,
        });
    }
    AmiteExpansion::from_parts(
        ActivationKind::Tanh,
        terms,
        vmax,
        digits,
        tau.with_digits(digits),
        coefficients,
    )
}

/// ReLU even-part coefficients
/// `R_{2m} = (-1)^{m+1} sigma^{2m-1} / (pi (2m)! (2m-1))`, `m = 0..=M`.
pub fn relu_coefficients(terms: u32, vmax: f64, digits: u32) -> Result<AmiteExpansion> {
    check_vmax(vmax)?;
    let work = digits + GUARD_DIGITS;
    let (sigma, _) = kernel_bounds(terms, vmax, work)?;
    let pi = Real::pi(work);
    let coefficients: Vec<Real> = (0..=terms)
        .into_par_iter()
        .map(|m| {
            let e = 2 * m as i32 - 1;
            let sign = if m % 2 == 0 { -1i64 } else { 1i64 };
            let value = sigma.powi(e) * sign / (&pi * factorial(2 * m, work) * (e as i64));
            value.with_digits(digits)
        })
        .collect();
    AmiteExpansion::from_parts(
        ActivationKind::Relu,
        terms,
        vmax,
        digits,
        sigma.with_digits(digits),
        coefficients,
    )
}

/// Coefficients for either activation.
pub fn coefficients(kind: ActivationKind, terms: u32, vmax: f64, digits: u32) -> Result<AmiteExpansion> {
    match kind {
        ActivationKind::Tanh => tanh_coefficients(terms, vmax, digits),
        ActivationKind::Relu => relu_coefficients(terms, vmax, digits),
    }
}

/// Conventional Taylor coefficients of tanh: entry `m - 1` multiplies
/// `v^{2m-1}` and equals `2^{2m} (2^{2m} - 1) B_{2m} / (2m)!`, `m = 1..=M`.
pub fn taylor_coefficients_tanh(terms: u32) -> Result<Vec<Rational>> {
    if terms == 0 {
        return Err(Error::Parameter("the Taylor baseline needs at least one term".into()));
    }
    Ok((1..=terms)
        .map(|m| {
            let p = Integer::from(Integer::u_pow_u(4, m));
            let num = &p * Integer::from(&p - 1u32);
            bernoulli(2 * m) * num / Integer::from(Integer::factorial(2 * m))
        })
        .collect())
}
