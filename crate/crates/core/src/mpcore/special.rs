//! Special functions at arbitrary precision.
//!
//! Every function works internally with [`GUARD_DIGITS`] extra digits and
//! rounds its result to the precision of its (widest) argument.

use std::sync::{OnceLock, RwLock};

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use super::{Complex, Real};
use crate::{Error, Result};

pub const GUARD_DIGITS: u32 = 15;

/// Number of consecutive negligible terms required before a series stops.
const QUIET_TERMS: u32 = 20;

/// Extra digits (beyond the target) below which a term counts as negligible.
const TAIL_DIGITS: f64 = 10.0;

/// Series stopping rule: `QUIET_TERMS` consecutive terms below
/// `10^-(digits + TAIL_DIGITS)` relative to the running sum.
struct Quiet {
    digits: f64,
    run: u32,
}

impl Quiet {
    fn new(digits: u32) -> Self {
        Quiet {
            digits: digits as f64 + TAIL_DIGITS,
            run: 0,
        }
    }

    fn done(&mut self, term_log10: f64, sum_log10: f64) -> bool {
        let negligible =
            term_log10 == f64::NEG_INFINITY || (sum_log10.is_finite() && term_log10 < sum_log10 - self.digits);
        if negligible {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= QUIET_TERMS
    }
}

fn widest(xs: &[&Real]) -> u32 {
    xs.iter().map(|x| x.digits()).max().unwrap_or(1)
}

static BERNOULLI: OnceLock<RwLock<Vec<Rational>>> = OnceLock::new();

/// Bernoulli number `B_n` with `B_1 = -1/2`. Results are memoized.
pub fn bernoulli(n: u32) -> Rational {
    let table = BERNOULLI.get_or_init(|| RwLock::new(Vec::new()));
    {
        let read = table.read().unwrap_or_else(|e| e.into_inner());
        if let Some(b) = read.get(n as usize) {
            return b.clone();
        }
    }
    let mut write = table.write().unwrap_or_else(|e| e.into_inner());
    if write.len() <= n as usize {
        // Twice the request so that ascending access patterns rarely rebuild.
        *write = akiyama_tanigawa(2 * n as usize + 2);
    }
    write[n as usize].clone()
}

/// `B_0 ..= B_n` from the Akiyama-Tanigawa triangle. After row `m` the
/// leading entry is `B_m` with the `B_1 = +1/2` convention, flipped here.
fn akiyama_tanigawa(n: usize) -> Vec<Rational> {
    let mut a: Vec<Rational> = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        a.push(Rational::from((1, m as u64 + 1)));
        for j in (1..=m).rev() {
            let diff = Rational::from(&a[j - 1] - &a[j]);
            a[j - 1] = diff * Integer::from(j);
        }
        out.push(a[0].clone());
    }
    if n >= 1 {
        out[1] = Rational::from((-1, 2));
    }
    out
}

/// Riemann zeta at an integer `s >= 2`.
///
/// Even arguments come from the Bernoulli numbers; odd arguments use the
/// Borwein alternating-series acceleration.
pub fn zeta(s: u32, digits: u32) -> Result<Real> {
    if s < 2 {
        return Err(Error::Domain(format!("zeta({s}) requires s >= 2")));
    }
    let work = digits + GUARD_DIGITS;
    let value = if s % 2 == 0 {
        let m = s / 2;
        let b = Real::from_rational(&bernoulli(s), work);
        let two_pi_pow = (Real::pi(work) * 2i64).powu(s);
        let fact = Real::from_integer(&Integer::from(Integer::factorial(s)), work);
        let sign = if m % 2 == 1 { 1i64 } else { -1i64 };
        two_pi_pow * b / fact / 2i64 * sign
    } else {
        zeta_borwein(s, work)
    };
    Ok(value.with_digits(digits))
}

fn zeta_borwein(s: u32, work: u32) -> Real {
    let n = (1.31 * work as f64).ceil() as u64 + 5;
    // d_k = n sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!), built from integer term ratios.
    let mut d = Vec::with_capacity(n as usize + 1);
    let mut term = Integer::from(1);
    let mut acc = Integer::from(1);
    d.push(acc.clone());
    for i in 0..n {
        term *= (n + i) * (n - i) * 2;
        term.div_exact_mut(&Integer::from((2 * i + 1) * (i + 1)));
        acc += &term;
        d.push(acc.clone());
    }
    let dn = &d[n as usize];
    let mut sum = Float::with_val(super::bits_for_digits(work), 0);
    for k in 0..n {
        let num = Integer::from(&d[k as usize] - dn);
        let den = Integer::from(k + 1).pow(s);
        let t = Float::with_val(sum.prec(), &num) / &den;
        if k % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    let one_minus = Float::with_val(sum.prec(), 1) - Float::with_val(sum.prec(), Float::i_exp(1, 1 - s as i32));
    let denom = Float::with_val(sum.prec(), dn) * one_minus;
    Real::from_float(-(sum / denom))
}

/// Polylogarithm `Li_s(x) = sum_{k>=1} x^k / k^s` for `|x| < 1`.
pub fn polylog(s: u32, x: &Real) -> Result<Real> {
    Ok(polylog_range(s, s, x)?.pop().expect("one order requested"))
}

/// `[Li_lo(x), ..., Li_hi(x)]` sharing the powers of `x`.
pub fn polylog_range(lo: u32, hi: u32, x: &Real) -> Result<Vec<Real>> {
    if lo == 0 || hi < lo {
        return Err(Error::Parameter(format!(
            "polylog orders {lo}..={hi} must satisfy 1 <= lo <= hi"
        )));
    }
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "polylog requires |x| < 1, got {:.6}",
            x.to_f64()
        )));
    }
    let digits = x.digits();
    let work = digits + GUARD_DIGITS;
    let xw = x.with_digits(work);
    let count = (hi - lo + 1) as usize;
    let mut sums = vec![Real::zero(work); count];
    if x.is_zero() {
        return Ok(sums.into_iter().map(|s| s.with_digits(digits)).collect());
    }
    let mut power = xw.clone();
    let mut quiet = Quiet::new(work);
    let mut k: i64 = 1;
    loop {
        // Li_lo converges slowest, so its term drives termination.
        let mut t = &power / Real::from_integer(&Integer::from(k).pow(lo), work);
        let lead_log = t.log10_abs();
        for sum in sums.iter_mut() {
            *sum += &t;
            t = t / k;
        }
        if quiet.done(lead_log, sums[0].log10_abs()) {
            break;
        }
        power *= &xw;
        k += 1;
    }
    Ok(sums.into_iter().map(|s| s.with_digits(digits)).collect())
}

/// Legendre chi function `chi_s(z) = (Li_s(z) - Li_s(-z)) / 2` for `0 <= z < 1`.
pub fn legendre_chi(s: u32, z: &Real) -> Result<Real> {
    Ok(legendre_chi_range(s, s, z)?.pop().expect("one order requested"))
}

/// `[chi_lo(z), ..., chi_hi(z)]`.
pub fn legendre_chi_range(lo: u32, hi: u32, z: &Real) -> Result<Vec<Real>> {
    if z.is_sign_negative() && !z.is_zero() || !(*z < 1.0) {
        return Err(Error::Domain(format!(
            "legendre_chi requires 0 <= z < 1, got {:.6}",
            z.to_f64()
        )));
    }
    let digits = z.digits();
    let zw = z.with_digits(digits + GUARD_DIGITS);
    let plus = polylog_range(lo, hi, &zw)?;
    let minus = polylog_range(lo, hi, &-&zw)?;
    Ok(plus
        .into_iter()
        .zip(minus)
        .map(|(p, m)| ((p - m) / 2i64).with_digits(digits))
        .collect())
}

fn is_nonpositive_integer(x: &Real) -> bool {
    x.as_float().is_integer() && !(*x > 0.0)
}

/// Generalized hypergeometric series `pFq(a; b; z)`.
///
/// Supports `p <= q + 1`; for `p = q + 1` the argument must satisfy `|z| < 1`.
/// The series is re-summed at higher precision when its terms are much
/// larger than the result.
pub fn hypergeometric(a: &[Real], b: &[Real], z: &Real) -> Result<Real> {
    if a.len() > b.len() + 1 {
        return Err(Error::Parameter(format!(
            "{}F{} is not supported (need p <= q + 1)",
            a.len(),
            b.len()
        )));
    }
    if let Some(bad) = b.iter().find(|x| is_nonpositive_integer(x)) {
        return Err(Error::Parameter(format!(
            "lower parameter {} is a nonpositive integer",
            bad.to_f64()
        )));
    }
    if a.len() == b.len() + 1 && !(z.abs() < 1.0) {
        return Err(Error::Divergence(format!(
            "{}F{} series requires |z| < 1, got {:.6}",
            a.len(),
            b.len(),
            z.to_f64()
        )));
    }
    let mut all: Vec<&Real> = a.iter().chain(b.iter()).collect();
    all.push(z);
    let digits = widest(&all);
    let mut extra = 0u32;
    loop {
        let work = digits + GUARD_DIGITS + extra;
        let (sum, max_log) = hyp_series(a, b, z, work)?;
        let lost = (max_log - sum.log10_abs()).max(0.0);
        if sum.is_zero() || lost <= (GUARD_DIGITS + extra) as f64 - 3.0 {
            return Ok(sum.with_digits(digits));
        }
        if extra > 4 * digits + 200 {
            return Err(Error::PrecisionExhausted {
                digits: work,
                cancelled: lost.ceil() as u32,
                required: digits,
            });
        }
        extra = lost.ceil() as u32 + 5;
    }
}

fn hyp_series(a: &[Real], b: &[Real], z: &Real, work: u32) -> Result<(Real, f64)> {
    let a: Vec<Real> = a.iter().map(|x| x.with_digits(work)).collect();
    let b: Vec<Real> = b.iter().map(|x| x.with_digits(work)).collect();
    let z = z.with_digits(work);
    let mut term = Real::one(work);
    let mut sum = Real::one(work);
    let mut max_log: f64 = 0.0;
    let mut quiet = Quiet::new(work);
    let limit = 10_000_000u64;
    for k in 0..limit {
        let kf = k as i64;
        for ai in &a {
            term *= &(ai + kf);
        }
        let mut den = Real::from_i64(kf + 1, work);
        for bi in &b {
            den *= &(bi + kf);
        }
        term = term * &z / den;
        if term.is_zero() {
            // A nonpositive-integer upper parameter terminates the series.
            return Ok((sum, max_log));
        }
        sum += &term;
        let tl = term.log10_abs();
        max_log = max_log.max(tl);
        if quiet.done(tl, sum.log10_abs()) {
            return Ok((sum, max_log));
        }
    }
    Err(Error::Divergence(format!(
        "hypergeometric series did not settle in {limit} terms"
    )))
}

/// `2F1(a, b; c; z)` with complex parameters and a real argument `-1 < z < 1/2`
/// handled directly; for `z <= -1/2` the Pfaff transformation
/// `2F1(a,b;c;z) = (1-z)^{-a} 2F1(a, c-b; c; z/(z-1))` maps the argument into
/// `[1/3, 1)`, which also covers `z <= -1` where the direct series diverges.
pub fn hyp2f1_complex(a: &Complex, b: &Complex, c: &Complex, z: &Real) -> Result<Complex> {
    if !(*z < 1.0) {
        return Err(Error::Divergence(format!("2F1 requires z < 1, got {:.6}", z.to_f64())));
    }
    if c.im.is_zero() && is_nonpositive_integer(&c.re) {
        return Err(Error::Parameter("lower parameter is a nonpositive integer".into()));
    }
    let digits = z.digits();
    if *z <= -0.5 {
        let one = Real::one(digits + GUARD_DIGITS);
        let zw = z.with_digits(digits + GUARD_DIGITS);
        let t = &zw / (&zw - &one);
        let c_minus_b = c - b;
        let f = hyp2f1_complex_series(a, &c_minus_b, c, &t, digits)?;
        // (1 - z)^{-a}
        let ln_base = (&one - &zw).ln();
        let mag = (-(&a.re * &ln_base)).exp();
        let phase = Complex::cis(&-(&a.im * &ln_base));
        let factor = phase.scale(&mag);
        let out = &factor * &f;
        return Ok(Complex::new(out.re.with_digits(digits), out.im.with_digits(digits)));
    }
    hyp2f1_complex_series(a, b, c, z, digits)
}

fn hyp2f1_complex_series(a: &Complex, b: &Complex, c: &Complex, z: &Real, digits: u32) -> Result<Complex> {
    let mut extra = 0u32;
    loop {
        let work = digits + GUARD_DIGITS + extra;
        let cw = |x: &Complex| Complex::new(x.re.with_digits(work), x.im.with_digits(work));
        let (a, b, c) = (cw(a), cw(b), cw(c));
        let z = z.with_digits(work);
        let mut term = Complex::from_real(Real::one(work));
        let mut sum = term.clone();
        let mut max_log: f64 = 0.0;
        let mut quiet = Quiet::new(work);
        let mut k: i64 = 0;
        loop {
            let kr = Complex::from_real(Real::from_i64(k, work));
            let num = &(&a + &kr) * &(&b + &kr);
            let den = (&c + &kr).scale(&Real::from_i64(k + 1, work));
            term = (&(&term * &num) / &den).scale(&z);
            sum = &sum + &term;
            let tl = term.abs().log10_abs();
            max_log = max_log.max(tl);
            if quiet.done(tl, sum.abs().log10_abs()) {
                break;
            }
            k += 1;
            if k > 10_000_000 {
                return Err(Error::Divergence("2F1 series did not settle".into()));
            }
        }
        let lost = (max_log - sum.abs().log10_abs()).max(0.0);
        if lost <= (GUARD_DIGITS + extra) as f64 - 3.0 || extra > 4 * digits + 200 {
            return Ok(Complex::new(sum.re.with_digits(digits), sum.im.with_digits(digits)));
        }
        extra = lost.ceil() as u32 + 5;
    }
}

/// Sine integral `Si(x) = int_0^x sin(t)/t dt`.
pub fn sine_integral(x: &Real) -> Real {
    let digits = x.digits();
    if x.is_zero() {
        return Real::zero(digits);
    }
    let negative = x.is_sign_negative();
    let ax = x.abs();
    let axf = ax.to_f64();
    let work = digits + GUARD_DIGITS;
    let value = if axf > (work as f64) * std::f64::consts::LN_10 + 10.0 {
        si_asymptotic(&ax, work)
    } else {
        si_series(&ax, work + (axf * std::f64::consts::LOG10_E).ceil() as u32 + 2)
    };
    let value = value.with_digits(digits);
    if negative {
        -value
    } else {
        value
    }
}

fn si_series(x: &Real, work: u32) -> Real {
    let x = x.with_digits(work);
    let x2 = &x * &x;
    // t_k = (-1)^k x^{2k+1} / (2k+1)!
    let mut t = x.clone();
    let mut sum = x.clone();
    let mut quiet = Quiet::new(work);
    let mut k: i64 = 0;
    loop {
        k += 1;
        t = -(t * &x2) / ((2 * k) * (2 * k + 1));
        let contrib = &t / (2 * k + 1);
        sum += &contrib;
        if quiet.done(contrib.log10_abs(), sum.log10_abs()) {
            return sum;
        }
    }
}

/// `pi/2 - f(x) cos x - g(x) sin x` with the auxiliary asymptotic series,
/// truncated at the smallest term. Only used where that term is below the
/// working precision.
fn si_asymptotic(x: &Real, work: u32) -> Real {
    let x = x.with_digits(work);
    let inv = x.recip();
    let inv2 = &inv * &inv;
    let mut f = Real::zero(work);
    let mut g = Real::zero(work);
    let mut tf = inv.clone();
    let mut tg = inv2.clone();
    let mut prev = f64::INFINITY;
    let mut k: i64 = 0;
    loop {
        let mag = tf.log10_abs().max(tg.log10_abs());
        if mag > prev || mag < -(work as f64) - TAIL_DIGITS {
            break;
        }
        prev = mag;
        f += &tf;
        g += &tg;
        tf = -(tf * &inv2) * ((2 * k + 1) * (2 * k + 2));
        tg = -(tg * &inv2) * ((2 * k + 2) * (2 * k + 3));
        k += 1;
    }
    let (s, c) = x.sin_cos();
    Real::pi(work) / 2i64 - f * c - g * s
}

/// `(n!)^{1/n}` with `ln n!` summed as `sum ln k`.
pub fn factorial_root(n: u32, digits: u32) -> Result<Real> {
    if n == 0 {
        return Err(Error::Parameter("factorial_root requires n >= 1".into()));
    }
    let work = digits + GUARD_DIGITS;
    let mut ln_fact = Real::zero(work);
    for k in 2..=n {
        ln_fact += Real::from_i64(k as i64, work).ln();
    }
    Ok((ln_fact / n as i64).exp().with_digits(digits))
}
