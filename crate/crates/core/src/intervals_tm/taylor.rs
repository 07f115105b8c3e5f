//! Taylor models: a dense `f64` polynomial over an input box plus a remainder
//! interval that encloses everything the polynomial misses, including its own
//! floating-point coefficient errors.

use std::fmt;
use std::sync::{Arc, OnceLock};

use super::bernstein::bernstein_range;
use super::interval::Interval;
use crate::mpcore::Real;
use crate::polyexpand::{global_cache, taylor_shift, MonomialSpace, MultiIndex, MultivariatePolynomial};
use crate::{Error, Result};

/// Largest monomial space used to collect truncated product terms.
const MAX_WIDE_MONOMIALS: usize = 1 << 22;

/// Input box, order cap and precomputed monomial enclosures shared by every
/// model built over the same box.
#[derive(Debug)]
pub struct TmContext {
    domain: Vec<Interval>,
    cap: u32,
    // graded monomials up to `2 cap` when that fits, else up to `cap`
    space: MonomialSpace,
    // slots of degree <= cap
    narrow: usize,
    enclosure: Vec<Interval>,
    magnitude: Vec<f64>,
    // multinomial coefficient of every narrow slot, rounded to nearest
    multinomials: OnceLock<Vec<f64>>,
}

impl TmContext {
    pub fn new(domain: Vec<Interval>, cap: u32) -> Result<Arc<Self>> {
        if domain.is_empty() {
            return Err(Error::Parameter("Taylor models need at least one input".into()));
        }
        if let Some(d) = domain.iter().find(|d| d.is_empty() || !d.is_finite()) {
            return Err(Error::Parameter(format!(
                "domain component {d} is not a finite interval"
            )));
        }
        let n = domain.len();
        let narrow_space = MonomialSpace::new(n, cap)?;
        let space = match MonomialSpace::new(n, 2 * cap) {
            Ok(s) if s.len() <= MAX_WIDE_MONOMIALS => s,
            _ => narrow_space,
        };
        let narrow = space.degree_start(cap + 1);
        let powers: Vec<Vec<Interval>> = domain
            .iter()
            .map(|d| (0..=space.max_degree()).map(|e| d.powi(e)).collect())
            .collect();
        let enclosure: Vec<Interval> = (0..space.len())
            .map(|r| {
                space
                    .exponents(r)
                    .iter()
                    .zip(&powers)
                    .fold(
                        Interval::point(1.0),
                        |acc, (&e, p)| if e == 0 { acc } else { acc * p[e as usize] },
                    )
            })
            .collect();
        let magnitude = enclosure.iter().map(Interval::mag).collect();
        Ok(Arc::new(TmContext {
            domain,
            cap,
            space,
            narrow,
            enclosure,
            magnitude,
            multinomials: OnceLock::new(),
        }))
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn order_cap(&self) -> u32 {
        self.cap
    }

    pub fn nvars(&self) -> usize {
        self.domain.len()
    }

    /// Number of coefficients in a model.
    pub fn len(&self) -> usize {
        self.narrow
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn wide(&self) -> bool {
        self.space.max_degree() > self.cap
    }

    pub fn space(&self) -> &MonomialSpace {
        &self.space
    }

    fn multinomials(&self) -> &[f64] {
        self.multinomials.get_or_init(|| {
            let cache = global_cache();
            (0..self.narrow)
                .map(|r| {
                    let e = self.space.exponents(r);
                    cache.get(e.iter().sum(), e).expect("degree matches exponents").to_f64()
                })
                .collect()
        })
    }
}

/// Rounding-error bookkeeping: the sum of exact coefficient errors weighted
/// by the monomial magnitude.
#[derive(Default)]
struct Slack {
    sum: f64,
    // inexact operations, each allowed an underflowed contribution
    inexact: usize,
}

impl Slack {
    #[inline]
    fn fma(&mut self, acc: &mut f64, a: f64, b: f64, mag: f64) {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let s = *acc + p;
        let bb = s - *acc;
        let se = (*acc - (s - bb)) + (p - bb);
        *acc = s;
        if pe != 0.0 || se != 0.0 {
            self.sum += (pe.abs() + se.abs()) * mag;
            self.inexact += 1;
        }
    }

    #[inline]
    fn add(&mut self, acc: &mut f64, b: f64, mag: f64) {
        let s = *acc + b;
        let bb = s - *acc;
        let se = (*acc - (s - bb)) + (b - bb);
        *acc = s;
        if se != 0.0 {
            self.sum += se.abs() * mag;
            self.inexact += 1;
        }
    }

    /// Enclosure of the accumulated error. The running sum itself was rounded,
    /// so it is inflated relatively before use.
    fn interval(&self) -> Interval {
        if self.inexact == 0 {
            return Interval::ZERO;
        }
        let n = self.inexact as f64;
        let r = self.sum * (1.0 + 4.0 * f64::EPSILON * (n + 2.0)) + n * 4.9e-324;
        Interval::symmetric(r).inflate(0.0)
    }
}

/// `f(x) - poly(x) ∈ remainder` for every `x` in the context's domain.
#[derive(Clone)]
pub struct TaylorModel {
    ctx: Arc<TmContext>,
    coeffs: Vec<f64>,
    degree: u32,
    remainder: Interval,
    // enclosure of the polynomial part, filled on first use
    bound: OnceLock<Interval>,
}

impl fmt::Debug for TaylorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorModel")
            .field("degree", &self.degree)
            .field("terms", &self.coeffs.iter().filter(|c| **c != 0.0).count())
            .field("remainder", &self.remainder)
            .finish()
    }
}

impl TaylorModel {
    pub fn constant(ctx: &Arc<TmContext>, c: f64) -> Self {
        let mut coeffs = vec![0.0; ctx.len()];
        coeffs[0] = c;
        TaylorModel {
            ctx: ctx.clone(),
            coeffs,
            degree: 0,
            remainder: Interval::ZERO,
            bound: OnceLock::new(),
        }
    }

    pub fn zero(ctx: &Arc<TmContext>) -> Self {
        Self::constant(ctx, 0.0)
    }

    /// The input coordinate `x_i` itself.
    pub fn variable(ctx: &Arc<TmContext>, i: usize) -> Result<Self> {
        if i >= ctx.nvars() {
            return Err(Error::Dimension {
                expected: ctx.nvars(),
                got: i + 1,
            });
        }
        let mut m = Self::zero(ctx);
        if ctx.cap == 0 {
            m.remainder = ctx.domain[i];
            return Ok(m);
        }
        let r = ctx.space.rank(MultiIndex::unit(ctx.nvars(), i).exponents()).unwrap();
        m.coeffs[r] = 1.0;
        m.degree = 1;
        Ok(m)
    }

    /// One identity model per input.
    pub fn inputs(ctx: &Arc<TmContext>) -> Vec<Self> {
        (0..ctx.nvars()).map(|i| Self::variable(ctx, i).unwrap()).collect()
    }

    /// Builds a model from a sparse polynomial; terms above the cap go into
    /// the remainder.
    pub fn from_polynomial(ctx: &Arc<TmContext>, poly: &MultivariatePolynomial, remainder: Interval) -> Result<Self> {
        if poly.num_inputs() != ctx.nvars() {
            return Err(Error::Dimension {
                expected: ctx.nvars(),
                got: poly.num_inputs(),
            });
        }
        let mut m = Self::zero(ctx);
        let mut extra = remainder;
        for (k, c) in poly.terms() {
            if k.degree() <= ctx.cap {
                let r = ctx.space.rank(k.exponents()).unwrap();
                m.coeffs[r] = c;
                m.degree = m.degree.max(k.degree());
            } else {
                let enc = k
                    .exponents()
                    .iter()
                    .zip(&ctx.domain)
                    .fold(Interval::point(1.0), |acc, (&e, d)| acc * d.powi(e));
                extra = extra + Interval::point(c) * enc;
            }
        }
        m.remainder = extra;
        Ok(m)
    }

    pub fn context(&self) -> &Arc<TmContext> {
        &self.ctx
    }

    pub fn domain(&self) -> &[Interval] {
        &self.ctx.domain
    }

    pub fn remainder(&self) -> Interval {
        self.remainder
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Dense coefficients in graded order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn poly(&self) -> MultivariatePolynomial {
        MultivariatePolynomial::from_terms(
            self.ctx.nvars(),
            self.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(r, &c)| (self.ctx.space.index(r), c)),
        )
        .expect("indices match the context")
    }

    /// Polynomial part evaluated at a point (no remainder).
    pub fn eval_poly(&self, x: &[f64]) -> f64 {
        let space = &self.ctx.space;
        let end = space.degree_start(self.degree + 1);
        (0..end)
            .filter(|&r| self.coeffs[r] != 0.0)
            .map(|r| {
                space
                    .exponents(r)
                    .iter()
                    .zip(x)
                    .fold(self.coeffs[r], |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.remainder.is_finite() && self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Interval enclosure of the polynomial part over the domain: the tighter
    /// of the term-wise monomial enclosure and the Bernstein hull.
    pub fn poly_bound(&self) -> Interval {
        *self.bound.get_or_init(|| {
            let used = &self.coeffs[..self.ctx.space.degree_start(self.degree + 1)];
            let termwise = enclose(&self.ctx, used);
            if self.degree <= 1 {
                return termwise;
            }
            match bernstein_range(&self.ctx.space, used, &self.ctx.domain) {
                Some(b) => {
                    let both = termwise.intersect(&b);
                    if both.is_empty() {
                        termwise
                    } else {
                        both
                    }
                }
                None => termwise,
            }
        })
    }

    /// Adds `extra` to the remainder.
    pub fn with_remainder(mut self, extra: Interval) -> Self {
        self.remainder = self.remainder + extra;
        self
    }

    fn same_domain(&self, other: &TaylorModel) -> Result<()> {
        if Arc::ptr_eq(&self.ctx, &other.ctx) || (self.ctx.domain == other.ctx.domain && self.ctx.cap == other.ctx.cap)
        {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    fn refresh_degree(&mut self) {
        self.bound = OnceLock::new();
        let space = &self.ctx.space;
        self.degree = self
            .coeffs
            .iter()
            .rposition(|c| *c != 0.0)
            .map_or(0, |r| space.exponents(r).iter().sum());
    }

    fn nonzero(&self) -> Vec<usize> {
        let end = self.ctx.space.degree_start(self.degree + 1);
        (0..end).filter(|&r| self.coeffs[r] != 0.0).collect()
    }
}

// sum_r c_r * enclosure_r, outward rounded
fn enclose(ctx: &TmContext, coeffs: &[f64]) -> Interval {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut err = 0.0f64;
    let mut n = 0usize;
    for (r, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let e = ctx.enclosure[r];
        let (a, b) = if c >= 0.0 {
            (c * e.lo, c * e.hi)
        } else {
            (c * e.hi, c * e.lo)
        };
        // each product and sum is within one rounding of exact
        err += a.abs().max(b.abs());
        lo += a;
        hi += b;
        n += 1;
    }
    if n == 0 {
        return Interval::ZERO;
    }
    let slack = err * f64::EPSILON * (n as f64 + 2.0) + n as f64 * 4.9e-324;
    Interval::new(lo - slack, hi + slack).inflate(0.0)
}

/// Polynomial bound plus remainder.
pub fn tm_bound(a: &TaylorModel) -> Interval {
    a.poly_bound() + a.remainder
}

pub fn tm_add(a: &TaylorModel, b: &TaylorModel) -> Result<TaylorModel> {
    a.same_domain(b)?;
    let mut out = a.clone();
    let mut slack = Slack::default();
    for r in b.nonzero() {
        slack.add(&mut out.coeffs[r], b.coeffs[r], a.ctx.magnitude[r]);
    }
    out.remainder = a.remainder + b.remainder + slack.interval();
    out.refresh_degree();
    Ok(out)
}

pub fn tm_sub(a: &TaylorModel, b: &TaylorModel) -> Result<TaylorModel> {
    tm_add(a, &tm_scale(b, -1.0))
}

/// `k * a`.
pub fn tm_scale(a: &TaylorModel, k: f64) -> TaylorModel {
    let mut out = TaylorModel::zero(&a.ctx);
    let mut slack = Slack::default();
    let nz = a.nonzero();
    for &r in &nz {
        slack.fma(&mut out.coeffs[r], a.coeffs[r], k, a.ctx.magnitude[r]);
    }
    out.remainder = a.remainder.scale(k) + slack.interval();
    out.refresh_degree();
    out
}

/// `a + c`.
pub fn tm_add_const(a: &TaylorModel, c: f64) -> TaylorModel {
    let mut out = a.clone();
    let mut slack = Slack::default();
    slack.add(&mut out.coeffs[0], c, 1.0);
    out.remainder = out.remainder + slack.interval();
    out.refresh_degree();
    out
}

/// `bias + sum_j w_j m_j`, the pre-activation of one neuron.
pub fn tm_affine(models: &[TaylorModel], weights: &[f64], bias: f64) -> Result<TaylorModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::Parameter("affine combination of no models".into()))?;
    if weights.len() != models.len() {
        return Err(Error::Dimension {
            expected: models.len(),
            got: weights.len(),
        });
    }
    let ctx = &first.ctx;
    let mut out = TaylorModel::constant(ctx, bias);
    let mut slack = Slack::default();
    let mut rem = Interval::ZERO;
    for (m, &w) in models.iter().zip(weights) {
        m.same_domain(first)?;
        if w == 0.0 {
            continue;
        }
        for r in m.nonzero() {
            slack.fma(&mut out.coeffs[r], m.coeffs[r], w, ctx.magnitude[r]);
        }
        rem = rem + m.remainder.scale(w);
    }
    out.remainder = rem + slack.interval();
    out.refresh_degree();
    Ok(out)
}

/// Product truncated at the context's order cap.
pub fn tm_mul(a: &TaylorModel, b: &TaylorModel) -> Result<TaylorModel> {
    tm_mul_capped(a, b, a.ctx.cap)
}

/// Product truncated at total degree `cap` (at most the context's cap).
/// Dropped terms, cross terms with the remainders and rounding errors are
/// bounded over the domain and added to the remainder.
pub fn tm_mul_capped(a: &TaylorModel, b: &TaylorModel, cap: u32) -> Result<TaylorModel> {
    a.same_domain(b)?;
    let ctx = &a.ctx;
    let cap = cap.min(ctx.cap);
    let space = &ctx.space;
    let nv = ctx.nvars();
    let keep = space.degree_start(cap + 1);
    let wide = ctx.wide();
    let mut prod = vec![0.0; if wide { space.len() } else { ctx.len() }];
    let mut slack = Slack::default();
    let mut overflow_pairs = Interval::ZERO;
    let an = a.nonzero();
    let bn = b.nonzero();
    let bdeg: Vec<u32> = bn.iter().map(|&r| space.exponents(r).iter().sum()).collect();
    let mut buf = vec![0u32; nv];
    for &i in &an {
        let ei = space.exponents(i);
        let di: u32 = ei.iter().sum();
        let ai = a.coeffs[i];
        for (&j, &dj) in bn.iter().zip(&bdeg) {
            let ej = space.exponents(j);
            if !wide && di + dj > cap {
                overflow_pairs = overflow_pairs
                    + Interval::point(ai) * ctx.enclosure[i] * ctx.enclosure[j] * Interval::point(b.coeffs[j]);
                continue;
            }
            for k in 0..nv {
                buf[k] = ei[k] + ej[k];
            }
            let r = space.rank(&buf).expect("product degree within the wide space");
            slack.fma(&mut prod[r], ai, b.coeffs[j], ctx.magnitude[r]);
        }
    }
    let dropped = if wide {
        enclose(ctx, &{
            let mut high = prod.clone();
            high[..keep].iter_mut().for_each(|c| *c = 0.0);
            high
        })
    } else {
        overflow_pairs
            + enclose(ctx, &{
                let mut high = prod.clone();
                high[..keep].iter_mut().for_each(|c| *c = 0.0);
                high
            })
    };
    prod.truncate(ctx.len());
    prod[keep..].iter_mut().for_each(|c| *c = 0.0);

    let mut cross = Interval::ZERO;
    if b.remainder != Interval::ZERO {
        cross = cross + a.poly_bound() * b.remainder;
    }
    if a.remainder != Interval::ZERO {
        cross = cross + a.remainder * b.poly_bound();
        if b.remainder != Interval::ZERO {
            cross = cross + a.remainder * b.remainder;
        }
    }
    let mut out = TaylorModel {
        ctx: ctx.clone(),
        coeffs: prod,
        degree: 0,
        remainder: dropped + cross + slack.interval(),
        bound: OnceLock::new(),
    };
    out.refresh_degree();
    Ok(out)
}

const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;
const SHIFT_DIGITS: u32 = 50;

/// `sum_k power[k] a^k` for a model `a` that is exactly affine in the inputs,
/// or `None` for any other model.
///
/// The composition is `sum_j g_j L^j` with `g` the power coefficients shifted
/// to the constant term of `a` and `L` its linear part. Terms up to the order
/// cap are expanded with multinomial coefficients, the rest are bounded over
/// the range of `L` in Bernstein form. Rounding is bounded from the relative
/// error of the products and the error of each shifted coefficient.
pub(crate) fn compose_affine(power: &[f64], a: &TaylorModel) -> Option<TaylorModel> {
    let ctx = &a.ctx;
    if a.degree > 1 || a.remainder != Interval::ZERO || ctx.cap == 0 {
        return None;
    }
    let n = ctx.nvars();
    let space = &ctx.space;
    let top = power.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    let c = a.coeffs[0];
    let w: Vec<f64> = (1..=n).map(|r| a.coeffs[r]).collect();

    let exact: Vec<Real> = power[..=top].iter().map(|&p| Real::from_f64(p, SHIFT_DIGITS)).collect();
    let absolute: Vec<Real> = exact.iter().map(Real::abs).collect();
    let g_real = taylor_shift(&exact, &Real::from_f64(c, SHIFT_DIGITS));
    let g_abs = taylor_shift(&absolute, &Real::from_f64(c.abs(), SHIFT_DIGITS));
    let g: Vec<f64> = g_real.iter().map(Real::to_f64).collect();
    // |g_j - g[j]|: rounding to double plus the error of the shift itself
    let g_err: Vec<f64> = g
        .iter()
        .zip(&g_abs)
        .map(|(gj, big)| gj.abs() * UNIT_ROUNDOFF + big.to_f64() * 1e-40 + 1e-320)
        .collect();

    let cap = ctx.cap.min(top as u32);
    let keep = space.degree_start(cap + 1);
    let wpow: Vec<Vec<f64>> = w
        .iter()
        .map(|&wi| {
            let mut p = vec![1.0; cap as usize + 1];
            for e in 1..=cap as usize {
                p[e] = p[e - 1] * wi;
            }
            p
        })
        .collect();
    // the relative error analysis needs normal, finite products
    if wpow
        .iter()
        .flatten()
        .any(|p| *p != 0.0 && (p.abs() < 1e-290 || !p.is_finite()))
    {
        return None;
    }
    let multinomials = ctx.multinomials();
    let mut coeffs = vec![0.0; ctx.len()];
    let mut err = 0.0;
    let mut terms = 0usize;
    for r in 0..keep {
        let e = space.exponents(r);
        let j: u32 = e.iter().sum();
        let mw = e
            .iter()
            .zip(&wpow)
            .fold(multinomials[r], |acc, (&k, p)| acc * p[k as usize]);
        if mw == 0.0 || g[j as usize] == 0.0 && g_err[j as usize] <= 1e-320 {
            continue;
        }
        let v = g[j as usize] * mw;
        coeffs[r] = v;
        let ops = (j + n as u32 + 3) as f64;
        let gamma = ops * UNIT_ROUNDOFF * (1.0 + 1e-10);
        let e_r = v.abs() * gamma * 1.0001 + g_err[j as usize] * mw.abs() * (1.0 + 2.0 * gamma) + ops * 5e-324;
        err += e_r * ctx.magnitude[r];
        terms += 1;
    }

    let linear = w
        .iter()
        .zip(&ctx.domain)
        .fold(Interval::ZERO, |acc, (&wi, d)| acc + Interval::point(wi) * *d);
    let mut tail = Interval::ZERO;
    if top as u32 > cap {
        let mut tc = vec![0.0; top + 1];
        tc[cap as usize + 1..].copy_from_slice(&g[cap as usize + 1..=top]);
        let uni = MonomialSpace::new(1, top as u32).ok()?;
        let termwise = (cap as usize + 1..=top).fold(Interval::ZERO, |acc, j| {
            acc + Interval::point(g[j]) * linear.powi(j as u32)
        });
        tail = match bernstein_range(&uni, &tc, &[linear]) {
            Some(b) if !termwise.intersect(&b).is_empty() => termwise.intersect(&b),
            _ => termwise,
        };
        let lmag = linear.mag();
        let tail_err = (cap as usize + 1..=top).fold(0.0, |acc, j| acc + g_err[j] * lmag.powi(j as i32));
        tail = tail + Interval::symmetric(tail_err * (1.0 + 1e-10));
    }
    let rounding = Interval::symmetric(err * (1.0 + 1e-10) + terms as f64 * 5e-324);
    let mut out = TaylorModel {
        ctx: ctx.clone(),
        coeffs,
        degree: 0,
        remainder: tail + rounding,
        bound: OnceLock::new(),
    };
    out.refresh_degree();
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffnn::fuzz_inputs;
    use proptest::prelude::*;

    fn ctx(domain: &[(f64, f64)], cap: u32) -> Arc<TmContext> {
        TmContext::new(domain.iter().map(|&(a, b)| Interval::new(a, b)).collect(), cap).unwrap()
    }

    #[test]
    fn adding_zero_is_identity() {
        let c = ctx(&[(-1.0, 1.0), (0.0, 2.0)], 4);
        let x = TaylorModel::inputs(&c);
        let a = tm_mul(&x[0], &x[1]).unwrap().with_remainder(Interval::new(-1e-3, 1e-3));
        let s = tm_add(&a, &TaylorModel::zero(&c)).unwrap();
        assert_eq!(s.coefficients(), a.coefficients());
        assert!(s.remainder().contains_interval(&a.remainder()));
        assert!(s.remainder().width() - a.remainder().width() < 1e-17);
    }

    #[test]
    fn remainders_add() {
        let c = ctx(&[(-1.0, 1.0)], 3);
        let a = TaylorModel::zero(&c).with_remainder(Interval::new(-1e-3, 1e-3));
        let b = TaylorModel::zero(&c).with_remainder(Interval::new(-2e-3, 0.0));
        let r = tm_add(&a, &b).unwrap().remainder();
        assert!(r.contains_interval(&Interval::new(-3e-3, 1e-3)));
        assert!(r.width() < 4e-3 * (1.0 + 1e-12));
    }

    #[test]
    fn multiplying_by_one() {
        let c = ctx(&[(-1.0, 1.0), (-0.5, 0.5)], 5);
        let x = TaylorModel::inputs(&c);
        let a = tm_add_const(&tm_mul(&x[0], &x[1]).unwrap(), 0.25);
        let p = tm_mul(&a, &TaylorModel::constant(&c, 1.0)).unwrap();
        assert_eq!(p.coefficients(), a.coefficients());
        assert!(p.remainder().width() == 0.0);
    }

    #[test]
    fn square_with_cap_one_moves_into_remainder() {
        let c = ctx(&[(-1.0, 1.0)], 1);
        let x = TaylorModel::variable(&c, 0).unwrap();
        let p = tm_mul(&x, &x).unwrap();
        assert!(p.coefficients().iter().all(|&v| v == 0.0));
        assert!(p.remainder().contains_interval(&Interval::new(0.0, 1.0)));
    }

    #[test]
    fn no_truncation_below_cap() {
        let c = ctx(&[(-1.0, 1.0), (-1.0, 1.0)], 4);
        let x = TaylorModel::inputs(&c);
        let a = tm_add_const(&x[0], 0.5);
        let b = tm_add(&x[1], &x[0]).unwrap();
        let p = tm_mul(&a, &b).unwrap();
        assert_eq!(p.remainder(), Interval::ZERO);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn bounds_of_simple_models() {
        let c = ctx(&[(-1.0, 2.0)], 3);
        let k = TaylorModel::constant(&c, 0.5).with_remainder(Interval::symmetric(0.1));
        let b = tm_bound(&k);
        assert!(b.contains_interval(&Interval::new(0.4, 0.6)) && b.width() < 0.2 + 1e-12);
        let x = TaylorModel::variable(&c, 0).unwrap();
        let bx = tm_bound(&x);
        assert!(bx.contains_interval(&Interval::new(-1.0, 2.0)) && bx.width() < 3.0 + 1e-12);
        let bxx = tm_bound(&tm_mul(&x, &x).unwrap());
        assert!(bxx.contains_interval(&Interval::new(0.0, 4.0)));
        assert!(bxx.lo >= -1e-12);
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let a = TaylorModel::zero(&ctx(&[(-1.0, 1.0)], 2));
        let b = TaylorModel::zero(&ctx(&[(-1.0, 2.0)], 2));
        assert!(matches!(tm_add(&a, &b), Err(Error::DomainMismatch)));
    }

    #[test]
    fn narrow_fallback_space_is_sound() {
        // eight variables at cap 12 force per-pair overflow bounding
        let dom = vec![(-0.5, 0.5); 8];
        let c = ctx(&dom, 12);
        assert!(!c.wide());
        let x = TaylorModel::inputs(&c);
        let mut s = TaylorModel::constant(&c, 0.3);
        for xi in &x {
            s = tm_add(&s, xi).unwrap();
        }
        let mut p = s.clone();
        for _ in 0..3 {
            p = tm_mul(&p, &s).unwrap();
        }
        for pt in fuzz_inputs(200, c.domain(), 1).unwrap() {
            let v: f64 = 0.3 + pt.iter().sum::<f64>();
            let f = v.powi(4);
            assert!(p.remainder().inflate(1e-12).contains(f - p.eval_poly(&pt)));
        }
    }

    // random polynomial model with a known function value
    fn random_chain(c: &Arc<TmContext>, seed: u64) -> (TaylorModel, impl Fn(&[f64]) -> f64) {
        let xs = fuzz_inputs(4, &[Interval::new(-1.0, 1.0); 1], seed).unwrap();
        let (k0, k1, k2, k3) = (xs[0][0], xs[1][0], xs[2][0], xs[3][0]);
        let x = TaylorModel::inputs(c);
        let l1 = tm_affine(&x, &vec![k1; x.len()], k0).unwrap();
        let l2 = tm_affine(&x, &vec![k2; x.len()], k3).unwrap();
        let mut m = tm_mul(&l1, &l2).unwrap();
        m = tm_mul(&m, &l1).unwrap();
        m = tm_add_const(&tm_scale(&m, 1.7), -0.2);
        m = tm_mul(&m, &m).unwrap();
        let f = move |p: &[f64]| {
            let s: f64 = p.iter().sum();
            let a = k0 + k1 * s;
            let b = k3 + k2 * s;
            let v = 1.7 * (a * b * a) - 0.2;
            v * v
        };
        (m, f)
    }

    #[test]
    fn contract_holds_on_random_points() {
        for seed in 0..8 {
            let c = ctx(&[(-1.0, 0.5), (-0.25, 1.0)], 3 + seed as u32 % 4);
            let (m, f) = random_chain(&c, seed);
            for p in fuzz_inputs(500, c.domain(), seed).unwrap() {
                let e = f(&p) - m.eval_poly(&p);
                assert!(
                    m.remainder().inflate(1e-13).contains(e),
                    "seed {seed}: {e} outside {}",
                    m.remainder()
                );
                assert!(tm_bound(&m).contains(f(&p)));
            }
        }
    }

    #[test]
    fn affine_composition_is_sound_with_and_without_truncation() {
        // a degree-9 polynomial with mixed signs
        let power = [0.1, 1.0, -0.3, -0.2, 0.05, 0.02, -0.004, -0.001, 2e-4, 5e-5];
        let p = |v: f64| power.iter().rev().fold(0.0, |acc, c| acc * v + c);
        for cap in [2u32, 5, 9, 12] {
            let c = ctx(&[(-0.5, 0.5), (-1.0, 0.25), (0.0, 2.0)], cap);
            let x = TaylorModel::inputs(&c);
            let pre = tm_affine(&x, &[0.7, -1.3, 0.45], 0.2).unwrap();
            let m = compose_affine(&power, &pre).unwrap();
            assert!(m.degree() <= cap);
            if cap >= 9 {
                assert!(m.remainder().width() < 1e-13, "{}", m.remainder());
            }
            for q in fuzz_inputs(2000, c.domain(), cap as u64).unwrap() {
                let v = 0.2 + 0.7 * q[0] - 1.3 * q[1] + 0.45 * q[2];
                let e = p(v) - m.eval_poly(&q);
                assert!(
                    m.remainder().inflate(1e-13).contains(e),
                    "cap {cap}: {e} outside {}",
                    m.remainder()
                );
            }
        }
        // non-affine models take the general path
        let c = ctx(&[(-1.0, 1.0)], 4);
        let x = TaylorModel::variable(&c, 0).unwrap();
        assert!(compose_affine(&power, &tm_mul(&x, &x).unwrap()).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn truncated_bound_contains_untruncated_range(seed in 0u64..1000, cap in 1u32..6) {
            // enclosures of differently truncated models are not nested in
            // general, so the reference is the sampled range of the full product
            let dom = [(-1.0, 1.0), (-0.5, 0.75)];
            let full = ctx(&dom, 12);
            let small = ctx(&dom, cap);
            let (a, _) = random_chain(&full, seed);
            let (b, _) = random_chain(&small, seed);
            let bound = tm_bound(&b);
            for p in fuzz_inputs(400, full.domain(), seed).unwrap() {
                let y = a.eval_poly(&p);
                prop_assert!(bound.inflate(1e-13).contains(y), "{} misses {}", bound, y);
            }
        }
    }
}
