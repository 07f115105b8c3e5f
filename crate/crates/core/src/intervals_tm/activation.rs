//! Activation functions as Taylor-model operations: a univariate polynomial
//! with an error interval valid on `[-vmax, vmax]`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::interval::Interval;
use super::optimize::brent_minimize;
use super::taylor::{compose_affine, tm_add, tm_add_const, tm_bound, tm_mul, tm_scale, TaylorModel};
use crate::expansion::{coefficients, error_approx, error_exact, ActivationKind, AmiteExpansion};
use crate::mpcore::Real;
use crate::{Error, Result};

/// Precision used for `H` while fitting.
pub const FIT_DIGITS: u32 = 30;
/// Default abscissa tolerance of the bounded optimizer.
pub const DEFAULT_OPT_TOL: f64 = 1e-12;
/// Grid points per predicted error oscillation.
pub const GRID_POINTS_PER_PERIOD: usize = 8;
pub const MIN_GRID_POINTS: usize = 512;
/// Candidates refined with the optimizer on each side.
const REFINED_PER_SIDE: usize = 3;
const MAX_OPT_EVALUATIONS: usize = 200;
/// Strongest extrema of `I` per sign that get an exact evaluation.
const CANDIDATES_PER_SIDE: usize = 24;

/// Polynomial `sum_k power[k] v^k` with `phi(v) - p(v) ∈ error` for `|v| <= vmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationModel {
    power: Vec<f64>,
    error: Interval,
    vmax: f64,
}

impl ActivationModel {
    pub fn new(power: Vec<f64>, error: Interval, vmax: f64) -> Result<Self> {
        if power.is_empty() || power.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter(
                "activation polynomial needs finite coefficients".into(),
            ));
        }
        if error.is_empty() || !(vmax > 0.0) {
            return Err(Error::Parameter(format!("invalid error {error} or vmax {vmax}")));
        }
        Ok(ActivationModel { power, error, vmax })
    }

    /// `phi(v) = v` exactly, everywhere.
    pub fn identity() -> Self {
        ActivationModel {
            power: vec![0.0, 1.0],
            error: Interval::ZERO,
            vmax: f64::INFINITY,
        }
    }

    /// Fits the error interval of `expansion` and pairs it with the expansion's
    /// double-precision coefficients.
    pub fn from_expansion(expansion: &AmiteExpansion, opt_tol: f64) -> Result<Self> {
        let fit = fit_expansion_error(expansion, opt_tol)?;
        Self::new(expansion.power_coefficients_f64(), fit.interval, expansion.vmax())
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn error(&self) -> Interval {
        self.error
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn degree(&self) -> usize {
        self.power.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }
}

// Horner in u = v^2 over every other coefficient starting at `start`.
fn horner_in_square(coeffs: &[f64], start: usize, u: &TaylorModel) -> Result<Option<TaylorModel>> {
    let c: Vec<f64> = coeffs.iter().skip(start).step_by(2).copied().collect();
    let Some(top) = c.iter().rposition(|x| *x != 0.0) else {
        return Ok(None);
    };
    if top == 0 {
        return Ok(Some(TaylorModel::constant(u.context(), c[0])));
    }
    let mut acc = tm_add_const(&tm_scale(u, c[top]), c[top - 1]);
    for k in (0..top - 1).rev() {
        acc = tm_add_const(&tm_mul(&acc, u)?, c[k]);
    }
    Ok(Some(acc))
}

/// `phi(preact)` as a Taylor model. Fails with [`Error::DomainExceeded`] when
/// the pre-activation bound leaves `[-vmax, vmax]`.
pub fn tm_compose(model: &ActivationModel, preact: &TaylorModel) -> Result<TaylorModel> {
    let bound = tm_bound(preact);
    if !(bound.is_finite() && Interval::symmetric(model.vmax).contains_interval(&bound)) {
        return Err(Error::DomainExceeded {
            bound,
            vmax: model.vmax,
        });
    }
    let p = &model.power;
    if let Some(out) = compose_affine(p, preact) {
        return Ok(if model.error == Interval::ZERO {
            out
        } else {
            out.with_remainder(model.error)
        });
    }
    let u = if p.len() > 2 {
        Some(tm_mul(preact, preact)?)
    } else {
        None
    };
    let even = match &u {
        Some(u) => horner_in_square(p, 0, u)?,
        None => (p[0] != 0.0).then(|| TaylorModel::constant(preact.context(), p[0])),
    };
    let odd_factor = match &u {
        Some(u) => horner_in_square(p, 1, u)?,
        None => p
            .get(1)
            .filter(|c| **c != 0.0)
            .map(|&c| TaylorModel::constant(preact.context(), c)),
    };
    let odd = match odd_factor {
        None => None,
        Some(f) if f.degree() == 0 && f.remainder() == Interval::ZERO => Some(tm_scale(preact, f.coefficients()[0])),
        Some(f) => Some(tm_mul(preact, &f)?),
    };
    let out = match (even, odd) {
        (Some(e), Some(o)) => tm_add(&e, &o)?,
        (Some(e), None) => e,
        (None, Some(o)) => o,
        (None, None) => TaylorModel::zero(preact.context()),
    };
    Ok(if model.error == Interval::ZERO {
        out
    } else {
        out.with_remainder(model.error)
    })
}

/// Composes the activation of `expansion` with `preact`, fitting (or reusing)
/// its error interval with optimizer tolerance `tol`.
pub fn tm_from_activation(expansion: &AmiteExpansion, preact: &TaylorModel, tol: f64) -> Result<TaylorModel> {
    let model = cached_model(expansion, tol)?;
    tm_compose(&model, preact)
}

/// Outcome of an error fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub interval: Interval,
    /// Extremes of `H` before tolerances were added.
    pub observed: (f64, f64),
    pub grid_points: usize,
    pub exact_evaluations: usize,
    /// Whether the dense-grid fallback was used.
    pub fallback: bool,
}

fn exact_at(expansion: &AmiteExpansion, v: f64) -> f64 {
    error_exact(expansion, &Real::from_f64(v, FIT_DIGITS))
        .map(|h| h.to_f64())
        .unwrap_or(f64::NAN)
}

/// Bound on `|p_exact(v) - p_f64(v)|` for `|v| <= vmax`.
pub fn coefficient_rounding_bound(expansion: &AmiteExpansion) -> f64 {
    let d = FIT_DIGITS;
    let v = Real::from_f64(expansion.vmax(), d);
    let mut total = Real::zero(d);
    let mut vk = Real::one(d);
    for (exact, rounded) in expansion
        .power_coefficients()
        .iter()
        .zip(expansion.power_coefficients_f64())
    {
        let diff = (exact.with_digits(d) - rounded).abs();
        total += &diff * &vk;
        vk *= &v;
    }
    let t = total.to_f64();
    if t == 0.0 {
        0.0
    } else {
        (t * (1.0 + 1e-10)).next_up()
    }
}

/// Error interval of the expansion on `[-V, V]`: grid search over the cheap
/// approximation `I`, exact `H` at its strongest extrema and the endpoints, then the
/// bounded optimizer on `H` within half a period of the strongest candidates.
pub fn fit_expansion_error(expansion: &AmiteExpansion, opt_tol: f64) -> Result<FitReport> {
    if !(opt_tol > 0.0) {
        return Err(Error::Parameter(format!(
            "optimizer tolerance must be positive, got {opt_tol}"
        )));
    }
    let vmax = expansion.vmax();
    let kb = expansion.kernel_bound().to_f64();
    let half_period = PI / kb;
    let periods = 2.0 * vmax / (2.0 * half_period);
    let n = MIN_GRID_POINTS.max((GRID_POINTS_PER_PERIOD as f64 * periods).ceil() as usize) + 1;
    let grid: Vec<f64> = (0..n).map(|i| -vmax + 2.0 * vmax * i as f64 / (n - 1) as f64).collect();
    let approx: Vec<f64> = grid
        .par_iter()
        .map(|&v| error_approx(expansion, &Real::from_f64(v, 20)).to_f64())
        .collect();

    let mut extrema: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            let (a, b, c) = (approx[i - 1], approx[i], approx[i + 1]);
            (b > a && b >= c) || (b < a && b <= c)
        })
        .collect();
    extrema.sort_by(|&i, &j| approx[i].total_cmp(&approx[j]));
    let mut candidates = vec![0, n - 1];
    if extrema.len() <= 2 * CANDIDATES_PER_SIDE {
        candidates.extend(&extrema);
    } else {
        candidates.extend(&extrema[..CANDIDATES_PER_SIDE]);
        candidates.extend(&extrema[extrema.len() - CANDIDATES_PER_SIDE..]);
    }
    let rounding = coefficient_rounding_bound(expansion);
    let exact: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(|&i| (grid[i], exact_at(expansion, grid[i])))
        .collect();
    let mut evaluations = exact.len();
    if exact.iter().any(|(_, h)| !h.is_finite()) {
        return dense_fallback(expansion, n, opt_tol, rounding);
    }

    // Locating the extremum to 1e-7 of a half period changes the value only at second order.
    let xtol = opt_tol.max(1e-7 * half_period);
    let refine = |points: &[(f64, f64)], maximize: bool| -> Result<Vec<(f64, usize)>> {
        points
            .par_iter()
            .map(|&(x0, _)| {
                let lo = (x0 - half_period).max(-vmax);
                let hi = (x0 + half_period).min(vmax);
                let sign = if maximize { -1.0 } else { 1.0 };
                let m = brent_minimize(|v| sign * exact_at(expansion, v), lo, hi, xtol, MAX_OPT_EVALUATIONS)?;
                Ok((sign * m.value, m.evaluations))
            })
            .collect()
    };
    let mut by_value = exact.clone();
    by_value.sort_by(|a, b| a.1.total_cmp(&b.1));
    let k = REFINED_PER_SIDE.min(by_value.len() / 2).max(1);
    let lows = &by_value[..k];
    let highs: Vec<(f64, f64)> = by_value.iter().rev().take(k).copied().collect();
    let (mins, maxs) = match (refine(lows, false), refine(&highs, true)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return dense_fallback(expansion, n, opt_tol, rounding),
    };
    evaluations += mins.iter().chain(&maxs).map(|m| m.1).sum::<usize>();
    let e_min = mins
        .iter()
        .map(|m| m.0)
        .chain(exact.iter().map(|e| e.1))
        .fold(f64::INFINITY, f64::min);
    let e_max = maxs
        .iter()
        .map(|m| m.0)
        .chain(exact.iter().map(|e| e.1))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FitReport {
        interval: Interval::new(e_min - opt_tol, e_max + opt_tol).inflate(rounding),
        observed: (e_min, e_max),
        grid_points: n,
        exact_evaluations: evaluations,
        fallback: false,
    })
}

// Dense grid over H with 4x the points; the interval is widened by the
// largest observed magnitude.
fn dense_fallback(expansion: &AmiteExpansion, n: usize, opt_tol: f64, rounding: f64) -> Result<FitReport> {
    let vmax = expansion.vmax();
    let m = 4 * n;
    let values: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| exact_at(expansion, -vmax + 2.0 * vmax * i as f64 / (m - 1) as f64))
        .collect();
    if values.iter().any(|h| !h.is_finite()) {
        return Err(Error::Optimizer(
            "exact error is not finite on the fallback grid".into(),
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = lo.abs().max(hi.abs());
    Ok(FitReport {
        interval: Interval::new(lo - pad - opt_tol, hi + pad + opt_tol).inflate(rounding),
        observed: (lo, hi),
        grid_points: m,
        exact_evaluations: m,
        fallback: true,
    })
}

/// Error interval of the `(kind, M, V, digits)` expansion on `[-V, V]`.
pub fn fit_error_interval(kind: ActivationKind, terms: u32, vmax: f64, digits: u32, opt_tol: f64) -> Result<Interval> {
    let e = coefficients(kind, terms, vmax, digits)?;
    Ok(fit_expansion_error(&e, opt_tol)?.interval)
}

type ModelKey = (ActivationKind, u32, u64, u32, u64);

fn model_cache() -> &'static Mutex<HashMap<ModelKey, Arc<ActivationModel>>> {
    static CACHE: OnceLock<Mutex<HashMap<ModelKey, Arc<ActivationModel>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Fitted model for `expansion`, computed once per process.
pub fn cached_model(expansion: &AmiteExpansion, opt_tol: f64) -> Result<Arc<ActivationModel>> {
    let key = (
        expansion.kind(),
        expansion.terms(),
        expansion.vmax().to_bits(),
        expansion.digits(),
        opt_tol.to_bits(),
    );
    if let Some(m) = model_cache().lock().unwrap().get(&key) {
        return Ok(m.clone());
    }
    let m = Arc::new(ActivationModel::from_expansion(expansion, opt_tol)?);
    model_cache().lock().unwrap().insert(key, m.clone());
    Ok(m)
}
