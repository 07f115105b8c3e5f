//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL ...` line
//! straight to stdout (so it shows without `--nocapture`) before asserting.
//!
//! Tests take a shared lock so that the runtimes they report are not
//! inflated by each other.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use amite::equivtest::{default_vmax, equivalence_test, EquivConfig, Outcome};
use amite::expansion::{
    coefficients, error_report, lambda_integral, relu_coefficients, relu_error_oscillating, tanh_coefficients,
    taylor_coefficients_tanh, ActivationKind,
};
use amite::ffnn::{fuzz_inputs, perturb_weights, Activation, Network};
use amite::intervals_tm::{
    interval_add, interval_mul, interval_pow, interval_sub, tm_add, tm_add_const, tm_affine, tm_bound, tm_compose,
    tm_mul, tm_scale, tm_sub, ActivationModel, Interval, TaylorModel, TmContext,
};
use amite::mpcore::{integrate, Complex, Rational, Real};
use amite::polyexpand::{eval_poly, expand_layer, expand_layer_with_cache, MultinomialCache};
use amite::rangebound::{bound_campaign, range_bound_amite, CampaignSpec, Method, RangeOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn rel(a: &Real, b: &Real) -> f64 {
    let d = (a - b).abs();
    if b.is_zero() {
        d.to_f64()
    } else {
        (d / b.abs()).to_f64()
    }
}

fn factorial(n: u32, digits: u32) -> Real {
    (1..=n as i64).fold(Real::one(digits), |acc, k| acc * k)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_coefficients_match_quadrature() {
    let _g = serial();
    let start = Instant::now();
    let d = 80;
    let mut worst = 0f64;
    for terms in [3u32, 6, 12] {
        for vmax in [2.0, 20.0] {
            let t = tanh_coefficients(terms, vmax, d).unwrap();
            let tau = t.kernel_bound().clone();
            let a = Real::pi(d) / 2i64;
            for (m, c) in t.coefficients().iter().enumerate() {
                let n = 2 * m as u32 + 1;
                let q = integrate(|x| x.powu(n) * (&a * x).csch(), &Real::zero(d), &tau, d).unwrap();
                let sign = if m % 2 == 0 { 1i64 } else { -1i64 };
                worst = worst.max(rel(c, &(q * sign / factorial(n, d))));
            }

            let r = relu_coefficients(terms, vmax, d).unwrap();
            let sigma = r.kernel_bound().clone();
            let pi = Real::pi(d);
            for (m, c) in r.coefficients().iter().enumerate() {
                let expected = if m == 0 {
                    // int_sigma^inf xi^-2 with u = 1/xi
                    integrate(|_| Real::one(d), &Real::zero(d), &sigma.recip(), d).unwrap() / &pi
                } else {
                    let k = 2 * m as u32;
                    let q = integrate(|x| x.powu(k - 2), &Real::zero(d), &sigma, d).unwrap();
                    let sign = if m % 2 == 1 { 1i64 } else { -1i64 };
                    q * sign / (&pi * factorial(k, d))
                };
                worst = worst.max(rel(c, &expected));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-30 && secs <= 300.0;
    report(
        1,
        pass,
        &format!("worst relative difference {worst:.2e} (limit 1e-30), {secs:.1}s (limit 300s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

struct FigureCheck {
    e_minus_h: f64,
    double_minus_h: f64,
    approx_ratio: f64,
    /// Same-direction crossing spacings in units of `2 pi / bound`.
    median_spacing: f64,
    worst_spacing: f64,
    crossings: usize,
    secs: f64,
}

/// Zero crossings of `y` on `x` (linear interpolation), with direction.
fn crossings(x: &[f64], y: &[f64]) -> Vec<(f64, bool)> {
    let mut out = Vec::new();
    for i in 0..x.len() - 1 {
        if y[i] == 0.0 {
            if i > 0 && y[i - 1] * y[i + 1] < 0.0 {
                out.push((x[i], y[i + 1] > 0.0));
            }
        } else if y[i] * y[i + 1] < 0.0 {
            let t = y[i] / (y[i] - y[i + 1]);
            out.push((x[i] + t * (x[i + 1] - x[i]), y[i + 1] > 0.0));
        }
    }
    out
}

fn figure_check(kind: ActivationKind) -> FigureCheck {
    let start = Instant::now();
    let e = coefficients(kind, 25, 20.0, 450).unwrap();
    let n = 2001;
    let grid: Vec<f64> = (0..n).map(|i| -20.5 + 41.0 * i as f64 / (n - 1) as f64).collect();
    let r = error_report(&e, &grid, 50).unwrap();
    let max_abs = |it: &mut dyn Iterator<Item = f64>| it.fold(0f64, |m, x| m.max(x.abs()));

    let e_minus_h = max_abs(&mut r.measured_minus_exact.iter().copied());
    let double_minus_h = max_abs(&mut r.measured_double.iter().zip(&r.exact).map(|(a, b)| a - b));
    let inside: Vec<usize> = (0..n).filter(|&i| grid[i].abs() <= 20.0).collect();
    let osc_max = max_abs(&mut inside.iter().map(|&i| r.oscillating[i]));
    let approx_ratio = max_abs(&mut inside.iter().map(|&i| r.oscillating[i] - r.approximate[i])) / osc_max;

    let xs: Vec<f64> = inside.iter().map(|&i| grid[i]).collect();
    let ys: Vec<f64> = inside.iter().map(|&i| r.measured[i]).collect();
    let zeros = crossings(&xs, &ys);
    let period = 2.0 * std::f64::consts::PI / e.kernel_bound().to_f64();
    let mut ratios: Vec<f64> = Vec::new();
    for dir in [true, false] {
        let same: Vec<f64> = zeros.iter().filter(|z| z.1 == dir).map(|z| z.0).collect();
        ratios.extend(same.windows(2).map(|w| (w[1] - w[0]) / period));
    }
    ratios.sort_by(f64::total_cmp);
    let median = if ratios.is_empty() {
        f64::NAN
    } else {
        ratios[ratios.len() / 2]
    };
    let worst = ratios.iter().fold(0f64, |m, r| m.max((r - 1.0).abs()));
    FigureCheck {
        e_minus_h,
        double_minus_h,
        approx_ratio,
        median_spacing: median,
        worst_spacing: worst,
        crossings: zeros.len(),
        secs: start.elapsed().as_secs_f64(),
    }
}

fn figure_verdict(c: &FigureCheck) -> (bool, String) {
    let pass = c.e_minus_h <= 1e-10
        && c.double_minus_h <= 1e-8
        && c.approx_ratio <= 0.05
        && (c.median_spacing - 1.0).abs() <= 0.10
        && c.secs <= 600.0;
    let detail = format!(
        "max|E-H| {:.2e} (1e-10), max|E_double-H| {:.2e} (1e-8), |I_exact-I_approx|/max|I_exact| {:.4} (0.05), \
         median same-direction crossing spacing {:.3} x 2pi/bound (within 0.10; worst pair off by {:.3}, \
         {} crossings), {:.1}s (600s)",
        c.e_minus_h, c.double_minus_h, c.approx_ratio, c.median_spacing, c.worst_spacing, c.crossings, c.secs
    );
    (pass, detail)
}

#[test]
fn criterion_2_tanh_error_curves() {
    let _g = serial();
    let c = figure_check(ActivationKind::Tanh);
    let (pass, detail) = figure_verdict(&c);
    report(2, pass, &detail);
    assert!(pass);
}

/// `-(1/pi) int_sigma^inf cos(xi v)/xi^2 dxi` by panel quadrature up to
/// `v X = 100` plus the asymptotic tail beyond `X`, summed up to its smallest
/// term (about `e^{-100}`).
fn relu_oscillating_oracle(sigma: &Real, x: f64, w: u32) -> Real {
    let sigma = sigma.with_digits(w);
    let v = Real::from_f64(x, w);
    let big_x = Real::from_f64(100.0 / x, w);
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
    loop {
        tail = &tail + &term;
        k += 1;
        let next = (&term / &iv).scale(&(Real::from_i64(k + 1, w) / &big_x));
        if next.abs().log10_abs() >= term.abs().log10_abs() {
            break;
        }
        term = next;
    }
    let lead = &Complex::cis(&(&v * &big_x)) / &iv;
    total -= (&lead * &tail).re;
    -total / Real::pi(w)
}

#[test]
fn criterion_3_relu_error_curves() {
    let _g = serial();
    let c = figure_check(ActivationKind::Relu);
    let (mut pass, mut detail) = figure_verdict(&c);

    // the cos-term of the oscillating part against an independent quadrature
    let e = relu_coefficients(25, 20.0, 450).unwrap();
    let mut worst = 0f64;
    for x in [0.5, 3.7, 11.2, 19.9] {
        let got = relu_error_oscillating(&e, &Real::from_f64(x, 30));
        let expected = relu_oscillating_oracle(e.kernel_bound(), x, 50);
        worst = worst.max(rel(&got, &expected));
    }
    pass &= worst < 1e-20;
    detail.push_str(&format!(", oscillating term vs quadrature {worst:.2e} (1e-20)"));
    report(3, pass, &detail);
    assert!(pass);
}

// ---------------------------------------------------------------------------

/// `k`-th derivative at zero by a central difference of step `h`.
fn central_derivative(f: impl Fn(&Real) -> Real, k: u32, h: &Real, digits: u32) -> Real {
    let mut acc = Real::zero(digits);
    let mut binom = Real::one(digits);
    for j in 0..=k {
        let x = h * Real::from_f64(k as f64 / 2.0 - j as f64, digits);
        let term = &binom * f(&x);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom = binom * (k - j) as i64 / (j as i64 + 1);
    }
    acc / h.powu(k)
}

#[test]
fn criterion_4_taylor_baseline() {
    let _g = serial();
    let d = 200;
    let taylor = taylor_coefficients_tanh(10).unwrap();
    let leading = [
        Rational::from((1, 1)),
        Rational::from((-1, 3)),
        Rational::from((2, 15)),
        Rational::from((-17, 315)),
    ];
    let exact_leading = taylor[..4] == leading;

    let h = Real::from_f64(1e-6, d);
    let mut worst = 0f64;
    for (m, c) in taylor.iter().enumerate() {
        let k = 2 * m as u32 + 1;
        let fd = central_derivative(|x| x.tanh(), k, &h, d) / factorial(k, d);
        worst = worst.max(rel(&Real::from_rational(c, d), &fd));
    }

    let partial = |terms: usize, v: f64| -> f64 {
        let v = Real::from_f64(v, d);
        let s = taylor[..terms].iter().enumerate().fold(Real::zero(d), |acc, (m, c)| {
            acc + Real::from_rational(c, d) * v.powu(2 * m as u32 + 1)
        });
        (s - v.tanh()).abs().to_f64()
    };
    let at_two = partial(10, 2.0);
    let grows_outside = [1.6, 2.0, 3.0]
        .iter()
        .all(|&v| partial(10, v) > partial(5, v) && partial(5, v) > partial(3, v));
    let shrinks_inside = partial(10, 1.2) < partial(5, 1.2) && partial(5, 1.2) < partial(3, 1.2);

    let pass = exact_leading && worst < 1e-9 && at_two > 1.0 && grows_outside && shrinks_inside;
    report(
        4,
        pass,
        &format!(
            "leading terms exact {exact_leading}, worst difference from finite differences {worst:.2e} (1e-9), \
             partial-sum error at v=2 with 10 terms {at_two:.3} (> 1), diverges for v >= 1.6 {grows_outside}, \
             converges at v=1.2 {shrinks_inside}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

struct Tally {
    correct: usize,
    total: usize,
    false_alarms: usize,
    misses: usize,
    inconclusive: usize,
}

impl Tally {
    fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

fn equivalence_campaign(snr_db: Option<f64>, seeds: u64) -> Tally {
    let mut t = Tally {
        correct: 0,
        total: 0,
        false_alarms: 0,
        misses: 0,
        inconclusive: 0,
    };
    for seed in 0..seeds {
        for id in 0..12u64 {
            let ni = if id < 6 { 1 } else { 2 };
            let nh = if id % 6 < 3 { 5 } else { 10 };
            let net = Network::random(ni, &[nh], 1, Activation::Tanh, 100 + id).unwrap();
            let defective = id % 2 == 1;
            let under_test = if defective {
                perturb_weights(&net, 0.05, 500 + id).unwrap()
            } else {
                net.clone()
            };
            let mut cfg = EquivConfig::new(ni);
            cfg.snr_db = snr_db;
            cfg.seed = seed * 1000 + id;
            let verdict = equivalence_test(&net, |x| under_test.forward(x), &cfg).unwrap();
            t.total += 1;
            match (verdict.outcome, defective) {
                (Outcome::Inconclusive, _) => t.inconclusive += 1,
                (Outcome::Equivalent, false) | (Outcome::NotEquivalent, true) => t.correct += 1,
                (Outcome::Equivalent, true) => t.misses += 1,
                (Outcome::NotEquivalent, false) => t.false_alarms += 1,
            }
        }
    }
    t
}

#[test]
fn criterion_5_equivalence_campaign() {
    let _g = serial();
    let start = Instant::now();
    let clean = equivalence_campaign(None, 3);
    let noisy = equivalence_campaign(Some(20.0), 3);
    let secs = start.elapsed().as_secs_f64();
    let pass = clean.accuracy() == 1.0 && noisy.accuracy() >= 0.9 && secs <= 900.0;
    let fmt = |t: &Tally| {
        format!(
            "{}/{} (false alarms {}, misses {}, inconclusive {})",
            t.correct, t.total, t.false_alarms, t.misses, t.inconclusive
        )
    };
    report(
        5,
        pass,
        &format!(
            "noiseless {} (all), 20 dB {} (>= 90%), {secs:.1}s (900s)",
            fmt(&clean),
            fmt(&noisy)
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_6_range_bounding_population() {
    let _g = serial();
    let start = Instant::now();
    let spec = CampaignSpec {
        inputs: 3,
        hidden_layers: vec![3, 5],
        hidden: vec![5, 10],
        nets_per_architecture: 3,
        activation: Activation::Tanh,
        widths: vec![0.1, 1.0, 2.0],
        methods: vec![Method::Amite, Method::Taylor],
        terms_digits: None,
        seed: 0,
    };
    let nets = spec.networks().unwrap();
    let rows = bound_campaign(&spec).unwrap();

    let mut violations = 0;
    let mut amite_rows = 0;
    for row in rows.iter().filter(|r| r.method == Method::Amite) {
        amite_rows += 1;
        if row.diverged || !row.bound.contains_interval(&row.numeric_estimate) {
            violations += 1;
            continue;
        }
        let net = &nets.iter().find(|(id, _)| *id == row.net_id).unwrap().1;
        let domain = vec![Interval::new(-row.width / 2.0, row.width / 2.0); spec.inputs];
        for x in fuzz_inputs(1000, &domain, 0xacce).unwrap() {
            if !row.bound.contains(net.forward(&x).unwrap()[row.output]) {
                violations += 1;
            }
        }
    }

    let mut separated = 0;
    for (id, _) in &nets {
        let at = |m: Method| {
            rows.iter()
                .find(|r| r.net_id == *id && r.method == m && r.width == 2.0)
                .unwrap()
        };
        let (a, t) = (at(Method::Amite), at(Method::Taylor));
        if t.diverged || t.overestimation >= 10.0 * a.overestimation {
            separated += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations == 0 && amite_rows == 36 && 2 * separated >= nets.len() && secs <= 1800.0;
    report(
        6,
        pass,
        &format!(
            "{violations} containment violations over {amite_rows} AMITE bounds (0), Taylor diverged or >= 10x \
             overestimation at width 2 on {separated}/{} nets (>= half), {secs:.1}s (1800s)",
            nets.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_7_wide_relu_network() {
    let _g = serial();
    let net = Network::random(3, &[1200], 1, Activation::Relu, 1200).unwrap();
    let domain = vec![Interval::new(-0.25, 0.25); 3];
    let opts = RangeOptions::for_network(&net);
    let r = range_bound_amite(&net, &domain, &opts, "wide").unwrap().remove(0);
    let mut misses = 0;
    if !r.diverged {
        for x in fuzz_inputs(1000, &domain, 0xacce).unwrap() {
            if !r.bound.contains(net.forward(&x).unwrap()[0]) {
                misses += 1;
            }
        }
    }
    let pass = !r.diverged && r.is_sound() && misses == 0 && r.coefficient_time_s <= 60.0 && r.runtime_s <= 600.0;
    report(
        7,
        pass,
        &format!(
            "diverged {}, bound {} contains numeric {} and 1000 rechecks ({misses} misses), coefficients {:.1}s (60s), \
             bounding {:.1}s (600s), M={} digits={}",
            r.diverged, r.bound, r.numeric_estimate, r.coefficient_time_s, r.runtime_s, r.terms, r.digits
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn random_double(rng: &mut ChaCha8Rng, max_exp: i32) -> f64 {
    let m: f64 = rng.random_range(-1.0..1.0);
    m * 2f64.powi(rng.random_range(-max_exp..=max_exp))
}

fn random_interval(rng: &mut ChaCha8Rng, max_exp: i32) -> Interval {
    let a = random_double(rng, max_exp);
    match rng.random_range(0..4) {
        0 => Interval::point(a),
        1 => Interval::hull_of(a, -a * rng.random::<f64>()),
        _ => Interval::hull_of(a, random_double(rng, max_exp)),
    }
}

fn random_member(rng: &mut ChaCha8Rng, i: Interval) -> f64 {
    match rng.random_range(0..4) {
        0 => i.lo,
        1 => i.hi,
        _ => (i.lo + rng.random::<f64>() * (i.hi - i.lo)).clamp(i.lo, i.hi),
    }
}

fn contains_exactly(i: Interval, x: &Real) -> bool {
    *x >= i.lo && *x <= i.hi
}

fn interval_trials(n: usize) -> usize {
    // 200 digits hold any product of up to nine doubles exactly
    let d = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for t in 0..n {
        let ok = match t % 4 {
            0..=2 => {
                let (a, b) = (random_interval(&mut rng, 40), random_interval(&mut rng, 40));
                let (x, y) = (random_member(&mut rng, a), random_member(&mut rng, b));
                let (rx, ry) = (Real::from_f64(x, d), Real::from_f64(y, d));
                match t % 4 {
                    0 => contains_exactly(interval_add(a, b), &(rx + ry)),
                    1 => contains_exactly(interval_sub(a, b), &(rx - ry)),
                    _ => contains_exactly(interval_mul(a, b), &(rx * ry)),
                }
            }
            _ => {
                let a = random_interval(&mut rng, 12);
                let n = rng.random_range(0..=9u32);
                let x = random_member(&mut rng, a);
                contains_exactly(interval_pow(a, n), &Real::from_f64(x, d).powu(n))
            }
        };
        if !ok {
            violations += 1;
        }
    }
    violations
}

/// Random chain of Taylor-model operations; returns the number of sample
/// points where the exact function escapes `poly + remainder` or the bound.
fn taylor_model_trial(seed: u64) -> usize {
    let d = 120;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.random_range(1..=3usize);
    let domain: Vec<Interval> = (0..nvars)
        .map(|_| {
            let c = rng.random_range(-1.0..1.0);
            let r = rng.random_range(0.01..1.0);
            Interval::new(c - r, c + r)
        })
        .collect();
    let ctx = TmContext::new(domain.clone(), rng.random_range(1..=8)).unwrap();
    let mut points = fuzz_inputs(12, &domain, seed).unwrap();
    points.push(domain.iter().map(|i| i.lo).collect());
    points.push(domain.iter().map(|i| i.hi).collect());
    let real_points: Vec<Vec<Real>> = points
        .iter()
        .map(|p| p.iter().map(|&x| Real::from_f64(x, d)).collect())
        .collect();

    // models with their exact values at each point
    let mut pool: Vec<(TaylorModel, Vec<Real>)> = TaylorModel::inputs(&ctx)
        .into_iter()
        .enumerate()
        .map(|(i, m)| (m, real_points.iter().map(|p| p[i].clone()).collect()))
        .collect();
    for _ in 0..rng.random_range(2..=6) {
        let i = rng.random_range(0..pool.len());
        let j = rng.random_range(0..pool.len());
        let (a, fa) = &pool[i];
        let (b, fb) = &pool[j];
        let next = match rng.random_range(0..7) {
            0 => (tm_add(a, b).unwrap(), fa.iter().zip(fb).map(|(x, y)| x + y).collect()),
            1 => (tm_sub(a, b).unwrap(), fa.iter().zip(fb).map(|(x, y)| x - y).collect()),
            2 => (tm_mul(a, b).unwrap(), fa.iter().zip(fb).map(|(x, y)| x * y).collect()),
            3 => {
                let k = rng.random_range(-2.0..2.0);
                (tm_scale(a, k), fa.iter().map(|x| x * Real::from_f64(k, d)).collect())
            }
            4 => {
                let c = rng.random_range(-2.0..2.0);
                (
                    tm_add_const(a, c),
                    fa.iter().map(|x| x + Real::from_f64(c, d)).collect(),
                )
            }
            5 => {
                let w: Vec<f64> = (0..nvars).map(|_| rng.random_range(-1.0..1.0)).collect();
                let bias = rng.random_range(-1.0..1.0);
                let m = tm_affine(&TaylorModel::inputs(&ctx), &w, bias).unwrap();
                let f = real_points
                    .iter()
                    .map(|p| {
                        p.iter()
                            .zip(&w)
                            .fold(Real::from_f64(bias, d), |acc, (x, &wi)| acc + x * Real::from_f64(wi, d))
                    })
                    .collect();
                (m, f)
            }
            _ => {
                let power: Vec<f64> = (0..rng.random_range(1..=6))
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let vmax = tm_bound(a).mag() * 1.5 + 1.0;
                let model = ActivationModel::new(power.clone(), Interval::ZERO, vmax).unwrap();
                let f = fa
                    .iter()
                    .map(|v| {
                        power
                            .iter()
                            .rev()
                            .fold(Real::zero(d), |acc, &c| acc * v + Real::from_f64(c, d))
                    })
                    .collect();
                (tm_compose(&model, a).unwrap(), f)
            }
        };
        pool.push(next);
    }

    let mut violations = 0;
    for (m, f) in &pool {
        let poly = m.poly();
        let bound = tm_bound(m);
        for (p, fx) in real_points.iter().zip(f) {
            let px = poly.terms().fold(Real::zero(d), |acc, (kappa, c)| {
                let mono = kappa
                    .exponents()
                    .iter()
                    .zip(p)
                    .fold(Real::from_f64(c, d), |t, (&e, x)| t * x.powu(e));
                acc + mono
            });
            // the 120-digit reference values carry ~1e-118 rounding of their own
            let residual = fx - &px;
            let slack = Real::from_f64(1e-90, d);
            let within = |i: Interval, x: &Real| (x + &slack) >= i.lo && (x - &slack) <= i.hi;
            if !within(m.remainder(), &residual) || !within(bound, fx) {
                violations += 1;
            }
        }
    }
    violations
}

#[test]
fn criterion_8_interval_and_taylor_model_properties() {
    let _g = serial();
    let start = Instant::now();
    let interval_violations = interval_trials(1_000_000);
    let tm_violations: usize = (0..10_000).map(taylor_model_trial).sum();

    // d/dxi of the antiderivative against its integrand
    let d = 50;
    let a = Real::pi(d) / 2i64;
    let h = Real::from_f64(1e-12, d);
    let mut worst = 0f64;
    for j in 1..=10u32 {
        for x in [0.2, 1.0, 2.5, 6.0] {
            let xi = Real::from_f64(x, d);
            let up = lambda_integral(j, &(&xi + &h), &a).unwrap();
            let down = lambda_integral(j, &(&xi - &h), &a).unwrap();
            let fd = (up - down) / (&h * 2i64);
            worst = worst.max(rel(&fd, &(xi.powu(j) * (&a * &xi).csch())));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = interval_violations == 0 && tm_violations == 0 && worst < 1e-20;
    report(
        8,
        pass,
        &format!(
            "{interval_violations} violations in 1e6 interval trials, {tm_violations} in 1e4 Taylor-model trials, \
             antiderivative finite-difference difference {worst:.2e} (1e-20), {secs:.1}s"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_9_layer_expansion_matches_neurons() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("multinomials.bin");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0f64;
    let mut same_as_global = true;
    let mut hits = 0;
    for k in 0..10u64 {
        let ni = rng.random_range(1..=3usize);
        let nh = rng.random_range(1..=75usize);
        let terms = rng.random_range(1..=12u32);
        let act = if k % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let net = Network::random(ni, &[nh], 1, act, 900 + k).unwrap();
        let domain = vec![Interval::new(-1.0, 1.0); ni];
        let vmax = default_vmax(&net, &domain);
        let expansion = coefficients(act.expansion_kind().unwrap(), terms, vmax, 80).unwrap();

        // file-backed cache, reopened for every network
        let cache = MultinomialCache::open(&cache_path).unwrap();
        let psi = expand_layer_with_cache(&net, &expansion, &cache).unwrap();
        cache.persist().unwrap();
        hits += cache.stats().hits + cache.stats().chunks_loaded;
        same_as_global &= psi == expand_layer(&net, &expansion).unwrap();

        let (hidden, output) = (&net.layers()[0], &net.layers()[1]);
        for x in fuzz_inputs(100, &domain, k).unwrap() {
            let mut direct = Real::from_f64(output.bias()[0], 60);
            let mut scale = direct.abs();
            for (n, v) in hidden.preactivation(&x).iter().enumerate() {
                let term = Real::from_f64(output.weights()[n], 60) * expansion.evaluate_real(&Real::from_f64(*v, 60));
                scale += term.abs();
                direct += term;
            }
            let got = eval_poly(&psi[0], &x).unwrap();
            worst = worst.max(((Real::from_f64(got, 60) - direct) / scale).abs().to_f64());
        }
    }
    let pass = worst <= 1e-9 && same_as_global && hits > 0;
    report(
        9,
        pass,
        &format!(
            "worst difference {worst:.2e} relative to the summed neuron magnitudes (1e-9), disk cache matches \
             in-memory {same_as_global}, {hits} cache hits/chunk loads"
        ),
    );
    assert!(pass);
}
