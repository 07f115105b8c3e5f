//! Rigorous output ranges of feed-forward networks over an input box.
//!
//! Inputs become identity Taylor models and are pushed through the network
//! layer by layer. Activations are replaced by an expansion valid on
//! `[-V, V]` plus a fitted error interval. `V` comes from fuzzing the network
//! and multiplying the largest observed pre-activation by a safety factor,
//! which doubles whenever a pre-activation bound leaves `[-V, V]`.
//!
//! The conventional baseline uses the Taylor series of tanh, whose error is
//! only controlled inside `|v| < pi/2`.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;

use crate::expansion::{coefficients, taylor_coefficients_tanh, ActivationKind, AmiteExpansion};
use crate::ffnn::{fuzz_inputs, numeric_range, Activation, Network};
use crate::intervals_tm::{
    brent_minimize, cached_model, tm_add, tm_affine, tm_bound, tm_compose, ActivationModel, Interval, TaylorModel,
    TmContext, DEFAULT_OPT_TOL,
};
use crate::mpcore::Real;
use crate::{Error, Result};

/// Order cap used for networks with more than one hidden layer.
pub const DEEP_ORDER_CAP: u32 = 13;
/// Retries with a doubled safety factor before giving up.
pub const MAX_RETRIES: u32 = 6;
const STREAM_CHUNK: usize = 64;
const TAYLOR_GRID: usize = 64;
const TAYLOR_DIGITS: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Amite,
    Taylor,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Amite => "amite",
            Method::Taylor => "taylor",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amite" => Ok(Method::Amite),
            "taylor" => Ok(Method::Taylor),
            _ => Err(Error::Parameter(format!(
                "unknown method {s:?}, expected amite or taylor"
            ))),
        }
    }
}

/// One bounded output of one network on one box.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeResult {
    pub net_id: String,
    pub hidden_layers: usize,
    pub hidden: usize,
    pub method: Method,
    /// Widest input interval of the box.
    pub width: f64,
    pub output: usize,
    pub bound: Interval,
    pub numeric_estimate: Interval,
    /// `width(bound) - width(numeric_estimate)`.
    pub overestimation: f64,
    pub runtime_s: f64,
    /// Share of the runtime spent generating expansions and error intervals.
    pub coefficient_time_s: f64,
    pub diverged: bool,
    pub terms: u32,
    pub digits: u32,
    /// Final safety factor; not applicable to the Taylor baseline.
    pub safety_factor: Option<f64>,
    pub vmax: Option<f64>,
    pub retries: u32,
    pub diagnostics: String,
}

impl RangeResult {
    /// Diverged, or the bound contains the numeric estimate.
    pub fn is_sound(&self) -> bool {
        self.diverged || self.bound.contains_interval(&self.numeric_estimate)
    }
}

/// Parameters shared by both methods.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeOptions {
    pub terms: u32,
    pub digits: u32,
    pub s_init: f64,
    pub opt_tol: f64,
    /// `None` picks the expansion degree for one hidden layer and
    /// [`DEEP_ORDER_CAP`] otherwise.
    pub order_cap: Option<u32>,
    /// Fuzz vectors used to pick `V`.
    pub v_samples: usize,
    /// Fuzz vectors behind the numeric estimate.
    pub numeric_samples: usize,
    pub max_retries: u32,
    pub seed: u64,
}

impl RangeOptions {
    /// Defaults with `(M, digits)` from [`schedule`].
    pub fn for_network(net: &Network) -> Self {
        let (terms, digits) = schedule(net.hidden_sizes().into_iter().max().unwrap_or(0));
        RangeOptions {
            terms,
            digits,
            s_init: 1.25,
            opt_tol: DEFAULT_OPT_TOL,
            order_cap: None,
            v_samples: 1000,
            numeric_samples: 100,
            max_retries: MAX_RETRIES,
            seed: 0,
        }
    }
}

/// `(M, digits)` by hidden width: up to 10 neurons `(6, 65)`, up to 25
/// `(12, 130)`, up to 50 `(25, 260)`, wider `(25, 450)`.
pub fn schedule(hidden: usize) -> (u32, u32) {
    match hidden {
        0..=10 => (6, 65),
        11..=25 => (12, 130),
        26..=50 => (25, 260),
        _ => (25, 450),
    }
}

/// `S` times the largest `|pre-activation|` of any hidden neuron over
/// `n_samples` fuzz vectors.
pub fn estimate_v(net: &Network, domain: &[Interval], n_samples: usize, safety: f64, seed: u64) -> Result<f64> {
    if !(safety > 1.0) || !safety.is_finite() {
        return Err(Error::Parameter(format!("safety factor must exceed 1, got {safety}")));
    }
    if domain.len() != net.num_inputs() {
        return Err(Error::Dimension {
            expected: net.num_inputs(),
            got: domain.len(),
        });
    }
    let xs = fuzz_inputs(n_samples.max(1), domain, seed)?;
    Ok(safety * net.max_abs_preactivation(&xs)?)
}

/// Rounds `v` up to the grid `2^{k/4}` so that nearby estimates share
/// expansions.
pub fn quantize_vmax(v: f64) -> f64 {
    let v = v.max(1e-6);
    let k = (4.0 * v.log2() - 1e-9).ceil();
    let q = 2f64.powf(k / 4.0);
    if q < v {
        2f64.powf((k + 1.0) / 4.0)
    } else {
        q
    }
}

type ExpansionKey = (ActivationKind, u32, u64, u32);

#[derive(Default)]
struct ExpansionCache {
    map: Mutex<HashMap<ExpansionKey, Arc<AmiteExpansion>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

fn expansion_cache() -> &'static ExpansionCache {
    static CACHE: OnceLock<ExpansionCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Expansion for `(kind, M, V, digits)`, generated once per process.
pub fn cached_expansion(kind: ActivationKind, terms: u32, vmax: f64, digits: u32) -> Result<Arc<AmiteExpansion>> {
    let cache = expansion_cache();
    let key = (kind, terms, vmax.to_bits(), digits);
    if let Some(e) = cache.map.lock().unwrap().get(&key) {
        cache.hits.fetch_add(1, Ordering::Relaxed);
        return Ok(e.clone());
    }
    cache.misses.fetch_add(1, Ordering::Relaxed);
    let e = Arc::new(coefficients(kind, terms, vmax, digits)?);
    cache.map.lock().unwrap().insert(key, e.clone());
    Ok(e)
}

/// `(hits, misses)` of the expansion cache.
pub fn expansion_cache_stats() -> (usize, usize) {
    let c = expansion_cache();
    (c.hits.load(Ordering::Relaxed), c.misses.load(Ordering::Relaxed))
}

fn check_domain(net: &Network, domain: &[Interval]) -> Result<()> {
    if domain.len() != net.num_inputs() {
        return Err(Error::Dimension {
            expected: net.num_inputs(),
            got: domain.len(),
        });
    }
    if let Some(d) = domain.iter().find(|d| d.is_empty() || !d.is_finite()) {
        return Err(Error::Parameter(format!("input interval {d} is not a finite interval")));
    }
    Ok(())
}

fn order_cap(net: &Network, degree: u32, requested: Option<u32>) -> u32 {
    requested.unwrap_or(if net.layers().len() <= 2 {
        degree
    } else {
        degree.min(DEEP_ORDER_CAP)
    })
}

fn ensure_finite(models: &[TaylorModel]) -> Result<()> {
    match models.iter().find(|m| !m.is_finite()) {
        Some(m) => Err(Error::Divergence(format!("non-finite Taylor model {m:?}"))),
        None => Ok(()),
    }
}

/// Pushes identity models through `net`. The last hidden layer is folded
/// into the output layer in chunks so wide layers are never held at once.
fn propagate<F>(net: &Network, ctx: &Arc<TmContext>, activate: F) -> Result<Vec<TaylorModel>>
where
    F: Fn(Activation, &TaylorModel) -> Result<TaylorModel> + Sync,
{
    let layers = net.layers();
    let last = layers.len() - 1;
    let mut current = TaylorModel::inputs(ctx);
    let affine =
        |models: &[TaylorModel], layer: &crate::ffnn::Layer, n: usize| tm_affine(models, layer.row(n), layer.bias()[n]);
    for layer in &layers[..last.saturating_sub(1)] {
        current = (0..layer.outputs())
            .into_par_iter()
            .map(|n| activate(layer.activation(), &affine(&current, layer, n)?))
            .collect::<Result<Vec<_>>>()?;
        ensure_finite(&current)?;
    }
    let output = &layers[last];
    if last == 0 {
        let out = (0..output.outputs())
            .map(|o| affine(&current, output, o))
            .collect::<Result<Vec<_>>>()?;
        ensure_finite(&out)?;
        return Ok(out);
    }
    let hidden = &layers[last - 1];
    let mut acc: Vec<TaylorModel> = output.bias().iter().map(|&b| TaylorModel::constant(ctx, b)).collect();
    let neurons: Vec<usize> = (0..hidden.outputs()).collect();
    for chunk in neurons.chunks(STREAM_CHUNK) {
        let acts = chunk
            .par_iter()
            .map(|&n| activate(hidden.activation(), &affine(&current, hidden, n)?))
            .collect::<Result<Vec<_>>>()?;
        ensure_finite(&acts)?;
        for (o, a) in acc.iter_mut().enumerate() {
            let w: Vec<f64> = chunk.iter().map(|&n| output.weight(o, n)).collect();
            *a = tm_add(a, &tm_affine(&acts, &w, 0.0)?)?;
        }
    }
    ensure_finite(&acc)?;
    Ok(acc)
}

fn kinds(net: &Network) -> Vec<ActivationKind> {
    let mut k: Vec<ActivationKind> = net
        .layers()
        .iter()
        .filter_map(|l| l.activation().expansion_kind())
        .collect();
    k.sort_by_key(|k| k.name());
    k.dedup();
    k
}

fn base_result(net: &Network, id: &str, method: Method, domain: &[Interval], opts: &RangeOptions) -> RangeResult {
    RangeResult {
        net_id: id.to_string(),
        hidden_layers: net.layers().len() - 1,
        hidden: net.hidden_sizes().into_iter().max().unwrap_or(0),
        method,
        width: domain.iter().map(Interval::width).fold(0.0, f64::max),
        output: 0,
        bound: Interval::ENTIRE,
        numeric_estimate: Interval::EMPTY,
        overestimation: f64::INFINITY,
        runtime_s: 0.0,
        coefficient_time_s: 0.0,
        diverged: true,
        terms: opts.terms,
        digits: opts.digits,
        safety_factor: None,
        vmax: None,
        retries: 0,
        diagnostics: String::new(),
    }
}

fn finish(
    template: RangeResult,
    outputs: Option<Vec<Interval>>,
    numeric: Vec<Interval>,
    start: Instant,
) -> Vec<RangeResult> {
    let runtime = start.elapsed().as_secs_f64();
    numeric
        .into_iter()
        .enumerate()
        .map(|(o, num)| {
            let mut r = template.clone();
            r.output = o;
            r.numeric_estimate = num;
            r.runtime_s = runtime;
            if let Some(b) = &outputs {
                r.bound = b[o];
                r.diverged = false;
                r.overestimation = b[o].width() - num.width();
            }
            r
        })
        .collect()
}

/// Bounds every output of `net` over `domain` with expansion-based Taylor
/// models. One result per output.
pub fn range_bound_amite(
    net: &Network,
    domain: &[Interval],
    opts: &RangeOptions,
    id: &str,
) -> Result<Vec<RangeResult>> {
    let start = Instant::now();
    check_domain(net, domain)?;
    let numeric = numeric_range(net, domain, opts.numeric_samples, opts.seed)?;
    let mut template = base_result(net, id, Method::Amite, domain, opts);
    let kinds = kinds(net);
    let mut safety = opts.s_init;
    let mut coefficient_time = 0.0;
    for attempt in 0..=opts.max_retries {
        template.retries = attempt;
        template.safety_factor = Some(safety);
        let vmax = quantize_vmax(estimate_v(
            net,
            domain,
            opts.v_samples,
            safety,
            opts.seed.wrapping_add(1),
        )?);
        template.vmax = Some(vmax);

        let t = Instant::now();
        let mut models: HashMap<Activation, Arc<ActivationModel>> = HashMap::new();
        let mut degree = 1;
        let mut failure = None;
        for &k in &kinds {
            match cached_expansion(k, opts.terms, vmax, opts.digits).and_then(|e| {
                degree = degree.max(e.degree());
                cached_model(&e, opts.opt_tol)
            }) {
                Ok(m) => {
                    models.insert(Activation::from(k), m);
                }
                Err(e) => failure = Some(e),
            }
        }
        coefficient_time += t.elapsed().as_secs_f64();
        template.coefficient_time_s = coefficient_time;
        if let Some(e) = failure {
            // a wider V only makes the expansion harder to generate
            template.diagnostics = format!("expansion for V = {vmax} failed: {e}");
            return Ok(finish(template, None, numeric, start));
        }

        let ctx = TmContext::new(domain.to_vec(), order_cap(net, degree, opts.order_cap))?;
        let run = propagate(net, &ctx, |act, pre| match act {
            Activation::Linear => Ok(pre.clone()),
            _ => tm_compose(&models[&act], pre),
        });
        match run {
            Ok(out) => {
                let bounds = out.iter().map(tm_bound).collect();
                return Ok(finish(template, Some(bounds), numeric, start));
            }
            Err(e @ (Error::DomainExceeded { .. } | Error::Divergence(_))) => {
                template.diagnostics = format!("attempt {attempt} with S = {safety}: {e}");
                safety *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    template.safety_factor = Some(safety / 2.0);
    Ok(finish(template, None, numeric, start))
}

/// Error interval of the degree `2 terms - 1` Taylor polynomial of tanh on
/// `[-b, b]`, including the rounding of its coefficients to doubles.
fn taylor_error(exact: &[Real], rounded: &[f64], b: f64, opt_tol: f64) -> Result<Interval> {
    let d = TAYLOR_DIGITS;
    let err_at = |v: f64| -> f64 {
        let x = Real::from_f64(v, d);
        let x2 = &x * &x;
        let mut p = Real::zero(d);
        for c in exact.iter().rev() {
            p = &(&p * &x2) + c;
        }
        (x.tanh() - p * &x).to_f64()
    };
    // the error is odd, so its extremes on [-b, b] are +-max |e| on [0, b]
    let step = b / TAYLOR_GRID as f64;
    let grid: Vec<f64> = (0..=TAYLOR_GRID).map(|i| err_at(i as f64 * step).abs()).collect();
    let (i, &gmax) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is not empty");
    let lo = (i.saturating_sub(1)) as f64 * step;
    let hi = ((i + 1).min(TAYLOR_GRID)) as f64 * step;
    let refined = brent_minimize(|v| -err_at(v).abs(), lo, hi, opt_tol.max(1e-15), 200)
        .map(|m| -m.value)
        .unwrap_or(gmax);
    let emax = gmax.max(refined);
    let rounding: f64 = exact
        .iter()
        .zip(rounded)
        .enumerate()
        .map(|(k, (c, r))| (c - &Real::from_f64(*r, d)).abs().to_f64() * b.powi(2 * k as i32 + 1))
        .sum();
    let r = emax * (1.0 + 1e-9) + rounding * (1.0 + 1e-6) + opt_tol;
    Ok(Interval::symmetric(r).inflate(0.0))
}

/// Bounds every output of a tanh network with conventional Taylor models of
/// degree `2 terms + 1`. Diverges once a pre-activation bound reaches `pi/2`.
pub fn range_bound_taylor(
    net: &Network,
    domain: &[Interval],
    opts: &RangeOptions,
    id: &str,
) -> Result<Vec<RangeResult>> {
    let start = Instant::now();
    check_domain(net, domain)?;
    if net.layers().iter().any(|l| l.activation() == Activation::Relu) {
        return Err(Error::Parameter("relu has no conventional Taylor series".into()));
    }
    let numeric = numeric_range(net, domain, opts.numeric_samples, opts.seed)?;
    let mut template = base_result(net, id, Method::Taylor, domain, opts);

    let t = Instant::now();
    let series = taylor_coefficients_tanh(opts.terms + 1)?;
    let exact: Vec<Real> = series.iter().map(|c| Real::from_rational(c, TAYLOR_DIGITS)).collect();
    let rounded: Vec<f64> = series.iter().map(|c| c.to_f64()).collect();
    let mut power = vec![0.0; 2 * rounded.len()];
    for (k, c) in rounded.iter().enumerate() {
        power[2 * k + 1] = *c;
    }
    template.coefficient_time_s = t.elapsed().as_secs_f64();
    let degree = power.len() as u32 - 1;

    let ctx = TmContext::new(domain.to_vec(), order_cap(net, degree, opts.order_cap))?;
    let run = propagate(net, &ctx, |act, pre| match act {
        Activation::Linear => Ok(pre.clone()),
        _ => {
            let b = tm_bound(pre).mag();
            if !(b < FRAC_PI_2) {
                return Err(Error::Divergence(format!(
                    "pre-activation bound {} reaches pi/2",
                    tm_bound(pre)
                )));
            }
            let b = b.max(f64::MIN_POSITIVE);
            let err = taylor_error(&exact, &rounded, b, opts.opt_tol)?;
            tm_compose(&ActivationModel::new(power.clone(), err, b)?, pre)
        }
    });
    match run {
        Ok(out) => {
            let bounds = out.iter().map(tm_bound).collect();
            Ok(finish(template, Some(bounds), numeric, start))
        }
        Err(Error::Divergence(msg)) => {
            template.diagnostics = msg;
            Ok(finish(template, None, numeric, start))
        }
        Err(e) => Err(e),
    }
}

/// Runs one method.
pub fn range_bound(
    net: &Network,
    domain: &[Interval],
    method: Method,
    opts: &RangeOptions,
    id: &str,
) -> Result<Vec<RangeResult>> {
    match method {
        Method::Amite => range_bound_amite(net, domain, opts, id),
        Method::Taylor => range_bound_taylor(net, domain, opts, id),
    }
}

/// Randomly initialised population of deep networks.
#[derive(Clone, Debug, PartialEq)]
pub struct CampaignSpec {
    pub inputs: usize,
    /// Hidden-layer counts.
    pub hidden_layers: Vec<usize>,
    /// Neurons per hidden layer.
    pub hidden: Vec<usize>,
    pub nets_per_architecture: usize,
    pub activation: Activation,
    /// Widths of the input intervals, each centred on zero.
    pub widths: Vec<f64>,
    pub methods: Vec<Method>,
    /// Overrides the `(M, digits)` schedule.
    pub terms_digits: Option<(u32, u32)>,
    pub seed: u64,
}

impl CampaignSpec {
    /// Networks with ids `L{layers}-H{hidden}-{k}`.
    pub fn networks(&self) -> Result<Vec<(String, Network)>> {
        let mut out = Vec::new();
        let mut k = 0u64;
        for &nl in &self.hidden_layers {
            for &nh in &self.hidden {
                for i in 0..self.nets_per_architecture {
                    let net = Network::random(
                        self.inputs,
                        &vec![nh; nl],
                        1,
                        self.activation,
                        self.seed.wrapping_add(k),
                    )?;
                    out.push((format!("L{nl}-H{nh}-{i}"), net));
                    k += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Every method on every network and width of the population.
pub fn bound_campaign(spec: &CampaignSpec) -> Result<Vec<RangeResult>> {
    let nets = spec.networks()?;
    let mut jobs = Vec::new();
    for (id, net) in &nets {
        for &w in &spec.widths {
            for &m in &spec.methods {
                jobs.push((id, net, w, m));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(id, net, w, m)| {
            let domain = vec![Interval::new(-w / 2.0, w / 2.0); spec.inputs];
            let mut opts = RangeOptions::for_network(net);
            if let Some((t, d)) = spec.terms_digits {
                opts.terms = t;
                opts.digits = d;
            }
            opts.seed = spec.seed;
            range_bound(net, &domain, m, &opts, id)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Column names of [`write_csv`].
pub const CSV_HEADER: &str =
    "net-id,layers,hidden,method,width,bound_lo,bound_hi,numeric_lo,numeric_hi,overestimation,runtime_s,diverged,M,digits,S";

/// Writes one row per result. Multi-output networks get `/{output}` appended
/// to the id. With `timing == false` runtimes are written as zero so that
/// identical runs produce identical files.
pub fn write_csv<W: Write>(rows: &[RangeResult], timing: bool, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let multi: std::collections::HashSet<&str> = rows
        .iter()
        .filter(|r| r.output > 0)
        .map(|r| r.net_id.as_str())
        .collect();
    for r in rows {
        let id = if multi.contains(r.net_id.as_str()) {
            format!("{}/{}", r.net_id, r.output)
        } else {
            r.net_id.clone()
        };
        writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{}",
            id,
            r.hidden_layers,
            r.hidden,
            r.method,
            r.width,
            r.bound.lo,
            r.bound.hi,
            r.numeric_estimate.lo,
            r.numeric_estimate.hi,
            r.overestimation,
            if timing { r.runtime_s } else { 0.0 },
            r.diverged,
            r.terms,
            r.digits,
            r.safety_factor.map(|s| format!("{s:.16e}")).unwrap_or_default(),
        )?;
    }
    Ok(())
}
