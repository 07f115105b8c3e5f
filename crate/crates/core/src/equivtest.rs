//! Black-box equivalence testing of one-hidden-layer networks.
//!
//! The network under test is fuzzed, a replica with the expected structure is
//! fitted to its (possibly noisy) responses starting from the original
//! weights, and both networks are expanded into multivariate polynomials. The
//! verdict compares the coefficient magnitudes on a log scale.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expansion::{coefficients, ActivationKind};
use crate::ffnn::{Activation, Layer, Network, StimulusSet};
use crate::intervals_tm::Interval;
use crate::polyexpand::{expand_layer, MultivariatePolynomial};
use crate::{Error, Result};

/// Default offset inside the logarithms of [`coefficient_distance`].
pub const DEFAULT_EPS_LOG: f64 = 1e-12;
/// Default equivalence threshold on the distance.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Settings of the replication fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without relative improvement of `improvement` before the rate halves.
    pub patience: usize,
    pub improvement: f64,
    /// The fit stops once the loss drops below `noise_margin` times the noise
    /// power estimate plus `floor` times the response power.
    pub noise_margin: f64,
    pub floor: f64,
    /// Smallest learning rate, relative to the initial one, before giving up.
    pub min_rate_ratio: f64,
    /// Fraction of the initial excess loss (above the noise) that may remain
    /// once the fit has stalled.
    pub max_residual_excess: f64,
    /// One-sided z-score of the noise-fitting gate: with noisy stimulus the
    /// fitted weights are kept only if the loss dropped by more than fitting
    /// pure noise with the same parameter count would explain. `None`
    /// disables the gate.
    pub significance: Option<f64>,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            learning_rate: 1e-3,
            weight_decay: 0.01,
            batch_size: 1,
            max_epochs: 2000,
            patience: 10,
            improvement: 1e-3,
            noise_margin: 1.05,
            floor: 1e-12,
            min_rate_ratio: 1e-6,
            max_residual_excess: 1.0,
            significance: Some(1.0),
            seed: 0,
        }
    }
}

/// Result of [`replicate`].
#[derive(Clone, Debug)]
pub struct Replication {
    pub network: Network,
    /// Mean squared error before the first epoch, then after every epoch.
    pub loss_trace: Vec<f64>,
    pub target: f64,
    pub converged: bool,
}

impl Replication {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }

    pub fn best_loss(&self) -> f64 {
        self.loss_trace.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Equivalent,
    NotEquivalent,
    /// The replica could not be fitted to the observed responses.
    Inconclusive,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Equivalent => "equivalent",
            Outcome::NotEquivalent => "not-equivalent",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    /// Process exit code: 0 equivalent, 1 not equivalent, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Equivalent => 0,
            Outcome::NotEquivalent => 1,
            Outcome::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquivVerdict {
    pub eta: f64,
    pub threshold: f64,
    /// `eta <= threshold` and the replica converged.
    pub equivalent: bool,
    pub outcome: Outcome,
    pub replicated: Network,
    pub fit_loss_trace: Vec<f64>,
    /// Distance per output.
    pub eta_per_output: Vec<f64>,
    pub vmax: f64,
    pub runtime_s: f64,
}

/// Parameters of [`equivalence_test`].
#[derive(Clone, Debug)]
pub struct EquivConfig {
    pub domain: Vec<Interval>,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub samples: usize,
    pub terms: u32,
    /// Expansion half-width; `None` derives it from the original network.
    pub vmax: Option<f64>,
    pub digits: u32,
    pub threshold: f64,
    pub eps_log: f64,
    pub fit: FitOptions,
}

impl EquivConfig {
    /// Unit box in `num_inputs` dimensions and the documented defaults.
    pub fn new(num_inputs: usize) -> Self {
        EquivConfig {
            domain: vec![Interval::new(-1.0, 1.0); num_inputs],
            snr_db: None,
            seed: 0,
            samples: 250,
            terms: 6,
            vmax: None,
            digits: 65,
            threshold: DEFAULT_THRESHOLD,
            eps_log: DEFAULT_EPS_LOG,
            fit: FitOptions::default(),
        }
    }
}

fn check_structure(net: &Network) -> Result<Activation> {
    let layers = net.layers();
    if layers.len() != 2 {
        return Err(Error::Structure(format!(
            "equivalence testing needs exactly one hidden layer, network has {}",
            layers.len() - 1
        )));
    }
    let act = layers[0].activation();
    if act.expansion_kind().is_none() {
        return Err(Error::Structure("the hidden layer must be tanh or relu".into()));
    }
    Ok(act)
}

// Flat parameter vector: hidden weights, hidden bias, output weights, output bias.
struct Shape {
    ni: usize,
    nh: usize,
    no: usize,
}

impl Shape {
    fn of(net: &Network) -> Self {
        let l = net.layers();
        Shape {
            ni: net.num_inputs(),
            nh: l[0].outputs(),
            no: l[1].outputs(),
        }
    }

    fn len(&self) -> usize {
        self.nh * self.ni + self.nh + self.no * self.nh + self.no
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.nh * self.ni;
        let w2 = b1 + self.nh;
        (b1, w2, w2 + self.no * self.nh)
    }

    fn flatten(&self, net: &Network) -> Vec<f64> {
        let l = net.layers();
        let mut p = Vec::with_capacity(self.len());
        p.extend_from_slice(l[0].weights());
        p.extend_from_slice(l[0].bias());
        p.extend_from_slice(l[1].weights());
        p.extend_from_slice(l[1].bias());
        p
    }

    fn build(&self, p: &[f64], act: Activation) -> Result<Network> {
        let (b1, w2, b2) = self.offsets();
        let hidden = Layer::new(self.ni, self.nh, p[..b1].to_vec(), p[b1..w2].to_vec(), act)?;
        let output = Layer::new(
            self.nh,
            self.no,
            p[w2..b2].to_vec(),
            p[b2..].to_vec(),
            Activation::Linear,
        )?;
        Network::new(self.ni, vec![hidden, output])
    }
}

// Squared error of one sample, optionally accumulating its gradient.
fn sample_loss(
    shape: &Shape,
    act: Activation,
    p: &[f64],
    x: &[f64],
    y: &[f64],
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let (b1, w2, b2) = shape.offsets();
    let mut h = vec![0.0; shape.nh];
    for (n, hn) in h.iter_mut().enumerate() {
        let row = &p[n * shape.ni..(n + 1) * shape.ni];
        let v = row.iter().zip(x).fold(p[b1 + n], |a, (w, xi)| w.mul_add(*xi, a));
        *hn = act.apply(v);
    }
    let mut loss = 0.0;
    let mut dy = vec![0.0; shape.no];
    for o in 0..shape.no {
        let row = &p[w2 + o * shape.nh..w2 + (o + 1) * shape.nh];
        let out = row.iter().zip(&h).fold(p[b2 + o], |a, (w, hn)| w.mul_add(*hn, a));
        let r = out - y[o];
        loss += r * r;
        dy[o] = 2.0 * r / shape.no as f64;
    }
    loss /= shape.no as f64;
    if let Some((g, scale)) = grad {
        for o in 0..shape.no {
            let d = dy[o] * scale;
            g[b2 + o] += d;
            for n in 0..shape.nh {
                g[w2 + o * shape.nh + n] += d * h[n];
            }
        }
        for n in 0..shape.nh {
            let back: f64 = (0..shape.no).map(|o| dy[o] * p[w2 + o * shape.nh + n]).sum();
            let slope = match act {
                Activation::Tanh => 1.0 - h[n] * h[n],
                Activation::Relu => {
                    if h[n] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Linear => 1.0,
            };
            let dv = back * slope * scale;
            g[b1 + n] += dv;
            for i in 0..shape.ni {
                g[n * shape.ni + i] += dv * x[i];
            }
        }
    }
    loss
}

fn mean_loss(shape: &Shape, act: Activation, p: &[f64], data: &StimulusSet) -> f64 {
    let total: f64 = data
        .inputs
        .iter()
        .zip(&data.responses)
        .map(|(x, y)| sample_loss(shape, act, p, x, y, None))
        .sum();
    total / data.len() as f64
}

/// Noise power implied by noisy responses and their SNR, averaged over outputs.
pub fn noise_power_estimate(responses: &[Vec<f64>], snr_db: Option<f64>) -> f64 {
    let Some(snr) = snr_db else { return 0.0 };
    if responses.is_empty() {
        return 0.0;
    }
    let r = 10f64.powf(-snr / 10.0);
    let total = responses.iter().flatten().map(|y| y * y).sum::<f64>() / responses.len() as f64;
    total / responses[0].len() as f64 * r / (1.0 + r)
}

/// Fits the weights of `structure` to `stimulus` by stochastic gradient
/// descent with weight decay, starting from the weights of `structure`.
///
/// The rate halves whenever the epoch loss has not improved for `patience`
/// epochs. The fit stops at the noise target, after `max_epochs`, or when the
/// rate has decayed below `min_rate_ratio`. It counts as converged when the
/// target was reached or when at most `max_residual_excess` of the initial
/// excess over the noise remains; otherwise [`Error::NonConvergence`] is
/// returned. The returned weights are those of the best epoch.
pub fn replicate(structure: &Network, stimulus: &StimulusSet, opts: &FitOptions) -> Result<Replication> {
    let act = check_structure(structure)?;
    if stimulus.is_empty() {
        return Err(Error::Parameter("replication needs at least one stimulus".into()));
    }
    if let Some(x) = stimulus.inputs.iter().find(|x| x.len() != structure.num_inputs()) {
        return Err(Error::Dimension {
            expected: structure.num_inputs(),
            got: x.len(),
        });
    }
    if let Some(y) = stimulus.responses.iter().find(|y| y.len() != structure.num_outputs()) {
        return Err(Error::Dimension {
            expected: structure.num_outputs(),
            got: y.len(),
        });
    }
    if !(opts.learning_rate >= 0.0) || opts.batch_size == 0 {
        return Err(Error::Parameter(
            "learning rate must be >= 0 and batch size positive".into(),
        ));
    }
    let shape = Shape::of(structure);
    let mut p = shape.flatten(structure);
    let noise = noise_power_estimate(&stimulus.responses, stimulus.snr_db);
    let power = stimulus.responses.iter().flatten().map(|y| y * y).sum::<f64>() / (stimulus.len() * shape.no) as f64;
    let target = opts.noise_margin * noise + opts.floor * power;

    let initial = mean_loss(&shape, act, &p, stimulus);
    let mut trace = vec![initial];
    let mut best = (initial, p.clone());
    let mut reference = initial;
    let mut stall = 0;
    let mut lr = opts.learning_rate;
    let mut order: Vec<usize> = (0..stimulus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut grad = vec![0.0; p.len()];

    let mut epoch = 0;
    while best.0 > target && epoch < opts.max_epochs && lr > 0.0 && lr >= opts.learning_rate * opts.min_rate_ratio {
        order.shuffle(&mut rng);
        for batch in order.chunks(opts.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                sample_loss(
                    &shape,
                    act,
                    &p,
                    &stimulus.inputs[i],
                    &stimulus.responses[i],
                    Some((&mut grad, scale)),
                );
            }
            for (w, g) in p.iter_mut().zip(&grad) {
                *w -= lr * (g + opts.weight_decay * *w);
            }
        }
        let loss = mean_loss(&shape, act, &p, stimulus);
        trace.push(loss);
        if !loss.is_finite() {
            break;
        }
        if loss < best.0 {
            best = (loss, p.clone());
        }
        if loss < reference * (1.0 - opts.improvement) {
            reference = loss;
            stall = 0;
        } else {
            stall += 1;
            if stall >= opts.patience {
                lr *= 0.5;
                stall = 0;
            }
        }
        epoch += 1;
    }

    let excess = |l: f64| (l - noise).max(0.0);
    let converged =
        best.0 <= target || (best.0.is_finite() && excess(best.0) <= opts.max_residual_excess * excess(initial));
    if !converged {
        return Err(Error::NonConvergence {
            final_loss: best.0,
            floor: target,
        });
    }
    // A least-squares fit of k parameters to N·outputs noisy values lowers
    // the mean loss by chi-square(k) * noise / (N·outputs) on its own.
    if let (Some(z), true) = (opts.significance, noise > 0.0) {
        let k = shape.len() as f64;
        let explained = noise * (k + z * (2.0 * k).sqrt()) / (stimulus.len() * shape.no) as f64;
        if initial - best.0 <= explained {
            best.1 = shape.flatten(structure);
        }
    }
    Ok(Replication {
        network: shape.build(&best.1, act)?,
        loss_trace: trace,
        target,
        converged,
    })
}

/// Mean absolute difference of `log(eps_log + |c|)` over the union of the
/// monomials of both polynomials, missing terms read as zero.
pub fn coefficient_distance(a: &MultivariatePolynomial, b: &MultivariatePolynomial, eps_log: f64) -> Result<f64> {
    if a.num_inputs() != b.num_inputs() {
        return Err(Error::Dimension {
            expected: a.num_inputs(),
            got: b.num_inputs(),
        });
    }
    if !(eps_log > 0.0) {
        return Err(Error::Parameter(format!("eps_log must be positive, got {eps_log}")));
    }
    let mut keys: Vec<_> = a.terms().map(|(k, _)| k).chain(b.terms().map(|(k, _)| k)).collect();
    keys.sort();
    keys.dedup();
    if keys.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = keys
        .iter()
        .map(|k| ((eps_log + a.coefficient(k).abs()).ln() - (eps_log + b.coefficient(k).abs()).ln()).abs())
        .sum();
    Ok(total / keys.len() as f64)
}

/// Expansion half-width covering the original's pre-activations over the
/// domain with a 25% margin.
pub fn default_vmax(net: &Network, domain: &[Interval]) -> f64 {
    let hidden = &net.layers()[0];
    let worst = (0..hidden.outputs())
        .map(|n| {
            hidden
                .row(n)
                .iter()
                .zip(domain)
                .fold(hidden.bias()[n].abs(), |a, (w, d)| a + w.abs() * d.mag())
        })
        .fold(0.0, f64::max);
    (1.25 * worst).max(1e-3)
}

/// Runs the full procedure against `under_test`, a black box mapping inputs to
/// outputs, with `original` as the expected network.
pub fn equivalence_test<F>(original: &Network, under_test: F, config: &EquivConfig) -> Result<EquivVerdict>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let start = Instant::now();
    let act = check_structure(original)?;
    if config.domain.len() != original.num_inputs() {
        return Err(Error::Dimension {
            expected: original.num_inputs(),
            got: config.domain.len(),
        });
    }
    let stimulus = StimulusSet::collect(under_test, &config.domain, config.samples, config.snr_db, config.seed)?;
    let fit = FitOptions {
        seed: config.seed.wrapping_add(2),
        ..config.fit.clone()
    };
    let vmax = config.vmax.unwrap_or_else(|| default_vmax(original, &config.domain));
    let kind: ActivationKind = act.expansion_kind().expect("checked above");
    let expansion = coefficients(kind, config.terms, vmax, config.digits)?;
    let psi_original = expand_layer(original, &expansion)?;

    let (replicated, trace, outcome_if_fitted) = match replicate(original, &stimulus, &fit) {
        Ok(r) => (r.network, r.loss_trace, None),
        Err(Error::NonConvergence { .. }) => (original.clone(), Vec::new(), Some(Outcome::Inconclusive)),
        Err(e) => return Err(e),
    };
    let psi_replicated = expand_layer(&replicated, &expansion)?;
    let eta_per_output = psi_original
        .iter()
        .zip(&psi_replicated)
        .map(|(a, b)| coefficient_distance(a, b, config.eps_log))
        .collect::<Result<Vec<_>>>()?;
    let eta = eta_per_output.iter().sum::<f64>() / eta_per_output.len() as f64;
    let outcome = outcome_if_fitted.unwrap_or(if eta <= config.threshold {
        Outcome::Equivalent
    } else {
        Outcome::NotEquivalent
    });
    Ok(EquivVerdict {
        eta,
        threshold: config.threshold,
        equivalent: outcome == Outcome::Equivalent,
        outcome,
        replicated,
        fit_loss_trace: trace,
        eta_per_output,
        vmax,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
