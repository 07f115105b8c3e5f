//! Random stimulation, noise and weight perturbation. Every generator is a
//! ChaCha8 stream seeded from a `u64`, so results reproduce bit for bit.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Network;
use crate::intervals_tm::Interval;
use crate::{Error, Result};

/// Input vectors with the responses observed for them.
#[derive(Clone, Debug, PartialEq)]
pub struct StimulusSet {
    pub inputs: Vec<Vec<f64>>,
    pub responses: Vec<Vec<f64>>,
    /// SNR of the added noise in dB, `None` for clean responses.
    pub snr_db: Option<f64>,
}

impl StimulusSet {
    /// Fuzzes `evaluator` with `n` uniform inputs from `domain` and adds noise
    /// at `snr_db`. The fuzz stream uses `seed`, the noise stream `seed + 1`.
    pub fn collect<F>(evaluator: F, domain: &[Interval], n: usize, snr_db: Option<f64>, seed: u64) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let inputs = fuzz_inputs(n, domain, seed)?;
        let clean = inputs.iter().map(|x| evaluator(x)).collect::<Result<Vec<_>>>()?;
        let responses = add_noise(&clean, snr_db, seed.wrapping_add(1))?;
        Ok(StimulusSet {
            inputs,
            responses,
            snr_db,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// CSV with columns `sample, x_1..x_N, y_1..y_K`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let ni = self.inputs.first().map_or(0, Vec::len);
        let no = self.responses.first().map_or(0, Vec::len);
        let mut header = vec!["sample".to_string()];
        header.extend((1..=ni).map(|i| format!("x_{i}")));
        header.extend((1..=no).map(|i| format!("y_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (i, (x, y)) in self.inputs.iter().zip(&self.responses).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(x.iter().chain(y).map(|v| format!("{v:.16e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_box(domain: &[Interval]) -> Result<()> {
    if domain.is_empty() {
        return Err(Error::Parameter("the input box has no coordinates".into()));
    }
    for (i, d) in domain.iter().enumerate() {
        if d.is_empty() || !d.is_finite() {
            return Err(Error::Parameter(format!(
                "box coordinate {i} is {d}, expected a finite interval"
            )));
        }
    }
    Ok(())
}

/// `n` i.i.d. uniform vectors inside `domain`.
pub fn fuzz_inputs(n: usize, domain: &[Interval], seed: u64) -> Result<Vec<Vec<f64>>> {
    check_box(domain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            domain
                .iter()
                .map(|d| {
                    let u: f64 = rng.random();
                    (d.lo + u * (d.hi - d.lo)).clamp(d.lo, d.hi)
                })
                .collect()
        })
        .collect())
}

/// Adds white Gaussian noise per output column with power
/// `mean(y^2) / 10^{snr/10}`. `None` returns the responses unchanged.
pub fn add_noise(responses: &[Vec<f64>], snr_db: Option<f64>, seed: u64) -> Result<Vec<Vec<f64>>> {
    let Some(snr) = snr_db else {
        return Ok(responses.to_vec());
    };
    if !snr.is_finite() {
        return Err(Error::Parameter(format!("SNR must be finite, got {snr}")));
    }
    if responses.is_empty() {
        return Ok(Vec::new());
    }
    let cols = responses[0].len();
    let n = responses.len() as f64;
    let scale = 10f64.powf(-snr / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Normal<f64>> = (0..cols)
        .map(|c| {
            let power = responses.iter().map(|r| r[c] * r[c]).sum::<f64>() / n;
            Normal::new(0.0, (power * scale).sqrt()).expect("finite standard deviation")
        })
        .collect();
    Ok(responses
        .iter()
        .map(|r| {
            r.iter()
                .zip(&normals)
                .map(|(y, dist)| y + dist.sample(&mut rng))
                .collect()
        })
        .collect())
}

/// Multiplies every weight and bias by `1 + u`, `u ~ U[-rel, rel]`.
pub fn perturb_weights(net: &Network, rel: f64, seed: u64) -> Result<Network> {
    if !(rel >= 0.0 && rel.is_finite()) {
        return Err(Error::Parameter(format!(
            "relative perturbation must be >= 0, got {rel}"
        )));
    }
    let mut out = net.clone();
    if rel == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in out.layers_mut() {
        for w in layer.weights_mut() {
            *w *= 1.0 + rng.random_range(-rel..=rel);
        }
        for b in layer.bias_mut() {
            *b *= 1.0 + rng.random_range(-rel..=rel);
        }
    }
    Ok(out)
}

/// Per-output `[min, max]` over `n_samples` fuzz inputs. This samples the
/// range and generally underestimates it.
pub fn numeric_range(net: &Network, domain: &[Interval], n_samples: usize, seed: u64) -> Result<Vec<Interval>> {
    if domain.len() != net.num_inputs() {
        return Err(Error::Dimension {
            expected: net.num_inputs(),
            got: domain.len(),
        });
    }
    let xs = fuzz_inputs(n_samples, domain, seed)?;
    let ys = net.forward_batch(&xs)?;
    let mut out = vec![Interval::EMPTY; net.num_outputs()];
    for y in &ys {
        for (r, v) in out.iter_mut().zip(y) {
            *r = Interval {
                lo: r.lo.min(*v),
                hi: r.hi.max(*v),
            };
        }
    }
    Ok(out)
}
