//! Multivariate polynomial form of a one-hidden-layer network.
//!
//! Each hidden neuron computes `phi(b + w.x)` with `phi` replaced by its
//! expansion polynomial `sum_k c_k v^k`. Writing `p(b + t) = sum_j g_j(b) t^j`
//! and expanding `(w.x)^j` multinomially gives the coefficient of `x^a` as
//!
//! ```text
//! multinomial(|a|; a) * g_|a|(b) * w^a
//! ```
//!
//! which is summed over neurons with the output weights. Accumulation runs in
//! [`LAYER_DIGITS`] digits and is rounded to `f64` once at the end.

pub mod multiindex;
pub mod multinomial;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::expansion::AmiteExpansion;
use crate::ffnn::Network;
use crate::mpcore::Real;
use crate::{Error, Result};

pub use multiindex::{binomial, MonomialSpace, MultiIndex};
pub use multinomial::{global_cache, multinomial_coefficient, CacheStats, MultinomialCache};

/// Working precision of the layer expansion.
pub const LAYER_DIGITS: u32 = 40;

/// Sparse polynomial in `num_inputs` variables with `f64` coefficients. Zero
/// coefficients are never stored; iteration follows [`MultiIndex`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultivariatePolynomial {
    num_inputs: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl MultivariatePolynomial {
    pub fn new(num_inputs: usize) -> Self {
        MultivariatePolynomial {
            num_inputs,
            terms: BTreeMap::new(),
        }
    }

    /// Sums duplicate indices and drops zeros.
    pub fn from_terms(num_inputs: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<Self> {
        let mut p = Self::new(num_inputs);
        for (k, c) in terms {
            p.add_term(k, c)?;
        }
        Ok(p)
    }

    pub fn constant(num_inputs: usize, c: f64) -> Self {
        let mut p = Self::new(num_inputs);
        if c != 0.0 {
            p.terms.insert(MultiIndex::zeros(num_inputs), c);
        }
        p
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &c)| (k, c))
    }

    /// Coefficient of `x^kappa`, zero when absent.
    pub fn coefficient(&self, kappa: &MultiIndex) -> f64 {
        self.terms.get(kappa).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, kappa: MultiIndex, c: f64) -> Result<()> {
        if kappa.len() != self.num_inputs {
            return Err(Error::Dimension {
                expected: self.num_inputs,
                got: kappa.len(),
            });
        }
        let v = self.coefficient(&kappa) + c;
        if v == 0.0 {
            self.terms.remove(&kappa);
        } else {
            self.terms.insert(kappa, v);
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        eval_poly(self, x)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "amite-poly 1\nnum_inputs {}\nterms {}\n",
            self.num_inputs,
            self.terms.len()
        );
        for (k, c) in &self.terms {
            for e in k.exponents() {
                out.push_str(&e.to_string());
                out.push(' ');
            }
            out.push_str(&format!("{c:e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Schema {
            location: format!("line {line}"),
            message: msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}` line")))?;
            let v = l
                .strip_prefix(key)
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| err(n, format!("expected `{key} <value>`")))?;
            Ok((n, v.to_string()))
        };
        let (n, v) = header("amite-poly")?;
        if v != "1" {
            return Err(err(n, format!("unsupported format version {v}")));
        }
        let (n, v) = header("num_inputs")?;
        let num_inputs: usize = v
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| err(n, format!("bad input count `{v}`")))?;
        let (n, v) = header("terms")?;
        let count: usize = v.parse().map_err(|_| err(n, format!("bad term count `{v}`")))?;
        let mut p = Self::new(num_inputs);
        let mut prev: Option<MultiIndex> = None;
        for _ in 0..count {
            let (n, l) = lines.next().ok_or_else(|| err(0, format!("expected {count} terms")))?;
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != num_inputs + 1 {
                return Err(err(n, format!("expected {} exponents and a coefficient", num_inputs)));
            }
            let exps = fields[..num_inputs]
                .iter()
                .map(|f| f.parse::<u32>().map_err(|_| err(n, format!("bad exponent `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            let c: f64 = fields[num_inputs]
                .parse()
                .ok()
                .filter(|c: &f64| c.is_finite() && *c != 0.0)
                .ok_or_else(|| err(n, format!("bad coefficient `{}`", fields[num_inputs])))?;
            let k = MultiIndex::new(exps);
            if prev.as_ref().is_some_and(|q| q >= &k) {
                return Err(err(n, format!("term {k} is out of graded order")));
            }
            prev = Some(k.clone());
            p.terms.insert(k, c);
        }
        if let Some((n, _)) = lines.next() {
            return Err(err(n, "trailing content after the last term".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// `sum_k Psi_k x^k`, with each `x_i^e` computed once.
pub fn eval_poly(poly: &MultivariatePolynomial, x: &[f64]) -> Result<f64> {
    if x.len() != poly.num_inputs {
        return Err(Error::Dimension {
            expected: poly.num_inputs,
            got: x.len(),
        });
    }
    let deg = poly.degree() as usize;
    let powers: Vec<Vec<f64>> = x
        .iter()
        .map(|&xi| {
            let mut p = Vec::with_capacity(deg + 1);
            p.push(1.0);
            for e in 1..=deg {
                p.push(p[e - 1] * xi);
            }
            p
        })
        .collect();
    Ok(poly
        .terms
        .iter()
        .map(|(k, c)| {
            k.exponents()
                .iter()
                .zip(&powers)
                .fold(*c, |acc, (&e, p)| acc * p[e as usize])
        })
        .sum())
}

/// Expands a one-hidden-layer network into one polynomial per output, using
/// the process-wide multinomial cache.
pub fn expand_layer(net: &Network, expansion: &AmiteExpansion) -> Result<Vec<MultivariatePolynomial>> {
    expand_layer_with_cache(net, expansion, global_cache())
}

pub fn expand_layer_with_cache(
    net: &Network,
    expansion: &AmiteExpansion,
    cache: &MultinomialCache,
) -> Result<Vec<MultivariatePolynomial>> {
    let layers = net.layers();
    if layers.len() != 2 {
        return Err(Error::Structure(format!(
            "layer expansion needs exactly one hidden layer, network has {}",
            layers.len() - 1
        )));
    }
    let (hidden, output) = (&layers[0], &layers[1]);
    if hidden.activation().expansion_kind() != Some(expansion.kind()) {
        return Err(Error::Structure(format!(
            "hidden activation {} does not match a {} expansion",
            hidden.activation(),
            expansion.kind()
        )));
    }
    let nvars = net.num_inputs();
    let deg = expansion.degree();
    let space = MonomialSpace::new(nvars, deg)?;
    let d = LAYER_DIGITS;

    let power: Vec<Real> = expansion
        .power_coefficients()
        .iter()
        .map(|c| c.with_digits(d))
        .collect();
    let multinomials = (0..space.len())
        .map(|r| {
            let e = space.exponents(r);
            Ok(Real::from_integer(&cache.get(e.iter().sum(), e)?, d))
        })
        .collect::<Result<Vec<_>>>()?;

    let zero = || vec![vec![Real::zero(d); space.len()]; output.outputs()];
    let acc = (0..hidden.outputs())
        .into_par_iter()
        .fold(zero, |mut acc, n| {
            let shifted = taylor_shift(&power, &Real::from_f64(hidden.bias()[n], d));
            let wpow: Vec<Vec<Real>> = hidden
                .row(n)
                .iter()
                .map(|&w| {
                    let w = Real::from_f64(w, d);
                    let mut p = vec![Real::one(d)];
                    for e in 1..=deg as usize {
                        let next = &p[e - 1] * &w;
                        p.push(next);
                    }
                    p
                })
                .collect();
            for r in 0..space.len() {
                let e = space.exponents(r);
                let j: u32 = e.iter().sum();
                let mut t = &multinomials[r] * &shifted[j as usize];
                for (i, &k) in e.iter().enumerate() {
                    if k > 0 {
                        t *= &wpow[i][k as usize];
                    }
                }
                for (o, row) in acc.iter_mut().enumerate() {
                    let wo = output.weight(o, n);
                    if wo != 0.0 {
                        row[r] += &t * wo;
                    }
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
            a
        });

    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(o, mut row)| {
            row[0] += output.bias()[o];
            let mut p = MultivariatePolynomial::new(nvars);
            for (r, v) in row.iter().enumerate() {
                let c = v.to_f64();
                if c != 0.0 {
                    p.terms.insert(space.index(r), c);
                }
            }
            p
        })
        .collect())
}

/// Coefficients of `p(b + t)` in `t`, given `p` in the power basis.
pub(crate) fn taylor_shift(coeffs: &[Real], b: &Real) -> Vec<Real> {
    let mut a = coeffs.to_vec();
    let n = a.len();
    for i in 0..n.saturating_sub(1) {
        for k in (i..n - 1).rev() {
            let t = &a[k + 1] * b;
            a[k] += t;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{relu_coefficients, tanh_coefficients};
    use crate::ffnn::{fuzz_inputs, Activation, Layer};
    use crate::intervals_tm::Interval;
    use proptest::prelude::*;

    fn one_neuron(w: f64, b: f64, act: Activation) -> Network {
        Network::new(
            1,
            vec![
                Layer::new(1, 1, vec![w], vec![b], act).unwrap(),
                Layer::new(1, 1, vec![1.0], vec![0.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap()
    }

    fn polynomial_network(net: &Network, e: &AmiteExpansion, x: &[f64]) -> Vec<f64> {
        let (h, o) = (&net.layers()[0], &net.layers()[1]);
        let hidden: Vec<f64> = h.preactivation(x).iter().map(|&v| e.evaluate(v)).collect();
        o.preactivation(&hidden)
    }

    #[test]
    fn eval_trivia() {
        let p = MultivariatePolynomial::new(2);
        assert_eq!(eval_poly(&p, &[0.3, 4.0]).unwrap(), 0.0);
        let c = MultivariatePolynomial::constant(2, -1.5);
        assert_eq!(eval_poly(&c, &[7.0, 9.0]).unwrap(), -1.5);
        assert!(matches!(eval_poly(&c, &[1.0]), Err(Error::Dimension { .. })));
        let q = MultivariatePolynomial::from_terms(
            2,
            [(MultiIndex::new(vec![2, 1]), 3.0), (MultiIndex::new(vec![0, 1]), -1.0)],
        )
        .unwrap();
        assert_eq!(eval_poly(&q, &[2.0, 3.0]).unwrap(), 3.0 * 4.0 * 3.0 - 3.0);
    }

    #[test]
    fn zero_terms_are_dropped() {
        let mut p = MultivariatePolynomial::new(1);
        p.add_term(MultiIndex::new(vec![1]), 2.0).unwrap();
        p.add_term(MultiIndex::new(vec![1]), -2.0).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn taylor_shift_matches_direct_expansion() {
        // (1 + 2v + 3v^2) at v = 2 + t  ->  17 + 14 t + 3 t^2
        let c: Vec<Real> = [1, 2, 3].iter().map(|&k| Real::from_i64(k, 30)).collect();
        let s = taylor_shift(&c, &Real::from_i64(2, 30));
        let got: Vec<f64> = s.iter().map(Real::to_f64).collect();
        assert_eq!(got, vec![17.0, 14.0, 3.0]);
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let e = tanh_coefficients(3, 2.0, 40).unwrap();
        let mut net = Network::random(2, &[4], 1, Activation::Tanh, 8).unwrap();
        for w in net.layers_mut()[1].weights_mut() {
            *w = 0.0;
        }
        net.layers_mut()[1].bias_mut()[0] = 0.25;
        let p = &expand_layer(&net, &e).unwrap()[0];
        assert_eq!(p, &MultivariatePolynomial::constant(2, 0.25));
    }

    #[test]
    fn identity_wiring_reproduces_expansion() {
        for e in [
            tanh_coefficients(4, 3.0, 50).unwrap(),
            relu_coefficients(4, 3.0, 50).unwrap(),
        ] {
            let act = Activation::from(e.kind());
            let p = &expand_layer(&one_neuron(1.0, 0.0, act), &e).unwrap()[0];
            let expected = e.power_coefficients_f64();
            for (k, c) in expected.iter().enumerate() {
                let got = p.coefficient(&MultiIndex::new(vec![k as u32]));
                assert!((got - c).abs() <= 1e-15 * c.abs(), "{k}: {got} vs {c}");
            }
        }
    }

    #[test]
    fn origin_value_matches_network() {
        let e = relu_coefficients(6, 4.0, 40).unwrap();
        let net = Network::random(3, &[9], 2, Activation::Relu, 21).unwrap();
        let polys = expand_layer(&net, &e).unwrap();
        let expected = polynomial_network(&net, &e, &[0.0; 3]);
        for (p, y) in polys.iter().zip(expected) {
            assert!((eval_poly(p, &[0.0; 3]).unwrap() - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn random_net_matches_per_neuron_evaluation() {
        let e = tanh_coefficients(5, 4.0, 40).unwrap();
        let net = Network::random(2, &[5], 1, Activation::Tanh, 4).unwrap();
        let p = &expand_layer(&net, &e).unwrap()[0];
        assert!(p.len() as u64 <= binomial(2 + e.degree() as u64, 2).unwrap());
        for x in fuzz_inputs(100, &[Interval::new(-1.0, 1.0); 2], 9).unwrap() {
            let y = polynomial_network(&net, &e, &x)[0];
            let got = eval_poly(p, &x).unwrap();
            assert!((got - y).abs() <= 1e-9 * y.abs().max(1e-3), "{x:?}: {got} vs {y}");
        }
    }

    #[test]
    fn identity_holds_outside_domain() {
        let e = tanh_coefficients(3, 1.0, 40).unwrap();
        let net = one_neuron(3.0, 0.5, Activation::Tanh);
        let p = &expand_layer(&net, &e).unwrap()[0];
        for x in [-2.0, 1.5, 4.0] {
            let y = e.evaluate(3.0 * x + 0.5);
            assert!((p.evaluate(&[x]).unwrap() - y).abs() <= 1e-12 * y.abs());
        }
    }

    #[test]
    fn structure_is_checked() {
        let e = tanh_coefficients(3, 2.0, 40).unwrap();
        let deep = Network::random(1, &[2, 2], 1, Activation::Tanh, 1).unwrap();
        assert!(matches!(expand_layer(&deep, &e), Err(Error::Structure(_))));
        let relu = Network::random(1, &[2], 1, Activation::Relu, 1).unwrap();
        assert!(matches!(expand_layer(&relu, &e), Err(Error::Structure(_))));
    }

    #[test]
    fn text_round_trip() {
        let e = relu_coefficients(4, 3.0, 40).unwrap();
        let net = Network::random(2, &[3], 1, Activation::Relu, 2).unwrap();
        let p = expand_layer(&net, &e).unwrap().remove(0);
        let text = p.to_text();
        assert_eq!(MultivariatePolynomial::from_text(&text).unwrap(), p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "amite-poly 1");
        assert!(lines[3].starts_with("0 0 "));
        assert!(lines[4].starts_with("1 0 "));

        let swapped = text.replacen(lines[4], "9 9 1e0", 1);
        assert!(MultivariatePolynomial::from_text(&swapped).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn expansion_is_an_algebraic_identity(seed in 0u64..1000, width in 1usize..8, inputs in 1usize..4) {
            let e = relu_coefficients(3, 5.0, 40).unwrap();
            let net = Network::random(inputs, &[width], 2, Activation::Relu, seed).unwrap();
            let polys = expand_layer(&net, &e).unwrap();
            for x in fuzz_inputs(10, &vec![Interval::new(-1.5, 1.5); inputs], seed).unwrap() {
                let y = polynomial_network(&net, &e, &x);
                for (p, yo) in polys.iter().zip(y) {
                    let got = eval_poly(p, &x).unwrap();
                    prop_assert!((got - yo).abs() <= 1e-10 * yo.abs().max(1.0));
                }
            }
        }
    }
}
