//! Range enclosure of a polynomial over a box through its Bernstein
//! coefficients, computed in interval arithmetic.
//!
//! The polynomial is mapped to the unit box one axis at a time
//! (`x = lo + h t`), converted to the tensor Bernstein basis of per-variable
//! degree, and bounded by the hull of the Bernstein coefficients.

use super::interval::Interval;
use crate::polyexpand::{binomial, MonomialSpace};

/// Per-variable degree above which binomial ratios stop being exact enough.
pub const MAX_BERNSTEIN_DEGREE: u32 = 55;
/// Largest coefficient tensor we are willing to build.
pub const MAX_BERNSTEIN_TENSOR: usize = 1 << 21;

/// Interval ratio `C(i, j) / C(d, j)`.
fn ratio(i: u32, j: u32, d: u32) -> Interval {
    if j == 0 {
        return Interval::point(1.0);
    }
    let num = binomial(i as u64, j as u64).unwrap() as f64;
    let den = binomial(d as u64, j as u64).unwrap() as f64;
    let r = num / den;
    if r == 1.0 || r == 0.0 {
        Interval::point(r)
    } else {
        Interval {
            lo: r.next_down(),
            hi: r.next_up(),
        }
    }
}

/// Enclosure of `sum_r coeffs[r] x^{space[r]}` over `domain`, or `None` when
/// the tensor would be too large.
pub fn bernstein_range(space: &MonomialSpace, coeffs: &[f64], domain: &[Interval]) -> Option<Interval> {
    let n = domain.len();
    let mut deg = vec![0u32; n];
    let mut any = false;
    for (r, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            any = true;
            for (d, &e) in deg.iter_mut().zip(space.exponents(r)) {
                *d = (*d).max(e);
            }
        }
    }
    if !any {
        return Some(Interval::ZERO);
    }
    if deg.iter().any(|&d| d > MAX_BERNSTEIN_DEGREE) {
        return None;
    }
    let mut size = 1usize;
    for &d in &deg {
        size = size.checked_mul(d as usize + 1)?;
        if size > MAX_BERNSTEIN_TENSOR {
            return None;
        }
    }
    let mut stride = vec![1usize; n];
    for l in (0..n.saturating_sub(1)).rev() {
        stride[l] = stride[l + 1] * (deg[l + 1] as usize + 1);
    }
    let mut t = vec![Interval::ZERO; size];
    for (r, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            let idx: usize = space
                .exponents(r)
                .iter()
                .zip(&stride)
                .map(|(&e, &s)| e as usize * s)
                .sum();
            t[idx] = Interval::point(c);
        }
    }

    let mut fiber = Vec::new();
    for l in 0..n {
        let d = deg[l] as usize;
        if d == 0 {
            continue;
        }
        let lo = Interval::point(domain[l].lo);
        let h = Interval::point(domain[l].hi) - lo;
        let hpow: Vec<Interval> = (0..=d)
            .scan(Interval::point(1.0), |acc, k| {
                let cur = *acc;
                if k < d {
                    *acc = *acc * h;
                }
                Some(cur)
            })
            .collect();
        let ratios: Vec<Vec<Interval>> = (0..=d as u32)
            .map(|i| (0..=i).map(|j| ratio(i, j, d as u32)).collect())
            .collect();
        let s = stride[l];
        let block = s * (d + 1);
        for base in (0..size).step_by(block) {
            for off in 0..s {
                let start = base + off;
                fiber.clear();
                fiber.extend((0..=d).map(|k| t[start + k * s]));
                if fiber.iter().all(|c| *c == Interval::ZERO) {
                    continue;
                }
                // p(lo + t) by repeated synthetic division
                if domain[l].lo != 0.0 {
                    for i in 0..d {
                        for k in (i..d).rev() {
                            let add = lo * fiber[k + 1];
                            fiber[k] = fiber[k] + add;
                        }
                    }
                }
                for (c, hp) in fiber.iter_mut().zip(&hpow) {
                    *c = *c * *hp;
                }
                for i in 0..=d {
                    let b = (0..=i).fold(Interval::ZERO, |acc, j| acc + ratios[i][j] * fiber[j]);
                    t[start + i * s] = b;
                }
            }
        }
    }
    let lo = t.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min);
    let hi = t.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max);
    if lo.is_nan() || hi.is_nan() {
        return Some(Interval::ENTIRE);
    }
    Some(Interval { lo, hi })
}
