//! Exponent vectors and dense monomial enumeration in graded order.

use std::cmp::Ordering;
use std::fmt;

use crate::{Error, Result};

/// Exponents of a monomial `x_1^{k_1} ... x_N^{k_N}`.
///
/// Ordered by total degree, then by exponent vector in descending
/// lexicographic order, so in two variables the sequence is
/// `1, x1, x2, x1^2, x1 x2, x2^2, ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(nvars: usize) -> Self {
        MultiIndex(vec![0; nvars])
    }

    /// `x_i`.
    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total degree `|k|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Nonzero exponents in ascending order, the symmetric key of the
    /// multinomial coefficient.
    pub fn sorted_parts(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.0.iter().copied().filter(|&k| k > 0).collect();
        p.sort_unstable();
        p
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// Largest dense space we are willing to allocate.
pub const MAX_DENSE_MONOMIALS: usize = 1 << 26;

/// All monomials in `nvars` variables of degree at most `max_degree`, stored
/// densely in graded order. `rank` maps an exponent vector back to its slot.
#[derive(Clone, Debug)]
pub struct MonomialSpace {
    nvars: usize,
    max_degree: u32,
    // stars[k][m] = C(m + k, k): k-variable vectors with sum <= m
    stars: Vec<Vec<usize>>,
    exponents: Vec<u32>,
}

/// `C(n, k)` with overflow checking.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

impl MonomialSpace {
    pub fn new(nvars: usize, max_degree: u32) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::Parameter("a monomial space needs at least one variable".into()));
        }
        let total = binomial(nvars as u64 + max_degree as u64, nvars as u64)
            .filter(|&t| t as usize <= MAX_DENSE_MONOMIALS)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "{nvars} variables at degree {max_degree} exceed {MAX_DENSE_MONOMIALS} monomials"
                ))
            })? as usize;
        let stars = (0..=nvars)
            .map(|k| {
                (0..=max_degree as u64)
                    .map(|m| binomial(m + k as u64, k as u64).unwrap() as usize)
                    .collect()
            })
            .collect();
        let mut exponents = Vec::with_capacity(total * nvars);
        let mut cur = vec![0u32; nvars];
        for d in 0..=max_degree {
            push_compositions(d, 0, &mut cur, &mut exponents);
        }
        debug_assert_eq!(exponents.len(), total * nvars);
        Ok(MonomialSpace {
            nvars,
            max_degree,
            stars,
            exponents,
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len() / self.nvars
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Exponents of the monomial in slot `rank`.
    pub fn exponents(&self, rank: usize) -> &[u32] {
        &self.exponents[rank * self.nvars..(rank + 1) * self.nvars]
    }

    pub fn index(&self, rank: usize) -> MultiIndex {
        MultiIndex(self.exponents(rank).to_vec())
    }

    /// Number of monomials of degree below `d`.
    pub fn degree_start(&self, d: u32) -> usize {
        if d == 0 {
            0
        } else {
            let d = (d - 1).min(self.max_degree) as usize;
            self.stars[self.nvars][d]
        }
    }

    /// Slot of `exponents`, or `None` when its degree exceeds the space.
    pub fn rank(&self, exponents: &[u32]) -> Option<usize> {
        debug_assert_eq!(exponents.len(), self.nvars);
        let d: u32 = exponents.iter().sum();
        if d > self.max_degree {
            return None;
        }
        let mut r = self.degree_start(d);
        let mut rest = d;
        for (i, &a) in exponents[..self.nvars - 1].iter().enumerate() {
            rest -= a;
            if rest > 0 {
                // monomials with a larger exponent in slot i
                r += self.stars[self.nvars - i - 1][rest as usize - 1];
            }
        }
        Some(r)
    }
}

fn push_compositions(left: u32, slot: usize, cur: &mut [u32], out: &mut Vec<u32>) {
    if slot + 1 == cur.len() {
        cur[slot] = left;
        out.extend_from_slice(cur);
        return;
    }
    for a in (0..=left).rev() {
        cur[slot] = a;
        push_compositions(left - a, slot + 1, cur, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn graded_order_in_two_variables() {
        let s = MonomialSpace::new(2, 2).unwrap();
        let got: Vec<Vec<u32>> = (0..s.len()).map(|r| s.exponents(r).to_vec()).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn space_size_and_ranks() {
        for (n, d) in [(1, 7), (2, 5), (3, 6), (4, 3)] {
            let s = MonomialSpace::new(n, d).unwrap();
            assert_eq!(s.len() as u64, binomial((n as u64) + d as u64, n as u64).unwrap());
            for r in 0..s.len() {
                assert_eq!(s.rank(s.exponents(r)), Some(r));
            }
            let ordered: Vec<MultiIndex> = (0..s.len()).map(|r| s.index(r)).collect();
            assert!(ordered.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(s.degree_start(d + 1), s.len());
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(66, 33), Some(7219428434016265740));
        assert_eq!(binomial(70, 35), None);
    }

    #[test]
    fn oversized_space_is_refused() {
        assert!(MonomialSpace::new(20, 50).is_err());
    }

    proptest! {
        #[test]
        fn order_is_degree_then_descending_lex(a in prop::collection::vec(0u32..5, 3), b in prop::collection::vec(0u32..5, 3)) {
            let (ia, ib) = (MultiIndex::new(a.clone()), MultiIndex::new(b.clone()));
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            let expect = da.cmp(&db).then(b.cmp(&a));
            prop_assert_eq!(ia.cmp(&ib), expect);
        }
    }
}
