use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Closed interval `[lo, hi]` of doubles with outward rounding.
///
/// Each arithmetic result is computed in round-to-nearest and then widened by
/// one ulp on both sides, which always encloses the exact result set. The
/// empty interval is represented as `[+inf, -inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x.next_down()
    }
}

fn up(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x.next_up()
    }
}

// Directed rounding emulated from the exact error of a round-to-nearest
// result: the sign of the error tells which side the exact value lies on.
fn sum_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return down(s);
    }
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn sum_up(a: f64, b: f64) -> f64 {
    -sum_down(-a, -b)
}

fn prod_bounds(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 || b == 0.0 {
        return (0.0, 0.0);
    }
    let p = a * b;
    if !p.is_finite() || p.abs() < 1e-290 {
        return (down(p), up(p));
    }
    let e = a.mul_add(b, -p);
    if e < 0.0 {
        (p.next_down(), p)
    } else if e > 0.0 {
        (p, p.next_up())
    } else {
        (p, p)
    }
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    /// `[lo, hi]`; returns [`Interval::EMPTY`] when `lo > hi` or either is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Interval { lo, hi }
        } else {
            Interval::EMPTY
        }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Symmetric interval `[-r, r]`.
    pub fn symmetric(r: f64) -> Self {
        let r = r.abs();
        Interval { lo: -r, hi: r }
    }

    /// `[min, max]` of the two values, outward by one ulp.
    pub fn hull_of(a: f64, b: f64) -> Self {
        Interval {
            lo: down(a.min(b)),
            hi: up(a.max(b)),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Widens by `r` on each side (outward rounded).
    pub fn inflate(&self, r: f64) -> Interval {
        if self.is_empty() {
            return *self;
        }
        Interval {
            lo: down(self.lo - r),
            hi: up(self.hi + r),
        }
    }

    /// `x^n`; even powers of an interval straddling zero give `[0, max^n]`.
    pub fn powi(&self, n: u32) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if n == 0 {
            return Interval::point(1.0);
        }
        if n == 1 {
            return *self;
        }
        // powi is not correctly rounded; a few ulps of slack per multiplication.
        let slack = |x: f64| {
            let mut lo = x;
            let mut hi = x;
            for _ in 0..n.min(64) {
                lo = down(lo);
                hi = up(hi);
            }
            (lo, hi)
        };
        let pl = self.lo.powi(n as i32);
        let ph = self.hi.powi(n as i32);
        if n % 2 == 1 {
            let (l, _) = slack(pl);
            let (_, h) = slack(ph);
            Interval { lo: l, hi: h }
        } else if self.lo >= 0.0 {
            Interval {
                lo: slack(pl).0.max(0.0),
                hi: slack(ph).1,
            }
        } else if self.hi <= 0.0 {
            Interval {
                lo: slack(ph).0.max(0.0),
                hi: slack(pl).1,
            }
        } else {
            Interval {
                lo: 0.0,
                hi: slack(pl.max(ph)).1,
            }
        }
    }

    /// `k * self` for a scalar `k`.
    pub fn scale(&self, k: f64) -> Interval {
        *self * Interval::point(k)
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::ZERO
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{:e}, {:e}]", self.lo, self.hi)
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        if self.is_empty() || rhs.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: sum_down(self.lo, rhs.lo),
            hi: sum_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        if self.is_empty() || rhs.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: sum_down(self.lo, -rhs.hi),
            hi: sum_up(self.hi, -rhs.lo),
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if self.is_empty() || rhs.is_empty() {
            return Interval::EMPTY;
        }
        // 0 * inf is taken as 0, the limit that keeps enclosures valid.
        let c = [
            prod_bounds(self.lo, rhs.lo),
            prod_bounds(self.lo, rhs.hi),
            prod_bounds(self.hi, rhs.lo),
            prod_bounds(self.hi, rhs.hi),
        ];
        Interval {
            lo: c.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            hi: c.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn interval_add(a: Interval, b: Interval) -> Interval {
    a + b
}

pub fn interval_sub(a: Interval, b: Interval) -> Interval {
    a - b
}

pub fn interval_mul(a: Interval, b: Interval) -> Interval {
    a * b
}

pub fn interval_pow(a: Interval, n: u32) -> Interval {
    a.powi(n)
}
