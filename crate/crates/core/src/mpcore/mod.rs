//! Arbitrary-precision scalars and the special functions used by the
//! expansion formulas.

mod complex;
pub mod quadrature;
mod real;
pub mod special;

pub use complex::Complex;
pub use quadrature::{integrate, TanhSinh};
pub use real::{bits_for_digits, digits_for_bits, Real};
pub use rug::Rational;
pub use special::{
    bernoulli, factorial_root, hyp2f1_complex, hypergeometric, legendre_chi, legendre_chi_range, polylog,
    polylog_range, sine_integral, zeta, GUARD_DIGITS,
};
