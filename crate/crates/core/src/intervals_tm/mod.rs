//! Outward-rounded interval arithmetic and Taylor models over an input box,
//! with activation functions entering as fitted polynomial models.

mod activation;
mod bernstein;
mod interval;
mod optimize;
mod taylor;

pub use activation::{
    cached_model, coefficient_rounding_bound, fit_error_interval, fit_expansion_error, tm_compose, tm_from_activation,
    ActivationModel, FitReport, DEFAULT_OPT_TOL, FIT_DIGITS, GRID_POINTS_PER_PERIOD, MIN_GRID_POINTS,
};
pub use bernstein::{bernstein_range, MAX_BERNSTEIN_DEGREE, MAX_BERNSTEIN_TENSOR};
pub use interval::{interval_add, interval_mul, interval_pow, interval_sub, Interval};
pub use optimize::{brent_minimize, Minimum};
pub use taylor::{
    tm_add, tm_add_const, tm_affine, tm_bound, tm_mul, tm_mul_capped, tm_scale, tm_sub, TaylorModel, TmContext,
};
