//! Closed-form results for one waveguide with a single activated antenna.

mod average;
mod placement;
pub mod quadrature;

pub use average::{
    avg_rate_conv, avg_rate_pass_closed_form, avg_rate_pass_high_snr, linear_case_rate,
    rate_gain, LinearCaseParams, QUAD_ABS_TOL,
};
pub use placement::{candidate_point_search, chebyshev_midpoint, SinglePaInstance, TIE_BITS};
