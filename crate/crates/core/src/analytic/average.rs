//! Average multicast rates under the linear user distribution: all users
//! share one y-offset, their x-coordinates are uniform on [0, Dx].

use std::f64::consts::LN_2;

use super::quadrature::integrate;
use crate::error::{invalid, Result};
use crate::model::SystemParams;

/// Absolute tolerance for the numerically integrated averages.
pub const QUAD_ABS_TOL: f64 = 1e-10;

/// Scalars of the linear-distribution closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCaseParams {
    /// h^2 + y^2 (m^2).
    pub a: f64,
    /// eta P_t / sigma^2 (m^2).
    pub p_eff: f64,
    /// Dx / 2 (m).
    pub t: f64,
    /// Spread between the leftmost and rightmost user (m).
    pub delta_x: f64,
}

impl LinearCaseParams {
    pub fn new(a: f64, p_eff: f64, dx: f64, delta_x: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("a", "must be > 0"));
        }
        if !(p_eff > 0.0) {
            return Err(invalid("p_eff", "must be > 0"));
        }
        if !(0.0..=dx).contains(&delta_x) {
            return Err(invalid("delta_x", format!("must lie in [0, {dx}]")));
        }
        Ok(Self {
            a,
            p_eff,
            t: dx / 2.0,
            delta_x,
        })
    }

    /// Derives `A` and `P_eff` from system parameters for users at `y_hat`,
    /// using the noise power of the first user.
    pub fn from_params(params: &SystemParams, y_hat: f64, delta_x: f64) -> Result<Self> {
        let dy = y_hat - params.single_waveguide_y;
        Self::new(
            params.height * params.height + dy * dy,
            params.eta * params.pt / params.sigma2[0],
            params.dx,
            delta_x,
        )
    }
}

/// Worst-user rate with the antenna at the midpoint of the two extreme users.
pub fn linear_case_rate(lin: &LinearCaseParams) -> f64 {
    (lin.p_eff / (lin.delta_x * lin.delta_x / 4.0 + lin.a)).ln_1p() / LN_2
}

/// `J(C) = Dx I1(C) - I2(C)`, the weighted log integral
/// `int_0^Dx (Dx - d) ln(d^2/4 + C) dd`.
fn weighted_log_integral(c: f64, dx: f64) -> f64 {
    let t = dx / 2.0;
    let tc = t * t + c;
    let sc = c.sqrt();
    let i1 = 2.0 * (t * tc.ln() - 2.0 * t + 2.0 * sc * (t / sc).atan());
    // (T^2+C) ln(T^2+C) - C ln C, regrouped to limit cancellation when C >> T^2
    let i2 = 2.0 * (t * t * tc.ln() + c * (t * t / c).ln_1p() - t * t);
    dx * i1 - i2
}

/// Average worst-user rate of a single movable antenna, closed form.
pub fn avg_rate_pass_closed_form(lin: &LinearCaseParams, dx: f64) -> f64 {
    let diff = weighted_log_integral(lin.a + lin.p_eff, dx) - weighted_log_integral(lin.a, dx);
    2.0 / (dx * dx * LN_2) * diff
}

/// High-SNR approximation of [`avg_rate_pass_closed_form`].
pub fn avg_rate_pass_high_snr(lin: &LinearCaseParams, dx: f64) -> f64 {
    (lin.p_eff / lin.a).log2() - dx * dx / (24.0 * lin.a * LN_2)
}

/// Average worst-user rate of an antenna fixed at Dx/2 serving `k` users:
/// `(numerical, high-SNR approximation)`.
pub fn avg_rate_conv(lin: &LinearCaseParams, dx: f64, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(invalid("k", "must be >= 1"));
    }
    let kf = k as f64;
    let half = dx / 2.0;
    let density = |d: f64| 2.0 * kf / dx * (2.0 * d / dx).powi(k as i32 - 1);
    let exact = integrate(
        |d| (lin.p_eff / (d * d + lin.a)).ln_1p() / LN_2 * density(d),
        0.0,
        half,
        QUAD_ABS_TOL,
        0.0,
    );
    let approx = (lin.p_eff / lin.a).log2() - kf * dx * dx / (4.0 * lin.a * (kf + 2.0) * LN_2);
    Ok((exact, approx))
}

/// High-SNR rate advantage of the movable antenna over the fixed one.
///
/// Equals the conventional penalty `K Dx^2 / (4 A (K+2) ln 2)` minus the
/// movable-antenna penalty `Dx^2 / (24 A ln 2)`, which is positive for every
/// `K >= 1`.
pub fn rate_gain(lin: &LinearCaseParams, dx: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "must be >= 1"));
    }
    let kf = k as f64;
    Ok(dx * dx / (lin.a * LN_2) * (kf / (4.0 * (kf + 2.0)) - 1.0 / 24.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(a: f64, p_eff: f64) -> LinearCaseParams {
        LinearCaseParams::new(a, p_eff, 30.0, 0.0).unwrap()
    }

    #[test]
    fn zero_spread_rate() {
        let l = lin(31.25, 5000.0);
        assert!((linear_case_rate(&l) - (1.0 + 5000.0 / 31.25f64).log2()).abs() < 1e-14);
    }

    #[test]
    fn wider_spread_costs_log_of_distance_ratio() {
        let mut l = lin(31.25, 1e9);
        l.delta_x = 10.0;
        let r1 = linear_case_rate(&l);
        l.delta_x = 20.0;
        let r2 = linear_case_rate(&l);
        let expected = ((100.0 + 31.25) / (25.0 + 31.25f64)).log2();
        assert!(r2 < r1);
        assert!((r1 - r2 - expected).abs() < 1e-6);
    }

    #[test]
    fn vanishing_power_gives_zero_average() {
        let l = lin(31.25, 1e-12);
        assert!(avg_rate_pass_closed_form(&l, 30.0).abs() < 1e-12);
    }

    #[test]
    fn high_snr_without_spread() {
        let l = lin(31.25, 1e6);
        assert!((avg_rate_pass_high_snr(&l, 0.0) - (1e6 / 31.25f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn gain_limits_and_scaling() {
        let l = lin(31.25, 1e6);
        let g1 = rate_gain(&l, 30.0, 1).unwrap();
        assert!((g1 - 900.0 / (24.0 * 31.25 * LN_2)).abs() < 1e-12);
        let big = rate_gain(&l, 30.0, 1_000_000_000).unwrap();
        assert!((big / (900.0 / (31.25 * LN_2)) - 5.0 / 24.0).abs() < 1e-8);
        let g = rate_gain(&l, 10.0, 3).unwrap();
        assert_eq!(rate_gain(&l, 20.0, 3).unwrap() / g, 4.0);
        let mut last = 0.0;
        for k in 1..40 {
            let gk = rate_gain(&l, 30.0, k).unwrap();
            assert!(gk > 0.0 && gk >= last);
            last = gk;
        }
        assert!(rate_gain(&l, 30.0, 0).is_err());
    }

    #[test]
    fn dimensionless_groups_fix_the_average() {
        // rescaling lengths by s scales A and P_eff by s^2
        let s: f64 = 1e-3;
        let a = lin(31.25, 3e4);
        let b = LinearCaseParams::new(31.25 * s * s, 3e4 * s * s, 30.0 * s, 0.0).unwrap();
        let ra = avg_rate_pass_closed_form(&a, 30.0);
        let rb = avg_rate_pass_closed_form(&b, 30.0 * s);
        assert!((ra - rb).abs() < 1e-9 * ra);
        let (ca, _) = avg_rate_conv(&a, 30.0, 4).unwrap();
        let (cb, _) = avg_rate_conv(&b, 30.0 * s, 4).unwrap();
        assert!((ca - cb).abs() < 1e-8 * ca);
    }

    #[test]
    fn rejects_bad_linear_params() {
        assert!(LinearCaseParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(LinearCaseParams::new(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(LinearCaseParams::new(1.0, 1.0, 1.0, 2.0).is_err());
    }
}
