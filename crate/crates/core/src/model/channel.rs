use std::f64::consts::LN_2;

use num_complex::Complex64;

use super::geometry::{distance, PinchingLayout, UserSet, WaveguideLayout};
use super::params::SystemParams;
use crate::error::{Error, Result};

/// Complex transmit weights, one per waveguide (or per RF chain).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBeamformer {
    w: Vec<Complex64>,
}

impl TransmitBeamformer {
    /// Relative slack allowed on the power budget.
    pub const POWER_SLACK: f64 = 1e-9;

    pub fn new(w: Vec<Complex64>, pt: f64) -> Result<Self> {
        let power = norm_sqr(&w);
        if power > pt * (1.0 + Self::POWER_SLACK) {
            return Err(Error::InvalidParameter {
                field: "w",
                reason: format!("power {power} exceeds budget {pt}"),
            });
        }
        Ok(Self { w })
    }

    /// Equal split of the budget with zero phases.
    pub fn equal_gain(len: usize, pt: f64) -> Self {
        let amp = (pt / len as f64).sqrt();
        Self {
            w: vec![Complex64::new(amp, 0.0); len],
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.w
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.w
    }

    pub fn power(&self) -> f64 {
        norm_sqr(&self.w)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

/// Free-space response of one antenna towards a user: sqrt(eta) e^{-j kappa D} / D.
pub fn free_space_response(params: &SystemParams, point: [f64; 3], user: [f64; 2]) -> Complex64 {
    let d = distance(point, user);
    Complex64::from_polar(params.eta.sqrt() / d, -params.kappa * d)
}

/// In-waveguide response of an antenna at `x`: e^{-j kappa_g x} / sqrt(N).
pub fn guided_response(params: &SystemParams, x: f64) -> Complex64 {
    Complex64::from_polar(params.rho.sqrt(), -params.kappa_g * x)
}

/// End-to-end coefficient from the feed of a waveguide at `y` through an
/// antenna at `x` to a user: the product of the guided and free-space
/// responses, sqrt(eta rho) e^{-j(kappa D + kappa_g x)} / D.
pub fn pa_coefficient(params: &SystemParams, x: f64, y: f64, user: [f64; 2]) -> Complex64 {
    let d = distance([x, y, params.height], user);
    Complex64::from_polar(
        (params.eta * params.rho).sqrt() / d,
        -(params.kappa * d + params.kappa_g * x),
    )
}

/// Channel quantities for a fixed layout and user set.
///
/// `h_eff[k]` is defined so that the received amplitude of user `k` is
/// `g_eff,k = h_eff[k]^H w`, i.e. `conj(h_eff[k][m]) = sum_n g[m][n] h_free[k][m][n]`.
#[derive(Debug, Clone)]
pub struct ChannelState {
    /// `[k][m][n]` free-space responses.
    pub h_free: Vec<Vec<Vec<Complex64>>>,
    /// `[m][n]` in-waveguide responses.
    pub g_wave: Vec<Vec<Complex64>>,
    /// `[k][m]` effective channel vectors.
    pub h_eff: Vec<Vec<Complex64>>,
    pub sigma2: Vec<f64>,
}

impl ChannelState {
    pub fn assemble(
        params: &SystemParams,
        waveguides: &WaveguideLayout,
        layout: &PinchingLayout,
        users: &UserSet,
    ) -> Result<Self> {
        layout.check(params)?;
        if users.len() != params.sigma2.len() {
            return Err(Error::DimensionMismatch {
                expected: params.sigma2.len(),
                got: users.len(),
            });
        }
        if waveguides.len() != layout.waveguides() {
            return Err(Error::DimensionMismatch {
                expected: layout.waveguides(),
                got: waveguides.len(),
            });
        }
        let g_wave: Vec<Vec<Complex64>> = layout
            .columns()
            .iter()
            .map(|col| col.iter().map(|&x| guided_response(params, x)).collect())
            .collect();
        let h_free: Vec<Vec<Vec<Complex64>>> = users
            .iter()
            .map(|u| {
                layout
                    .columns()
                    .iter()
                    .enumerate()
                    .map(|(m, col)| {
                        let y = waveguides.y_coords[m];
                        col.iter()
                            .map(|&x| free_space_response(params, [x, y, params.height], u))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let h_eff = h_free
            .iter()
            .map(|hk| {
                hk.iter()
                    .zip(&g_wave)
                    .map(|(hm, gm)| {
                        hm.iter()
                            .zip(gm)
                            .map(|(h, g)| h * g)
                            .sum::<Complex64>()
                            .conj()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            h_free,
            g_wave,
            h_eff,
            sigma2: params.sigma2.clone(),
        })
    }

    pub fn users(&self) -> usize {
        self.h_eff.len()
    }

    /// g_eff,k = h_eff,k^H w.
    pub fn g_eff(&self, k: usize, w: &[Complex64]) -> Complex64 {
        inner(&self.h_eff[k], w)
    }

    /// Per-user rate in nats.
    pub fn user_rate_nats(&self, k: usize, w: &[Complex64]) -> f64 {
        (self.g_eff(k, w).norm_sqr() / self.sigma2[k]).ln_1p()
    }

    /// Per-user rate in bits/s/Hz.
    pub fn user_rate(&self, k: usize, w: &[Complex64]) -> f64 {
        self.user_rate_nats(k, w) / LN_2
    }

    /// Worst-user rate in bits/s/Hz.
    pub fn multicast_rate(&self, w: &[Complex64]) -> f64 {
        multicast_rate_nats(&self.h_eff, &self.sigma2, w) / LN_2
    }
}

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Worst-user rate (nats) for per-user channels `h[k]` with `g_k = h[k]^H w`.
pub fn multicast_rate_nats(h: &[Vec<Complex64>], sigma2: &[f64], w: &[Complex64]) -> f64 {
    h.iter()
        .zip(sigma2)
        .map(|(hk, s)| (inner(hk, w).norm_sqr() / s).ln_1p())
        .fold(f64::INFINITY, f64::min)
}

/// Worst-user rate in bits/s/Hz for generic per-user channel vectors.
pub fn multicast_rate_bits(h: &[Vec<Complex64>], sigma2: &[f64], w: &[Complex64]) -> f64 {
    multicast_rate_nats(h, sigma2, w) / LN_2
}
