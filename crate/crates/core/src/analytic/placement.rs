use std::f64::consts::LN_2;

use crate::error::{invalid, Error, Result};
use crate::model::{SystemParams, UserSet};

/// Rate ties within this many bits resolve to the smaller position.
pub const TIE_BITS: f64 = 1e-12;

/// One waveguide, one activated antenna.
///
/// User `k` sees `R_k(x) = log2(1 + C_k / (offset_k + (x - x_k)^2))` where
/// `offset_k = h^2 + (y_wg - y_k)^2` and `C_k = P_t eta / sigma_k^2`.
#[derive(Debug, Clone)]
pub struct SinglePaInstance {
    pub dx: f64,
    pub user_x: Vec<f64>,
    pub offset: Vec<f64>,
    pub gain: Vec<f64>,
}

impl SinglePaInstance {
    pub fn new(params: &SystemParams, users: &UserSet) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::EmptyUserSet);
        }
        if users.len() != params.sigma2.len() {
            return Err(Error::DimensionMismatch {
                expected: params.sigma2.len(),
                got: users.len(),
            });
        }
        let y_wg = params.single_waveguide_y;
        let h2 = params.height * params.height;
        Ok(Self {
            dx: params.dx,
            user_x: users.iter().map(|u| u[0]).collect(),
            offset: users.iter().map(|u| h2 + (u[1] - y_wg).powi(2)).collect(),
            gain: params.sigma2.iter().map(|s| params.pt * params.eta / s).collect(),
        })
    }

    pub fn users(&self) -> usize {
        self.user_x.len()
    }

    /// Rate of user `k` (bits/s/Hz) with the antenna at `x`.
    pub fn user_rate(&self, k: usize, x: f64) -> f64 {
        let d2 = self.offset[k] + (x - self.user_x[k]).powi(2);
        (self.gain[k] / d2).ln_1p() / LN_2
    }

    pub fn multicast_rate(&self, x: f64) -> f64 {
        (0..self.users())
            .map(|k| self.user_rate(k, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Points in [0, dx] where the rate curves of users `i` and `j` cross.
    ///
    /// Solves `C_i D_j^2(x) = C_j D_i^2(x)`, a quadratic in `x` that becomes
    /// linear (perpendicular bisector) when `C_i = C_j`.
    pub fn intersections(&self, i: usize, j: usize) -> Vec<f64> {
        let (ci, cj) = (self.gain[i], self.gain[j]);
        let (xi, xj) = (self.user_x[i], self.user_x[j]);
        let (ei, ej) = (self.offset[i], self.offset[j]);
        let qa = ci - cj;
        let qb = -2.0 * (ci * xj - cj * xi);
        let qc = ci * (ej + xj * xj) - cj * (ei + xi * xi);
        let scale = ci.abs().max(cj.abs());
        let mut roots = Vec::with_capacity(2);
        if qa.abs() <= 1e-14 * scale {
            if qb != 0.0 {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                // stable form avoiding cancellation
                let q = -0.5 * (qb + qb.signum() * disc.sqrt());
                roots.push(q / qa);
                if q != 0.0 {
                    roots.push(qc / q);
                }
            }
        }
        roots.retain(|x| x.is_finite() && *x >= 0.0 && *x <= self.dx);
        roots
    }

    /// Candidate set: every user's own x plus every pairwise crossing.
    pub fn candidates(&self) -> Vec<f64> {
        let k = self.users();
        let mut out: Vec<f64> = self.user_x.iter().map(|&x| x.clamp(0.0, self.dx)).collect();
        for i in 0..k {
            for j in i + 1..k {
                out.extend(self.intersections(i, j));
            }
        }
        out
    }
}

/// Exact maximizer of the worst-user rate for a single antenna.
///
/// The envelope `min_k R_k` peaks either at one user's own position or at a
/// crossing of two rate curves, so evaluating it on that finite set is
/// enough; O(K^2) candidates, each evaluated in O(K).
pub fn candidate_point_search(instance: &SinglePaInstance) -> Result<(f64, f64)> {
    if instance.users() == 0 {
        return Err(Error::EmptyUserSet);
    }
    let mut cands = instance.candidates();
    cands.sort_by(f64::total_cmp);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for x in cands {
        let r = instance.multicast_rate(x);
        if r > best.1 + TIE_BITS {
            best = (x, r);
        }
    }
    Ok(best)
}

/// Midpoint of the two extreme users: the 1-D Chebyshev center.
pub fn chebyshev_midpoint(x_min: f64, x_max: f64) -> Result<f64> {
    if !(x_min <= x_max) {
        return Err(invalid(
            "x_min",
            format!("must not exceed x_max ({x_min} > {x_max})"),
        ));
    }
    Ok(0.5 * (x_min + x_max))
}
