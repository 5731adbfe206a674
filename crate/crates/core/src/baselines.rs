//! Fixed-position antenna benchmarks on a half-wavelength uniform linear
//! array along y, centered over the service region.
//!
//! Every architecture reuses the surrogate-plus-max-min machinery of the
//! joint optimizer so comparisons isolate the antenna hardware. Warm starts
//! make each richer architecture begin from the solution of the poorer one
//! it contains, so the chain analog <= hybrid <= fully digital holds per
//! instance.

use std::f64::consts::{LN_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::joint::{transmit_on, SurrogateState};
use crate::model::{distance, inner, multicast_rate_bits, region_y_center, SystemParams, TransmitBeamformer, UserSet};
use crate::qcqp::{BarrierSolver, MaxMinSolver, DEFAULT_TOL};

/// Stop the digital ascent when the worst-user rate moves less than this (bits).
pub const DIGITAL_TOL_BITS: f64 = 1e-4;
const DIGITAL_MAX_ITERS: usize = 200;
/// Phase-combined start directions screened before the digital ascent.
pub const START_CANDIDATES: usize = 64;
const START_SEED: u64 = 0x5eed;
/// Phases tried per element during analog refinement.
pub const PHASE_GRID: usize = 360;

/// Uniform linear array along y.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaConfig {
    pub elements: usize,
    pub center: [f64; 3],
    pub spacing: f64,
}

impl UlaConfig {
    /// Array of `elements` centered at `(Dx/2, region y-center, h)`.
    pub fn new(params: &SystemParams, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(invalid("elements", "must be >= 1"));
        }
        Ok(Self {
            elements,
            center: [params.dx / 2.0, region_y_center(params), params.height],
            spacing: params.lambda / 2.0,
        })
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        let mid = (self.elements as f64 - 1.0) / 2.0;
        (0..self.elements)
            .map(|i| {
                let [x, y, z] = self.center;
                [x, y + (i as f64 - mid) * self.spacing, z]
            })
            .collect()
    }
}

/// Per-user channel vectors `h_k`, stored so that `g_k = h_k^H w`; the
/// physical response of element `i` is `sqrt(eta) e^{-j kappa D} / D`.
pub fn ula_channel(cfg: &UlaConfig, users: &UserSet, params: &SystemParams) -> Vec<Vec<Complex64>> {
    let pos = cfg.positions();
    users
        .iter()
        .map(|u| {
            pos.iter()
                .map(|&p| {
                    let d = distance(p, u);
                    Complex64::from_polar(params.eta.sqrt() / d, params.kappa * d)
                })
                .collect()
        })
        .collect()
}

/// A baseline beamformer and its worst-user rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSolution {
    /// Effective per-element weights.
    pub w: Vec<Complex64>,
    /// Worst-user rate (bits/s/Hz).
    pub rate: f64,
    pub iterations: usize,
}

fn check_channels(channels: &[Vec<Complex64>], params: &SystemParams) -> Result<usize> {
    if channels.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    if channels.len() != params.sigma2.len() {
        return Err(Error::DimensionMismatch { expected: params.sigma2.len(), got: channels.len() });
    }
    let n = channels[0].len();
    if n == 0 {
        return Err(invalid("channels", "need at least one element"));
    }
    if let Some(bad) = channels.iter().find(|h| h.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
    }
    Ok(n)
}

fn rate(channels: &[Vec<Complex64>], params: &SystemParams, w: &[Complex64]) -> f64 {
    multicast_rate_bits(channels, &params.sigma2, w)
}

fn scaled(v: &[Complex64], pt: f64) -> Option<Vec<Complex64>> {
    let norm = v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|z| z * (pt.sqrt() / norm)).collect())
}

/// Start for the digital ascent: the best, by worst-user rate, among the
/// single-user matched filters and `START_CANDIDATES` phase-combined sums
/// `sum_k e^{j theta_k} h_k / ||h_k||` with phases from a fixed-seed stream.
/// The max-min problem is not concave, so the start decides which stationary
/// point the ascent reaches; screening costs only rate evaluations.
fn digital_start(channels: &[Vec<Complex64>], params: &SystemParams) -> Vec<Complex64> {
    let n = channels[0].len();
    let units: Vec<Vec<Complex64>> = channels.iter().filter_map(|h| scaled(h, 1.0)).collect();
    let mut cands: Vec<Vec<Complex64>> = units.iter().filter_map(|u| scaled(u, params.pt)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    for c in 0..START_CANDIDATES {
        let mut sum = vec![Complex64::new(0.0, 0.0); n];
        for (k, u) in units.iter().enumerate() {
            // first candidate is the plain sum
            let ph = if c == 0 || k == 0 { Complex64::new(1.0, 0.0) } else { Complex64::from_polar(1.0, rng.gen_range(0.0..TAU)) };
            for (s, z) in sum.iter_mut().zip(u) {
                *s += z * ph;
            }
        }
        cands.extend(scaled(&sum, params.pt));
    }
    cands
        .into_iter()
        .map(|w| (rate(channels, params, &w), w))
        .fold((f64::NEG_INFINITY, vec![Complex64::new(0.0, 0.0); n]), |b, c| if c.0 > b.0 { c } else { b })
        .1
}

/// Fully digital max-min beamformer from the default start.
pub fn digital_multicast_beamformer(channels: &[Vec<Complex64>], params: &SystemParams) -> Result<BaselineSolution> {
    check_channels(channels, params)?;
    let w0 = digital_start(channels, params);
    digital_from(channels, params, &w0, &BarrierSolver::default())
}

/// Fully digital ascent from `w0`: anchor the surrogate at the current
/// amplitudes, solve the max-min subproblem, repeat until the worst-user rate
/// settles. The rate never drops below that of `w0`.
pub fn digital_from(
    channels: &[Vec<Complex64>],
    params: &SystemParams,
    w0: &[Complex64],
    solver: &dyn MaxMinSolver,
) -> Result<BaselineSolution> {
    digital_ascent(channels, params, w0, solver, DIGITAL_TOL_BITS)
}

/// [`digital_from`] with a caller-chosen stopping tolerance (bits).
pub fn digital_ascent(
    channels: &[Vec<Complex64>],
    params: &SystemParams,
    w0: &[Complex64],
    solver: &dyn MaxMinSolver,
    tol_bits: f64,
) -> Result<BaselineSolution> {
    let n = check_channels(channels, params)?;
    if w0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w0.len() });
    }
    let mut w = TransmitBeamformer::new(w0.to_vec(), params.pt)?;
    let mut r = rate(channels, params, w.as_slice());
    let mut iterations = 0;
    while iterations < DIGITAL_MAX_ITERS {
        iterations += 1;
        let g: Vec<Complex64> = channels.iter().map(|h| inner(h, w.as_slice())).collect();
        let sur = SurrogateState::from_amplitudes(&g, &params.sigma2)?;
        let problem = sur.problem(channels, params.pt)?;
        let tx = transmit_on(&problem, &w, params.pt, solver, DEFAULT_TOL)?;
        let r_new = rate(channels, params, tx.w.as_slice());
        if r_new < r {
            break;
        }
        let gain = r_new - r;
        w = tx.w;
        r = r_new;
        if gain < tol_bits {
            break;
        }
    }
    Ok(BaselineSolution { w: w.into_inner(), rate: r, iterations })
}

/// One pass of per-element phase refinement under a fixed modulus per
/// element. For element `i`, tries every grid phase and keeps the best worst
/// user rate; the incumbent phase is always kept as a candidate.
fn refine_phases(channels: &[Vec<Complex64>], params: &SystemParams, w: &mut [Complex64]) {
    let k_count = channels.len();
    let mut g: Vec<Complex64> = channels.iter().map(|h| inner(h, w)).collect();
    let worst = |g: &[Complex64]| {
        g.iter()
            .zip(&params.sigma2)
            .map(|(z, s)| z.norm_sqr() / s)
            .fold(f64::INFINITY, f64::min)
    };
    for i in 0..w.len() {
        let amp = w[i].norm();
        if amp == 0.0 {
            continue;
        }
        let rest: Vec<Complex64> = (0..k_count).map(|k| g[k] - channels[k][i].conj() * w[i]).collect();
        let mut best = (worst(&g), w[i]);
        for j in 0..PHASE_GRID {
            let wi = Complex64::from_polar(amp, TAU * j as f64 / PHASE_GRID as f64);
            let trial: Vec<Complex64> = (0..k_count).map(|k| rest[k] + channels[k][i].conj() * wi).collect();
            let v = worst(&trial);
            if v > best.0 {
                best = (v, wi);
            }
        }
        w[i] = best.1;
        for k in 0..k_count {
            g[k] = rest[k] + channels[k][i].conj() * w[i];
        }
    }
}

/// Single RF chain with one phase shifter per element: the digital solution
/// projected onto `|w_i| = sqrt(P_t / N)`, then one round of per-element
/// phase refinement.
pub fn analog_multicast_beamformer(channels: &[Vec<Complex64>], params: &SystemParams) -> Result<BaselineSolution> {
    let n = check_channels(channels, params)?;
    let digital = digital_multicast_beamformer(channels, params)?;
    let amp = (params.pt / n as f64).sqrt();
    let mut w: Vec<Complex64> = digital
        .w
        .iter()
        .map(|z| Complex64::from_polar(amp, if z.norm() > 0.0 { z.arg() } else { 0.0 }))
        .collect();
    refine_phases(channels, params, &mut w);
    Ok(BaselineSolution {
        rate: rate(channels, params, &w),
        w,
        iterations: digital.iterations + 1,
    })
}

/// Analog phases for a hybrid array: `rf_chains` contiguous groups of
/// `per_chain` elements, each entry of unit modulus scaled by
/// `1/sqrt(per_chain)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogNetwork {
    pub rf_chains: usize,
    pub per_chain: usize,
    pub phases: Vec<Complex64>,
}

impl AnalogNetwork {
    fn new(rf_chains: usize, per_chain: usize, phases: Vec<f64>) -> Self {
        let amp = 1.0 / (per_chain as f64).sqrt();
        Self {
            rf_chains,
            per_chain,
            phases: phases.into_iter().map(|p| Complex64::from_polar(amp, p)).collect(),
        }
    }

    /// Channels seen by the RF chains: `h~_k[r] = sum_{i in r} h_k[i] conj(F_i)`.
    pub fn reduce(&self, channels: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        channels
            .iter()
            .map(|h| {
                (0..self.rf_chains)
                    .map(|r| {
                        let s = r * self.per_chain;
                        (s..s + self.per_chain).map(|i| h[i] * self.phases[i].conj()).sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Element weights `F d`.
    pub fn expand(&self, digital: &[Complex64]) -> Vec<Complex64> {
        self.phases
            .iter()
            .enumerate()
            .map(|(i, f)| f * digital[i / self.per_chain])
            .collect()
    }
}

/// Hybrid array: `rf_chains` digital chains, each driving `per_chain`
/// contiguous elements through phase shifters. Analog phases start matched
/// to the user-centroid channel; the digital part is then optimized on the
/// reduced channel, followed by one round of analog phase refinement.
pub fn hybrid_multicast_beamformer(
    channels: &[Vec<Complex64>],
    params: &SystemParams,
    centroid_channel: &[Complex64],
    rf_chains: usize,
    per_chain: usize,
) -> Result<BaselineSolution> {
    let n = check_channels(channels, params)?;
    if rf_chains == 0 || per_chain == 0 || rf_chains * per_chain != n {
        return Err(invalid(
            "rf_chains",
            format!("{rf_chains} chains x {per_chain} elements does not partition {n} elements"),
        ));
    }
    if centroid_channel.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: centroid_channel.len() });
    }
    let net = AnalogNetwork::new(rf_chains, per_chain, centroid_channel.iter().map(|h| h.arg()).collect());
    hybrid_from(channels, params, net, None, &BarrierSolver::default())
}

/// Hybrid solve from given analog phases and an optional digital start.
fn hybrid_from(
    channels: &[Vec<Complex64>],
    params: &SystemParams,
    net: AnalogNetwork,
    d0: Option<Vec<Complex64>>,
    solver: &dyn MaxMinSolver,
) -> Result<BaselineSolution> {
    let reduced = net.reduce(channels);
    let d0 = d0.unwrap_or_else(|| digital_start(&reduced, params));
    let digital = digital_from(&reduced, params, &d0, solver)?;
    let mut w = net.expand(&digital.w);
    // refine each element's phase with the chain weights folded in; the
    // element modulus |d_r| / sqrt(per_chain) is unchanged, so the result is
    // still a valid hybrid weight
    refine_phases(channels, params, &mut w);
    Ok(BaselineSolution {
        rate: rate(channels, params, &w),
        w,
        iterations: digital.iterations + 1,
    })
}

/// Rates of the three fixed-array architectures sharing `n` elements on
/// the same instance, chained by warm starts.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceChain {
    pub analog: BaselineSolution,
    pub hybrid: BaselineSolution,
    pub digital: BaselineSolution,
}

/// Analog, then hybrid started from the analog solution, then fully digital
/// started from the hybrid weights. Each stage contains the previous one's
/// solution and only ascends from it, so `analog <= hybrid <= digital`.
pub fn dominance_chain(
    channels: &[Vec<Complex64>],
    params: &SystemParams,
    centroid_channel: &[Complex64],
    rf_chains: usize,
    per_chain: usize,
) -> Result<DominanceChain> {
    let n = check_channels(channels, params)?;
    if rf_chains == 0 || per_chain == 0 || rf_chains * per_chain != n {
        return Err(invalid(
            "rf_chains",
            format!("{rf_chains} chains x {per_chain} elements does not partition {n} elements"),
        ));
    }
    let solver = BarrierSolver::default();
    let analog = analog_multicast_beamformer(channels, params)?;
    // analog weights are a hybrid point: F_i = e^{j arg w_i}/sqrt(per_chain),
    // d_r = sqrt(P_t / rf_chains)
    let from_analog = {
        let net = AnalogNetwork::new(rf_chains, per_chain, analog.w.iter().map(|z| z.arg()).collect());
        let d0 = vec![Complex64::new((params.pt / rf_chains as f64).sqrt(), 0.0); rf_chains];
        hybrid_from(channels, params, net, Some(d0), &solver)?
    };
    let fresh = hybrid_multicast_beamformer(channels, params, centroid_channel, rf_chains, per_chain)?;
    let hybrid = if fresh.rate > from_analog.rate { fresh } else { from_analog };
    let digital_fresh = digital_multicast_beamformer(channels, params)?;
    let digital_warm = digital_from(channels, params, &hybrid.w, &solver)?;
    let digital = if digital_fresh.rate > digital_warm.rate { digital_fresh } else { digital_warm };
    Ok(DominanceChain { analog, hybrid, digital })
}

/// Rate (bits/s/Hz) of a single-user matched filter on `h`.
pub fn matched_filter_rate(h: &[Complex64], sigma2: f64, pt: f64) -> f64 {
    (pt * h.iter().map(Complex64::norm_sqr).sum::<f64>() / sigma2).ln_1p() / LN_2
}
