//! Joint transmit and pinching beamforming for several waveguides by
//! minorize-maximize alternating ascent.
//!
//! Each outer iteration anchors a concave lower bound of every user's rate at
//! the current `(X, w)`, moves each antenna in turn to the grid point that
//! maximizes the worst bound, then re-solves the transmit vector against the
//! same bound. Because the bound is tight at the anchor and both inner steps
//! keep their incumbent as a fallback, the true worst-user rate never drops.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::Rng;

use crate::elementwise::{random_layout, ElementUpdate, GridSpec, PartialSumCache};
use crate::error::{Error, Result};
use crate::model::{
    pa_coefficient, ChannelState, PinchingLayout, SystemParams, TransmitBeamformer, UserSet,
    WaveguideLayout,
};
use crate::qcqp::{BarrierSolver, MaxMinQcqpProblem, MaxMinSolver, DEFAULT_TOL};

/// Concave minorant of `ln(1 + |g_k|^2 / sigma_k^2)` anchored at `g0_k`:
/// `c_k + 2 Re{a_k g} - b_k |g|^2`, all in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    pub a: Vec<Complex64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// True per-user rates (nats) at the anchor.
    pub anchor_rates: Vec<f64>,
}

impl SurrogateState {
    /// Anchors the bound at received amplitudes `g0`.
    pub fn from_amplitudes(g0: &[Complex64], sigma2: &[f64]) -> Result<Self> {
        if g0.len() != sigma2.len() {
            return Err(Error::DimensionMismatch { expected: sigma2.len(), got: g0.len() });
        }
        let mut st = Self {
            a: Vec::with_capacity(g0.len()),
            b: Vec::with_capacity(g0.len()),
            c: Vec::with_capacity(g0.len()),
            sigma2: sigma2.to_vec(),
            anchor_rates: Vec::with_capacity(g0.len()),
        };
        for (g, &s) in g0.iter().zip(sigma2) {
            let snr = g.norm_sqr() / s;
            let rate = snr.ln_1p();
            let b = snr / (s * (1.0 + snr));
            st.a.push(g.conj() / s);
            st.b.push(b);
            // makes the bound tight at g0
            st.c.push(rate - snr - b * s);
            st.anchor_rates.push(rate);
        }
        Ok(st)
    }

    pub fn users(&self) -> usize {
        self.a.len()
    }

    /// Bound on user `k`'s rate (nats) at amplitude `g`.
    pub fn value(&self, k: usize, g: Complex64) -> f64 {
        self.c[k] + 2.0 * (self.a[k] * g).re - self.b[k] * g.norm_sqr()
    }

    pub fn min_value(&self, g: &[Complex64]) -> f64 {
        g.iter()
            .enumerate()
            .map(|(k, &gk)| self.value(k, gk))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn anchor_min_rate(&self) -> f64 {
        self.anchor_rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Transmit subproblem for channels `h` (`g_k = h_k^H w`), whitened by
    /// the noise level so the coefficients are of order one.
    pub fn problem(&self, h: &[Vec<Complex64>], pt: f64) -> Result<MaxMinQcqpProblem> {
        if h.len() != self.users() {
            return Err(Error::DimensionMismatch { expected: self.users(), got: h.len() });
        }
        let sd: Vec<f64> = self.sigma2.iter().map(|s| s.sqrt()).collect();
        MaxMinQcqpProblem::new(
            self.a.iter().zip(&sd).map(|(a, s)| a * s).collect(),
            h.iter()
                .zip(&sd)
                .map(|(hk, s)| hk.iter().map(|z| z / s).collect())
                .collect(),
            self.b.iter().zip(&self.sigma2).map(|(b, s)| b * s).collect(),
            self.c.clone(),
            pt,
        )
    }
}

/// Anchors the surrogate at `(layout, w)`.
pub fn build_surrogate(
    layout: &PinchingLayout,
    w: &TransmitBeamformer,
    params: &SystemParams,
    users: &UserSet,
) -> Result<SurrogateState> {
    let ch = ChannelState::assemble(params, &WaveguideLayout::new(params), layout, users)?;
    check_w(w, params)?;
    let g: Vec<Complex64> = (0..users.len()).map(|k| ch.g_eff(k, w.as_slice())).collect();
    SurrogateState::from_amplitudes(&g, &params.sigma2)
}

fn check_w(w: &TransmitBeamformer, params: &SystemParams) -> Result<()> {
    if w.len() != params.waveguides {
        return Err(Error::DimensionMismatch { expected: params.waveguides, got: w.len() });
    }
    Ok(())
}

/// State of the joint ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIterate {
    pub layout: PinchingLayout,
    pub w: TransmitBeamformer,
    /// True worst-user rate (bits/s/Hz).
    pub rate: f64,
    pub iteration: usize,
}

impl JointIterate {
    pub fn new(
        layout: PinchingLayout,
        w: TransmitBeamformer,
        params: &SystemParams,
        users: &UserSet,
    ) -> Result<Self> {
        check_w(&w, params)?;
        let ch = ChannelState::assemble(params, &WaveguideLayout::new(params), &layout, users)?;
        let rate = ch.multicast_rate(w.as_slice());
        Ok(Self { layout, w, rate, iteration: 0 })
    }
}

/// Outcome of one sweep over all antennas.
#[derive(Debug, Clone)]
pub struct PinchingUpdate {
    /// New layout, columns sorted.
    pub layout: PinchingLayout,
    pub updates: Vec<ElementUpdate>,
    /// Worst surrogate value before the sweep and after each element.
    pub surrogate_trace: Vec<f64>,
}

/// One row-major sweep over every antenna, each moved to the feasible grid
/// point maximizing the worst surrogate value with `w` held fixed.
pub fn pinching_update(
    iterate: &JointIterate,
    surrogate: &SurrogateState,
    grid: &GridSpec,
    params: &SystemParams,
    users: &UserSet,
) -> Result<PinchingUpdate> {
    if surrogate.users() != users.len() {
        return Err(Error::DimensionMismatch { expected: users.len(), got: surrogate.users() });
    }
    let mut cache = PartialSumCache::new(
        params,
        &WaveguideLayout::new(params),
        &iterate.layout,
        users,
        iterate.w.as_slice(),
    )?;
    let mut trace = vec![surrogate.min_value(cache.amplitudes())];
    let mut updates = Vec::with_capacity(params.waveguides * params.pas_per_waveguide);
    for m in 0..iterate.layout.waveguides() {
        for n in 0..iterate.layout.per_waveguide() {
            let up = cache.update(params, grid, m, n, |k, g| surrogate.value(k, g));
            trace.push(up.value_new);
            updates.push(up);
        }
    }
    let mut layout = cache.into_layout();
    layout.sort_columns();
    Ok(PinchingUpdate {
        layout,
        updates,
        surrogate_trace: trace,
    })
}

/// Outcome of the transmit step.
#[derive(Debug, Clone)]
pub struct TransmitUpdate {
    pub w: TransmitBeamformer,
    /// Worst surrogate value at the returned `w`.
    pub surrogate_value: f64,
    /// True when the solver fell short of the incumbent and it was kept.
    pub kept_incumbent: bool,
    pub solver_iterations: usize,
    pub solver_exact: bool,
}

/// Maximizes the worst surrogate value over `w` at a fixed layout, keeping
/// the incumbent if the solver does not beat it.
pub fn transmit_update(
    layout: &PinchingLayout,
    incumbent: &TransmitBeamformer,
    surrogate: &SurrogateState,
    params: &SystemParams,
    users: &UserSet,
    solver: &dyn MaxMinSolver,
    tol: f64,
) -> Result<TransmitUpdate> {
    check_w(incumbent, params)?;
    let ch = ChannelState::assemble(params, &WaveguideLayout::new(params), layout, users)?;
    let problem = surrogate.problem(&ch.h_eff, params.pt)?;
    transmit_on(&problem, incumbent, params.pt, solver, tol)
}

pub(crate) fn transmit_on(
    problem: &MaxMinQcqpProblem,
    incumbent: &TransmitBeamformer,
    pt: f64,
    solver: &dyn MaxMinSolver,
    tol: f64,
) -> Result<TransmitUpdate> {
    let (_, before) = problem.evaluate(incumbent.as_slice())?;
    let sol = solver.solve(problem, tol)?;
    if sol.gamma >= before {
        Ok(TransmitUpdate {
            w: TransmitBeamformer::new(sol.w, pt)?,
            surrogate_value: sol.gamma,
            kept_incumbent: false,
            solver_iterations: sol.iterations,
            solver_exact: sol.exact,
        })
    } else {
        Ok(TransmitUpdate {
            w: incumbent.clone(),
            surrogate_value: before,
            kept_incumbent: true,
            solver_iterations: sol.iterations,
            solver_exact: sol.exact,
        })
    }
}

/// Controls for [`optimize_joint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOptions {
    /// Stop once both the layout (m) and `w` (sqrt W) move less than this.
    pub eps: f64,
    pub max_iters: usize,
    pub qcqp_tol: f64,
    /// Either block can be frozen for ablations.
    pub update_pinching: bool,
    pub update_transmit: bool,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_iters: 50,
            qcqp_tol: DEFAULT_TOL,
            update_pinching: true,
            update_transmit: true,
        }
    }
}

/// Bookkeeping of one outer iteration, all in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointStep {
    pub rate_before: f64,
    pub surrogate_after_pinching: f64,
    pub surrogate_after_transmit: f64,
    pub rate_after: f64,
}

#[derive(Debug, Clone)]
pub struct JointResult {
    pub iterate: JointIterate,
    /// True worst-user rate (bits/s/Hz) at the start and after each iteration.
    pub trace: Vec<f64>,
    pub steps: Vec<JointStep>,
    pub converged: bool,
    pub diagnostics: Vec<String>,
}

/// Alternating ascent with the default max-min solver.
pub fn optimize_joint(
    init_layout: &PinchingLayout,
    init_w: &TransmitBeamformer,
    params: &SystemParams,
    users: &UserSet,
    grid: &GridSpec,
    opts: JointOptions,
) -> Result<JointResult> {
    optimize_joint_with(init_layout, init_w, params, users, grid, opts, &BarrierSolver::default())
}

/// Alternating ascent with a caller-chosen max-min solver.
pub fn optimize_joint_with(
    init_layout: &PinchingLayout,
    init_w: &TransmitBeamformer,
    params: &SystemParams,
    users: &UserSet,
    grid: &GridSpec,
    opts: JointOptions,
    solver: &dyn MaxMinSolver,
) -> Result<JointResult> {
    let mut it = JointIterate::new(init_layout.clone(), init_w.clone(), params, users)?;
    let mut trace = vec![it.rate];
    let mut steps = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;
    while it.iteration < opts.max_iters {
        let sur = build_surrogate(&it.layout, &it.w, params, users)?;
        let rate_before = sur.anchor_min_rate();
        let (layout, after_pin) = if opts.update_pinching {
            let pin = pinching_update(&it, &sur, grid, params, users)?;
            diagnostics.extend(pin.updates.iter().filter_map(|u| u.diagnostic.clone()));
            let v = *pin.surrogate_trace.last().expect("trace holds the start value");
            (pin.layout, v)
        } else {
            (it.layout.clone(), rate_before)
        };
        let (w, after_tx) = if opts.update_transmit {
            let tx = transmit_update(&layout, &it.w, &sur, params, users, solver, opts.qcqp_tol)?;
            if !tx.solver_exact {
                diagnostics.push(format!("iteration {}: max-min solve inexact", it.iteration));
            }
            (tx.w, tx.surrogate_value)
        } else {
            (it.w.clone(), after_pin)
        };
        let next = JointIterate::new(layout, w, params, users)?;
        let dx = it.layout.distance_to(&next.layout);
        let dw = it
            .w
            .as_slice()
            .iter()
            .zip(next.w.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        steps.push(JointStep {
            rate_before,
            surrogate_after_pinching: after_pin,
            surrogate_after_transmit: after_tx,
            rate_after: next.rate * LN_2,
        });
        trace.push(next.rate);
        it = JointIterate { iteration: it.iteration + 1, ..next };
        if dx <= opts.eps && dw <= opts.eps {
            converged = true;
            break;
        }
    }
    Ok(JointResult {
        iterate: it,
        trace,
        steps,
        converged,
        diagnostics,
    })
}

/// Effective channel of a virtual user at the centroid of `users`.
fn centroid_channel(params: &SystemParams, layout: &PinchingLayout, users: &UserSet) -> Vec<Complex64> {
    let wl = WaveguideLayout::new(params);
    let centroid = users.centroid();
    layout
        .columns()
        .iter()
        .enumerate()
        .map(|(m, col)| {
            col.iter()
                .map(|&x| pa_coefficient(params, x, wl.y_coords[m], centroid))
                .sum::<Complex64>()
                .conj()
        })
        .collect()
}

/// Equal power split with phases matched to the user-centroid channel.
pub fn centroid_beamformer(params: &SystemParams, layout: &PinchingLayout, users: &UserSet) -> TransmitBeamformer {
    let amp = (params.pt / params.waveguides as f64).sqrt();
    let w = centroid_channel(params, layout, users)
        .iter()
        .map(|h| Complex64::from_polar(amp, h.arg()))
        .collect();
    TransmitBeamformer::new(w, params.pt).expect("equal split meets the budget")
}

/// Default starting point: antennas spread evenly on every waveguide and the
/// centroid-matched transmit vector.
pub fn default_init(params: &SystemParams, users: &UserSet) -> (PinchingLayout, TransmitBeamformer) {
    let layout = PinchingLayout::uniform(params);
    let w = centroid_beamformer(params, &layout, users);
    (layout, w)
}

/// Random grid layout and random transmit phases with equal power split.
pub fn random_init<R: Rng + ?Sized>(
    params: &SystemParams,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<(PinchingLayout, TransmitBeamformer)> {
    let layout = random_layout(params, grid, rng)?;
    let amp = (params.pt / params.waveguides as f64).sqrt();
    let w = (0..params.waveguides)
        .map(|_| Complex64::from_polar(amp, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    Ok((layout, TransmitBeamformer::new(w, params.pt)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_users, SystemConfig};
    use crate::qcqp::solve;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(m: usize, n: usize, k: usize) -> SystemParams {
        SystemParams::derive(&SystemConfig {
            waveguides: m,
            pas_per_waveguide: n,
            users: k,
            dx: 10.0,
            ..SystemConfig::default()
        })
        .unwrap()
    }

    fn rate_nats(params: &SystemParams, layout: &PinchingLayout, users: &UserSet, k: usize, w: &[Complex64]) -> f64 {
        ChannelState::assemble(params, &WaveguideLayout::new(params), layout, users)
            .unwrap()
            .user_rate_nats(k, w)
    }

    #[test]
    fn zero_gain_anchor() {
        let s = SurrogateState::from_amplitudes(&[Complex64::new(0.0, 0.0)], &[1e-12]).unwrap();
        assert_eq!((s.a[0], s.b[0], s.c[0]), (Complex64::new(0.0, 0.0), 0.0, 0.0));
        assert_eq!(s.value(0, Complex64::new(3.0, 1.0)), 0.0);
    }

    #[test]
    fn tight_at_random_anchors() {
        let p = params(2, 3, 3);
        let grid = GridSpec::new(101, p.dx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..20 {
            let users = sample_users(&p, seed);
            let (layout, w) = random_init(&p, &grid, &mut rng).unwrap();
            let s = build_surrogate(&layout, &w, &p, &users).unwrap();
            let ch = ChannelState::assemble(&p, &WaveguideLayout::new(&p), &layout, &users).unwrap();
            for k in 0..3 {
                let g = ch.g_eff(k, w.as_slice());
                assert!((s.value(k, g) - ch.user_rate_nats(k, w.as_slice())).abs() <= 1e-9);
                assert!(s.b[k] >= 0.0 && s.b[k] < 1.0 / p.sigma2[k]);
            }
        }
    }

    #[test]
    fn minorizes_under_perturbation() {
        let p = params(2, 2, 2);
        let grid = GridSpec::new(201, p.dx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let users = sample_users(&p, 3);
        let (layout, w) = random_init(&p, &grid, &mut rng).unwrap();
        let s = build_surrogate(&layout, &w, &p, &users).unwrap();
        let wl = WaveguideLayout::new(&p);
        for _ in 0..200 {
            let (l2, _) = random_init(&p, &grid, &mut rng).unwrap();
            let w2: Vec<Complex64> = w
                .as_slice()
                .iter()
                .map(|z| z * Complex64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let ch = ChannelState::assemble(&p, &wl, &l2, &users).unwrap();
            for k in 0..2 {
                let g = ch.g_eff(k, &w2);
                assert!(s.value(k, g) <= ch.user_rate_nats(k, &w2) + 1e-12);
            }
        }
    }

    #[test]
    fn whitened_problem_matches_physical_surrogate() {
        let p = params(2, 2, 2);
        let users = sample_users(&p, 4);
        let (layout, w) = default_init(&p, &users);
        let s = build_surrogate(&layout, &w, &p, &users).unwrap();
        let ch = ChannelState::assemble(&p, &WaveguideLayout::new(&p), &layout, &users).unwrap();
        let prob = s.problem(&ch.h_eff, p.pt).unwrap();
        let w2 = vec![Complex64::new(0.01, -0.02), Complex64::new(0.03, 0.04)];
        let (vals, _) = prob.evaluate(&w2).unwrap();
        for k in 0..2 {
            let direct = s.value(k, ch.g_eff(k, &w2));
            assert!((vals[k] - direct).abs() < 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn pinching_sweep_never_lowers_surrogate() {
        let p = params(2, 2, 3);
        let grid = GridSpec::new(101, p.dx).unwrap();
        for seed in 0..20 {
            let users = sample_users(&p, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (layout, w) = random_init(&p, &grid, &mut rng).unwrap();
            let it = JointIterate::new(layout, w, &p, &users).unwrap();
            let s = build_surrogate(&it.layout, &it.w, &p, &users).unwrap();
            let up = pinching_update(&it, &s, &grid, &p, &users).unwrap();
            for pair in up.surrogate_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12);
            }
            assert!(up.layout.check(&p).is_ok());
        }
    }

    #[test]
    fn element_choice_matches_grid_oracle() {
        let p = params(2, 2, 2);
        let grid = GridSpec::new(51, p.dx).unwrap();
        let users = sample_users(&p, 11);
        let (layout, w) = default_init(&p, &users);
        let it = JointIterate::new(layout.clone(), w.clone(), &p, &users).unwrap();
        let s = build_surrogate(&layout, &w, &p, &users).unwrap();
        let up = pinching_update(&it, &s, &grid, &p, &users).unwrap();
        // first element: exhaustive surrogate evaluation with everything else fixed
        let first = &up.updates[0];
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for &x in grid.points() {
            if (x - layout.get(0, 1)).abs() < p.delta_min - 1e-12 {
                continue;
            }
            let mut l = layout.clone();
            l.set(0, 0, x);
            let ch = ChannelState::assemble(&p, &WaveguideLayout::new(&p), &l, &users).unwrap();
            let v = (0..2).map(|k| s.value(k, ch.g_eff(k, w.as_slice()))).fold(f64::INFINITY, f64::min);
            if v > best.1 {
                best = (x, v);
            }
        }
        assert_eq!(first.x_new, best.0);
        assert!((first.value_new - best.1).abs() < 1e-9);
    }

    #[test]
    fn single_user_transmit_is_matched_filter() {
        let p = params(2, 2, 1);
        let users = sample_users(&p, 5);
        let (layout, w) = default_init(&p, &users);
        let ch = ChannelState::assemble(&p, &WaveguideLayout::new(&p), &layout, &users).unwrap();
        let s = build_surrogate(&layout, &w, &p, &users).unwrap();
        let tx = transmit_update(&layout, &w, &s, &p, &users, &BarrierSolver::default(), 1e-9).unwrap();
        let h = &ch.h_eff[0];
        let hn = h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mf_rate = (p.pt * hn / p.sigma2[0]).ln_1p();
        let r = ch.user_rate_nats(0, tx.w.as_slice());
        // one MM step from an aligned start reaches the matched filter
        assert!(r <= mf_rate + 1e-9);
        assert!(r >= ch.user_rate_nats(0, w.as_slice()) - 1e-12);
    }

    #[test]
    fn fixed_point_terminates_in_one_iteration() {
        let p = params(1, 1, 1);
        let users = UserSet::new(vec![[5.0, 0.0]]).unwrap();
        let grid = GridSpec::new(11, p.dx).unwrap();
        let layout = PinchingLayout::from_columns(vec![vec![5.0]]).unwrap();
        let w = centroid_beamformer(&p, &layout, &users);
        let res = optimize_joint(&layout, &w, &p, &users, &grid, JointOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterate.iteration, 1);
        assert_eq!(res.iterate.layout, layout);
    }

    #[test]
    fn mm_sandwich_and_monotone_trace() {
        let p = params(2, 2, 3);
        let grid = GridSpec::new(101, p.dx).unwrap();
        for seed in 0..10 {
            let users = sample_users(&p, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let (layout, w) = random_init(&p, &grid, &mut rng).unwrap();
            let res = optimize_joint(&layout, &w, &p, &users, &grid, JointOptions::default()).unwrap();
            for st in &res.steps {
                assert!(st.surrogate_after_pinching >= st.rate_before - 1e-9);
                assert!(st.surrogate_after_transmit >= st.surrogate_after_pinching - 1e-9);
                assert!(st.rate_after >= st.surrogate_after_transmit - 1e-9);
            }
            for pair in res.trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9);
            }
            let wl = WaveguideLayout::new(&p);
            let final_rate = ChannelState::assemble(&p, &wl, &res.iterate.layout, &users)
                .unwrap()
                .multicast_rate(res.iterate.w.as_slice());
            assert!((final_rate - res.iterate.rate).abs() <= 1e-12);
            assert!(res.iterate.layout.check(&p).is_ok());
            assert!(res.iterate.w.power() <= p.pt * (1.0 + 1e-9));
        }
    }

    #[test]
    fn trace_below_coherent_bound() {
        let p = params(2, 3, 2);
        let grid = GridSpec::new(101, p.dx).unwrap();
        let users = sample_users(&p, 2);
        let (layout, w) = default_init(&p, &users);
        let res = optimize_joint(&layout, &w, &p, &users, &grid, JointOptions::default()).unwrap();
        let (m, n) = (2.0, 3.0);
        let bound = (p.pt * p.eta * (m * n) * (m * n) / (n * p.sigma2[0] * p.height * p.height)).ln_1p() / LN_2;
        assert!(res.trace.iter().all(|&r| r <= bound));
    }

    #[test]
    fn transmit_step_on_fixed_layout_matches_solver() {
        let p = params(1, 2, 2);
        let users = sample_users(&p, 6);
        let (layout, w) = default_init(&p, &users);
        let s = build_surrogate(&layout, &w, &p, &users).unwrap();
        let ch = ChannelState::assemble(&p, &WaveguideLayout::new(&p), &layout, &users).unwrap();
        let direct = solve(&s.problem(&ch.h_eff, p.pt).unwrap(), 1e-8).unwrap();
        let tx = transmit_update(&layout, &w, &s, &p, &users, &BarrierSolver::default(), 1e-8).unwrap();
        assert!((tx.surrogate_value - direct.gamma.max(s.anchor_min_rate())).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn incremental_amplitudes_match_full_recompute(seed in 0u64..10_000) {
            let p = params(2, 3, 3);
            let grid = GridSpec::new(101, p.dx).unwrap();
            let users = sample_users(&p, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (layout, w) = random_init(&p, &grid, &mut rng).unwrap();
            let wl = WaveguideLayout::new(&p);
            let mut cache = PartialSumCache::new(&p, &wl, &layout, &users, w.as_slice()).unwrap();
            let m = rng.gen_range(0..2);
            let n = rng.gen_range(0..3);
            cache.update(&p, &grid, m, n, |k, g| g.norm_sqr() / p.sigma2[k]);
            let ch = ChannelState::assemble(&p, &wl, cache.layout(), &users).unwrap();
            for k in 0..3 {
                let full = ch.g_eff(k, w.as_slice());
                let inc = cache.amplitudes()[k];
                prop_assert!((full - inc).norm() <= 1e-10 * full.norm());
            }
        }

        #[test]
        fn surrogate_minorizes_rate(seed in 0u64..10_000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s2 = 10f64.powf(rng.gen_range(-13.0..-10.0));
            let g0 = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s2.sqrt() * rng.gen_range(0.0..30.0);
            let s = SurrogateState::from_amplitudes(&[g0], &[s2]).unwrap();
            let g = g0 + Complex64::new(re, im) * s2.sqrt() * 5.0;
            let truth = (g.norm_sqr() / s2).ln_1p();
            prop_assert!(s.value(0, g) <= truth + 1e-9);
        }
    }

    #[test]
    fn rate_reproduced_by_helper() {
        let p = params(2, 2, 2);
        let users = sample_users(&p, 1);
        let (layout, w) = default_init(&p, &users);
        let it = JointIterate::new(layout.clone(), w.clone(), &p, &users).unwrap();
        let r = (0..2).map(|k| rate_nats(&p, &layout, &users, k, w.as_slice())).fold(f64::INFINITY, f64::min);
        assert!((it.rate - r / LN_2).abs() < 1e-12);
    }
}
