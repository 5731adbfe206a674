//! Element-wise position search on a uniform grid.
//!
//! One antenna moves at a time while the rest stay put. Each user's received
//! amplitude is cached as a running sum, so trying a candidate position costs
//! O(K) regardless of the array size.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{pa_coefficient, PinchingLayout, SystemParams, UserSet, WaveguideLayout, POSITION_TOL};

/// Uniform L-point grid over [0, Dx].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    points: Vec<f64>,
}

impl GridSpec {
    pub fn new(l: usize, dx: f64) -> Result<Self> {
        if l < 2 {
            return Err(invalid("grid_points", format!("need at least 2, got {l}")));
        }
        if !(dx > 0.0) {
            return Err(invalid("dx", "must be > 0"));
        }
        let step = dx / (l - 1) as f64;
        let mut points: Vec<f64> = (0..l).map(|i| i as f64 * step).collect();
        points[l - 1] = dx;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.points
            .binary_search_by(|p| p.total_cmp(&x))
            .is_ok()
    }
}

/// Result of moving one antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementUpdate {
    pub m: usize,
    pub n: usize,
    pub x_old: f64,
    pub x_new: f64,
    /// Objective (min over users) before and after the move.
    pub value_old: f64,
    pub value_new: f64,
    /// Grid points that passed the spacing filter.
    pub feasible_points: usize,
    pub diagnostic: Option<String>,
}

/// Running per-user amplitudes `g_k = sum_m w_m sum_n c_{m,n,k}` for a layout
/// and a transmit vector, updated in place as antennas move.
#[derive(Debug, Clone)]
pub struct PartialSumCache {
    waveguide_y: Vec<f64>,
    users: Vec<[f64; 2]>,
    w: Vec<Complex64>,
    layout: PinchingLayout,
    /// `[m][n][k]` coefficient of each antenna towards each user.
    coef: Vec<Vec<Vec<Complex64>>>,
    total: Vec<Complex64>,
}

impl PartialSumCache {
    pub fn new(
        params: &SystemParams,
        waveguides: &WaveguideLayout,
        layout: &PinchingLayout,
        users: &UserSet,
        w: &[Complex64],
    ) -> Result<Self> {
        if w.len() != layout.waveguides() {
            return Err(Error::DimensionMismatch {
                expected: layout.waveguides(),
                got: w.len(),
            });
        }
        if waveguides.len() != layout.waveguides() {
            return Err(Error::DimensionMismatch {
                expected: layout.waveguides(),
                got: waveguides.len(),
            });
        }
        let mut cache = Self {
            waveguide_y: waveguides.y_coords.clone(),
            users: users.iter().collect(),
            w: w.to_vec(),
            layout: layout.clone(),
            coef: Vec::new(),
            total: Vec::new(),
        };
        cache.rebuild(params);
        Ok(cache)
    }

    /// Recomputes every coefficient and sum from scratch.
    pub fn rebuild(&mut self, params: &SystemParams) {
        self.coef = self
            .layout
            .columns()
            .iter()
            .enumerate()
            .map(|(m, col)| {
                col.iter()
                    .map(|&x| self.coefficients_at(params, m, x))
                    .collect()
            })
            .collect();
        self.total = (0..self.users.len())
            .map(|k| {
                self.coef
                    .iter()
                    .zip(&self.w)
                    .map(|(cm, wm)| wm * cm.iter().map(|c| c[k]).sum::<Complex64>())
                    .sum()
            })
            .collect();
    }

    fn coefficients_at(&self, params: &SystemParams, m: usize, x: f64) -> Vec<Complex64> {
        let y = self.waveguide_y[m];
        self.users
            .iter()
            .map(|&u| pa_coefficient(params, x, y, u))
            .collect()
    }

    pub fn layout(&self) -> &PinchingLayout {
        &self.layout
    }

    pub fn into_layout(self) -> PinchingLayout {
        self.layout
    }

    /// Current amplitude of every user.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.total
    }

    /// Sum over every antenna except `(m, n)`, weighted by `w`.
    pub fn partial_sum(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.total[k] - self.w[m] * self.coef[m][n][k]
    }

    /// Positions on the grid that keep antenna `(m, n)` at least the minimum
    /// spacing from every other antenna on its waveguide.
    fn feasible_points<'g>(
        &self,
        params: &SystemParams,
        grid: &'g GridSpec,
        m: usize,
        n: usize,
    ) -> impl Iterator<Item = f64> + 'g {
        let others: Vec<f64> = self
            .layout
            .column(m)
            .iter()
            .enumerate()
            .filter(|&(q, _)| q != n)
            .map(|(_, &x)| x)
            .collect();
        let gap = params.delta_min - POSITION_TOL;
        grid.points()
            .iter()
            .copied()
            .filter(move |x| others.iter().all(|o| (x - o).abs() >= gap))
    }

    /// Moves antenna `(m, n)` to the feasible grid point maximizing
    /// `min_k objective(k, g_k)`. The current position is always a candidate,
    /// so the objective never decreases. Ties go to the smallest position.
    pub fn update<F>(
        &mut self,
        params: &SystemParams,
        grid: &GridSpec,
        m: usize,
        n: usize,
        objective: F,
    ) -> ElementUpdate
    where
        F: Fn(usize, Complex64) -> f64,
    {
        let k_count = self.users.len();
        let x_old = self.layout.get(m, n);
        let wm = self.w[m];
        let rest: Vec<Complex64> = (0..k_count).map(|k| self.partial_sum(k, m, n)).collect();
        let worst = |coef: &[Complex64]| {
            (0..k_count)
                .map(|k| objective(k, rest[k] + wm * coef[k]))
                .fold(f64::INFINITY, f64::min)
        };
        let value_old = worst(&self.coef[m][n]);

        let mut candidates: Vec<f64> = self.feasible_points(params, grid, m, n).collect();
        let feasible_points = candidates.len();
        if !grid.contains(x_old) {
            let at = candidates.partition_point(|&x| x < x_old);
            candidates.insert(at, x_old);
        }

        let mut best_x = x_old;
        let mut best_value = f64::NEG_INFINITY;
        let mut best_coef = None;
        for x in candidates {
            let coef = if x == x_old {
                self.coef[m][n].clone()
            } else {
                self.coefficients_at(params, m, x)
            };
            let v = worst(&coef);
            if v > best_value {
                best_value = v;
                best_x = x;
                best_coef = Some(coef);
            }
        }
        // the incumbent is a candidate, so this only triggers on NaN objectives
        if best_value < value_old || best_coef.is_none() {
            best_x = x_old;
            best_value = value_old;
            best_coef = Some(self.coef[m][n].clone());
        }
        let new_coef = best_coef.expect("set above");
        if best_x != x_old {
            for k in 0..k_count {
                self.total[k] = rest[k] + wm * new_coef[k];
            }
            self.coef[m][n] = new_coef;
            self.layout.set(m, n, best_x);
        }
        ElementUpdate {
            m,
            n,
            x_old,
            x_new: best_x,
            value_old,
            value_new: best_value,
            feasible_points,
            diagnostic: (feasible_points == 0)
                .then(|| format!("no feasible grid point for antenna ({m},{n}); position kept")),
        }
    }
}

/// Draws a feasible random layout on the grid (rejection sampling per antenna).
pub fn random_layout<R: Rng + ?Sized>(
    params: &SystemParams,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<PinchingLayout> {
    let gap = params.delta_min - POSITION_TOL;
    let mut columns = Vec::with_capacity(params.waveguides);
    for _ in 0..params.waveguides {
        let mut col: Vec<f64> = Vec::with_capacity(params.pas_per_waveguide);
        for _ in 0..params.pas_per_waveguide {
            let mut placed = false;
            for _ in 0..10_000 {
                let x = grid.points()[rng.gen_range(0..grid.len())];
                if col.iter().all(|o| (x - o).abs() >= gap) {
                    col.push(x);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::InfeasibleLayout(
                    "grid too coarse for the requested antenna count".into(),
                ));
            }
        }
        col.sort_by(f64::total_cmp);
        columns.push(col);
    }
    PinchingLayout::from_columns(columns)
}

/// Stopping controls for the single-waveguide search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Minimum worst-user rate gain (bits) per sweep to keep going.
    pub threshold: f64,
    pub max_sweeps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-4,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingleWaveguideResult {
    /// Final layout with the column sorted ascending.
    pub layout: PinchingLayout,
    /// Worst-user rate (bits/s/Hz) before the first sweep and after each sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub diagnostics: Vec<String>,
}

impl SingleWaveguideResult {
    pub fn rate(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial rate")
    }
}

fn snr_objective(params: &SystemParams) -> impl Fn(usize, Complex64) -> f64 + '_ {
    move |k, g| g.norm_sqr() / params.sigma2[k]
}

fn single_cache(
    layout: &PinchingLayout,
    users: &UserSet,
    params: &SystemParams,
) -> Result<PartialSumCache> {
    if params.waveguides != 1 {
        return Err(invalid("waveguides", "single-waveguide search needs M = 1"));
    }
    layout.check(params)?;
    if users.len() != params.sigma2.len() {
        return Err(Error::DimensionMismatch {
            expected: params.sigma2.len(),
            got: users.len(),
        });
    }
    let w = [Complex64::new(params.pt.sqrt(), 0.0)];
    PartialSumCache::new(params, &WaveguideLayout::new(params), layout, users, &w)
}

/// Best grid position for antenna `n` with the others fixed, maximizing the
/// worst user's full SNR.
pub fn elementwise_update(
    n: usize,
    layout: &PinchingLayout,
    users: &UserSet,
    params: &SystemParams,
    grid: &GridSpec,
) -> Result<ElementUpdate> {
    let mut cache = single_cache(layout, users, params)?;
    if n >= layout.per_waveguide() {
        return Err(invalid("n", format!("antenna index {n} out of range")));
    }
    Ok(cache.update(params, grid, 0, n, snr_objective(params)))
}

/// Cyclic element-wise ascent over the antennas of one waveguide.
pub fn optimize_single_waveguide(
    init: &PinchingLayout,
    users: &UserSet,
    params: &SystemParams,
    grid: &GridSpec,
    opts: SweepOptions,
) -> Result<SingleWaveguideResult> {
    let mut cache = single_cache(init, users, params)?;
    let objective = snr_objective(params);
    let rate_of = |cache: &PartialSumCache| {
        let snr = (0..users.len())
            .map(|k| objective(k, cache.amplitudes()[k]))
            .fold(f64::INFINITY, f64::min);
        snr.ln_1p() / LN_2
    };
    let mut trace = vec![rate_of(&cache)];
    let mut diagnostics = Vec::new();
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        for n in 0..init.per_waveguide() {
            let up = cache.update(params, grid, 0, n, &objective);
            diagnostics.extend(up.diagnostic);
        }
        cache.rebuild(params);
        sweeps += 1;
        let r = rate_of(&cache);
        let prev = *trace.last().expect("non-empty");
        trace.push(r);
        if r - prev < opts.threshold {
            break;
        }
    }
    let mut layout = cache.into_layout();
    layout.sort_columns();
    Ok(SingleWaveguideResult {
        layout,
        trace,
        sweeps,
        diagnostics,
    })
}
