//! Max-min of concave quadratics over a power ball:
//!
//! maximize `min_k q_k(w)` subject to `||w||^2 <= P_t`, with
//! `q_k(w) = 2 Re{a_k h_k^H w} - b_k |h_k^H w|^2 + c_k` and `b_k >= 0`.
//!
//! Solvers sit behind [`MaxMinSolver`] and are looked up by name in a
//! [`SolverRegistry`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::inner;

/// Default optimality tolerance on the max-min value.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Concave max-min problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinQcqpProblem {
    pub a: Vec<Complex64>,
    /// `h[k]` is the length-M channel vector of constraint `k`.
    pub h: Vec<Vec<Complex64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub pt: f64,
}

impl MaxMinQcqpProblem {
    pub fn new(
        a: Vec<Complex64>,
        h: Vec<Vec<Complex64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        pt: f64,
    ) -> Result<Self> {
        let k = a.len();
        if k == 0 {
            return Err(Error::EmptyUserSet);
        }
        for len in [h.len(), b.len(), c.len()] {
            if len != k {
                return Err(Error::DimensionMismatch { expected: k, got: len });
            }
        }
        let m = h[0].len();
        if m == 0 {
            return Err(invalid("h", "channel vectors must be non-empty"));
        }
        if let Some(bad) = h.iter().find(|hk| hk.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
        }
        if let Some(bk) = b.iter().find(|&&bk| !(bk >= 0.0) || !bk.is_finite()) {
            return Err(invalid("b", format!("curvature must be finite and >= 0, got {bk}")));
        }
        if !(pt > 0.0) || !pt.is_finite() {
            return Err(invalid("pt", "power budget must be finite and > 0"));
        }
        let finite = a.iter().all(|z| z.is_finite())
            && c.iter().all(|v| v.is_finite())
            && h.iter().flatten().all(|z| z.is_finite());
        if !finite {
            return Err(invalid("problem", "coefficients must be finite"));
        }
        Ok(Self { a, h, b, c, pt })
    }

    pub fn constraints(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> usize {
        self.h[0].len()
    }

    /// Value of constraint `k` at `w`.
    pub fn value(&self, k: usize, w: &[Complex64]) -> f64 {
        let u = inner(&self.h[k], w);
        2.0 * (self.a[k] * u).re - self.b[k] * u.norm_sqr() + self.c[k]
    }

    /// Every constraint value at `w` and their minimum.
    pub fn evaluate(&self, w: &[Complex64]) -> Result<(Vec<f64>, f64)> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        let values: Vec<f64> = (0..self.constraints()).map(|k| self.value(k, w)).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((values, min))
    }

    /// Largest value each constraint can reach anywhere in the ball; their
    /// minimum bounds the max-min value from above.
    pub fn per_constraint_max(&self) -> Vec<f64> {
        (0..self.constraints())
            .map(|k| {
                // q_k depends on w only through u = h^H w with |u| <= ||h|| sqrt(P)
                let r = self.h[k].iter().map(Complex64::norm_sqr).sum::<f64>().sqrt() * self.pt.sqrt();
                let (a, b) = (self.a[k].norm(), self.b[k]);
                let s = if b > 0.0 { (a / b).min(r) } else { r };
                self.c[k] + 2.0 * a * s - b * s * s
            })
            .collect()
    }

    pub fn upper_bound(&self) -> f64 {
        self.per_constraint_max().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Output of a max-min solve.
#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub w: Vec<Complex64>,
    /// `min_k q_k(w)` evaluated at the returned `w`.
    pub gamma: f64,
    /// Certified (or estimated, if inexact) bound on the optimum.
    pub upper_bound: f64,
    /// `q_k(w) - gamma` per constraint.
    pub slacks: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance was met.
    pub exact: bool,
}

impl QcqpSolution {
    fn from_w(problem: &MaxMinQcqpProblem, w: Vec<Complex64>, upper: f64, iterations: usize, exact: bool) -> Self {
        let (values, gamma) = problem.evaluate(&w).expect("solver keeps the dimension");
        Self {
            slacks: values.iter().map(|v| v - gamma).collect(),
            upper_bound: upper.max(gamma),
            w,
            gamma,
            iterations,
            exact,
        }
    }
}

/// A max-min solver strategy.
pub trait MaxMinSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &MaxMinQcqpProblem, tol: f64) -> Result<QcqpSolution>;
}

/// Orthonormal basis of the span of the constraint vectors, built by
/// modified Gram-Schmidt with one reorthogonalization pass.
fn span_basis(h: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let norm = |v: &[Complex64]| v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    let scale = h.iter().map(|hk| norm(hk)).fold(0.0, f64::max);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for hk in h {
        let mut v = hk.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&v);
        if n > 1e-10 * scale {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Power outside the span of the `h_k` changes no constraint, so the
/// optimum lies inside it. When the span is smaller than the ambient
/// dimension, solves in span coordinates and maps the result back.
fn solve_in_span<F>(problem: &MaxMinQcqpProblem, solve: F) -> Result<QcqpSolution>
where
    F: Fn(&MaxMinQcqpProblem) -> Result<QcqpSolution>,
{
    let basis = span_basis(&problem.h);
    if basis.is_empty() || basis.len() >= problem.dim() {
        return solve(problem);
    }
    let h = problem
        .h
        .iter()
        .map(|hk| basis.iter().map(|q| inner(q, hk)).collect())
        .collect();
    let reduced = MaxMinQcqpProblem { h, ..problem.clone() };
    let sol = solve(&reduced)?;
    let mut w = vec![Complex64::new(0.0, 0.0); problem.dim()];
    for (u, q) in sol.w.iter().zip(&basis) {
        w.iter_mut().zip(q).for_each(|(x, y)| *x += u * y);
    }
    let (_, gamma) = problem.evaluate(&w)?;
    Ok(QcqpSolution { w, gamma, ..sol })
}

/// Solves with the default strategy.
pub fn solve(problem: &MaxMinQcqpProblem, tol: f64) -> Result<QcqpSolution> {
    BarrierSolver::default().solve(problem, tol)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be > 0"));
    }
    Ok(())
}

/// Real form of the problem with `w = sqrt(P) (x_re + j x_im)`, so the
/// feasible set is the unit ball in R^{2M}.
struct RealForm {
    m: usize,
    /// Per constraint: linear term, and the two rows giving Re/Im of `h^H w`.
    lin: Vec<DVector<f64>>,
    p: Vec<DVector<f64>>,
    q: Vec<DVector<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    scale: f64,
}

impl RealForm {
    fn new(problem: &MaxMinQcqpProblem) -> Self {
        let m = problem.dim();
        let scale = problem.pt.sqrt();
        let mut lin = Vec::new();
        let mut p = Vec::new();
        let mut q = Vec::new();
        for (k, hk) in problem.h.iter().enumerate() {
            // conj(h) v = (al vr + be vi) + j (al vi - be vr) for h = al + j be
            let pk = DVector::from_iterator(
                2 * m,
                hk.iter().map(|h| h.re * scale).chain(hk.iter().map(|h| h.im * scale)),
            );
            let qk = DVector::from_iterator(
                2 * m,
                hk.iter().map(|h| -h.im * scale).chain(hk.iter().map(|h| h.re * scale)),
            );
            let a = problem.a[k];
            lin.push((&pk * a.re - &qk * a.im) * 2.0);
            p.push(pk);
            q.push(qk);
        }
        Self {
            m,
            lin,
            p,
            q,
            b: problem.b.clone(),
            c: problem.c.clone(),
            scale,
        }
    }

    fn value(&self, k: usize, x: &DVector<f64>) -> f64 {
        let (u, v) = (self.p[k].dot(x), self.q[k].dot(x));
        self.lin[k].dot(x) - self.b[k] * (u * u + v * v) + self.c[k]
    }

    fn grad(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        let (u, v) = (self.p[k].dot(x), self.q[k].dot(x));
        &self.lin[k] - (&self.p[k] * u + &self.q[k] * v) * (2.0 * self.b[k])
    }

    fn min_value(&self, x: &DVector<f64>) -> (usize, f64) {
        (0..self.lin.len())
            .map(|k| (k, self.value(k, x)))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }

    /// Minimum-norm point of the convex hull of the gradients of every
    /// constraint within `eps` of the minimum `v` (`k` attains it), found by
    /// Frank-Wolfe. Using it instead of a single active gradient stops the
    /// iterates from zigzagging between tied constraints.
    fn ascent_direction(&self, x: &DVector<f64>, k: usize, v: f64, eps: f64) -> DVector<f64> {
        let grads: Vec<DVector<f64>> = (0..self.lin.len())
            .filter(|&j| j == k || self.value(j, x) <= v + eps)
            .map(|j| self.grad(j, x))
            .collect();
        let mut d = grads[0].clone();
        if grads.len() == 1 {
            return d;
        }
        for _ in 0..100 {
            let (j, _) = grads
                .iter()
                .enumerate()
                .map(|(j, g)| (j, g.dot(&d)))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            let diff = &grads[j] - &d;
            let dd = diff.norm_squared();
            if dd == 0.0 {
                break;
            }
            let step = (-d.dot(&diff) / dd).clamp(0.0, 1.0);
            if step <= 1e-12 {
                break;
            }
            d += diff * step;
        }
        d
    }

    fn to_complex(&self, x: &DVector<f64>) -> Vec<Complex64> {
        (0..self.m)
            .map(|i| Complex64::new(x[i], x[self.m + i]) * self.scale)
            .collect()
    }

    /// Point inside the ball aligned with the combined linear terms.
    fn start(&self) -> DVector<f64> {
        let sum = self.lin.iter().fold(DVector::zeros(2 * self.m), |acc, l| acc + l);
        let norm = sum.norm();
        if norm > 0.0 && norm.is_finite() {
            sum * (0.5 / norm)
        } else {
            DVector::zeros(2 * self.m)
        }
    }
}

/// Log-barrier interior-point method with Newton centering.
///
/// Works on `(x, gamma)` with the barrier
/// `-t gamma - sum_k ln(q_k(x) - gamma) - ln(1 - ||x||^2)`. With `K + 1`
/// inequality constraints, an exactly centered point is within `(K+1)/t` of
/// the optimum, which gives the stopping rule and the reported bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSolver {
    pub t0: f64,
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for BarrierSolver {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            max_newton: 2_000,
        }
    }
}

impl BarrierSolver {
    fn slacks(form: &RealForm, z: &DVector<f64>) -> Option<(Vec<f64>, f64)> {
        let n = 2 * form.m;
        let x = z.rows(0, n).into_owned();
        let gamma = z[n];
        let s: Vec<f64> = (0..form.lin.len()).map(|k| form.value(k, &x) - gamma).collect();
        let s0 = 1.0 - x.norm_squared();
        if s0 > 0.0 && s.iter().all(|&v| v > 0.0) {
            Some((s, s0))
        } else {
            None
        }
    }

    fn barrier(form: &RealForm, z: &DVector<f64>, t: f64) -> f64 {
        match Self::slacks(form, z) {
            Some((s, s0)) => -t * z[2 * form.m] - s.iter().map(|v| v.ln()).sum::<f64>() - s0.ln(),
            None => f64::INFINITY,
        }
    }
}

impl MaxMinSolver for BarrierSolver {
    fn name(&self) -> &'static str {
        "barrier"
    }

    fn solve(&self, problem: &MaxMinQcqpProblem, tol: f64) -> Result<QcqpSolution> {
        check_tol(tol)?;
        solve_in_span(problem, |p| self.solve_full(p, tol))
    }
}

impl BarrierSolver {
    fn solve_full(&self, problem: &MaxMinQcqpProblem, tol: f64) -> Result<QcqpSolution> {
        let form = RealForm::new(problem);
        let n = 2 * form.m;
        let kc = problem.constraints();
        let x0 = form.start();
        let (_, q0) = form.min_value(&x0);
        let mut z = DVector::zeros(n + 1);
        z.rows_mut(0, n).copy_from(&x0);
        z[n] = q0 - 1.0;

        let mut t = self.t0;
        let mut iterations = 0;
        let mut converged = false;
        'outer: loop {
            // Newton centering
            loop {
                if iterations >= self.max_newton {
                    break 'outer;
                }
                iterations += 1;
                let (s, s0) = Self::slacks(&form, &z).expect("iterates stay strictly feasible");
                let x = z.rows(0, n).into_owned();
                let mut grad = DVector::zeros(n + 1);
                let mut hess = DMatrix::zeros(n + 1, n + 1);
                grad[n] = -t;
                for k in 0..kc {
                    let mut d = DVector::zeros(n + 1);
                    d.rows_mut(0, n).copy_from(&form.grad(k, &x));
                    d[n] = -1.0;
                    grad -= &d / s[k];
                    hess += &d * d.transpose() / (s[k] * s[k]);
                    // -Hess(q_k) = 2 b (p p^T + q q^T) is PSD
                    let bk = 2.0 * form.b[k] / s[k];
                    if bk > 0.0 {
                        let (p, q) = (&form.p[k], &form.q[k]);
                        let mut blk = hess.view_mut((0, 0), (n, n));
                        blk += (p * p.transpose() + q * q.transpose()) * bk;
                    }
                }
                {
                    let mut gx = grad.rows_mut(0, n);
                    gx += &x * (2.0 / s0);
                    let mut blk = hess.view_mut((0, 0), (n, n));
                    blk += DMatrix::identity(n, n) * (2.0 / s0) + &x * x.transpose() * (4.0 / (s0 * s0));
                }
                let step = match hess.clone().cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => {
                        let reg = 1e-12 * hess.diagonal().amax().max(1.0);
                        let shifted = hess + DMatrix::identity(n + 1, n + 1) * reg;
                        match shifted.cholesky() {
                            Some(ch) => ch.solve(&(-&grad)),
                            None => return Err(Error::Solver("barrier Hessian not positive definite".into())),
                        }
                    }
                };
                let decrement = -grad.dot(&step);
                // suboptimality in gamma is about decrement / t
                if decrement / 2.0 <= 1e-8 {
                    break;
                }
                let f0 = Self::barrier(&form, &z, t);
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha > 1e-16 {
                    let cand = &z + &step * alpha;
                    let f = Self::barrier(&form, &cand, t);
                    if f < f0 && f <= f0 - 0.25 * alpha * decrement {
                        z = cand;
                        moved = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if (kc + 1) as f64 / t <= tol / 10.0 {
                converged = true;
                break;
            }
            t *= self.mu;
        }
        let x = z.rows(0, n).into_owned();
        let upper = (z[n] + (kc + 1) as f64 / t).min(problem.upper_bound());
        Ok(QcqpSolution::from_w(problem, form.to_complex(&x), upper, iterations, converged))
    }
}

/// Bisection on the target value, each probe running projected
/// supergradient ascent with Polyak steps towards the bisection midpoint.
///
/// A probe that fails to reach its target within `inner_iters` steps is
/// treated as infeasible, which is a heuristic; the returned upper bound is
/// then an estimate and the solution is flagged inexact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupergradientSolver {
    pub inner_iters: usize,
    pub max_bisections: usize,
}

impl Default for SupergradientSolver {
    fn default() -> Self {
        Self {
            inner_iters: 5_000,
            max_bisections: 60,
        }
    }
}

impl MaxMinSolver for SupergradientSolver {
    fn name(&self) -> &'static str {
        "supergradient"
    }

    fn solve(&self, problem: &MaxMinQcqpProblem, tol: f64) -> Result<QcqpSolution> {
        check_tol(tol)?;
        solve_in_span(problem, |p| self.solve_full(p, tol))
    }
}

impl SupergradientSolver {
    fn solve_full(&self, problem: &MaxMinQcqpProblem, tol: f64) -> Result<QcqpSolution> {
        let form = RealForm::new(problem);
        let project = |x: DVector<f64>| {
            let norm = x.norm();
            if norm > 1.0 {
                x / norm
            } else {
                x
            }
        };
        let mut best = form.start();
        let mut lo = form.min_value(&best).1;
        let mut hi = problem.upper_bound();
        let mut iterations = 0;
        let mut certified = true;
        let mut bisections = 0;
        while hi - lo > tol && bisections < self.max_bisections {
            bisections += 1;
            let target = 0.5 * (lo + hi);
            let mut x = best.clone();
            let mut reached = false;
            for _ in 0..self.inner_iters {
                iterations += 1;
                let (k, v) = form.min_value(&x);
                if v > lo {
                    lo = v;
                    best = x.clone();
                }
                if v >= target {
                    reached = true;
                    break;
                }
                let g = form.ascent_direction(&x, k, v, 0.5 * (target - v));
                let gn = g.norm_squared();
                if gn == 0.0 {
                    break;
                }
                x = project(&x + g * ((target - v) / gn));
            }
            if !reached {
                certified = false;
                hi = target;
            }
        }
        let exact = certified && hi - lo <= tol;
        Ok(QcqpSolution::from_w(problem, form.to_complex(&best), hi, iterations, exact))
    }
}

/// Solvers keyed by name.
pub struct SolverRegistry {
    solvers: BTreeMap<String, Box<dyn MaxMinSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { solvers: BTreeMap::new() }
    }

    /// The built-in solvers: `barrier` (default) and `supergradient`.
    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(BarrierSolver::default()));
        reg.register(Box::new(SupergradientSolver::default()));
        reg
    }

    pub fn register(&mut self, solver: Box<dyn MaxMinSolver>) {
        self.solvers.insert(solver.name().to_string(), solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn MaxMinSolver> {
        self.solvers
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownName { kind: "solver", name: name.to_string() })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.solvers.keys().map(String::as_str)
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
