//! The horizon-one Brownian stopping problem
//! `v(y) = sup_τ E[ e^{-λτ} 1{N_τ=0} ∫_0^τ f(y + W_s) ds
//!                 + β e^{λτ}/2 1{N_τ=1} (L_τ(-y) - L_{T_1}(-y)) ]`
//! with `f(x) = x + λβ x^+`, `N` a Poisson clock of rate `λ` and `L` the
//! Brownian local time, and its positivity threshold
//! `y* = -inf{x : v(x) > 0}`.
//!
//! Both solvers work in the shifted coordinate `X = y + W`, so one backward
//! sweep yields `v` at every starting point and the local time is taken at
//! `X = 0`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pide::lcp::Tridiagonal;

/// Sign of the exponent in the phase-1 weight `e^{±λτ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalTimeWeight {
    /// `e^{+λτ}`.
    #[default]
    Growing,
    /// `e^{-λτ}`.
    Decaying,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingMethod {
    ObstaclePde,
    LatticeDp,
}

/// Span and step of the `y` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl YGrid {
    pub const PDE_DEFAULT: YGrid = YGrid { lo: -4.0, hi: 4.0, step: 1e-3 };
    pub const LATTICE_DEFAULT: YGrid = YGrid { lo: -4.0, hi: 4.0, step: 2e-3 };

    fn validate(&self) -> Result<()> {
        if !(self.lo < 0.0 && self.hi > 0.0 && self.step > 0.0) {
            return Err(Error::InvalidParameter("y grid must straddle 0 with a positive step".into()));
        }
        Ok(())
    }

    /// Node count on each side of 0, so that 0 is a node.
    fn sides(&self) -> (usize, usize, f64) {
        let left = (-self.lo / self.step).round().max(1.0) as usize;
        let step = -self.lo / left as f64;
        let right = (self.hi / step).round().max(1.0) as usize;
        (left, right, step)
    }

    fn nodes(&self) -> (Vec<f64>, usize, f64) {
        let (left, right, step) = self.sides();
        let y = (0..=left + right).map(|k| (k as f64 - left as f64) * step).collect();
        (y, left, step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingProblem {
    pub lambda: f64,
    pub beta: f64,
    pub grid: YGrid,
    pub weight: LocalTimeWeight,
}

impl StoppingProblem {
    pub fn new(lambda: f64, beta: f64) -> Self {
        Self { lambda, beta, grid: YGrid::LATTICE_DEFAULT, weight: LocalTimeWeight::Growing }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingValue {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub y_star: f64,
    /// Half a grid step.
    pub y_star_uncertainty: f64,
    pub method: StoppingMethod,
    /// Largest discrete complementarity residual (obstacle solver only).
    pub residual: f64,
}

impl StoppingValue {
    /// `v` at `y` by linear interpolation.
    pub fn value_at(&self, y: f64) -> f64 {
        crate::pide::solver::interpolate(&self.y, &self.v, y)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "y,v")?;
        for (y, v) in self.y.iter().zip(&self.v) {
            writeln!(f, "{y},{v}")?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Threshold from the first node where `v` leaves zero. Past the threshold
/// `v` grows quadratically (smooth fit), so `sqrt(v)` is extrapolated
/// linearly from the first two positive nodes.
fn threshold(y: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    let scale = v.iter().cloned().fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let j = v.iter().position(|&x| x > tol).ok_or(Error::NumericalFailure("v vanishes on the whole grid".into()))?;
    if j == 0 || j + 1 >= v.len() {
        return Err(Error::GridTooCoarse("sign change of v not inside the y grid".into()));
    }
    let (r1, r2) = (v[j].sqrt(), v[j + 1].sqrt());
    let mut root = y[j] - r1 * (y[j + 1] - y[j]) / (r2 - r1);
    root = root.clamp(y[j - 1], y[j]);
    Ok((-root, 0.5 * (y[j] - y[j - 1])))
}

const PDE_TIME_STEPS: usize = 4000;

fn obstacle_pde(grid: YGrid) -> Result<StoppingValue> {
    grid.validate()?;
    let (y, _, h) = grid.nodes();
    let n = y.len();
    let dt = 1.0 / PDE_TIME_STEPS as f64;
    let k = 0.5 * dt / (h * h);
    let mut lower = vec![-k; n];
    let mut diag = vec![1.0 + 2.0 * k; n];
    let mut upper = vec![-k; n];
    for (i, j) in [(0, 1), (n - 1, n - 2)] {
        diag[i] = 1.0;
        lower[i] = 0.0;
        upper[i] = 0.0;
        let _ = j;
    }
    let mat = Tridiagonal { lower, diag, upper };
    let zero = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut residual: f64 = 0.0;
    let top = *y.last().expect("grid nodes");
    for step in 1..=PDE_TIME_STEPS {
        let s = step as f64 * dt;
        let mut rhs: Vec<f64> = w.iter().zip(&y).map(|(wi, yi)| wi + dt * yi).collect();
        rhs[0] = 0.0;
        // far above the threshold stopping is never optimal: w = y s
        rhs[n - 1] = top * s;
        let mut next = mat.brennan_schwartz(&rhs, &zero);
        mat.psor(&rhs, &zero, &mut next, 1.5, 1e-13, 10_000)?;
        residual = residual.max(mat.complementarity_residual(&rhs, &zero, &next));
        w = next;
    }
    let (y_star, unc) = threshold(&y, &w)?;
    Ok(StoppingValue { y, v: w, y_star, y_star_uncertainty: unc, method: StoppingMethod::ObstaclePde, residual })
}

/// `v_{0,0}` from the parabolic obstacle problem
/// `min(w_s - w_xx/2 - x, w) = 0`, `w(0, ·) = 0`, by implicit steps.
/// Fails with `GridTooCoarse` when halving the step moves `y*` by more than
/// one step.
pub fn v_zero(grid: YGrid) -> Result<StoppingValue> {
    if grid.lo > -3.0 || grid.hi < 3.0 || grid.step > 1e-3 {
        return Err(Error::InvalidParameter("v_zero needs a grid spanning [-3, 3] with step <= 1e-3".into()));
    }
    let coarse = obstacle_pde(grid)?;
    let fine = obstacle_pde(YGrid { step: 0.5 * grid.step, ..grid })?;
    if (coarse.y_star - fine.y_star).abs() > grid.step {
        return Err(Error::GridTooCoarse(format!(
            "y* moved from {} to {} under refinement",
            coarse.y_star, fine.y_star
        )));
    }
    Ok(coarse)
}

struct Lattice {
    y: Vec<f64>,
    origin: usize,
    dx: f64,
    steps: usize,
}

impl Lattice {
    fn new(grid: YGrid) -> Self {
        let (y, origin, dx) = grid.nodes();
        // dt <= dx^2 keeps the trinomial weights nonnegative
        let steps = (1.0 / (dx * dx)).ceil() as usize;
        Self { y, origin, dx, steps }
    }

    fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// Probability of moving one node up (and one down).
    fn move_prob(&self) -> f64 {
        0.5 * self.dt() / (self.dx * self.dx)
    }
}

fn lattice_dp(problem: &StoppingProblem, grid: YGrid) -> Result<StoppingValue> {
    problem.validate()?;
    grid.validate()?;
    let lat = Lattice::new(grid);
    let n = lat.y.len();
    let dt = lat.dt();
    let p = lat.move_prob();
    let stay = 1.0 - 2.0 * p;
    let (lambda, beta) = (problem.lambda, problem.beta);
    let a = lambda * beta;
    let jump = lambda * dt;
    // expected Tanaka increment of the local time at 0 over one step
    let local_step = 2.0 * p * lat.dx;
    let top = *lat.y.last().expect("lattice nodes");
    let reward: Vec<f64> = lat.y.iter().map(|&x| x + a * x.max(0.0)).collect();
    let mut v0 = vec![0.0; n];
    let mut v1 = vec![0.0; n];
    let mut n0 = vec![0.0; n];
    let mut n1 = vec![0.0; n];
    for step in (0..lat.steps).rev() {
        let t = step as f64 * dt;
        let discount = (-lambda * t).exp();
        let weight = match problem.weight {
            LocalTimeWeight::Growing => (lambda * t).exp(),
            LocalTimeWeight::Decaying => (-lambda * t).exp(),
        };
        for k in 1..n - 1 {
            let e1 = p * (v1[k - 1] + v1[k + 1]) + stay * v1[k];
            let e0 = p * (v0[k - 1] + v0[k + 1]) + stay * v0[k];
            let lt = if k == lat.origin { 0.5 * beta * weight * local_step } else { 0.0 };
            n1[k] = (lt + (1.0 - jump) * e1).max(0.0);
            n0[k] = (discount * reward[k] * dt + (1.0 - jump) * e0 + jump * e1).max(0.0);
        }
        // bottom: stop at once; top: never stop, phase-1 reward unreachable
        n0[0] = 0.0;
        n1[0] = 0.0;
        n1[n - 1] = 0.0;
        n0[n - 1] = (1.0 + a) * top * edge_integral(lambda, t);
        std::mem::swap(&mut v0, &mut n0);
        std::mem::swap(&mut v1, &mut n1);
    }
    let (y_star, unc) = threshold(&lat.y, &v0)?;
    Ok(StoppingValue { y: lat.y, v: v0, y_star, y_star_uncertainty: unc, method: StoppingMethod::LatticeDp, residual: 0.0 })
}

/// `∫_t^1 e^{-λs} e^{-λ(s-t)} ds`.
fn edge_integral(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0 - t;
    }
    (lambda * t).exp() * ((-2.0 * lambda * t).exp() - (-2.0 * lambda).exp()) / (2.0 * lambda)
}

/// `v_{λ,β}` by dynamic programming on a trinomial lattice with `Δt ≤ Δx²`.
/// Fails with `Unconverged` if doubling the time steps moves `v` anywhere
/// by more than 1% of `max v`.
pub fn v_lambda_beta(problem: &StoppingProblem) -> Result<StoppingValue> {
    let base = problem.grid;
    let finer = YGrid { step: base.step / std::f64::consts::SQRT_2, ..base };
    let (coarse, fine) = rayon::join(|| lattice_dp(problem, base), || lattice_dp(problem, finer));
    let (coarse, fine) = (coarse?, fine?);
    let scale = coarse.v.iter().cloned().fold(0.0, f64::max);
    let drift = coarse
        .y
        .iter()
        .zip(&coarse.v)
        .map(|(&y, &v)| (v - fine.value_at(y)).abs())
        .fold(0.0, f64::max);
    if drift > 0.01 * scale {
        return Err(Error::Unconverged(format!("lattice value moved by {drift} (max v = {scale}) under refinement")));
    }
    Ok(coarse)
}

/// `(y*, half-step uncertainty)` from the lattice solver.
pub fn y_star(problem: &StoppingProblem) -> Result<(f64, f64)> {
    let v = v_lambda_beta(problem)?;
    Ok((v.y_star, v.y_star_uncertainty))
}

/// `E L_1(0)` of the driftless lattice walk started at 0, accumulated with
/// the same per-step local-time increment the solver uses; the Brownian
/// value is `sqrt(2/π)`.
pub fn lattice_local_time_mean(step: f64) -> f64 {
    let lat = Lattice::new(YGrid { lo: -6.0, hi: 6.0, step });
    let p = lat.move_prob();
    let stay = 1.0 - 2.0 * p;
    let n = lat.y.len();
    let mut mass = vec![0.0; n];
    mass[lat.origin] = 1.0;
    let mut next = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..lat.steps {
        total += mass[lat.origin] * 2.0 * p * lat.dx;
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            let m = mass[k];
            if m == 0.0 {
                continue;
            }
            next[k] += stay * m;
            if k > 0 {
                next[k - 1] += p * m;
            }
            if k + 1 < n {
                next[k + 1] += p * m;
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    total
}
