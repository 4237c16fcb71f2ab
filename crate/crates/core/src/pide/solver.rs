//! Implicit-explicit time stepping of the American and European put on a
//! log-price grid, forward in time to maturity.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::levy::LevyModel;

use super::grid::Grid;
use super::lcp::Tridiagonal;
use super::stencil::JumpStencil;

/// Nodes count as exercised when `P - payoff` is below this fraction of `K`:
/// the obstacle is active in the discrete problem, up to round-off.
pub const EXERCISE_TOL: f64 = 1e-13;
/// Per-node tolerance on the discrete complementarity conditions.
pub const COMPLEMENTARITY_TOL: f64 = 1e-10;
/// Shape tolerance, as a fraction of `K`.
pub const SHAPE_TOL: f64 = 1e-6;
const PSOR_OMEGA: f64 = 1.5;
const PSOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PriceSurface {
    pub grid: Grid,
    pub strike: f64,
    pub r: f64,
    pub sigma: f64,
    /// `values[n][i]`: American price at time to maturity `grid.theta[n]`
    /// and log-price `grid.x[i]`.
    pub values: Vec<Vec<f64>>,
    pub exercised: Vec<Vec<bool>>,
    /// European price on the same grid and operator.
    pub european: Vec<Vec<f64>>,
    pub complementarity_residual: f64,
}

/// Worst violation of each shape property over the surface; zero when the
/// property holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceChecks {
    pub obstacle: f64,
    pub terminal: f64,
    pub monotone_in_s: f64,
    pub lipschitz: f64,
    pub convexity: f64,
    pub monotone_in_t: f64,
}

impl SurfaceChecks {
    pub fn passes(&self, strike: f64) -> bool {
        let tol = SHAPE_TOL * strike;
        self.obstacle <= 1e-12 * strike
            && self.terminal == 0.0
            && self.monotone_in_s <= tol
            && self.lipschitz <= SHAPE_TOL
            && self.convexity <= tol
            && self.monotone_in_t <= tol
    }
}

pub fn payoff(strike: f64, x: f64) -> f64 {
    (strike - x.exp()).max(0.0)
}

/// Value assigned to log-prices below the grid: immediate exercise for the
/// American put when `r > 0`, the deep in-the-money European value otherwise.
fn lower_far_field(model: &LevyModel, strike: f64, american: bool, theta: f64) -> (f64, f64) {
    if american && model.r > 0.0 {
        (strike, 1.0)
    } else {
        (strike * (-model.r * theta).exp(), (-model.delta * theta).exp())
    }
}

struct Operator {
    a: Vec<f64>,
    c: Vec<f64>,
    decay: Vec<f64>,
}

fn assemble(model: &LevyModel, grid: &Grid, stencil: &JumpStencil) -> Operator {
    let n = grid.n_x();
    let x = &grid.x;
    let mut a = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut decay = vec![0.0; n];
    for i in 1..n - 1 {
        let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let diff = 0.5 * (model.sigma * model.sigma + stencil.small_variance[i]);
        let mu = model.r - model.delta - diff - stencil.compensator[i];
        let span = hm + hp;
        let (mut ai, mut ci) = (2.0 * diff / (hm * span), 2.0 * diff / (hp * span));
        let (cent_a, cent_c) = (-mu * hp / (hm * span), mu * hm / (hp * span));
        if ai + cent_a >= 0.0 && ci + cent_c >= 0.0 {
            ai += cent_a;
            ci += cent_c;
        } else if mu > 0.0 {
            ci += mu / hp;
        } else {
            ai -= mu / hm;
        }
        a[i] = ai;
        c[i] = ci;
        decay[i] = ai + ci + model.r + stencil.intensity[i];
    }
    Operator { a, c, decay }
}

fn system(op: &Operator, dt: f64) -> Tridiagonal {
    let n = op.a.len();
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        lower[i] = -dt * op.a[i];
        upper[i] = -dt * op.c[i];
        diag[i] = 1.0 + dt * op.decay[i];
    }
    Tridiagonal { lower, diag, upper }
}

/// Solves the American and European puts with strike `strike` on `grid`,
/// rejecting surfaces that fail the complementarity or convexity gates.
pub fn solve(model: &LevyModel, strike: f64, grid: &Grid) -> Result<PriceSurface> {
    let surface = march(model, strike, grid)?;
    if surface.complementarity_residual > COMPLEMENTARITY_TOL {
        return Err(Error::GridTooCoarse(format!(
            "complementarity residual {:e} exceeds {COMPLEMENTARITY_TOL:e}",
            surface.complementarity_residual
        )));
    }
    let checks = surface.checks();
    if checks.convexity > SHAPE_TOL * strike {
        return Err(Error::GridTooCoarse(format!("convexity defect {:e} exceeds {:e}", checks.convexity, SHAPE_TOL * strike)));
    }
    Ok(surface)
}

/// Time stepping only, without the diagnostic gates of [`solve`].
pub fn march(model: &LevyModel, strike: f64, grid: &Grid) -> Result<PriceSurface> {
    model.validate()?;
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::InvalidParameter(format!("strike must be > 0, got {strike}")));
    }
    let n = grid.n_x();
    if n < 3 || grid.theta.len() < 2 {
        return Err(Error::GridTooCoarse("grid needs at least 3 nodes and one step".into()));
    }
    let stencil = JumpStencil::build(model, grid)?;
    let op = assemble(model, grid, &stencil);
    let lambda_max = stencil.max_intensity();
    let obstacle: Vec<f64> = grid.x.iter().map(|&x| payoff(strike, x)).collect();
    let ex: Vec<f64> = grid.x.iter().map(|x| x.exp()).collect();

    let mut american = obstacle.clone();
    let mut european = obstacle.clone();
    let mut values = vec![american.clone()];
    let mut euro_values = vec![european.clone()];
    let mut residual: f64 = 0.0;

    let explicit_rhs = |u: &[f64], theta: f64, dt: f64, is_american: bool| -> Vec<f64> {
        let mut rhs = u.to_vec();
        if lambda_max > 0.0 {
            let wu = stencil.apply(u);
            let (far_k, far_s) = lower_far_field(model, strike, is_american, theta);
            for i in 1..n - 1 {
                let far = stencil.lower_mass[i] * far_k - stencil.lower_exp_mass[i] * ex[i] * far_s;
                rhs[i] += dt * (wu[i] + far);
            }
        }
        rhs
    };

    for step in grid.theta.windows(2) {
        let (t0, t1) = (step[0], step[1]);
        let span = t1 - t0;
        let subs = if lambda_max > 0.0 { (span * 2.0 * lambda_max).ceil().max(1.0) as usize } else { 1 };
        let dt = span / subs as f64;
        let mat = system(&op, dt);
        for k in 0..subs {
            let th_old = t0 + k as f64 * dt;
            let th_new = if k + 1 == subs { t1 } else { th_old + dt };

            let mut rhs = explicit_rhs(&american, th_old, dt, true);
            let (fk, fs) = lower_far_field(model, strike, true, th_new);
            rhs[0] = (fk - fs * ex[0]).max(obstacle[0]);
            rhs[n - 1] = 0.0;
            let mut u = mat.brennan_schwartz(&rhs, &obstacle);
            mat.psor(&rhs, &obstacle, &mut u, PSOR_OMEGA, PSOR_TOL, 10_000)?;
            residual = residual.max(mat.complementarity_residual(&rhs, &obstacle, &u));
            american = u;

            let mut rhs = explicit_rhs(&european, th_old, dt, false);
            let (fk, fs) = lower_far_field(model, strike, false, th_new);
            rhs[0] = fk - fs * ex[0];
            rhs[n - 1] = 0.0;
            european = mat.solve(&rhs);
        }
        values.push(american.clone());
        euro_values.push(european.clone());
    }

    let tol = EXERCISE_TOL * strike;
    let exercised = values
        .iter()
        .map(|slice| {
            slice
                .iter()
                .zip(&obstacle)
                .map(|(&p, &g)| g > 0.0 && p - g < tol)
                .collect()
        })
        .collect();
    Ok(PriceSurface {
        grid: grid.clone(),
        strike,
        r: model.r,
        sigma: model.sigma,
        values,
        exercised,
        european: euro_values,
        complementarity_residual: residual,
    })
}

impl PriceSurface {
    pub fn spots(&self) -> Vec<f64> {
        self.grid.x.iter().map(|x| x.exp()).collect()
    }

    pub fn obstacle(&self) -> Vec<f64> {
        self.grid.x.iter().map(|&x| payoff(self.strike, x)).collect()
    }

    /// Price at slice `n` and spot `s`. The time value `P - payoff` is
    /// interpolated linearly in log-price and the payoff added back exactly,
    /// which avoids the bias of interpolating the concave `K - e^x`.
    pub fn value_at(&self, n: usize, spot: f64) -> f64 {
        self.interpolate_over_payoff(&self.values[n], spot)
    }

    pub fn european_at(&self, n: usize, spot: f64) -> f64 {
        self.interpolate_over_payoff(&self.european[n], spot)
    }

    fn interpolate_over_payoff(&self, slice: &[f64], spot: f64) -> f64 {
        let excess: Vec<f64> = slice.iter().zip(&self.grid.x).map(|(v, &xi)| v - payoff(self.strike, xi)).collect();
        interpolate(&self.grid.x, &excess, spot.ln()) + (self.strike - spot).max(0.0)
    }

    pub fn checks(&self) -> SurfaceChecks {
        let s = self.spots();
        let g = self.obstacle();
        let mut out = SurfaceChecks::default();
        for (n, slice) in self.values.iter().enumerate() {
            for i in 0..slice.len() {
                out.obstacle = out.obstacle.max(g[i] - slice[i]);
                if n == 0 {
                    out.terminal = out.terminal.max((slice[i] - g[i]).abs());
                }
                if n > 0 {
                    out.monotone_in_t = out.monotone_in_t.max(self.values[n - 1][i] - slice[i]);
                }
                if i + 1 < slice.len() {
                    let slope = (slice[i + 1] - slice[i]) / (s[i + 1] - s[i]);
                    out.monotone_in_s = out.monotone_in_s.max(slice[i + 1] - slice[i]);
                    out.lipschitz = out.lipschitz.max(slope.abs() - 1.0);
                }
                if i > 0 && i + 1 < slice.len() {
                    let w = (s[i] - s[i - 1]) / (s[i + 1] - s[i - 1]);
                    let chord = (1.0 - w) * slice[i - 1] + w * slice[i + 1];
                    out.convexity = out.convexity.max(slice[i] - chord);
                }
            }
        }
        out
    }

    /// Writes `t,x,P,exercised` rows, `t` measured from the valuation date.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,x,P,exercised")?;
        for (n, slice) in self.values.iter().enumerate() {
            let t = self.grid.maturity - self.grid.theta[n];
            for (i, p) in slice.iter().enumerate() {
                writeln!(f, "{t},{},{p},{}", self.grid.x[i], u8::from(self.exercised[n][i]))?;
            }
        }
        f.flush()?;
        Ok(())
    }
}

pub(crate) fn interpolate(x: &[f64], v: &[f64], at: f64) -> f64 {
    let n = x.len();
    if at <= x[0] {
        return v[0];
    }
    if at >= x[n - 1] {
        return v[n - 1];
    }
    let k = x.partition_point(|&p| p <= at) - 1;
    let t = (at - x[k]) / (x[k + 1] - x[k]);
    (1.0 - t) * v[k] + t * v[k + 1]
}
