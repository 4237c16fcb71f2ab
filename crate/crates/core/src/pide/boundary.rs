//! Free-boundary extraction, early exercise premium and boundary diagnostics.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::european::FourierPricer;
use crate::levy::LevyModel;

use super::grid::GridConfig;
use super::solver::{solve, PriceSurface, SHAPE_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    /// Calendar time, `T - theta`.
    pub t: f64,
    pub theta: f64,
    pub b: f64,
    /// One price-grid cell at the boundary.
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub strike: f64,
    pub maturity: f64,
    /// Ordered by increasing time to maturity; the first sample is the
    /// payoff slice with `b = K`.
    pub samples: Vec<BoundarySample>,
}

impl BoundaryCurve {
    /// Sample whose time to maturity is closest to `theta`.
    pub fn at_theta(&self, theta: f64) -> &BoundarySample {
        self.samples
            .iter()
            .min_by(|a, b| (a.theta - theta).abs().total_cmp(&(b.theta - theta).abs()))
            .expect("curve has the payoff sample")
    }

    /// Largest increase of `b` in `θ` (a decrease in calendar time) beyond
    /// the local resolution; zero for a monotone curve.
    pub fn monotonicity_defect(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].b - w[0].b) - w[0].resolution.max(w[1].resolution))
            .fold(0.0, f64::max)
    }

    /// Largest excess of `b` over the European critical price, beyond the
    /// local resolution.
    pub fn european_excess(&self, model: &LevyModel) -> Result<f64> {
        let pricer = FourierPricer::new(model)?;
        let mut worst: f64 = 0.0;
        for s in self.samples.iter().filter(|s| s.theta > 0.0) {
            let be = pricer.critical_price(s.theta, self.strike)?;
            worst = worst.max(s.b - be - s.resolution);
        }
        Ok(worst)
    }

    /// Writes `t,b,resolution` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,b,resolution")?;
        for s in self.samples.iter().rev() {
            writeln!(f, "{},{},{}", s.t, s.b, s.resolution)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Boundary in slice `n`: the top of the contiguous exercised block that
/// starts at the lowest node, refined between the last exercised node and
/// the next two continuation nodes. With diffusion the contact is smooth
/// and `P - payoff` grows quadratically, so `sqrt(P - payoff)` is
/// interpolated linearly; without diffusion `P - payoff` itself is.
fn boundary_in_slice(surface: &PriceSurface, n: usize, obstacle: &[f64]) -> Option<(f64, f64)> {
    let mask = &surface.exercised[n];
    let x = &surface.grid.x;
    if !mask[0] || !mask.get(1).copied().unwrap_or(false) {
        return None;
    }
    let j = mask.iter().position(|&m| !m)?.checked_sub(1)?;
    if j + 2 >= x.len() {
        return None;
    }
    let p = &surface.values[n];
    let e1 = (p[j + 1] - obstacle[j + 1]).max(0.0);
    let e2 = (p[j + 2] - obstacle[j + 2]).max(0.0);
    let xb = if e2 > e1 {
        let (r1, r2) = if surface.sigma > 0.0 { (e1.sqrt(), e2.sqrt()) } else { (e1, e2) };
        x[j + 1] - r1 * (x[j + 2] - x[j + 1]) / (r2 - r1)
    } else {
        x[j]
    };
    let xb = xb.clamp(x[j], x[j + 1]);
    Some((xb.exp(), x[j + 1].exp() - x[j].exp()))
}

pub fn extract_boundary(surface: &PriceSurface) -> Result<BoundaryCurve> {
    if surface.r == 0.0 {
        return Err(Error::EmptyExerciseRegion);
    }
    let obstacle = surface.obstacle();
    let grid = &surface.grid;
    let mut samples = vec![BoundarySample { t: grid.maturity, theta: 0.0, b: surface.strike, resolution: 0.0 }];
    for n in 1..grid.theta.len() {
        let (b, resolution) = boundary_in_slice(surface, n, &obstacle).ok_or(Error::EmptyExerciseRegion)?;
        let theta = grid.theta[n];
        samples.push(BoundarySample { t: grid.maturity - theta, theta, b, resolution });
    }
    Ok(BoundaryCurve { strike: surface.strike, maturity: grid.maturity, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiumReport {
    /// `e[n][i] = P - P_e` per node.
    pub values: Vec<Vec<f64>>,
    /// Largest `e / (rKθ)` over slices with `θ > 0`.
    pub max_ratio_to_bound: f64,
    /// Largest `e - rKθ`.
    pub max_excess: f64,
}

/// Early exercise premium against the European price on the same grid.
pub fn premium(surface: &PriceSurface, model: &LevyModel) -> Result<PremiumReport> {
    let k = surface.strike;
    let tol = SHAPE_TOL * k;
    let s = surface.spots();
    let mut values = Vec::with_capacity(surface.values.len());
    let mut max_ratio: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    for (n, (am, eu)) in surface.values.iter().zip(&surface.european).enumerate() {
        let theta = surface.grid.theta[n];
        let bound = model.r * k * theta;
        let e: Vec<f64> = am.iter().zip(eu).map(|(a, b)| a - b).collect();
        for (i, &v) in e.iter().enumerate() {
            if v < -tol || v > bound + tol {
                return Err(Error::BoundViolation {
                    t: surface.grid.maturity - theta,
                    s: s[i],
                    detail: format!("premium {v} outside [0, rKθ = {bound}]"),
                });
            }
            if i > 0 && v > e[i - 1] + tol {
                return Err(Error::BoundViolation {
                    t: surface.grid.maturity - theta,
                    s: s[i],
                    detail: format!("premium increases in s: {} -> {v}", e[i - 1]),
                });
            }
        }
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max_excess = max_excess.max(top - bound);
        if bound > 0.0 {
            max_ratio = max_ratio.max(e.iter().cloned().fold(0.0, f64::max) / bound);
        }
        values.push(e);
    }
    Ok(PremiumReport { values, max_ratio_to_bound: max_ratio, max_excess })
}

/// Largest `|∂P/∂s + 1|` just above the boundary, divided by the allowance
/// `5 Δs Γ`; the smooth-pasting condition holds when this is at most one.
pub fn smooth_pasting_ratio(surface: &PriceSurface, curve: &BoundaryCurve) -> f64 {
    let s = surface.spots();
    let mut worst: f64 = 0.0;
    for (n, sample) in curve.samples.iter().enumerate().skip(1) {
        let p = &surface.values[n];
        let j = s.partition_point(|&v| v <= sample.b);
        if j == 0 || j + 2 >= s.len() {
            continue;
        }
        let slope = (p[j] - p[j - 1]) / (s[j] - s[j - 1]);
        let slope_next = (p[j + 1] - p[j]) / (s[j + 1] - s[j]);
        let gamma = ((slope_next - slope) / (0.5 * (s[j + 1] - s[j - 1]))).abs();
        let ds = s[j] - s[j - 1];
        let allowance = 5.0 * ds * gamma + 1e-12;
        worst = worst.max((slope + 1.0).abs() / allowance);
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub thetas: Vec<f64>,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub coarse_resolution: Vec<f64>,
    pub within_resolution: bool,
}

/// Solves on a grid and on its refinement (halved steps) and compares the
/// boundaries at `thetas`.
pub fn refinement_check(
    model: &LevyModel,
    strike: f64,
    b_limit: f64,
    maturity: f64,
    cfg: &GridConfig,
    thetas: &[f64],
) -> Result<RefinementReport> {
    let cfg = GridConfig { extra_times: thetas.to_vec(), ..cfg.clone() };
    let fine_cfg = cfg.refined();
    let (coarse, fine) = rayon::join(
        || -> Result<BoundaryCurve> {
            let g = super::grid::Grid::build(model, strike, b_limit, maturity, &cfg)?;
            extract_boundary(&solve(model, strike, &g)?)
        },
        || -> Result<BoundaryCurve> {
            let g = super::grid::Grid::build(model, strike, b_limit, maturity, &fine_cfg)?;
            extract_boundary(&solve(model, strike, &g)?)
        },
    );
    let (coarse, fine) = (coarse?, fine?);
    let mut report = RefinementReport {
        thetas: thetas.to_vec(),
        coarse: Vec::new(),
        fine: Vec::new(),
        coarse_resolution: Vec::new(),
        within_resolution: true,
    };
    for &th in thetas {
        let c = coarse.at_theta(th);
        let f = fine.at_theta(th);
        report.within_resolution &= (c.b - f.b).abs() <= c.resolution;
        report.coarse.push(c.b);
        report.fine.push(f.b);
        report.coarse_resolution.push(c.resolution);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pide::grid::Grid;

    fn bs_surface(r: f64, maturity: f64) -> (LevyModel, PriceSurface) {
        let m = LevyModel::black_scholes(r, 0.0, 0.2).unwrap();
        let cfg = GridConfig { extra_times: vec![0.01], ..GridConfig::default() };
        let g = Grid::build(&m, 100.0, 100.0, maturity, &cfg).unwrap();
        let s = solve(&m, 100.0, &g).unwrap();
        (m, s)
    }

    #[test]
    fn payoff_slice_boundary_is_the_strike() {
        let (_, s) = bs_surface(0.05, 0.1);
        let c = extract_boundary(&s).unwrap();
        assert_eq!(c.samples[0].b, 100.0);
        assert_eq!(c.samples[0].theta, 0.0);
    }

    #[test]
    fn black_scholes_gap_follows_the_square_root_log_law() {
        let (m, s) = bs_surface(0.05, 0.1);
        let c = extract_boundary(&s).unwrap();
        let theta = 0.01;
        let gap = 100.0 - c.at_theta(theta).b;
        let law = 0.2 * 100.0 * (theta * theta.ln().abs()).sqrt();
        assert!((gap / law - 1.0).abs() < 0.2, "gap {gap} vs {law}");
        assert!(c.monotonicity_defect() <= 0.0);
        assert!(c.european_excess(&m).unwrap() <= 0.0);
        assert!(smooth_pasting_ratio(&s, &c) <= 1.0, "{}", smooth_pasting_ratio(&s, &c));
    }

    #[test]
    fn zero_rate_reports_an_empty_region() {
        let (_, s) = bs_surface(0.0, 0.1);
        assert_eq!(extract_boundary(&s), Err(Error::EmptyExerciseRegion));
    }

    #[test]
    fn premium_respects_its_bounds() {
        let (m, s) = bs_surface(0.05, 0.1);
        let rep = premium(&s, &m).unwrap();
        assert!(rep.values[0].iter().all(|&e| e == 0.0));
        assert!(rep.max_excess <= 1e-6 * 100.0);
        assert!(rep.max_ratio_to_bound > 0.5 && rep.max_ratio_to_bound < 1.001);
        let last = rep.values.last().unwrap();
        assert!(last.iter().cloned().fold(0.0, f64::max) <= 0.5 + 1e-6 * 100.0);
        let (m0, s0) = bs_surface(0.0, 0.1);
        let rep0 = premium(&s0, &m0).unwrap();
        assert!(rep0.values.iter().flatten().all(|e| e.abs() < 1e-6 * 100.0));
    }
}
