//! Log-price and time-to-maturity grids.

use crate::error::{Error, Result};
use crate::levy::{Interval, LevyModel};

/// Node-placement policy; spacings are set relative to the size of the
/// expected boundary gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Nodes per gap scale `σ√(T max(1, |ln T|))` inside the fine zones.
    pub resolution: f64,
    /// Ratio between consecutive spacings outside the fine zones.
    pub growth: f64,
    pub max_spacing: f64,
    /// Minimum distance of the log-price bounds from the fine zones.
    pub min_span: f64,
    /// Base number of time steps.
    pub n_t: usize,
    /// First time step as a fraction of the base step.
    pub first_step_fraction: f64,
    pub time_growth: f64,
    /// Times to maturity that must be grid slices.
    pub extra_times: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 100.0,
            growth: 1.05,
            max_spacing: 0.02,
            min_span: 0.3,
            n_t: 2000,
            first_step_fraction: 1e-3,
            time_growth: 1.2,
            extra_times: Vec::new(),
        }
    }
}

impl GridConfig {
    /// Halved space and time steps.
    pub fn refined(&self) -> Self {
        Self {
            resolution: 2.0 * self.resolution,
            growth: 1.0 + 0.5 * (self.growth - 1.0),
            max_spacing: 0.5 * self.max_spacing,
            n_t: 2 * self.n_t,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Log-price nodes, strictly increasing, with `ln K` among them.
    pub x: Vec<f64>,
    /// Times to maturity, `theta[0] = 0`, strictly increasing to `maturity`.
    pub theta: Vec<f64>,
    pub maturity: f64,
    /// Spacing in the fine zones.
    pub fine_spacing: f64,
    /// Number of base time steps the grid was designed with.
    pub base_steps: usize,
}

/// `sqrt(σ² + ∫_{|z|<1} z² ν)`: the diffusive scale used for node placement.
pub fn effective_volatility(model: &LevyModel) -> f64 {
    let small = model
        .integrate_nu(|z| z * z, Interval::open(-1.0, 1.0))
        .unwrap_or(0.0);
    (model.sigma * model.sigma + small).sqrt().max(0.05)
}

/// Distance above the strike beyond which a downward jump into the money
/// before maturity has probability below `1e-10`; the upper Dirichlet
/// value of zero is placed there.
fn downward_reach(model: &LevyModel, maturity: f64) -> f64 {
    let mut reach: f64 = 0.0;
    while reach < 10.0 {
        let tail = model
            .integrate_nu(|_| 1.0, Interval::open(f64::NEG_INFINITY, -reach.max(1e-3)))
            .unwrap_or(f64::INFINITY);
        if maturity * tail < 1e-10 {
            break;
        }
        reach += 0.25;
    }
    reach
}

impl Grid {
    /// Grid with fine zones around `ln K` and around `ln b_limit`.
    pub fn build(model: &LevyModel, strike: f64, b_limit: f64, maturity: f64, cfg: &GridConfig) -> Result<Self> {
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::InvalidParameter(format!("maturity must be > 0, got {maturity}")));
        }
        if !(strike > 0.0) || !(b_limit > 0.0 && b_limit <= strike) {
            return Err(Error::InvalidParameter("need 0 < b_limit <= strike".into()));
        }
        let vol = effective_volatility(model);
        let sqrt_t = maturity.sqrt();
        let gap = vol * (maturity * maturity.ln().abs().max(1.0)).sqrt();
        let h_fine = gap / cfg.resolution;
        let lk = strike.ln();
        let lb = b_limit.ln();
        let mut zones = vec![(lk - 3.0 * gap, lk + gap)];
        if lb < lk {
            zones.push((lb - 4.5 * vol * sqrt_t, lb + 0.5 * vol * sqrt_t));
        }
        let x_min = zones.iter().map(|z| z.0).fold(lb, f64::min) - (6.0 * vol * sqrt_t).max(cfg.min_span);
        let x_max = lk + (6.0 * vol * sqrt_t).max(cfg.min_span).max(downward_reach(model, maturity));
        let h_max = cfg.max_spacing.max(h_fine);
        let spacing = |x: f64| {
            let dist = zones
                .iter()
                .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
                .fold(f64::INFINITY, f64::min);
            (h_fine + (cfg.growth - 1.0) * dist).min(h_max)
        };
        let march = |dir: f64, end: f64| {
            let mut out = Vec::new();
            let mut x = lk;
            loop {
                let h = spacing(x + 0.5 * dir * spacing(x));
                let next = x + dir * h;
                if (dir > 0.0 && next >= end) || (dir < 0.0 && next <= end) {
                    // land on the bound, merging a sliver into the last cell
                    if (end - x).abs() < 0.5 * h && !out.is_empty() {
                        out.pop();
                    }
                    out.push(end);
                    break;
                }
                out.push(next);
                x = next;
            }
            out
        };
        let mut x: Vec<f64> = march(-1.0, x_min);
        x.reverse();
        x.push(lk);
        x.extend(march(1.0, x_max));

        let theta = time_nodes(maturity, cfg)?;
        Ok(Self { x, theta, maturity, fine_spacing: h_fine, base_steps: cfg.n_t })
    }

    /// Uniform log-price grid on `[x_min, x_max]` with `n_x` nodes.
    pub fn uniform(x_min: f64, x_max: f64, n_x: usize, maturity: f64, cfg: &GridConfig) -> Result<Self> {
        if !(x_max > x_min) || n_x < 3 {
            return Err(Error::InvalidParameter("uniform grid needs x_max > x_min and n_x >= 3".into()));
        }
        let h = (x_max - x_min) / (n_x - 1) as f64;
        let x = (0..n_x).map(|i| x_min + i as f64 * h).collect();
        let theta = time_nodes(maturity, cfg)?;
        Ok(Self { x, theta, maturity, fine_spacing: h, base_steps: cfg.n_t })
    }

    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn n_t(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().expect("nonempty grid")
    }

    /// Local spacing at node `i`: the smaller adjacent cell.
    pub fn local_spacing(&self, i: usize) -> f64 {
        let n = self.x.len();
        let left = if i > 0 { self.x[i] - self.x[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n { self.x[i + 1] - self.x[i] } else { f64::INFINITY };
        left.min(right)
    }

    /// Index of the slice closest to time to maturity `theta`.
    pub fn slice_at(&self, theta: f64) -> usize {
        let k = self.theta.partition_point(|&t| t < theta);
        if k == 0 {
            return 0;
        }
        if k >= self.theta.len() {
            return self.theta.len() - 1;
        }
        if (self.theta[k] - theta).abs() < (theta - self.theta[k - 1]).abs() {
            k
        } else {
            k - 1
        }
    }

    /// Bounds and sizes the solver relies on: the domain must reach five
    /// diffusive standard deviations past the boundary limit and the strike.
    pub fn validate(&self, model: &LevyModel, strike: f64, b_limit: f64) -> Result<()> {
        let reach = 5.0 * model.sigma * self.maturity.sqrt();
        if !(self.x_min() < b_limit.ln() - reach) {
            return Err(Error::GridTooCoarse(format!(
                "x_min = {} must lie below ln(b_limit) - 5σ√T = {}",
                self.x_min(),
                b_limit.ln() - reach
            )));
        }
        if !(self.x_max() > strike.ln() + reach) {
            return Err(Error::GridTooCoarse(format!(
                "x_max = {} must exceed ln K + 5σ√T = {}",
                self.x_max(),
                strike.ln() + reach
            )));
        }
        if self.n_x() < 200 {
            return Err(Error::GridTooCoarse(format!("n_x = {} < 200", self.n_x())));
        }
        if self.base_steps < 100 {
            return Err(Error::GridTooCoarse(format!("n_t = {} < 100", self.base_steps)));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) || self.theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridTooCoarse("grid nodes must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Time-to-maturity nodes: steps grow geometrically from a small first step
/// up to the base step, then stay uniform; required slices are inserted.
fn time_nodes(maturity: f64, cfg: &GridConfig) -> Result<Vec<f64>> {
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidParameter(format!("maturity must be > 0, got {maturity}")));
    }
    if cfg.n_t == 0 {
        return Err(Error::InvalidParameter("n_t must be positive".into()));
    }
    let base = maturity / cfg.n_t as f64;
    let mut step = (base * cfg.first_step_fraction).min(base);
    let mut theta = vec![0.0];
    let mut t = 0.0;
    while t < maturity {
        let mut next = t + step;
        if next > maturity || maturity - next < 0.3 * step {
            next = maturity;
        }
        theta.push(next);
        t = next;
        step = (step * cfg.time_growth).min(base);
    }
    for &extra in &cfg.extra_times {
        if extra > 0.0 && extra < maturity {
            let k = theta.partition_point(|&v| v < extra);
            let near = |v: f64| (v - extra).abs() <= 1e-12 * maturity;
            if !(near(theta[k]) || (k > 0 && near(theta[k - 1]))) {
                theta.insert(k, extra);
            }
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strike_is_a_node_and_bounds_are_met() {
        let m = LevyModel::black_scholes(0.05, 0.0, 0.2).unwrap();
        let g = Grid::build(&m, 100.0, 100.0, 1.0, &GridConfig::default()).unwrap();
        assert!(g.x.iter().any(|&x| x == 100f64.ln()));
        g.validate(&m, 100.0, 100.0).unwrap();
        assert!(g.x.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn time_nodes_refine_towards_maturity() {
        let cfg = GridConfig { extra_times: vec![0.25, 0.5], ..GridConfig::default() };
        let th = time_nodes(1.0, &cfg).unwrap();
        assert_eq!(th[0], 0.0);
        assert_eq!(*th.last().unwrap(), 1.0);
        assert!(th[1] < 1e-4);
        assert!(th.contains(&0.25) && th.contains(&0.5));
        let steps: Vec<f64> = th.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps[1] / steps[0] > 1.19 && steps[1] / steps[0] < 1.21);
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let m = LevyModel::black_scholes(0.05, 0.0, 0.2).unwrap();
        let cfg = GridConfig { n_t: 50, ..GridConfig::default() };
        let g = Grid::uniform(3.0, 6.0, 150, 1.0, &cfg).unwrap();
        assert!(matches!(g.validate(&m, 100.0, 100.0), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn fine_spacing_tracks_the_gap_scale() {
        let m = LevyModel::black_scholes(0.05, 0.0, 0.2).unwrap();
        let g = Grid::build(&m, 100.0, 100.0, 1e-4, &GridConfig::default()).unwrap();
        let gap = 0.2 * (1e-4 * 1e-4f64.ln().abs()).sqrt();
        assert!((g.fine_spacing - gap / 100.0).abs() < 1e-15);
        g.validate(&m, 100.0, 100.0).unwrap();
    }
}
