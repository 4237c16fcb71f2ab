//! Monte Carlo sampling of `X_t`: Brownian part, a Gaussian stand-in for
//! jumps below a truncation level, and compound Poisson for the rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use super::measure::{Interval, JumpFamily, JumpLaw, Side};
use super::LevyModel;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre8;

const BLOCK: usize = 4096;
const EPS_FLOOR: f64 = 1e-6;
const MAX_JUMPS_PER_PATH: f64 = 1000.0;
const TABLE_BINS: usize = 4000;

/// Inverse-CDF table for `|z| ≥ ε` on one infinite-activity side.
#[derive(Debug, Clone)]
struct TailTable {
    sign: f64,
    log_r: Vec<f64>,
    // cumulative mass from ε up to each node
    cum: Vec<f64>,
}

impl TailTable {
    fn build(model: &LevyModel, side: Side, eps: f64) -> Self {
        let sign = if side == Side::Positive { 1.0 } else { -1.0 };
        let dens = |r: f64| model.measure.density(sign * r);
        let mut r_max = eps.max(1e-3);
        while dens(r_max) * r_max > 1e-18 * dens(eps) * eps && r_max < 1e3 {
            r_max *= 1.25;
        }
        let (a, b) = (eps.ln(), r_max.ln());
        let h = (b - a) / TABLE_BINS as f64;
        let mut log_r = Vec::with_capacity(TABLE_BINS + 1);
        let mut cum = Vec::with_capacity(TABLE_BINS + 1);
        let mut acc = 0.0;
        log_r.push(a);
        cum.push(0.0);
        for k in 0..TABLE_BINS {
            let u0 = a + k as f64 * h;
            acc += gauss_legendre8(
                |u: f64| {
                    let r = u.exp();
                    dens(r) * r
                },
                u0,
                u0 + h,
            );
            log_r.push(u0 + h);
            cum.push(acc);
        }
        Self { sign, log_r, cum }
    }

    fn mass(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.mass();
        let k = self.cum.partition_point(|&c| c < target).clamp(1, self.cum.len() - 1);
        let (c0, c1) = (self.cum[k - 1], self.cum[k]);
        let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        let u = self.log_r[k - 1] + w * (self.log_r[k] - self.log_r[k - 1]);
        self.sign * u.exp()
    }
}

#[derive(Debug, Clone)]
enum JumpSource {
    Atoms { locations: Vec<f64>, cum: Vec<f64> },
    Exponential { sign: f64, dist: Exp<f64> },
    Gaussian(Normal<f64>),
    Uniform { lo: f64, hi: f64 },
    Table(TailTable),
}

impl JumpSource {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSource::Atoms { locations, cum } => {
                let u = rng.random::<f64>() * cum.last().copied().unwrap_or(1.0);
                let k = cum.partition_point(|&c| c <= u).min(locations.len() - 1);
                locations[k]
            }
            JumpSource::Exponential { sign, dist } => sign * dist.sample(rng),
            JumpSource::Gaussian(n) => n.sample(rng),
            JumpSource::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            JumpSource::Table(t) => t.sample(rng),
        }
    }
}

/// Everything needed to draw `X_t` for a fixed `t`.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    t: f64,
    drift: f64,
    gauss_sd: f64,
    sources: Vec<(f64, JumpSource)>,
    pub truncation: f64,
}

impl IncrementSampler {
    pub fn new(model: &LevyModel, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("simulation horizon must be > 0, got {t}")));
        }
        let eps = if model.measure.infinite_activity() {
            choose_truncation(model, t)?
        } else {
            0.0
        };
        let m = &model.measure;
        let mut sources: Vec<(f64, JumpSource)> = Vec::new();
        let atoms = m.all_atoms();
        if !atoms.is_empty() {
            let mut acc = 0.0;
            let cum: Vec<f64> = atoms
                .iter()
                .map(|a| {
                    acc += a.weight;
                    acc
                })
                .collect();
            sources.push((acc, JumpSource::Atoms { locations: atoms.iter().map(|a| a.location).collect(), cum }));
        }
        match &m.family {
            JumpFamily::None => {}
            JumpFamily::FiniteActivity { intensity, law } => {
                if let JumpLaw::Uniform { lo, hi } = law {
                    sources.push((*intensity, JumpSource::Uniform { lo: *lo, hi: *hi }));
                }
            }
            JumpFamily::Kou { lambda_plus, eta_plus, lambda_minus, eta_minus } => {
                if *lambda_plus > 0.0 {
                    let dist = Exp::new(*eta_plus).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    sources.push((*lambda_plus, JumpSource::Exponential { sign: 1.0, dist }));
                }
                if *lambda_minus > 0.0 {
                    let dist = Exp::new(*eta_minus).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    sources.push((*lambda_minus, JumpSource::Exponential { sign: -1.0, dist }));
                }
            }
            JumpFamily::Merton { intensity, mean, std } => {
                let n = Normal::new(*mean, *std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                sources.push((*intensity, JumpSource::Gaussian(n)));
            }
            JumpFamily::VarianceGamma { .. } | JumpFamily::TemperedStable { .. } => {
                for side in [Side::Negative, Side::Positive] {
                    if m.side_infinite_activity(side) {
                        let table = TailTable::build(model, side, eps);
                        sources.push((table.mass(), JumpSource::Table(table)));
                    }
                }
            }
        }
        sources.retain(|(rate, _)| *rate > 0.0);

        let small_var = if eps > 0.0 { m.integrate(|z| z * z, Interval::open(-eps, eps))? } else { 0.0 };
        let big_exp = integrate_outside(model, |z| z.exp_m1(), eps)?;
        let s2 = model.sigma * model.sigma;
        let drift = (-0.5 * s2 - 0.5 * small_var - big_exp) * t;
        let gauss_sd = ((s2 + small_var) * t).sqrt();
        Ok(Self { t, drift, gauss_sd, sources, truncation: eps })
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    fn draw<R: Rng>(&self, rng: &mut R, poisson: &[Option<Poisson<f64>>]) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let mut x = self.drift + self.gauss_sd * z;
        for ((_, src), p) in self.sources.iter().zip(poisson) {
            if let Some(p) = p {
                let count = p.sample(rng) as u64;
                for _ in 0..count {
                    x += src.sample(rng);
                }
            }
        }
        x
    }

    /// `n` samples; block `k` of 4096 draws from ChaCha stream `k` so the
    /// output is independent of the thread count.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let poisson: Vec<Option<Poisson<f64>>> = self
            .sources
            .iter()
            .map(|(rate, _)| Poisson::new(rate * self.t).ok())
            .collect();
        let blocks = n.div_ceil(BLOCK);
        let parts: Vec<Vec<f64>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let len = BLOCK.min(n - b * BLOCK);
                (0..len).map(|_| self.draw(&mut rng, &poisson)).collect()
            })
            .collect();
        parts.concat()
    }
}

/// `∫_{|z| ≥ ε} f dν`.
fn integrate_outside<F: Fn(f64) -> f64 + Copy>(model: &LevyModel, f: F, eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return model.integrate_nu(f, Interval::whole());
    }
    let below = Interval { lo: f64::NEG_INFINITY, hi: -eps, lo_closed: false, hi_closed: true };
    let above = Interval { lo: eps, hi: f64::INFINITY, lo_closed: true, hi_closed: false };
    Ok(model.integrate_nu(f, below)? + model.integrate_nu(f, above)?)
}

/// Truncation level: small-jump variance below `1e-4 σ²` (floor `1e-6`),
/// raised if needed so the expected jump count per path stays below 1000.
fn choose_truncation(model: &LevyModel, t: f64) -> Result<f64> {
    let m = &model.measure;
    let small_var = |eps: f64| m.integrate(|z| z * z, Interval::open(-eps, eps));
    let big_count = |eps: f64| integrate_outside(model, |_| 1.0, eps);
    let target = 1e-4 * model.sigma * model.sigma;
    let mut eps = EPS_FLOOR;
    if target > 0.0 {
        // bisection in log ε on the increasing small-jump variance
        let (mut lo, mut hi) = (EPS_FLOOR.ln(), 0.0_f64);
        if small_var(EPS_FLOOR)? < target {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if small_var(mid.exp())? < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            eps = lo.exp();
        }
    }
    if big_count(eps)? * t > MAX_JUMPS_PER_PATH {
        let (mut lo, mut hi) = (eps.ln(), 1.0_f64.ln());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if big_count(mid.exp())? * t > MAX_JUMPS_PER_PATH {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        eps = hi.exp();
    }
    Ok(eps)
}

/// `n` i.i.d. draws of `X_t` under the martingale drift.
pub fn simulate_increments(model: &LevyModel, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(IncrementSampler::new(model, t)?.sample(n, seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub t: f64,
    pub ks: f64,
    /// KS distance of a Gaussian null sample of the same size.
    pub null_ks: f64,
    /// Bootstrap 5% quantile of `KS(prev t) - KS(this t)`; NaN on the first row.
    pub decrease_lower: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltTable {
    pub rows: Vec<CltRow>,
    /// Every consecutive decrease is significant at the one-sided 95% level.
    pub strictly_decreasing: bool,
    /// Every consecutive KS is no larger than its predecessor plus the null level.
    pub nonincreasing_within_noise: bool,
}

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and
/// `N(0, sd^2)`.
pub fn ks_distance(xs: &[f64], sd: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    ks_sorted(&v, sd)
}

fn ks_sorted(v: &[f64], sd: f64) -> f64 {
    let normal = NormalDist::new(0.0, sd).expect("positive sd");
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

const BOOTSTRAP_REPS: usize = 200;

/// KS distance of `X_t/√t` from `N(0, σ²)` along a decreasing ladder of
/// times, with a paired bootstrap on consecutive differences.
pub fn small_time_clt_diagnostic(model: &LevyModel, times: &[f64], n: usize, seed: u64) -> Result<CltTable> {
    if model.sigma <= 0.0 {
        return Err(Error::InvalidParameter("small-time CLT diagnostic needs sigma > 0".into()));
    }
    if times.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("times must be strictly decreasing".into()));
    }
    let sd = model.sigma;
    let samples: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let scale = t.sqrt();
            simulate_increments(model, t, n, seed).map(|v| v.into_iter().map(|x| x / scale).collect())
        })
        .collect::<Result<_>>()?;

    let mut null = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let null_sample: Vec<f64> = (0..n).map(|_| sd * null.sample::<f64, _>(StandardNormal)).collect();
    let null_ks = ks_distance(&null_sample, sd);

    let mut rows = Vec::with_capacity(times.len());
    let mut strictly = true;
    let mut within_noise = true;
    for (k, &t) in times.iter().enumerate() {
        let ks = ks_distance(&samples[k], sd);
        let mut decrease_lower = f64::NAN;
        if k > 0 {
            let prev_ks = rows.last().map(|r: &CltRow| r.ks).unwrap_or(f64::NAN);
            let mut diffs: Vec<f64> = (0..BOOTSTRAP_REPS)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7919 * k as u64));
                    rng.set_stream(rep as u64);
                    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    let mut a: Vec<f64> = idx.iter().map(|&i| samples[k - 1][i]).collect();
                    let mut b: Vec<f64> = idx.iter().map(|&i| samples[k][i]).collect();
                    a.sort_by(|x, y| x.total_cmp(y));
                    b.sort_by(|x, y| x.total_cmp(y));
                    ks_sorted(&a, sd) - ks_sorted(&b, sd)
                })
                .collect();
            diffs.sort_by(|x, y| x.total_cmp(y));
            decrease_lower = diffs[(0.05 * BOOTSTRAP_REPS as f64) as usize];
            strictly &= decrease_lower > 0.0;
            within_noise &= ks <= prev_ks + null_ks;
        }
        rows.push(CltRow { t, ks, null_ks, decrease_lower });
    }
    Ok(CltTable { rows, strictly_decreasing: strictly, nonincreasing_within_noise: within_noise })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpFamily, LevyMeasureSpec};

    fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn gaussian_samples_have_the_right_variance() {
        let m = LevyModel::black_scholes(0.05, 0.0, 0.2).unwrap();
        let xs = simulate_increments(&m, 1.0, 100_000, 7).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.04).abs() < 0.001, "{var}");
        let e: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let (me, se) = mean_and_stderr(&e);
        assert!((me - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn merton_is_a_martingale() {
        let m = LevyModel::new(
            0.05,
            0.0,
            0.2,
            LevyMeasureSpec::new(JumpFamily::Merton { intensity: 1.0, mean: -0.1, std: 0.15 }),
        )
        .unwrap();
        let e: Vec<f64> = simulate_increments(&m, 1.0, 100_000, 11).unwrap().into_iter().map(f64::exp).collect();
        let (me, se) = mean_and_stderr(&e);
        assert!((me - 1.0).abs() < 3.0 * se, "{me} ± {se}");
    }

    #[test]
    fn tempered_stable_is_a_martingale() {
        let m = LevyModel::new(
            0.05,
            0.0,
            0.2,
            LevyMeasureSpec::new(JumpFamily::TemperedStable {
                c_plus: 0.02,
                c_minus: 0.05,
                g: 5.0,
                m: 8.0,
                alpha_plus: 0.6,
                alpha_minus: 1.5,
            }),
        )
        .unwrap();
        let e: Vec<f64> = simulate_increments(&m, 1.0, 100_000, 3).unwrap().into_iter().map(f64::exp).collect();
        let (me, se) = mean_and_stderr(&e);
        assert!((me - 1.0).abs() < 4.0 * se, "{me} ± {se}");
    }

    #[test]
    fn output_does_not_depend_on_thread_count() {
        let m = LevyModel::new(
            0.05,
            0.0,
            0.2,
            LevyMeasureSpec::new(JumpFamily::VarianceGamma { c: 1.0, g: 6.0, m: 9.0 }),
        )
        .unwrap();
        let a = simulate_increments(&m, 0.5, 10_000, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_increments(&m, 0.5, 10_000, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn clt_requires_diffusion() {
        let m = LevyModel::new(
            0.05,
            0.0,
            0.0,
            LevyMeasureSpec::new(JumpFamily::Kou {
                lambda_plus: 0.3,
                eta_plus: 12.0,
                lambda_minus: 1.0,
                eta_minus: 6.0,
            }),
        )
        .unwrap();
        assert!(small_time_clt_diagnostic(&m, &[0.1, 0.01], 1000, 1).is_err());
    }

    #[test]
    fn ks_of_a_perfect_grid_is_small() {
        let normal = NormalDist::new(0.0, 1.0).unwrap();
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        assert!((ks_distance(&xs, 1.0) - 0.5 / n as f64).abs() < 1e-9);
    }
}
