#![allow(dead_code)]

use exbound::levy::{Atom, JumpFamily, LevyMeasureSpec, LevyModel};
use statrs::distribution::{ContinuousCDF, Normal};

pub const STRIKE: f64 = 100.0;

pub fn bs() -> LevyModel {
    LevyModel::black_scholes(0.05, 0.0, 0.2).unwrap()
}

/// `d < 0` through a dividend yield, `ξ = rK/δ`.
pub fn bs_dividend() -> LevyModel {
    LevyModel::black_scholes(0.02, 0.06, 0.2).unwrap()
}

pub fn kou_up() -> LevyModel {
    LevyModel::new(
        0.06,
        0.0,
        0.2,
        LevyMeasureSpec::new(JumpFamily::Kou { lambda_plus: 0.3, eta_plus: 12.0, lambda_minus: 1.0, eta_minus: 6.0 }),
    )
    .unwrap()
}

/// `d < 0` with a continuous jump density, so no atom at `ln(K/ξ)`.
pub fn kou_down() -> LevyModel {
    LevyModel::new(
        0.03,
        0.05,
        0.2,
        LevyMeasureSpec::new(JumpFamily::Kou { lambda_plus: 0.5, eta_plus: 10.0, lambda_minus: 0.5, eta_minus: 5.0 }),
    )
    .unwrap()
}

pub fn merton() -> LevyModel {
    LevyModel::new(0.05, 0.0, 0.2, LevyMeasureSpec::new(JumpFamily::Merton { intensity: 0.5, mean: -0.1, std: 0.15 }))
        .unwrap()
}

/// Infinite-variation negative jumps (`α = 1.5`) on top of a diffusion.
pub fn cgmy() -> LevyModel {
    LevyModel::new(
        0.05,
        0.0,
        0.2,
        LevyMeasureSpec::new(JumpFamily::TemperedStable {
            c_plus: 0.0,
            c_minus: 0.05,
            g: 5.0,
            m: 5.0,
            alpha_plus: 0.5,
            alpha_minus: 1.5,
        }),
    )
    .unwrap()
}

pub fn variance_gamma() -> LevyModel {
    LevyModel::new(0.05, 0.0, 0.0, LevyMeasureSpec::new(JumpFamily::VarianceGamma { c: 1.0, g: 8.0, m: 12.0 })).unwrap()
}

pub fn atom() -> LevyModel {
    LevyModel::new(0.05, 0.05, 0.2, LevyMeasureSpec::none().with_atoms(vec![Atom::new(2f64.ln(), 0.05)])).unwrap()
}

/// The six-model solver matrix.
pub fn matrix() -> Vec<(&'static str, LevyModel)> {
    vec![
        ("bs", bs()),
        ("bs_dividend", bs_dividend()),
        ("kou_up", kou_up()),
        ("kou_down", kou_down()),
        ("merton", merton()),
        ("cgmy", cgmy()),
    ]
}

/// Every model family the crate supports.
pub fn zoo() -> Vec<(&'static str, LevyModel)> {
    let mut z = matrix();
    z.push(("variance_gamma", variance_gamma()));
    z.push(("atom", atom()));
    z
}

/// Cox–Ross–Rubinstein American put.
pub fn crr_american_put(s: f64, k: f64, t: f64, r: f64, sigma: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let disc = (-r * dt).exp();
    let p = ((r * dt).exp() - d) / (u - d);
    let mut v: Vec<f64> = (0..=steps).map(|j| (k - s * u.powi(j as i32) * d.powi((steps - j) as i32)).max(0.0)).collect();
    for n in (0..steps).rev() {
        for j in 0..=n {
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            let ex = k - s * u.powi(j as i32) * d.powi((n - j) as i32);
            v[j] = cont.max(ex);
        }
    }
    v[0]
}

pub fn bs_put(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    let d2 = d1 - sd;
    k * (-r * t).exp() * n.cdf(-d2) - s * n.cdf(-d1)
}

/// Merton's Poisson mixture of Black–Scholes prices, truncated at `terms`.
pub fn merton_series(s: f64, k: f64, t: f64, r: f64, sigma: f64, lambda: f64, mu: f64, delta: f64, terms: usize) -> f64 {
    let kappa = (mu + 0.5 * delta * delta).exp() - 1.0;
    let lp = lambda * (1.0 + kappa);
    let mut weight = (-lp * t).exp();
    let mut sum = 0.0;
    for n in 0..terms {
        if n > 0 {
            weight *= lp * t / n as f64;
        }
        let nf = n as f64;
        let sig = (sigma * sigma + nf * delta * delta / t).sqrt();
        let rn = r - lambda * kappa + nf * (1.0 + kappa).ln() / t;
        sum += weight * bs_put(s, k, t, rn, sig);
    }
    sum
}
