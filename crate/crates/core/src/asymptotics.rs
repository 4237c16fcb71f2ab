//! Closed-form near-expiry limits and rates of the critical price, and the
//! second-order price expansion below the limit `ξ`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::levy::{BoundaryLimit, Interval, LevyModel, RateLaw, RegimeReport};

/// Tolerance for matching an atom location to `ln(K/ξ)`.
pub const ATOM_MATCH_TOL: f64 = 1e-12;

/// `F(ξ) = rK - δξ - ∫ (ξ e^z - K)^+ ν(dz)`.
pub fn xi_equation(model: &LevyModel, strike: f64, xi: f64) -> Result<f64> {
    let c = (strike / xi).ln();
    let tail = model.integrate_nu(|z| (xi * z.exp() - strike).max(0.0), Interval::open(c.max(0.0), f64::INFINITY))?;
    Ok(model.r * strike - model.delta * xi - tail)
}

/// Limit of the critical price at expiry when `d < 0`: the root of
/// [`xi_equation`] in `(0, K)`.
pub fn xi_limit(model: &LevyModel, strike: f64) -> Result<f64> {
    let d = model.d_or_neg_infinity();
    if d >= -crate::levy::D_ZERO_TOL {
        return Err(Error::RegimeMismatch(format!("xi is defined for d < 0, got d = {d}")));
    }
    if model.r <= 0.0 {
        return Err(Error::RegimeMismatch("xi collapses to 0 when r = 0".into()));
    }
    let (mut lo, mut hi) = (1e-12 * strike, strike);
    let f_lo = xi_equation(model, strike, lo)?;
    let f_hi = xi_equation(model, strike, hi)?;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketFailure { lo, hi });
    }
    let tol = 1e-12 * model.r * strike;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = xi_equation(model, strike, mid)?;
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if f.abs() < tol && hi - lo < 1e-14 * strike {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticParams {
    pub regime: RegimeReport,
    pub strike: f64,
    pub sigma: f64,
    /// `ξ` when `d < 0`.
    pub xi: Option<f64>,
    /// Atom mass of `ν` at `ln(K/b(T))`.
    pub lambda: f64,
    pub beta: f64,
    pub delta_bar: f64,
    /// Positivity threshold of the stopping value, filled in separately.
    pub y_star: Option<f64>,
    /// `∫ (e^z - 1)^- ν(dz)` for the linear pure-jump law.
    pub linear_coefficient: Option<f64>,
    /// `(c, α)` of a tempered-stable negative side for the power law.
    pub stable: Option<(f64, f64)>,
}

impl AsymptoticParams {
    pub fn from_model(model: &LevyModel, strike: f64) -> Result<Self> {
        let regime = model.classify_regime(strike);
        let mut params = match regime.boundary_limit {
            BoundaryLimit::Xi(xi) => lambda_beta_params(model, strike, xi)?,
            BoundaryLimit::Strike => {
                if regime.d < 0.0 {
                    // xi could not be resolved
                    xi_limit(model, strike)?;
                }
                Self {
                    regime: regime.clone(),
                    strike,
                    sigma: model.sigma,
                    xi: None,
                    lambda: 0.0,
                    beta: 0.0,
                    delta_bar: model.delta,
                    y_star: None,
                    linear_coefficient: None,
                    stable: None,
                }
            }
        };
        params.regime = regime;
        match params.regime.applicable_rate {
            RateLaw::PureJumpLinear => params.linear_coefficient = Some(model.negative_exp_moment()?),
            RateLaw::StablePower => params.stable = crate::levy::stable_negative_index(model),
            _ => {}
        }
        Ok(params)
    }

    /// Limit `b(T)` of the critical price.
    pub fn boundary_limit(&self) -> f64 {
        self.xi.unwrap_or(self.strike)
    }

    pub fn with_y_star(mut self, y: f64) -> Self {
        self.y_star = Some(y);
        self
    }
}

/// `λ = ν({ln(K/ξ)})`, `δ̄ = δ + ∫_{(ln(K/ξ),∞)} e^z ν(dz)` and `β = K/(ξ δ̄)`.
pub fn lambda_beta_params(model: &LevyModel, strike: f64, b_limit: f64) -> Result<AsymptoticParams> {
    let c = (strike / b_limit).ln();
    let lambda: f64 = model
        .measure
        .all_atoms()
        .iter()
        .filter(|a| (a.location - c).abs() <= ATOM_MATCH_TOL)
        .map(|a| a.weight)
        .sum();
    let delta_bar = model.delta + model.integrate_nu(|z| z.exp(), Interval::open(c, f64::INFINITY))?;
    let beta = strike / (b_limit * delta_bar);
    Ok(AsymptoticParams {
        regime: model.classify_regime(strike),
        strike,
        sigma: model.sigma,
        xi: Some(b_limit),
        lambda,
        beta,
        delta_bar,
        y_star: None,
        linear_coefficient: None,
        stable: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    /// Predicted `K - b` (or `ξ - b`).
    pub gap: f64,
    /// The `θ`-dependent factor of the law, e.g. `√(θ|ln θ|)` or `√θ`.
    pub scale: f64,
}

fn sqrt_log(theta: f64) -> f64 {
    (theta * theta.ln().abs()).sqrt()
}

/// Predicted gap between the limit and `b(T - θ)` under `law`.
pub fn rate_formula(params: &AsymptoticParams, law: RateLaw, theta: f64) -> Result<RatePrediction> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1), got {theta}")));
    }
    let k = params.strike;
    let s = params.sigma;
    let pred = match law {
        RateLaw::FiniteActivitySqrtLog | RateLaw::DiffusiveSqrtLog => {
            RatePrediction { gap: s * k * sqrt_log(theta), scale: sqrt_log(theta) }
        }
        RateLaw::FiniteActivityCritical => RatePrediction {
            gap: std::f64::consts::SQRT_2 * s * k * sqrt_log(theta),
            scale: sqrt_log(theta),
        },
        RateLaw::FiniteActivityNegativeDrift | RateLaw::DiffusiveNegativeDrift => {
            let y = params.y_star.ok_or(Error::MissingYStar)?;
            let xi = params.xi.ok_or_else(|| Error::RegimeMismatch("law needs xi".into()))?;
            RatePrediction { gap: y * s * xi * theta.sqrt(), scale: theta.sqrt() }
        }
        RateLaw::PureJumpLinear => {
            let c = params
                .linear_coefficient
                .ok_or_else(|| Error::RegimeMismatch("law needs the negative-jump moment".into()))?;
            RatePrediction { gap: k * c * theta / (1.0 + c * theta), scale: theta }
        }
        RateLaw::StablePower => {
            let (c, alpha) = params
                .stable
                .ok_or_else(|| Error::RegimeMismatch("law needs a stable negative side".into()))?;
            let scale = theta.powf(1.0 / alpha) * theta.ln().abs().powf(1.0 - 1.0 / alpha);
            let coef = (c * gamma(2.0 - alpha) / (alpha - 1.0)).powf(1.0 / alpha);
            RatePrediction { gap: k * coef * scale, scale }
        }
        RateLaw::None => {
            return Err(Error::UnsupportedRegime("no rate law applies".into()));
        }
    };
    Ok(pred)
}

/// Band `prediction ± c√θ` around the diffusive `d > 0` law.
pub fn correction_band(prediction: f64, c: f64, theta: f64) -> (f64, f64) {
    let w = c.abs() * theta.sqrt();
    (prediction - w, prediction + w)
}

/// `(K - b(T) e^{a√θ})^+ + σ b(T) δ̄ e^λ v θ^{3/2}`.
pub fn second_order_expansion(params: &AsymptoticParams, a: f64, theta: f64, v_value: f64) -> Result<f64> {
    if !(a < 0.0) {
        return Err(Error::InvalidParameter(format!("expansion needs a < 0, got {a}")));
    }
    let b = params
        .xi
        .ok_or_else(|| Error::RegimeMismatch("expansion needs d < 0".into()))?;
    let spot = b * (a * theta.sqrt()).exp();
    let payoff = (params.strike - spot).max(0.0);
    Ok(payoff + params.sigma * b * params.delta_bar * params.lambda.exp() * v_value * theta.powf(1.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{Atom, JumpFamily, LevyMeasureSpec};

    fn bs(r: f64, delta: f64) -> LevyModel {
        LevyModel::black_scholes(r, delta, 0.2).unwrap()
    }

    fn atom_model() -> LevyModel {
        LevyModel::new(0.05, 0.05, 0.2, LevyMeasureSpec::none().with_atoms(vec![Atom::new(2f64.ln(), 0.05)])).unwrap()
    }

    #[test]
    fn xi_without_jumps_is_rk_over_delta() {
        let xi = xi_limit(&bs(0.04, 0.08), 100.0).unwrap();
        assert!((xi - 50.0).abs() < 1e-9, "{xi}");
    }

    #[test]
    fn xi_with_an_up_atom() {
        let xi = xi_limit(&atom_model(), 100.0).unwrap();
        // 5 - 0.05 ξ - 0.05 (2ξ - 100) = 0  =>  ξ = 200/3
        assert!((xi - 200.0 / 3.0).abs() < 1e-8, "{xi}");
    }

    #[test]
    fn xi_rejects_nonnegative_d() {
        assert!(matches!(xi_limit(&bs(0.05, 0.0), 100.0), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn xi_equation_brackets_the_root() {
        let m = LevyModel::new(
            0.03,
            0.02,
            0.2,
            LevyMeasureSpec::new(JumpFamily::Kou {
                lambda_plus: 2.0,
                eta_plus: 6.0,
                lambda_minus: 0.5,
                eta_minus: 5.0,
            }),
        )
        .unwrap();
        let xi = xi_limit(&m, 100.0).unwrap();
        assert!(xi > 0.0 && xi < 100.0);
        assert!(xi_equation(&m, 100.0, xi - 1e-2).unwrap() > 0.0);
        assert!(xi_equation(&m, 100.0, xi + 1e-2).unwrap() < 0.0);
    }

    #[test]
    fn lambda_beta_without_up_jumps() {
        let m = LevyModel::new(
            0.04,
            0.08,
            0.2,
            LevyMeasureSpec::new(JumpFamily::Kou {
                lambda_plus: 0.0,
                eta_plus: 10.0,
                lambda_minus: 1.0,
                eta_minus: 5.0,
            }),
        )
        .unwrap();
        let p = lambda_beta_params(&m, 100.0, 50.0).unwrap();
        assert_eq!(p.lambda, 0.0);
        assert!((p.delta_bar - 0.08).abs() < 1e-15);
        assert!((p.beta - 25.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_picks_up_an_atom_at_the_limit() {
        let c = (100.0f64 / 50.0).ln();
        let m = LevyModel::new(0.04, 0.08, 0.2, LevyMeasureSpec::none().with_atoms(vec![Atom::new(c, 0.3)])).unwrap();
        let p = lambda_beta_params(&m, 100.0, 50.0).unwrap();
        assert_eq!(p.lambda, 0.3);
        // the atom sits on the open boundary of the tail
        assert_eq!(p.delta_bar, 0.08);
    }

    #[test]
    fn diffusive_rate_by_hand() {
        let p = AsymptoticParams::from_model(&bs(0.05, 0.0), 100.0).unwrap();
        let g = rate_formula(&p, RateLaw::DiffusiveSqrtLog, 0.01).unwrap().gap;
        let oracle = 20.0 * (0.01 * 100f64.ln()).sqrt();
        assert!((g - oracle).abs() < 1e-12);
        assert!((g - 4.2919).abs() < 1e-4);
        let crit = rate_formula(&p, RateLaw::FiniteActivityCritical, 0.01).unwrap().gap;
        assert!((crit / g - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn stable_power_law_by_hand() {
        let mut p = AsymptoticParams::from_model(&bs(0.05, 0.0), 100.0).unwrap();
        p.stable = Some((1.0, 1.5));
        let theta: f64 = 1e-4;
        let g = rate_formula(&p, RateLaw::StablePower, theta).unwrap().gap;
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let oracle = 100.0 * (pi_sqrt / 0.5).powf(2.0 / 3.0) * theta.powf(2.0 / 3.0) * theta.ln().abs().powf(1.0 / 3.0);
        assert!((g - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn negative_drift_law_needs_y_star() {
        let p = AsymptoticParams::from_model(&bs(0.04, 0.08), 100.0).unwrap();
        assert_eq!(rate_formula(&p, RateLaw::DiffusiveNegativeDrift, 0.01), Err(Error::MissingYStar));
        let p = p.with_y_star(0.9);
        let g = rate_formula(&p, RateLaw::DiffusiveNegativeDrift, 0.01).unwrap().gap;
        assert!((g - 0.9 * 0.2 * 50.0 * 0.1).abs() < 1e-9);
    }

    #[test]
    fn expansion_reduces_to_payoff_when_v_vanishes() {
        let p = AsymptoticParams::from_model(&bs(0.04, 0.08), 100.0).unwrap();
        let theta: f64 = 0.01;
        let e = second_order_expansion(&p, -0.5, theta, 0.0).unwrap();
        let payoff = 100.0 - 50.0 * (-0.5 * theta.sqrt()).exp();
        assert!((e - payoff).abs() < 1e-9);
        let e = second_order_expansion(&p, -0.5, theta, 0.3).unwrap();
        assert!((e - payoff - 0.2 * 50.0 * 0.08 * 0.3 * theta.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn comparative_statics_of_xi() {
        let base = xi_limit(&bs(0.04, 0.08), 100.0).unwrap();
        assert!(xi_limit(&bs(0.04, 0.09), 100.0).unwrap() < base);
        assert!(xi_limit(&bs(0.045, 0.08), 100.0).unwrap() > base);
    }
}
