//! European puts by damped Fourier inversion along a horizontal contour,
//! and the European critical price.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy::{Interval, LevyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingMethod {
    Fourier,
    ClosedFormDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuropeanQuote {
    pub theta: f64,
    pub spot: f64,
    pub strike: f64,
    pub value: f64,
    pub method: PricingMethod,
}

const MAX_NODES: usize = 2_000_000;
const TAIL_REL: f64 = 1e-17;
// algebraic tails after removing the no-jump atom
const TAIL_REL_ALGEBRAIC: f64 = 1e-15;
const QUIET_RUN: usize = 16;

/// Per-model quantities reused across prices.
#[derive(Debug, Clone)]
pub struct FourierPricer<'a> {
    model: &'a LevyModel,
    /// Imaginary part of the integration contour, inside `(-a_minus, 0)`.
    contour: f64,
    jump_second_moment: f64,
    /// `(Λ, γ)` when `X` is compound Poisson plus drift: the law of `X_θ`
    /// then has an atom of mass `e^{-Λθ}` at `γθ`.
    no_jump_atom: Option<(f64, f64)>,
}

impl<'a> FourierPricer<'a> {
    pub fn new(model: &'a LevyModel) -> Result<Self> {
        let (_, a_minus) = model.strip();
        let contour = -0.5 * a_minus.min(2.0);
        let jump_second_moment = model.integrate_nu(|z| z * z, Interval::whole())?;
        let no_jump_atom = if model.sigma == 0.0 {
            model.measure.total_intensity().map(|lambda| {
                let j1 = model.measure.cumulant(Complex64::new(1.0, 0.0)).re;
                (lambda, -j1)
            })
        } else {
            None
        };
        Ok(Self { model, contour, jump_second_moment, no_jump_atom })
    }

    /// `E (e^k - e^{X_θ})^+`.
    fn expected_payoff(&self, theta: f64, k: f64) -> Result<f64> {
        let v = self.contour;
        let sd = (theta * (self.model.sigma.powi(2) + self.jump_second_moment)).sqrt();
        let period = (40.0 / v.abs() + 2.0 * k.abs() + 10.0 * sd).max(40.0 / v.abs());
        let h = 2.0 * PI / period;
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let (atom_mass, atom_at) = match self.no_jump_atom {
            Some((lambda, gamma)) => ((-lambda * theta).exp(), gamma * theta),
            None => (0.0, 0.0),
        };
        let integrand = |u: f64| -> Complex64 {
            let z = Complex64::new(u, v);
            let transform = ((one + i * z) * k).exp() / (i * z * (one + i * z));
            let mut cf = (theta * self.model.exponent_unchecked(-z)).exp();
            if atom_mass > 0.0 {
                cf -= atom_mass * (-i * z * atom_at).exp();
            }
            transform * cf
        };
        let scale = ((1.0 - v) * k).exp();
        let tail_rel = if atom_mass > 0.0 { TAIL_REL_ALGEBRAIC } else { TAIL_REL };
        let mut sum = 0.5 * integrand(0.0).re;
        let mut quiet = 0;
        let mut n = 1;
        loop {
            let f = integrand(n as f64 * h);
            if !f.re.is_finite() {
                return Err(Error::NumericalFailure(format!("non-finite Fourier integrand at u = {}", n as f64 * h)));
            }
            sum += f.re;
            if f.norm() < tail_rel * scale {
                quiet += 1;
                if quiet >= QUIET_RUN {
                    break;
                }
            } else {
                quiet = 0;
            }
            n += 1;
            if n > MAX_NODES {
                return Err(Error::NumericalFailure(format!(
                    "Fourier integrand not decayed after {MAX_NODES} nodes (theta = {theta})"
                )));
            }
        }
        let mut value = h / PI * sum;
        if atom_mass > 0.0 {
            value += atom_mass * (k.exp() - atom_at.exp()).max(0.0);
        }
        Ok(value)
    }

    pub fn price(&self, theta: f64, spot: f64, strike: f64) -> Result<EuropeanQuote> {
        if !(theta >= 0.0 && theta.is_finite()) || !(spot >= 0.0) || !(strike > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need theta >= 0, spot >= 0, strike > 0 (got {theta}, {spot}, {strike})"
            )));
        }
        let quote = |value, method| EuropeanQuote { theta, spot, strike, value, method };
        if theta == 0.0 {
            return Ok(quote((strike - spot).max(0.0), PricingMethod::ClosedFormDegenerate));
        }
        let m = self.model;
        if spot == 0.0 {
            return Ok(quote(strike * (-m.r * theta).exp(), PricingMethod::ClosedFormDegenerate));
        }
        let forward = spot * ((m.r - m.delta) * theta).exp();
        let k = (strike / forward).ln();
        let e = self.expected_payoff(theta, k)?;
        let value = (-m.r * theta).exp() * forward * e;
        // clip round-off against the no-arbitrage bounds
        let lower = (strike * (-m.r * theta).exp() - spot * (-m.delta * theta).exp()).max(0.0);
        let upper = strike * (-m.r * theta).exp();
        Ok(quote(value.clamp(lower, upper), PricingMethod::Fourier))
    }

    /// Root of `P_e(θ, s) - (K - s)` in `(0, K)`.
    pub fn critical_price(&self, theta: f64, strike: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!("critical price needs theta > 0, got {theta}")));
        }
        let gap = |s: f64| -> Result<f64> { Ok(self.price(theta, s, strike)?.value - (strike - s)) };
        let (mut lo, mut hi) = (1e-6 * strike, (1.0 - 1e-9) * strike);
        let (mut g_lo, mut g_hi) = (gap(lo)?, gap(hi)?);
        if !(g_lo < 0.0 && g_hi > 0.0) {
            return Err(Error::BracketFailure { lo, hi });
        }
        let tol = 1e-10 * strike;
        while hi - lo > 1e-6 * strike {
            let mid = 0.5 * (lo + hi);
            let g = gap(mid)?;
            if g < 0.0 {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
                g_hi = g;
            }
        }
        // secant (regula falsi safeguarded by the bracket)
        let mut s = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        for _ in 0..50 {
            let g = gap(s)?;
            if g.abs() < tol || hi - lo < 1e-15 * strike {
                return Ok(s);
            }
            if g < 0.0 {
                lo = s;
                g_lo = g;
            } else {
                hi = s;
                g_hi = g;
            }
            let secant = lo - g_lo * (hi - lo) / (g_hi - g_lo);
            s = if secant > lo && secant < hi { secant } else { 0.5 * (lo + hi) };
        }
        Ok(s)
    }
}

pub fn price_european_put(model: &LevyModel, theta: f64, spot: f64, strike: f64) -> Result<EuropeanQuote> {
    FourierPricer::new(model)?.price(theta, spot, strike)
}

pub fn critical_price_european(model: &LevyModel, theta: f64, strike: f64) -> Result<f64> {
    FourierPricer::new(model)?.critical_price(theta, strike)
}

/// `ζ(τ) = K / b_e(T - τ) - 1`.
pub fn zeta(model: &LevyModel, tau: f64, strike: f64) -> Result<f64> {
    Ok(strike / critical_price_european(model, tau, strike)? - 1.0)
}
