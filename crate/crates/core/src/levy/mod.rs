//! Exponential Lévy market models `S_t = S_0 e^{(r-δ)t + X_t}` under the
//! martingale normalisation `E e^{X_t} = 1`.

mod measure;
mod regime;
mod simulate;

pub use measure::{exp_m1_minus_linear, Atom, Interval, JumpFamily, JumpLaw, LevyMeasureSpec, Side};
pub use regime::{Activity, BoundaryLimit, RateLaw, RegimeReport, Variation, D_ZERO_TOL};
pub(crate) use regime::stable_negative_index;
pub use simulate::{ks_distance, small_time_clt_diagnostic, simulate_increments, CltRow, CltTable, IncrementSampler};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    pub r: f64,
    pub delta: f64,
    pub sigma: f64,
    pub measure: LevyMeasureSpec,
}

impl LevyModel {
    pub fn new(r: f64, delta: f64, sigma: f64, measure: LevyMeasureSpec) -> Result<Self> {
        let model = Self { r, delta, sigma, measure };
        model.validate()?;
        Ok(model)
    }

    pub fn black_scholes(r: f64, delta: f64, sigma: f64) -> Result<Self> {
        Self::new(r, delta, sigma, LevyMeasureSpec::none())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("delta", self.delta), ("sigma", self.sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.measure.validate()?;
        // no-arbitrage: each direction needs diffusion, jumps, or infinite
        // variation on the opposite side
        let down = self.sigma > 0.0
            || self.side_mass_positive(Side::Negative)
            || self.measure.side_infinite_variation(Side::Positive);
        let up = self.sigma > 0.0
            || self.side_mass_positive(Side::Positive)
            || self.measure.side_infinite_variation(Side::Negative);
        if !(down && up) {
            return Err(Error::InvalidParameter(
                "model admits arbitrage: needs both upward and downward randomness".into(),
            ));
        }
        Ok(())
    }

    fn side_mass_positive(&self, side: Side) -> bool {
        let domain = match side {
            Side::Negative => Interval::negative(),
            Side::Positive => Interval::positive(),
        };
        self.integrate_nu(|z| z.abs().min(1.0), domain)
            .map(|v| v > 0.0)
            .unwrap_or(true)
    }

    pub fn is_finite_activity(&self) -> bool {
        !self.measure.infinite_activity()
    }

    pub fn is_finite_variation(&self) -> bool {
        !self.measure.infinite_variation()
    }

    /// `(a_plus, a_minus)`: the exponent is defined for `-a_plus < Im u < a_minus`.
    pub fn strip(&self) -> (f64, f64) {
        self.measure.exponential_strip()
    }

    /// `ψ(u)` with `E e^{iuX_t} = e^{tψ(u)}`.
    pub fn characteristic_exponent(&self, u: Complex64) -> Result<Complex64> {
        let (a_plus, a_minus) = self.strip();
        if !(u.im > -a_plus && u.im < a_minus) {
            return Err(Error::StripViolation { im: u.im, lo: -a_plus, hi: a_minus });
        }
        Ok(self.exponent_unchecked(u))
    }

    pub(crate) fn exponent_unchecked(&self, u: Complex64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let iu = i * u;
        let half_var = 0.5 * self.sigma * self.sigma;
        let jumps = self.measure.cumulant(iu) - iu * self.measure.cumulant(Complex64::new(1.0, 0.0));
        -half_var * (u * u + iu) + jumps
    }

    /// `∫_domain f dν`, atoms summed exactly.
    pub fn integrate_nu<F: Fn(f64) -> f64>(&self, f: F, domain: Interval) -> Result<f64> {
        self.measure.integrate(f, domain)
    }

    /// `d = r - δ - ∫_{(0,∞)} (e^z - 1) ν(dz)` from the closed form.
    pub fn compute_d(&self) -> Result<f64> {
        match self.measure.positive_exp_moment() {
            Some(m) => Ok(self.r - self.delta - m),
            None => Err(Error::DivergentPositiveJumps),
        }
    }

    /// Same quantity by quadrature.
    pub fn compute_d_quadrature(&self) -> Result<f64> {
        if self.measure.side_infinite_variation(Side::Positive) {
            return Err(Error::DivergentPositiveJumps);
        }
        let m = self.integrate_nu(|z| z.exp_m1(), Interval::positive())?;
        Ok(self.r - self.delta - m)
    }

    /// `d`, with `-inf` when the positive jumps have infinite variation.
    pub fn d_or_neg_infinity(&self) -> f64 {
        self.compute_d().unwrap_or(f64::NEG_INFINITY)
    }

    /// Lévy-triplet drift under the unit truncation, implied by `ψ(-i) = 0`.
    pub fn drift(&self) -> Result<f64> {
        let jump = self.integrate_nu(
            |z| {
                if z.abs() <= 1.0 {
                    z.exp_m1() - z
                } else {
                    z.exp_m1()
                }
            },
            Interval::whole(),
        )?;
        Ok(-0.5 * self.sigma * self.sigma - jump)
    }

    /// `∫ (e^z - 1)^- ν(dz)`, the linear pure-jump rate coefficient.
    pub fn negative_exp_moment(&self) -> Result<f64> {
        match self.measure.negative_exp_moment() {
            Some(v) => Ok(v),
            None => self.integrate_nu(|z| -z.exp_m1(), Interval::negative()),
        }
    }

    pub fn classify_regime(&self, strike: f64) -> RegimeReport {
        regime::classify(self, strike)
    }
}
