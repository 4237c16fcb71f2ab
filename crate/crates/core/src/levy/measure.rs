//! Lévy measures of the model zoo: parametric jump densities plus an
//! optional list of atoms.

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::Error;
use crate::quadrature;

/// A point mass of the Lévy measure: jumps of log-size `location` arriving
/// at rate `weight` (per unit time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> Self {
        Self { location, weight }
    }
}

/// Jump-size law of a finite-activity compound Poisson component.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// Discrete law: `(location, probability)` pairs summing to one.
    Discrete(Vec<(f64, f64)>),
    /// Uniform log-jump on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpFamily {
    None,
    FiniteActivity { intensity: f64, law: JumpLaw },
    /// Double-exponential jumps; `lambda_*` are the side intensities and the
    /// side densities are `lambda * eta * exp(-eta |z|)`.
    Kou { lambda_plus: f64, eta_plus: f64, lambda_minus: f64, eta_minus: f64 },
    /// Gaussian log-jumps `N(mean, std^2)` at rate `intensity`.
    Merton { intensity: f64, mean: f64, std: f64 },
    /// Density `c exp(-g|z|)/|z|` for `z < 0` and `c exp(-m z)/z` for `z > 0`.
    VarianceGamma { c: f64, g: f64, m: f64 },
    /// Density `c_minus exp(-g|z|)/|z|^(1+alpha_minus)` for `z < 0` and
    /// `c_plus exp(-m z)/z^(1+alpha_plus)` for `z > 0`.
    TemperedStable {
        c_plus: f64,
        c_minus: f64,
        g: f64,
        m: f64,
        alpha_plus: f64,
        alpha_minus: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyMeasureSpec {
    pub family: JumpFamily,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Negative,
    Positive,
}

/// Integration domain on the jump-size axis with open/closed ends; the
/// origin is always excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }
    pub fn whole() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }
    pub fn positive() -> Self {
        Self::open(0.0, f64::INFINITY)
    }
    pub fn negative() -> Self {
        Self::open(f64::NEG_INFINITY, 0.0)
    }
    pub fn contains(&self, z: f64) -> bool {
        let above = if self.lo_closed { z >= self.lo } else { z > self.lo };
        let below = if self.hi_closed { z <= self.hi } else { z < self.hi };
        above && below && z != 0.0
    }
}

const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-14;
const MAX_SEGMENTS: usize = 2000;
// below this |z| the integrand is extrapolated as a power law
const POWER_LAW_CUTOFF: f64 = 1e-14;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl LevyMeasureSpec {
    pub fn none() -> Self {
        Self { family: JumpFamily::None, atoms: Vec::new() }
    }

    pub fn new(family: JumpFamily) -> Self {
        Self { family, atoms: Vec::new() }
    }

    pub fn with_atoms(mut self, atoms: Vec<Atom>) -> Self {
        self.atoms = atoms;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        for a in &self.atoms {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return bad("atom weights must be strictly positive");
            }
            if a.location == 0.0 || !a.location.is_finite() {
                return bad("atom locations must be finite and nonzero");
            }
        }
        match &self.family {
            JumpFamily::None => {}
            JumpFamily::FiniteActivity { intensity, law } => {
                if !(*intensity >= 0.0 && intensity.is_finite()) {
                    return bad("finite-activity intensity must be nonnegative");
                }
                match law {
                    JumpLaw::Discrete(points) => {
                        let total: f64 = points.iter().map(|p| p.1).sum();
                        if points.iter().any(|p| p.1 <= 0.0 || p.0 == 0.0 || !p.0.is_finite()) {
                            return bad("discrete jump law needs positive probabilities at nonzero sizes");
                        }
                        if (total - 1.0).abs() > 1e-9 {
                            return bad("discrete jump probabilities must sum to one");
                        }
                    }
                    JumpLaw::Uniform { lo, hi } => {
                        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                            return bad("uniform jump law needs lo < hi");
                        }
                    }
                }
            }
            JumpFamily::Kou { lambda_plus, eta_plus, lambda_minus, eta_minus } => {
                if *lambda_plus < 0.0 || *lambda_minus < 0.0 {
                    return bad("Kou intensities must be nonnegative");
                }
                if *lambda_plus > 0.0 && *eta_plus <= 1.0 {
                    return bad("Kou eta_plus must exceed 1 for exp-integrability of up jumps");
                }
                if *lambda_minus > 0.0 && *eta_minus <= 0.0 {
                    return bad("Kou eta_minus must be positive");
                }
            }
            JumpFamily::Merton { intensity, std, .. } => {
                if *intensity < 0.0 || *std <= 0.0 {
                    return bad("Merton needs intensity >= 0 and std > 0");
                }
            }
            JumpFamily::VarianceGamma { c, g, m } => {
                if *c <= 0.0 || *g <= 0.0 || *m <= 1.0 {
                    return bad("variance gamma needs c > 0, g > 0, m > 1");
                }
            }
            JumpFamily::TemperedStable { c_plus, c_minus, g, m, alpha_plus, alpha_minus } => {
                if *c_plus < 0.0 || *c_minus < 0.0 || *c_plus + *c_minus == 0.0 {
                    return bad("tempered stable needs nonnegative scales, not both zero");
                }
                if *c_plus > 0.0 && (*m <= 1.0 || !(*alpha_plus > 0.0 && *alpha_plus < 2.0)) {
                    return bad("tempered stable positive side needs m > 1 and alpha in (0,2)");
                }
                if *c_minus > 0.0 && (*g <= 0.0 || !(*alpha_minus > 0.0 && *alpha_minus < 2.0)) {
                    return bad("tempered stable negative side needs g > 0 and alpha in (0,2)");
                }
            }
        }
        // admissibility: ∫ min(1, z^2) ν(dz) < ∞
        let adm = self.integrate(|z| (z * z).min(1.0), Interval::whole())?;
        if !adm.is_finite() {
            return Err(Error::NonIntegrable("min(1, z^2)".into()));
        }
        // exp-integrability of the upper tail
        let tail = self.integrate(|z| z.exp(), Interval::open(1.0, f64::INFINITY))?;
        if !tail.is_finite() {
            return Err(Error::NonIntegrable("e^z on (1, inf)".into()));
        }
        Ok(())
    }

    /// Every atom of the measure, including those of a discrete
    /// finite-activity law, with weights scaled to intensities.
    pub fn all_atoms(&self) -> Vec<Atom> {
        let mut out = self.atoms.clone();
        if let JumpFamily::FiniteActivity { intensity, law: JumpLaw::Discrete(points) } = &self.family {
            out.extend(points.iter().map(|&(z, p)| Atom::new(z, intensity * p)));
        }
        out
    }

    /// Lévy density (absolutely continuous part) at `z != 0`.
    pub fn density(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        match &self.family {
            JumpFamily::None => 0.0,
            JumpFamily::FiniteActivity { intensity, law } => match law {
                JumpLaw::Discrete(_) => 0.0,
                JumpLaw::Uniform { lo, hi } => {
                    if z >= *lo && z <= *hi {
                        intensity / (hi - lo)
                    } else {
                        0.0
                    }
                }
            },
            JumpFamily::Kou { lambda_plus, eta_plus, lambda_minus, eta_minus } => {
                if z > 0.0 {
                    lambda_plus * eta_plus * (-eta_plus * z).exp()
                } else {
                    lambda_minus * eta_minus * (eta_minus * z).exp()
                }
            }
            JumpFamily::Merton { intensity, mean, std } => {
                let u = (z - mean) / std;
                intensity * (-0.5 * u * u).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            JumpFamily::VarianceGamma { c, g, m } => {
                if z > 0.0 {
                    c * (-m * z).exp() / z
                } else {
                    c * (g * z).exp() / -z
                }
            }
            JumpFamily::TemperedStable { c_plus, c_minus, g, m, alpha_plus, alpha_minus } => {
                if z > 0.0 {
                    if *c_plus == 0.0 {
                        0.0
                    } else {
                        c_plus * (-m * z).exp() / z.powf(1.0 + alpha_plus)
                    }
                } else if *c_minus == 0.0 {
                    0.0
                } else {
                    c_minus * (g * z).exp() / (-z).powf(1.0 + alpha_minus)
                }
            }
        }
    }

    /// Whether the density side carries infinitely many small jumps.
    pub fn side_infinite_activity(&self, side: Side) -> bool {
        match &self.family {
            JumpFamily::VarianceGamma { .. } => true,
            JumpFamily::TemperedStable { c_plus, c_minus, .. } => match side {
                Side::Positive => *c_plus > 0.0,
                Side::Negative => *c_minus > 0.0,
            },
            _ => false,
        }
    }

    pub fn infinite_activity(&self) -> bool {
        self.side_infinite_activity(Side::Negative) || self.side_infinite_activity(Side::Positive)
    }

    /// Whether `∫_{0<|z|<1, side} |z| ν(dz) = ∞`.
    pub fn side_infinite_variation(&self, side: Side) -> bool {
        match &self.family {
            JumpFamily::TemperedStable { c_plus, c_minus, alpha_plus, alpha_minus, .. } => match side {
                Side::Positive => *c_plus > 0.0 && *alpha_plus >= 1.0,
                Side::Negative => *c_minus > 0.0 && *alpha_minus >= 1.0,
            },
            _ => false,
        }
    }

    pub fn infinite_variation(&self) -> bool {
        self.side_infinite_variation(Side::Negative) || self.side_infinite_variation(Side::Positive)
    }

    /// Total mass of the measure when it is finite.
    pub fn total_intensity(&self) -> Option<f64> {
        if self.infinite_activity() {
            return None;
        }
        let atoms: f64 = self.atoms.iter().map(|a| a.weight).sum();
        let family = match &self.family {
            JumpFamily::None => 0.0,
            JumpFamily::FiniteActivity { intensity, .. } => *intensity,
            JumpFamily::Kou { lambda_plus, lambda_minus, .. } => lambda_plus + lambda_minus,
            JumpFamily::Merton { intensity, .. } => *intensity,
            _ => unreachable!("infinite activity handled above"),
        };
        Some(atoms + family)
    }

    /// Exponential-moment bounds `(a_plus, a_minus)`: `∫_{z>1} e^{p z} ν` is
    /// finite for `p < a_plus` and `∫_{z<-1} e^{-p z} ν` for `p < a_minus`.
    pub fn exponential_strip(&self) -> (f64, f64) {
        let inf = f64::INFINITY;
        match &self.family {
            JumpFamily::Kou { lambda_plus, eta_plus, lambda_minus, eta_minus } => (
                if *lambda_plus > 0.0 { *eta_plus } else { inf },
                if *lambda_minus > 0.0 { *eta_minus } else { inf },
            ),
            JumpFamily::VarianceGamma { g, m, .. } => (*m, *g),
            JumpFamily::TemperedStable { c_plus, c_minus, g, m, .. } => (
                if *c_plus > 0.0 { *m } else { inf },
                if *c_minus > 0.0 { *g } else { inf },
            ),
            _ => (inf, inf),
        }
    }

    /// Jump cumulant `∫ (e^{w z} - 1 - w z 1_{comp}(z)) ν(dz)` where the
    /// linear compensator is applied on tempered-stable sides only. Any
    /// linear-in-`w` convention works for the martingale-normalised exponent.
    pub fn cumulant(&self, w: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in self.all_atoms() {
            acc += a.weight * ((w * a.location).exp() - one);
        }
        match &self.family {
            JumpFamily::None => {}
            JumpFamily::FiniteActivity { intensity, law } => {
                if let JumpLaw::Uniform { lo, hi } = law {
                    let mgf = if w.norm() < 1e-12 {
                        one + w * (0.5 * (lo + hi))
                    } else {
                        ((w * *hi).exp() - (w * *lo).exp()) / (w * (hi - lo))
                    };
                    acc += *intensity * (mgf - one);
                }
            }
            JumpFamily::Kou { lambda_plus, eta_plus, lambda_minus, eta_minus } => {
                if *lambda_plus > 0.0 {
                    acc += *lambda_plus * (*eta_plus / (*eta_plus - w) - one);
                }
                if *lambda_minus > 0.0 {
                    acc += *lambda_minus * (*eta_minus / (*eta_minus + w) - one);
                }
            }
            JumpFamily::Merton { intensity, mean, std } => {
                acc += *intensity * ((w * *mean + 0.5 * std * std * w * w).exp() - one);
            }
            JumpFamily::VarianceGamma { c, g, m } => {
                acc -= *c * ((one - w / *m).ln() + (one + w / *g).ln());
            }
            JumpFamily::TemperedStable { c_plus, c_minus, g, m, alpha_plus, alpha_minus } => {
                if *c_plus > 0.0 {
                    acc += *c_plus * ts_side_cumulant(w, *m, *alpha_plus);
                }
                if *c_minus > 0.0 {
                    acc += *c_minus * ts_side_cumulant(-w, *g, *alpha_minus);
                }
            }
        }
        acc
    }

    /// Closed form of `∫_{(0,∞)} (e^z - 1) ν(dz)`; `None` when it diverges.
    pub fn positive_exp_moment(&self) -> Option<f64> {
        if self.side_infinite_variation(Side::Positive) {
            return None;
        }
        let nrm = std_normal();
        let atoms: f64 = self
            .all_atoms()
            .iter()
            .filter(|a| a.location > 0.0)
            .map(|a| a.weight * (a.location.exp() - 1.0))
            .sum();
        let family = match &self.family {
            JumpFamily::None => 0.0,
            JumpFamily::FiniteActivity { intensity, law } => match law {
                JumpLaw::Discrete(_) => 0.0,
                JumpLaw::Uniform { lo, hi } => {
                    let a = lo.max(0.0);
                    let b = hi.max(0.0);
                    intensity / (hi - lo) * ((b.exp() - b) - (a.exp() - a))
                }
            },
            JumpFamily::Kou { lambda_plus, eta_plus, .. } => {
                if *lambda_plus > 0.0 {
                    lambda_plus / (eta_plus - 1.0)
                } else {
                    0.0
                }
            }
            JumpFamily::Merton { intensity, mean, std } => {
                let s2 = std * std;
                intensity
                    * ((mean + 0.5 * s2).exp() * nrm.cdf((mean + s2) / std) - nrm.cdf(mean / std))
            }
            JumpFamily::VarianceGamma { c, m, .. } => c * (m / (m - 1.0)).ln(),
            JumpFamily::TemperedStable { c_plus, m, alpha_plus, .. } => {
                if *c_plus > 0.0 {
                    c_plus * gamma(-alpha_plus) * ((m - 1.0).powf(*alpha_plus) - m.powf(*alpha_plus))
                } else {
                    0.0
                }
            }
        };
        Some(atoms + family)
    }

    /// Closed form of `∫ (e^z - 1)^- ν(dz)` (only negative jumps contribute);
    /// `None` when the negative side has infinite variation.
    pub fn negative_exp_moment(&self) -> Option<f64> {
        if self.side_infinite_variation(Side::Negative) {
            return None;
        }
        let nrm = std_normal();
        let atoms: f64 = self
            .all_atoms()
            .iter()
            .filter(|a| a.location < 0.0)
            .map(|a| a.weight * (1.0 - a.location.exp()))
            .sum();
        let family = match &self.family {
            JumpFamily::None => 0.0,
            JumpFamily::FiniteActivity { intensity, law } => match law {
                JumpLaw::Discrete(_) => 0.0,
                JumpLaw::Uniform { lo, hi } => {
                    let a = lo.min(0.0);
                    let b = hi.min(0.0);
                    intensity / (hi - lo) * ((b - b.exp()) - (a - a.exp()))
                }
            },
            JumpFamily::Kou { lambda_minus, eta_minus, .. } => {
                if *lambda_minus > 0.0 {
                    lambda_minus / (eta_minus + 1.0)
                } else {
                    0.0
                }
            }
            JumpFamily::Merton { intensity, mean, std } => {
                let s2 = std * std;
                intensity
                    * (nrm.cdf(-mean / std) - (mean + 0.5 * s2).exp() * nrm.cdf(-(mean + s2) / std))
            }
            JumpFamily::VarianceGamma { c, g, .. } => c * ((g + 1.0) / g).ln(),
            JumpFamily::TemperedStable { c_minus, g, alpha_minus, .. } => {
                if *c_minus > 0.0 {
                    c_minus * gamma(-alpha_minus) * (g.powf(*alpha_minus) - (g + 1.0).powf(*alpha_minus))
                } else {
                    0.0
                }
            }
        };
        Some(atoms + family)
    }

    /// Density discontinuities and bumps worth splitting quadrature at.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            JumpFamily::FiniteActivity { law: JumpLaw::Uniform { lo, hi }, .. } => vec![*lo, *hi],
            JumpFamily::Merton { mean, std, .. } => {
                vec![mean - 4.0 * std, *mean, mean + 4.0 * std]
            }
            _ => Vec::new(),
        }
    }

    /// `∫_domain f(z) ν(dz)`: atoms are summed exactly, the density part is
    /// integrated side by side under the substitution `|z| = e^u` with a
    /// power-law extrapolation of the integrand below `|z| = 1e-14`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, domain: Interval) -> Result<f64, Error> {
        let mut total: f64 = self
            .all_atoms()
            .iter()
            .filter(|a| domain.contains(a.location))
            .map(|a| a.weight * f(a.location))
            .sum();
        if matches!(self.family, JumpFamily::None)
            || matches!(self.family, JumpFamily::FiniteActivity { law: JumpLaw::Discrete(_), .. })
        {
            return Ok(total);
        }
        let breaks = self.breakpoints();
        // positive side: |z| in [max(lo,0), hi]
        if domain.hi > 0.0 {
            let lo = domain.lo.max(0.0);
            total += self.integrate_side(&f, Side::Positive, lo, domain.hi, &breaks)?;
        }
        if domain.lo < 0.0 {
            let lo = (-domain.hi).max(0.0);
            total += self.integrate_side(&f, Side::Negative, lo, -domain.lo, &breaks)?;
        }
        Ok(total)
    }

    fn integrate_side<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        side: Side,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Result<f64, Error> {
        if b <= a {
            return Ok(0.0);
        }
        let sign = if side == Side::Positive { 1.0 } else { -1.0 };
        let g = |r: f64| {
            let z = sign * r;
            let v = self.density(z);
            if v == 0.0 {
                0.0
            } else {
                f(z) * v
            }
        };
        let mut result = 0.0;
        let mut lower = a;
        if a == 0.0 {
            lower = POWER_LAW_CUTOFF;
            result += small_jump_remainder(&g, lower)?;
        }
        let upper = if b.is_finite() { b } else { self.upper_cutoff(&g, lower)? };
        if upper <= lower {
            return Ok(result);
        }
        let mut cuts: Vec<f64> = breaks
            .iter()
            .map(|&z| sign * z)
            .filter(|&r| r > lower && r < upper)
            .collect();
        cuts.push(1.0_f64.clamp(lower, upper));
        cuts.push(lower);
        cuts.push(upper);
        cuts.sort_by(|x, y| x.total_cmp(y));
        cuts.dedup();
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            if q <= p {
                continue;
            }
            let est = quadrature::integrate(
                |u: f64| {
                    let r = u.exp();
                    g(r) * r
                },
                p.ln(),
                q.ln(),
                ABS_TOL,
                REL_TOL,
                MAX_SEGMENTS,
            );
            result += est.value;
        }
        if !result.is_finite() {
            return Err(Error::NonIntegrable("density integral overflowed".into()));
        }
        Ok(result)
    }

    /// Radius beyond which `|g(r)| r` is negligible.
    fn upper_cutoff<G: Fn(f64) -> f64>(&self, g: &G, lower: f64) -> Result<f64, Error> {
        let mut r = lower.max(1.0);
        let mut quiet = 0;
        while r < 1e4 {
            let v = (g(r) * r).abs();
            if !v.is_finite() {
                return Err(Error::NonIntegrable("integrand not finite in the tail".into()));
            }
            if v < 1e-30 {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(r);
                }
            } else {
                quiet = 0;
            }
            r *= 1.5;
        }
        Err(Error::NonIntegrable("tail does not decay".into()))
    }
}

/// `∫_0^{r0} g(r) dr` assuming `g(r) ~ A r^q` near zero; divergent when
/// `q <= -1`.
fn small_jump_remainder<G: Fn(f64) -> f64>(g: &G, r0: f64) -> Result<f64, Error> {
    let g0 = g(r0);
    let g1 = g(r0 * 1e2);
    if g0 == 0.0 && g1 == 0.0 {
        return Ok(0.0);
    }
    if g0 == 0.0 || g1 == 0.0 || g0.signum() != g1.signum() {
        return Ok(0.0);
    }
    let q = (g1 / g0).abs().ln() / 100f64.ln();
    if q <= -1.0 + 1e-3 {
        return Err(Error::NonIntegrable(format!(
            "integrand behaves like |z|^{q:.3} at the origin"
        )));
    }
    Ok(g0 * r0 / (q + 1.0))
}

/// `e^x - 1 - x` without cancellation near zero.
pub fn exp_m1_minus_linear(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() - x
    }
}

/// `∫_0^∞ (e^{w r} - 1 - w r) e^{-m r} r^{-1-alpha} dr`.
fn ts_side_cumulant(w: Complex64, m: f64, alpha: f64) -> Complex64 {
    let mw = Complex64::new(m, 0.0) - w;
    if (alpha - 1.0).abs() < 1e-12 {
        return mw * (mw / m).ln() + w;
    }
    gamma(-alpha) * (mw.powf(alpha) - m.powf(alpha) + alpha * m.powf(alpha - 1.0) * w)
}
