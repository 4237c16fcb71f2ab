use std::fmt;

use super::LevyModel;
use crate::asymptotics;

/// Threshold below which `|d|` is treated as zero.
pub const D_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Finite,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variation {
    Finite,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryLimit {
    Strike,
    Xi(f64),
}

impl BoundaryLimit {
    pub fn value(&self, strike: f64) -> f64 {
        match self {
            BoundaryLimit::Strike => strike,
            BoundaryLimit::Xi(xi) => *xi,
        }
    }
}

/// Near-expiry law of the critical price. The display labels are the
/// tags used in reports and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateLaw {
    /// `σK√(θ|ln θ|)`, finite activity with `d > 0`.
    FiniteActivitySqrtLog,
    /// `√2 σK√(θ|ln θ|)`, finite activity with `d = 0`.
    FiniteActivityCritical,
    /// `y σ ξ √θ`, finite activity with `d < 0`.
    FiniteActivityNegativeDrift,
    /// `K/b - 1 ≈ θ ∫(e^z - 1)^- ν`, pure-jump finite variation.
    PureJumpLinear,
    /// `σK√(θ|ln θ|) + O(√θ)`, diffusive with `d > 0`.
    DiffusiveSqrtLog,
    /// `K (c Γ(2-α)/(α-1))^{1/α} θ^{1/α} |ln θ|^{1-1/α}`, pure-jump with
    /// tempered-stable negative jumps of index `α ∈ (1,2)`.
    StablePower,
    /// `y σ ξ √θ`, diffusive finite variation with `d < 0`.
    DiffusiveNegativeDrift,
    None,
}

impl RateLaw {
    pub fn label(&self) -> &'static str {
        match self {
            RateLaw::FiniteActivitySqrtLog => "Thm3.1a",
            RateLaw::FiniteActivityCritical => "Thm3.1b",
            RateLaw::FiniteActivityNegativeDrift => "Thm3.1c",
            RateLaw::PureJumpLinear => "Thm3.4",
            RateLaw::DiffusiveSqrtLog => "Thm3.5/4.1",
            RateLaw::StablePower => "Thm3.7",
            RateLaw::DiffusiveNegativeDrift => "Thm5.4",
            RateLaw::None => "none",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [
            RateLaw::FiniteActivitySqrtLog,
            RateLaw::FiniteActivityCritical,
            RateLaw::FiniteActivityNegativeDrift,
            RateLaw::PureJumpLinear,
            RateLaw::DiffusiveSqrtLog,
            RateLaw::StablePower,
            RateLaw::DiffusiveNegativeDrift,
            RateLaw::None,
        ]
        .into_iter()
        .find(|law| law.label() == s)
    }

    /// Whether the law needs the stopping threshold `y*`.
    pub fn needs_y_star(&self) -> bool {
        matches!(self, RateLaw::FiniteActivityNegativeDrift | RateLaw::DiffusiveNegativeDrift)
    }
}

impl fmt::Display for RateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    /// Signed `d`; `-inf` when the positive jumps have infinite variation.
    pub d: f64,
    pub activity: Activity,
    pub variation: Variation,
    pub brownian: bool,
    pub boundary_limit: BoundaryLimit,
    pub applicable_rate: RateLaw,
}

impl RegimeReport {
    pub fn d_sign(&self) -> std::cmp::Ordering {
        if self.d.abs() <= D_ZERO_TOL {
            std::cmp::Ordering::Equal
        } else if self.d > 0.0 {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Less
        }
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.d_sign() {
            std::cmp::Ordering::Greater => "d>0",
            std::cmp::Ordering::Equal => "d=0",
            std::cmp::Ordering::Less => "d<0",
        };
        let limit = match self.boundary_limit {
            BoundaryLimit::Strike => "K".to_string(),
            BoundaryLimit::Xi(xi) => format!("xi={xi:.6}"),
        };
        write!(f, "{sign}, limit={limit}, rate={}", self.applicable_rate)
    }
}

pub(super) fn classify(model: &LevyModel, strike: f64) -> RegimeReport {
    let d = model.d_or_neg_infinity();
    let finite_activity = model.is_finite_activity();
    let finite_variation = model.is_finite_variation();
    let brownian = model.sigma > 0.0;
    let activity = if finite_activity { Activity::Finite } else { Activity::Infinite };
    let variation = if finite_variation { Variation::Finite } else { Variation::Infinite };

    let mut report = RegimeReport {
        d,
        activity,
        variation,
        brownian,
        boundary_limit: BoundaryLimit::Strike,
        applicable_rate: RateLaw::None,
    };

    use std::cmp::Ordering::*;
    report.applicable_rate = match report.d_sign() {
        Greater => {
            if brownian {
                RateLaw::DiffusiveSqrtLog
            } else if finite_variation {
                RateLaw::PureJumpLinear
            } else if stable_negative_index(model).is_some() {
                RateLaw::StablePower
            } else {
                RateLaw::None
            }
        }
        Equal => {
            if brownian && finite_activity {
                RateLaw::FiniteActivityCritical
            } else {
                RateLaw::None
            }
        }
        Less => {
            if let Ok(xi) = asymptotics::xi_limit(model, strike) {
                report.boundary_limit = BoundaryLimit::Xi(xi);
            }
            if !brownian || !finite_variation {
                RateLaw::None
            } else if has_continuous_density(model) {
                RateLaw::DiffusiveNegativeDrift
            } else if finite_activity {
                RateLaw::FiniteActivityNegativeDrift
            } else {
                RateLaw::None
            }
        }
    };
    report
}

/// Index `α ∈ (1,2)` of a tempered-stable negative side.
pub(crate) fn stable_negative_index(model: &LevyModel) -> Option<(f64, f64)> {
    if let super::JumpFamily::TemperedStable { c_minus, alpha_minus, .. } = model.measure.family {
        if c_minus > 0.0 && alpha_minus > 1.0 && alpha_minus < 2.0 {
            return Some((c_minus, alpha_minus));
        }
    }
    None
}

fn has_continuous_density(model: &LevyModel) -> bool {
    use super::{JumpFamily, JumpLaw};
    model.measure.all_atoms().is_empty()
        && !matches!(
            model.measure.family,
            JumpFamily::FiniteActivity { law: JumpLaw::Uniform { .. }, .. }
        )
}
