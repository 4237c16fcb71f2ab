//! American put under an exponential Lévy model: the variational inequality
//! on a log-price grid, its free boundary and the early exercise premium.

pub mod boundary;
pub mod grid;
pub mod lcp;
pub mod solver;
pub mod stencil;

pub use boundary::{
    extract_boundary, premium, refinement_check, smooth_pasting_ratio, BoundaryCurve, BoundarySample, PremiumReport,
    RefinementReport,
};
pub use grid::{effective_volatility, Grid, GridConfig};
pub use solver::{march, payoff, solve, PriceSurface, SurfaceChecks};
