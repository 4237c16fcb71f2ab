//! Jump operator on a log-price grid: hat-function weights for jumps of size
//! at least `ε_i`, with smaller jumps folded into diffusion and drift.

use rayon::prelude::*;

use crate::error::Result;
use crate::levy::{Interval, LevyModel, Side};
use crate::quadrature::gauss_legendre8;

use super::grid::Grid;

#[derive(Debug, Clone)]
struct Row {
    first: usize,
    weights: Vec<f64>,
}

/// Per-node jump data. Rows for the two boundary nodes are empty.
#[derive(Debug, Clone)]
pub struct JumpStencil {
    rows: Vec<Row>,
    /// `ν(|z| ≥ ε_i)`, including mass that leaves the grid.
    pub intensity: Vec<f64>,
    /// `ν` and `∫ e^z ν` over jumps landing below `x_min`.
    pub lower_mass: Vec<f64>,
    pub lower_exp_mass: Vec<f64>,
    /// `∫_{|z|<ε_i} z² ν`, added to the diffusion.
    pub small_variance: Vec<f64>,
    /// `∫_{|z|≥ε_i} (e^z - 1) ν`, the compensator of the explicit jumps.
    pub compensator: Vec<f64>,
}

impl JumpStencil {
    pub fn build(model: &LevyModel, grid: &Grid) -> Result<Self> {
        let n = grid.n_x();
        let measure = &model.measure;
        let fold_neg = measure.side_infinite_activity(Side::Negative);
        let fold_pos = measure.side_infinite_activity(Side::Positive);
        let breaks = measure.breakpoints();
        let atoms = measure.all_atoms();
        let x = &grid.x;
        let (x_min, x_max) = (grid.x_min(), grid.x_max());

        let per_node: Vec<Result<(Row, [f64; 5])>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if i == 0 || i + 1 == n {
                    return Ok((Row { first: 0, weights: Vec::new() }, [0.0; 5]));
                }
                let h = grid.local_spacing(i);
                let eps_neg = if fold_neg { h } else { 0.0 };
                let eps_pos = if fold_pos { h } else { 0.0 };
                let mut w = vec![0.0; n];
                for k in 0..n - 1 {
                    let (y0, y1) = (x[k], x[k + 1]);
                    let cell = y1 - y0;
                    let (z0, z1) = (y0 - x[i], y1 - x[i]);
                    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(2);
                    if z1 <= 0.0 {
                        pieces.push((z0, z1.min(-eps_neg)));
                    } else if z0 >= 0.0 {
                        pieces.push((z0.max(eps_pos), z1));
                    } else {
                        pieces.push((z0, -eps_neg));
                        pieces.push((eps_pos, z1));
                    }
                    let (mut left, mut right) = (0.0, 0.0);
                    for (p, q) in pieces {
                        if q <= p {
                            continue;
                        }
                        let singular = if q <= 0.0 { fold_neg } else { fold_pos };
                        for (a, b) in split_piece(p, q, singular, &breaks) {
                            // ∫ φ_k ν and ∫ φ_{k+1} ν on this piece
                            right += gauss_legendre8(
                                |z| measure.density(z) * (x[i] + z - y0) / cell,
                                a,
                                b,
                            );
                            left += gauss_legendre8(
                                |z| measure.density(z) * (y1 - x[i] - z) / cell,
                                a,
                                b,
                            );
                        }
                    }
                    w[k] += left;
                    w[k + 1] += right;
                }
                for atom in &atoms {
                    let z = atom.location;
                    if (z < 0.0 && -z < eps_neg) || (z > 0.0 && z < eps_pos) {
                        continue;
                    }
                    let y = x[i] + z;
                    if y < x_min || y > x_max {
                        continue;
                    }
                    let k = x.partition_point(|&v| v <= y).saturating_sub(1).min(n - 2);
                    let t = (y - x[k]) / (x[k + 1] - x[k]);
                    w[k] += atom.weight * (1.0 - t);
                    w[k + 1] += atom.weight * t;
                }
                let lower = Interval::open(f64::NEG_INFINITY, x_min - x[i]);
                let upper = Interval::open(x_max - x[i], f64::INFINITY);
                let lower_mass = measure.integrate(|_| 1.0, lower)?;
                let lower_exp_mass = measure.integrate(|z| z.exp(), lower)?;
                let upper_mass = measure.integrate(|_| 1.0, upper)?;
                let small_variance = if eps_neg > 0.0 || eps_pos > 0.0 {
                    measure.integrate(|z| z * z, Interval::open(-eps_neg, eps_pos))?
                } else {
                    0.0
                };
                let neg = Interval { lo: f64::NEG_INFINITY, hi: -eps_neg, lo_closed: false, hi_closed: true };
                let pos = Interval { lo: eps_pos, hi: f64::INFINITY, lo_closed: true, hi_closed: false };
                let compensator = measure.integrate(|z| z.exp_m1(), neg)? + measure.integrate(|z| z.exp_m1(), pos)?;
                let first = w.iter().position(|&v| v != 0.0).unwrap_or(0);
                let last = w.iter().rposition(|&v| v != 0.0).map_or(0, |p| p + 1);
                let inside: f64 = w.iter().sum();
                let weights = if last > first { w[first..last].to_vec() } else { Vec::new() };
                let intensity = inside + lower_mass + upper_mass;
                Ok((Row { first, weights }, [intensity, lower_mass, lower_exp_mass, small_variance, compensator]))
            })
            .collect();

        let mut rows = Vec::with_capacity(n);
        let mut cols: [Vec<f64>; 5] = Default::default();
        for item in per_node {
            let (row, vals) = item?;
            rows.push(row);
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        let [intensity, lower_mass, lower_exp_mass, small_variance, compensator] = cols;
        Ok(Self { rows, intensity, lower_mass, lower_exp_mass, small_variance, compensator })
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensity.iter().cloned().fold(0.0, f64::max)
    }

    /// `Σ_j w_ij u_j` for every node.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .par_iter()
            .map(|row| {
                row.weights
                    .iter()
                    .zip(&u[row.first..row.first + row.weights.len()])
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.intensity.iter().all(|&l| l == 0.0) && self.small_variance.iter().all(|&v| v == 0.0)
    }
}

/// Sub-intervals of `[p, q]` (not straddling 0) on which an 8-point rule is
/// accurate: cut at density breakpoints and, near a singular origin, into
/// pieces whose end ratio is at most 2.
fn split_piece(p: f64, q: f64, singular: bool, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts = vec![p, q];
    cuts.extend(breaks.iter().copied().filter(|&b| b > p && b < q));
    if singular {
        let (a, b) = (p.abs().min(q.abs()), p.abs().max(q.abs()));
        if a > 0.0 && b / a > 2.0 {
            let sign = if q <= 0.0 { -1.0 } else { 1.0 };
            let n = (b / a).log2().ceil() as usize;
            let ratio = (b / a).powf(1.0 / n as f64);
            let mut r = a;
            for _ in 1..n {
                r *= ratio;
                cuts.push(sign * r);
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}
