//! Plain-text experiment configuration with `[model]`, `[option]`, `[grid]`
//! and `[experiment]` sections of `key = value` lines.
//!
//! `[model]` keys: `kind` (`bs`, `kou`, `merton`, `vg`, `tempered_stable`
//! or its alias `cgmy`, `finite`), `r`, `delta`, `sigma`, the family
//! parameters (`lambda_plus eta_plus lambda_minus eta_minus`;
//! `intensity mean std`; `c g m`; `c_plus c_minus g m alpha_plus
//! alpha_minus`; `intensity jumps` with `jumps = z:p, z:p`) and optional
//! `atoms = z:w, z:w`.

use std::collections::HashSet;
use std::path::Path;

use ini::{Ini, Properties};

use crate::error::{Error, Result};
use crate::levy::{Atom, JumpFamily, JumpLaw, LevyMeasureSpec, LevyModel, RateLaw};
use crate::pide::GridConfig;
use crate::stopping::LocalTimeWeight;

#[derive(Debug, Clone, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub theta_max: f64,
    pub theta_min: f64,
    pub points: usize,
    /// Allowed `|intercept - 1|`; `None` picks the law's default.
    pub tolerance: Option<f64>,
    /// Overrides the law from regime classification.
    pub law: Option<RateLaw>,
    /// Skips the stopping solver when set.
    pub y_star: Option<f64>,
    pub local_time_weight: LocalTimeWeight,
    /// Late-over-early bound on the fitted residual constant.
    pub stability_factor: f64,
    pub expansion_thetas: Vec<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            theta_max: 1e-1,
            theta_min: 1e-4,
            points: 16,
            tolerance: None,
            law: None,
            y_star: None,
            local_time_weight: LocalTimeWeight::Growing,
            stability_factor: 1.25,
            expansion_thetas: vec![0.016, 0.008, 0.004, 0.002],
        }
    }
}

impl ExperimentSpec {
    /// Geometric ladder from `theta_max` down to `theta_min`.
    pub fn ladder(&self) -> Vec<f64> {
        let n = self.points;
        let ratio = (self.theta_min / self.theta_max).ln() / (n - 1) as f64;
        (0..n).map(|i| self.theta_max * (ratio * i as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model_kind: String,
    pub model: LevyModel,
    pub option: OptionSpec,
    pub grid: GridConfig,
    pub experiment: ExperimentSpec,
}

/// Typed access to one section that rejects keys nobody asked for.
struct Section<'a> {
    name: &'static str,
    props: Option<&'a Properties>,
    used: HashSet<String>,
}

impl<'a> Section<'a> {
    fn new(ini: &'a Ini, name: &'static str) -> Self {
        Self { name, props: ini.section(Some(name)), used: HashSet::new() }
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.used.insert(key.to_string());
        self.props.and_then(|p| p.get(key))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), |v| parse_f64(self.name, key, v))
    }

    fn f64_req(&mut self, key: &str) -> Result<f64> {
        let name = self.name;
        let v = self.raw(key).ok_or_else(|| Error::Config(format!("[{name}] missing `{key}`")))?;
        parse_f64(name, key, v)
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| parse_f64(self.name, key, v)).transpose()
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("[{}] `{key}` is not a count: {v:?}", self.name))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !self.used.contains(k) {
                    return Err(Error::Config(format!("[{}] unknown key `{k}`", self.name)));
                }
            }
        }
        Ok(())
    }
}

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] `{key}` is not a number: {v:?}")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("[{section}] `{key}` must be finite")));
    }
    Ok(x)
}

/// `a:b, c:d` pairs.
fn parse_pairs(section: &str, key: &str, v: &str) -> Result<Vec<(f64, f64)>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("[{section}] `{key}` entries must read z:w, got {item:?}")))?;
            Ok((parse_f64(section, key, a)?, parse_f64(section, key, b)?))
        })
        .collect()
}

fn parse_list(section: &str, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(section, key, s)).collect()
}

fn parse_model(ini: &Ini) -> Result<(String, LevyModel)> {
    let mut s = Section::new(ini, "model");
    if s.props.is_none() {
        return Err(Error::Config("missing [model] section".into()));
    }
    let kind = s.raw("kind").unwrap_or("bs").trim().to_ascii_lowercase();
    let r = s.f64_req("r")?;
    let delta = s.f64_or("delta", 0.0)?;
    let sigma = s.f64_or("sigma", 0.0)?;
    let family = match kind.as_str() {
        "bs" | "black_scholes" | "none" => JumpFamily::None,
        "kou" => JumpFamily::Kou {
            lambda_plus: s.f64_req("lambda_plus")?,
            eta_plus: s.f64_req("eta_plus")?,
            lambda_minus: s.f64_req("lambda_minus")?,
            eta_minus: s.f64_req("eta_minus")?,
        },
        "merton" => JumpFamily::Merton { intensity: s.f64_req("intensity")?, mean: s.f64_req("mean")?, std: s.f64_req("std")? },
        "vg" | "variance_gamma" => JumpFamily::VarianceGamma { c: s.f64_req("c")?, g: s.f64_req("g")?, m: s.f64_req("m")? },
        "tempered_stable" | "cgmy" => JumpFamily::TemperedStable {
            c_plus: s.f64_or("c_plus", 0.0)?,
            c_minus: s.f64_or("c_minus", 0.0)?,
            g: s.f64_req("g")?,
            m: s.f64_req("m")?,
            alpha_plus: s.f64_or("alpha_plus", 0.5)?,
            alpha_minus: s.f64_or("alpha_minus", 0.5)?,
        },
        "finite" => {
            let intensity = s.f64_req("intensity")?;
            let jumps = s.raw("jumps").ok_or_else(|| Error::Config("[model] finite kind needs `jumps`".into()))?;
            JumpFamily::FiniteActivity { intensity, law: JumpLaw::Discrete(parse_pairs("model", "jumps", jumps)?) }
        }
        other => return Err(Error::Config(format!("[model] unknown kind `{other}`"))),
    };
    let atoms = match s.raw("atoms") {
        Some(v) => parse_pairs("model", "atoms", v)?.into_iter().map(|(z, w)| Atom::new(z, w)).collect(),
        None => Vec::new(),
    };
    s.finish()?;
    let model = LevyModel::new(r, delta, sigma, LevyMeasureSpec::new(family).with_atoms(atoms))?;
    Ok((kind, model))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, _) in ini.iter() {
            if let Some(name) = name {
                if !["model", "option", "grid", "experiment"].contains(&name) {
                    return Err(Error::Config(format!("unknown section [{name}]")));
                }
            }
        }
        let (model_kind, model) = parse_model(&ini)?;

        let mut s = Section::new(&ini, "option");
        let strike = s.f64_or("strike", 100.0)?;
        let option = OptionSpec { strike, maturity: s.f64_or("maturity", 1.0)?, spot: s.f64_or("spot", strike)? };
        s.finish()?;
        if !(option.strike > 0.0 && option.spot > 0.0) {
            return Err(Error::InvalidParameter("strike and spot must be positive".into()));
        }

        let d = GridConfig::default();
        let mut s = Section::new(&ini, "grid");
        let grid = GridConfig {
            resolution: s.f64_or("resolution", d.resolution)?,
            growth: s.f64_or("growth", d.growth)?,
            max_spacing: s.f64_or("max_spacing", d.max_spacing)?,
            min_span: s.f64_or("min_span", d.min_span)?,
            n_t: s.usize_or("n_t", d.n_t)?,
            first_step_fraction: s.f64_or("first_step_fraction", d.first_step_fraction)?,
            time_growth: s.f64_or("time_growth", d.time_growth)?,
            extra_times: Vec::new(),
        };
        s.finish()?;

        let d = ExperimentSpec::default();
        let mut s = Section::new(&ini, "experiment");
        let law = match s.raw("law").map(str::trim) {
            None | Some("auto") => None,
            Some(tag) => Some(RateLaw::from_label(tag).ok_or_else(|| Error::Config(format!("[experiment] unknown law `{tag}`")))?),
        };
        let local_time_weight = match s.raw("local_time_weight").map(str::trim) {
            None | Some("growing") => LocalTimeWeight::Growing,
            Some("decaying") => LocalTimeWeight::Decaying,
            Some(other) => return Err(Error::Config(format!("[experiment] local_time_weight must be growing or decaying, got `{other}`"))),
        };
        let expansion_thetas = match s.raw("expansion_thetas") {
            Some(v) => parse_list("experiment", "expansion_thetas", v)?,
            None => d.expansion_thetas.clone(),
        };
        let experiment = ExperimentSpec {
            theta_max: s.f64_or("theta_max", d.theta_max)?,
            theta_min: s.f64_or("theta_min", d.theta_min)?,
            points: s.usize_or("points", d.points)?,
            tolerance: s.f64_opt("tolerance")?,
            law,
            y_star: s.f64_opt("y_star")?,
            local_time_weight,
            stability_factor: s.f64_or("stability_factor", d.stability_factor)?,
            expansion_thetas,
        };
        s.finish()?;
        if experiment.points < 6 {
            return Err(Error::Config("[experiment] needs at least 6 points".into()));
        }
        if !(experiment.theta_max < 1.0 && experiment.theta_min > 0.0 && experiment.theta_min < experiment.theta_max) {
            return Err(Error::Config("[experiment] needs 0 < theta_min < theta_max < 1".into()));
        }
        Ok(Self { model_kind, model, option, grid, experiment })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_kou_experiment() {
        let c = Config::parse(
            "[model]\nkind = kou\nr = 0.06\nsigma = 0.2\nlambda_plus = 0.3\neta_plus = 12\nlambda_minus = 1\neta_minus = 6\n\
             [option]\nstrike = 100\n[grid]\nn_t = 500\n[experiment]\npoints = 8\nlaw = Thm3.5/4.1\n",
        )
        .unwrap();
        assert_eq!(c.model_kind, "kou");
        assert_eq!(c.grid.n_t, 500);
        assert_eq!(c.option.spot, 100.0);
        assert_eq!(c.experiment.law, Some(RateLaw::DiffusiveSqrtLog));
        let l = c.experiment.ladder();
        assert_eq!(l.len(), 8);
        assert!((l[0] - 0.1).abs() < 1e-15 && (l[7] - 1e-4).abs() < 1e-15);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn atoms_and_errors() {
        let c = Config::parse("[model]\nr = 0.05\ndelta = 0.05\nsigma = 0.2\natoms = 0.6931471805599453:0.05\n").unwrap();
        assert_eq!(c.model.measure.atoms.len(), 1);
        assert!(matches!(Config::parse("[model]\nr = 0.05\nsigmaa = 0.2\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("[model]\nr = x\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("[option]\nstrike = 1\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("[model]\nr = 0.05\nsigma = 0.2\n[experiment]\npoints = 3\n"), Err(Error::Config(_))));
    }
}
