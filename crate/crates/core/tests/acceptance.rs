//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --release -p exbound --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use num_complex::Complex64;

use common::*;
use exbound::asymptotics::AsymptoticParams;
use exbound::european::{critical_price_european, price_european_put};
use exbound::harness::{run_expansion_experiment, run_rate_experiment, Experiment};
use exbound::levy::{simulate_increments, small_time_clt_diagnostic, LevyModel};
use exbound::pide::{extract_boundary, premium, solve, BoundaryCurve, Grid, GridConfig, PriceSurface};
use exbound::stopping::{lattice_local_time_mean, v_lambda_beta, v_zero, StoppingProblem, YGrid};

struct Verdicts(Vec<(usize, bool)>);

impl Verdicts {
    fn record(&mut self, id: usize, pass: bool, started: Instant, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {tag} ({:.1} s) {detail}", started.elapsed().as_secs_f64());
        self.0.push((id, pass));
    }
}

fn ladder() -> Vec<f64> {
    (0..16).map(|i| 1e-1 * 10f64.powf(-3.0 * i as f64 / 15.0)).collect()
}

fn limit(model: &LevyModel) -> f64 {
    AsymptoticParams::from_model(model, STRIKE).unwrap().boundary_limit()
}

fn martingale(v: &mut Verdicts) {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for (name, m) in zoo() {
        let psi = m.characteristic_exponent(Complex64::new(0.0, -1.0)).unwrap().norm();
        let n = 100_000;
        let xs = simulate_increments(&m, 1.0, n, 2024).unwrap();
        let e: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let mean = e.iter().sum::<f64>() / n as f64;
        let se = (e.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt();
        let z = (mean - 1.0) / se;
        ok &= psi < 1e-12 && z.abs() < 4.0;
        detail += &format!("{name}: |psi(-i)|={psi:.1e} z={z:.2}; ");
    }
    ok &= t0.elapsed().as_secs_f64() < 30.0;
    v.record(1, ok, t0, detail);
}

fn pricing_oracles(v: &mut Verdicts) {
    let t0 = Instant::now();
    let m = bs();
    let cfg = GridConfig::default();
    let grid = Grid::build(&m, STRIKE, STRIKE, 1.0, &cfg).unwrap();
    let surface = solve(&m, STRIKE, &grid).unwrap();
    let pide = surface.value_at(surface.values.len() - 1, 100.0);
    let tree = crr_american_put(100.0, STRIKE, 1.0, 0.05, 0.2, 5000);
    let mut worst_bs: f64 = 0.0;
    for s in [80.0, 100.0, 120.0] {
        for t in [0.1, 1.0] {
            worst_bs = worst_bs.max((price_european_put(&m, t, s, STRIKE).unwrap().value - bs_put(s, STRIKE, t, 0.05, 0.2)).abs());
        }
    }
    let mer = exbound::levy::LevyModel::new(
        0.05,
        0.0,
        0.2,
        exbound::levy::LevyMeasureSpec::new(exbound::levy::JumpFamily::Merton { intensity: 1.0, mean: -0.1, std: 0.15 }),
    )
    .unwrap();
    let fourier = price_european_put(&mer, 0.5, 100.0, STRIKE).unwrap().value;
    let series = merton_series(100.0, STRIKE, 0.5, 0.05, 0.2, 1.0, -0.1, 0.15, 40);
    let ok = (pide - tree).abs() < 5e-3 && worst_bs < 1e-6 && (fourier - series).abs() < 1e-6 && t0.elapsed().as_secs_f64() < 60.0;
    v.record(
        2,
        ok,
        t0,
        format!(
            "american pide={pide:.5} crr={tree:.5} |diff|={:.1e}; bs max err={worst_bs:.1e}; merton |diff|={:.1e}",
            (pide - tree).abs(),
            (fourier - series).abs()
        ),
    );
}

struct Solved {
    name: &'static str,
    model: LevyModel,
    surface: PriceSurface,
    curve: Result<BoundaryCurve, exbound::Error>,
}

fn solve_matrix() -> Vec<Solved> {
    let cfg = GridConfig { extra_times: vec![1e-4, 1e-3, 1e-2, 0.1], ..GridConfig::default() };
    matrix()
        .into_iter()
        .map(|(name, model)| {
            let grid = Grid::build(&model, STRIKE, limit(&model), 1.0, &cfg).unwrap();
            let surface = solve(&model, STRIKE, &grid).unwrap();
            let curve = extract_boundary(&surface);
            Solved { name, model, surface, curve }
        })
        .collect()
}

fn structural(v: &mut Verdicts, solved: &[Solved], t0: Instant) {
    let mut violations = 0;
    let mut detail = String::new();
    for s in solved {
        let mut bad = Vec::new();
        if !s.surface.checks().passes(STRIKE) {
            bad.push(format!("{:?}", s.surface.checks()));
        }
        if let Err(e) = premium(&s.surface, &s.model) {
            bad.push(e.to_string());
        }
        match &s.curve {
            Ok(c) => {
                if c.monotonicity_defect() > 0.0 {
                    bad.push(format!("b decreasing by {}", c.monotonicity_defect()));
                }
                let excess = c.european_excess(&s.model).unwrap();
                if excess > 0.0 {
                    bad.push(format!("b above b_e by {excess}"));
                }
                for th in [1e-3, 1e-2, 0.1, 1.0] {
                    let be = critical_price_european(&s.model, th, STRIKE).unwrap();
                    if be >= STRIKE {
                        bad.push(format!("b_e({th}) = {be} >= K"));
                    }
                }
            }
            Err(e) => bad.push(e.to_string()),
        }
        violations += bad.len();
        detail += &format!("{}: {}; ", s.name, if bad.is_empty() { "ok".to_string() } else { bad.join(", ") });
    }
    let ok = violations == 0 && t0.elapsed().as_secs_f64() < 600.0;
    v.record(3, ok, t0, format!("violations={violations} {detail}"));
}

fn limits(v: &mut Verdicts, solved: &[Solved], t0: Instant) {
    let mut ok = true;
    let mut detail = String::new();
    for s in solved {
        let lim = limit(&s.model);
        match &s.curve {
            Ok(c) => {
                let sample = c.at_theta(1e-4);
                let ratio = (lim - sample.b).abs() / sample.resolution;
                ok &= ratio < 3.0 && (sample.theta - 1e-4).abs() < 1e-12;
                detail += &format!("{}: |b-limit|/ds={ratio:.2}; ", s.name);
            }
            Err(e) => {
                ok = false;
                detail += &format!("{}: {e}; ", s.name);
            }
        }
    }
    ok &= t0.elapsed().as_secs_f64() < 600.0;
    v.record(4, ok, t0, detail);
}

fn positive_drift_rates(v: &mut Verdicts) {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for (name, m) in [("bs", bs()), ("kou_up", kou_up()), ("cgmy", cgmy())] {
        let rep = run_rate_experiment(&Experiment::new(m, STRIKE, ladder())).unwrap();
        let intercept = rep.fit.map_or(f64::NAN, |f| f.intercept);
        ok &= (0.8..=1.2).contains(&intercept) && rep.band.is_some_and(|b| b.stable) && rep.pass;
        detail += &format!("{name}: {}; ", rep.summary());
    }
    ok &= t0.elapsed().as_secs_f64() < 1800.0;
    v.record(5, ok, t0, detail);
}

fn negative_drift_rate(v: &mut Verdicts) {
    let t0 = Instant::now();
    let pde = v_zero(YGrid::PDE_DEFAULT).unwrap();
    let lattice = v_lambda_beta(&StoppingProblem::new(0.0, 0.0)).unwrap();
    let agree = (pde.y_star / lattice.y_star - 1.0).abs() < 0.01;
    let mut exp = Experiment::new(kou_down(), STRIKE, ladder());
    exp.y_star = Some(pde.y_star);
    let rep = run_rate_experiment(&exp).unwrap();
    let intercept = rep.fit.map_or(f64::NAN, |f| f.intercept);
    let params = AsymptoticParams::from_model(&kou_down(), STRIKE).unwrap();
    let ok = agree && params.lambda == 0.0 && (0.85..=1.15).contains(&intercept) && t0.elapsed().as_secs_f64() < 1800.0;
    v.record(6, ok, t0, format!("y00 pde={:.6} lattice={:.6}; {}", pde.y_star, lattice.y_star, rep.summary()));
}

fn stopping_consistency(v: &mut Verdicts) {
    let t0 = Instant::now();
    let pde = v_zero(YGrid::PDE_DEFAULT).unwrap();
    let lattice = v_lambda_beta(&StoppingProblem::new(0.0, 0.0)).unwrap();
    let mut sup: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (&y, &val) in pde.y.iter().zip(&pde.v).filter(|(y, _)| y.abs() <= 2.0) {
        sup = sup.max((val - lattice.value_at(y)).abs());
        scale = scale.max(val);
    }
    let y_rel = (pde.y_star / lattice.y_star - 1.0).abs();
    // Monte Carlo estimate of E|W_1| = E L_1(0), then the lattice estimator
    let n = 400_000;
    let draws = simulate_increments(&LevyModel::black_scholes(0.0, 0.0, 1.0).unwrap(), 1.0, n, 99).unwrap();
    // increments carry the martingale drift -1/2
    let mc = draws.iter().map(|x| (x + 0.5).abs()).sum::<f64>() / n as f64;
    let lt = lattice_local_time_mean(2e-3);
    let target = (2.0 / std::f64::consts::PI).sqrt();
    let ok = sup < 0.01 * scale
        && y_rel < 0.01
        && (lt / target - 1.0).abs() < 0.01
        && (mc / target - 1.0).abs() < 0.01
        && t0.elapsed().as_secs_f64() < 300.0;
    v.record(
        7,
        ok,
        t0,
        format!("sup|v_pde - v_lattice| on [-2,2] = {sup:.2e} (max v {scale:.3}); y* rel diff {y_rel:.2e}; E L = {lt:.6} (mc {mc:.4}, sqrt(2/pi) {target:.6})"),
    );
}

fn expansion(v: &mut Verdicts) {
    let t0 = Instant::now();
    let rep = run_expansion_experiment(&Experiment::new(kou_down(), STRIKE, ladder())).unwrap();
    let detail: Vec<String> = rep
        .series
        .iter()
        .map(|s| {
            let diags: Vec<String> =
                rep.rows.iter().filter(|r| r.a == s.a).map(|r| format!("{:.3e}", r.diagnostic)).collect();
            format!("a={:.4} [{}] decreasing={} zero={}", s.a, diags.join(" "), s.decreasing, s.identically_zero)
        })
        .collect();
    let ok = rep.pass && t0.elapsed().as_secs_f64() < 1200.0;
    v.record(8, ok, t0, detail.join("; "));
}

fn clt(v: &mut Verdicts) {
    let t0 = Instant::now();
    let table = small_time_clt_diagnostic(&kou_up(), &[1e-1, 1e-2, 1e-3], 100_000, 5).unwrap();
    let ks: Vec<String> = table.rows.iter().map(|r| format!("t={} ks={:.4} lower={:.4}", r.t, r.ks, r.decrease_lower)).collect();
    let ok = table.strictly_decreasing && t0.elapsed().as_secs_f64() < 120.0;
    v.record(9, ok, t0, ks.join("; "));
}

fn determinism(v: &mut Verdicts) {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let thetas: Vec<f64> = (0..6).map(|i| 0.05 * 0.4f64.powi(i)).collect();
    let mut exp = Experiment::new(kou_down(), STRIKE, thetas);
    exp.grid = GridConfig { resolution: 40.0, n_t: 400, ..GridConfig::default() };
    exp.y_star = Some(0.6388);
    exp.expansion_thetas = vec![0.016, 0.008];
    let run = |tag: &str, threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let rates = dir.path().join(format!("rates_{tag}.csv"));
            let expn = dir.path().join(format!("expansion_{tag}.csv"));
            run_rate_experiment(&exp).unwrap().write_csv(&rates).unwrap();
            run_expansion_experiment(&exp).unwrap().write_csv(&expn).unwrap();
            let xs = simulate_increments(&kou_up(), 0.1, 10_000, 3).unwrap();
            let mut bytes = std::fs::read(rates).unwrap();
            bytes.extend(std::fs::read(expn).unwrap());
            bytes.extend(xs.iter().flat_map(|x| x.to_le_bytes()));
            bytes
        })
    };
    let a = run("a", 1);
    let b = run("b", 4);
    let c = run("c", 4);
    let ok = a == b && b == c;
    v.record(10, ok, t0, format!("{} bytes compared over 3 runs (1, 4, 4 threads)", a.len()));
}

#[test]
fn acceptance_criteria() {
    let mut v = Verdicts(Vec::new());
    martingale(&mut v);
    pricing_oracles(&mut v);
    let t0 = Instant::now();
    let solved = solve_matrix();
    structural(&mut v, &solved, t0);
    limits(&mut v, &solved, t0);
    positive_drift_rates(&mut v);
    negative_drift_rate(&mut v);
    stopping_consistency(&mut v);
    expansion(&mut v);
    clt(&mut v);
    determinism(&mut v);
    let failed: Vec<usize> = v.0.iter().filter(|(_, p)| !p).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
