use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use exbound::asymptotics::{xi_limit, AsymptoticParams};
use exbound::european::price_european_put;
use exbound::harness::{run_expansion_experiment, run_rate_experiment, Config, Experiment};
use exbound::levy::simulate_increments;
use exbound::pide::{extract_boundary, solve, Grid};
use exbound::stopping::{v_lambda_beta, v_zero, StoppingProblem, YGrid};
use exbound::Error;

/// American put free boundaries under exponential Lévy models.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Experiment configuration with [model], [option], [grid], [experiment].
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV reports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for Monte Carlo cross-checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// European and American put at the configured spot and maturity.
    Price,
    /// Solve to maturity and write boundary.csv.
    Boundary,
    /// Rate sweep over the theta ladder; writes rates.csv.
    Rates,
    /// Limit of the critical price when d < 0.
    Xi,
    /// Positivity threshold of the stopping value; writes stopping.csv.
    Ystar {
        /// Override the atom mass at ln(K/xi).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Second-order price expansion check; writes expansion.csv.
    Expansion,
    /// Sign of d, boundary limit and applicable rate law.
    Regime,
}

enum Outcome {
    Done,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(cli: &Cli) -> Result<Config, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config FILE is required".into()))?;
    Config::load(path)
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let cfg = load(cli)?;
    let model = &cfg.model;
    let strike = cfg.option.strike;
    match &cli.command {
        Command::Regime => {
            println!("{}", model.classify_regime(strike));
        }
        Command::Xi => {
            let xi = xi_limit(model, strike)?;
            println!("xi={xi:.4}");
        }
        Command::Price => {
            let (t, s) = (cfg.option.maturity, cfg.option.spot);
            let eu = price_european_put(model, t, s, strike)?;
            let params = AsymptoticParams::from_model(model, strike)?;
            let grid = Grid::build(model, strike, params.boundary_limit(), t, &cfg.grid)?;
            let surface = solve(model, strike, &grid)?;
            let last = surface.values.len() - 1;
            let am = surface.value_at(last, s);
            let grid_eu = surface.european_at(last, s);
            // Monte Carlo cross-check of the European value
            let n = 100_000;
            let xs = simulate_increments(model, t, n, cli.seed)?;
            let disc = (-model.r * t).exp();
            let pay: Vec<f64> = xs.iter().map(|x| disc * (strike - s * ((model.r - model.delta) * t + x).exp()).max(0.0)).collect();
            let mean = pay.iter().sum::<f64>() / n as f64;
            let var = pay.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let stderr = (var / n as f64).sqrt();
            println!("european={:.6} american={:.6} premium={:.6} grid_european={:.6} mc_european={mean:.6}+-{stderr:.6}", eu.value, am, am - eu.value, grid_eu);
            let path = out_file(&cli.out, "price.csv")?;
            std::fs::write(
                &path,
                format!(
                    "maturity,spot,strike,european,american,grid_european,mc_european,mc_stderr,seed\n{t},{s},{strike},{},{am},{grid_eu},{mean},{stderr},{}\n",
                    eu.value, cli.seed
                ),
            )?;
        }
        Command::Boundary => {
            let params = AsymptoticParams::from_model(model, strike)?;
            let grid = Grid::build(model, strike, params.boundary_limit(), cfg.option.maturity, &cfg.grid)?;
            let surface = solve(model, strike, &grid)?;
            let curve = extract_boundary(&surface)?;
            let path = out_file(&cli.out, "boundary.csv")?;
            curve.write_csv(&path)?;
            let b0 = curve.samples.last().expect("curve has samples");
            println!("b(0)={:.6} samples={} written={}", b0.b, curve.samples.len(), path.display());
        }
        Command::Rates => {
            let report = run_rate_experiment(&Experiment::from_config(&cfg))?;
            let path = out_file(&cli.out, "rates.csv")?;
            report.write_csv(&path)?;
            for r in report.rows.iter().filter(|r| !r.is_ok()) {
                eprintln!("theta={}: {}", r.theta, r.error.as_deref().unwrap_or(""));
            }
            println!("{}", report.summary());
            if !report.pass {
                return Ok(Outcome::Failed);
            }
        }
        Command::Expansion => {
            let report = run_expansion_experiment(&Experiment::from_config(&cfg))?;
            let path = out_file(&cli.out, "expansion.csv")?;
            report.write_csv(&path)?;
            for s in &report.series {
                println!(
                    "a={:.6} v={:.6e} decreasing={} identically_zero={} largest_theta_rel_error={:.4}",
                    s.a, s.v, s.decreasing, s.identically_zero, s.largest_theta_relative_error
                );
            }
            println!("y*={:.6} {}", report.y_star, report.verdict());
            if !report.pass {
                return Ok(Outcome::Failed);
            }
        }
        Command::Ystar { lambda, beta } => {
            let (lam, bet) = match (lambda, beta) {
                (Some(l), Some(b)) => (*l, *b),
                _ => {
                    let p = AsymptoticParams::from_model(model, strike)?;
                    (lambda.unwrap_or(p.lambda), beta.unwrap_or(p.beta))
                }
            };
            let value = if lam == 0.0 {
                v_zero(YGrid::PDE_DEFAULT)?
            } else {
                v_lambda_beta(&StoppingProblem {
                    lambda: lam,
                    beta: bet,
                    grid: YGrid::LATTICE_DEFAULT,
                    weight: cfg.experiment.local_time_weight,
                })?
            };
            let path = out_file(&cli.out, "stopping.csv")?;
            value.write_csv(&path)?;
            println!("y_star={:.6} +- {:.6} lambda={lam} beta={bet} method={:?}", value.y_star, value.y_star_uncertainty, value.method);
        }
    }
    Ok(Outcome::Done)
}
