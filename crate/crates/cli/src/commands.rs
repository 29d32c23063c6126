use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::{json, Value};
use slir_core::analysis::{self, generate_synthetic, sensitivity_sweep, ForecastConfig};
use slir_core::compartmental::{slir_next_generation, DiseaseFreeEquilibrium};
use slir_core::io::{
    align, load_cases, load_mobility, read_chains_csv, read_observed_csv, write_band_csv,
    write_chains_csv, write_observed_csv, write_sensitivity_csv, write_trajectory_csv, ChainsTable,
    FitSummary, I0Policy, RunConfig,
};
use slir_core::sampler::{chain_rng, Algorithm, MassMatrix};
use slir_core::stats::{ModelParams, ObservedData, PARAM_NAMES};

use crate::args::*;
use crate::error::CliError;
use crate::manifest::Manifest;

const DEFAULT_OUTPUT_DIR: &str = "slir-output";

/// Parameters used when neither the config nor the flags give any.
pub const DEFAULT_PARAMS: ModelParams = ModelParams {
    r0: 5.0,
    gamma: 0.1,
    a: 0.05,
    b: 0.02,
    phi1: 100.0,
    phi2: 10.0,
};

pub struct Context {
    pub config: RunConfig,
    pub output_dir: PathBuf,
}

impl Context {
    pub fn load(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::new("io", format!("{}: {e}", path.display()))
                        .with("path", path.display().to_string())
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::new("config", format!("{}: {e}", path.display()))
                        .with("path", path.display().to_string())
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let output_dir = cli
            .output_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into());
        config.output_dir = Some(output_dir.clone());
        Ok(Self { config, output_dir })
    }

    fn prepare(&self) -> Result<(), CliError> {
        self.config.validate()?;
        std::fs::create_dir_all(&self.output_dir).map_err(|e| {
            CliError::new("io", format!("{}: {e}", self.output_dir.display()))
                .with("path", self.output_dir.display().to_string())
        })?;
        Ok(())
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

fn apply_population(config: &mut RunConfig, args: &PopulationArgs) {
    if let Some(n) = args.population {
        config.population = n;
    }
    if let Some(i0) = args.i0 {
        config.i0 = I0Policy::Fixed(i0);
    }
}

fn apply_params(config: &mut RunConfig, args: &ParamArgs, base: Option<ModelParams>) {
    let mut p = base.or(config.params).unwrap_or(DEFAULT_PARAMS);
    for (slot, value) in [
        (&mut p.r0, args.r0),
        (&mut p.gamma, args.gamma),
        (&mut p.a, args.a),
        (&mut p.b, args.b),
        (&mut p.phi1, args.phi1),
        (&mut p.phi2, args.phi2),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    config.params = Some(p);
}

fn apply_data(config: &mut RunConfig, args: &DataArgs) {
    if let Some(p) = &args.cases {
        config.cases = Some(p.clone());
    }
    if let Some(p) = &args.mobility {
        config.mobility = Some(p.clone());
    }
    if let Some(f) = args.mobility_format {
        config.mobility_format = f.into();
    }
    if let Some(g) = args.gap_policy {
        config.gap_policy = g.into();
    }
    if args.start_date.is_some() {
        config.start_date = args.start_date;
    }
    if args.days.is_some() {
        config.days = args.days;
    }
    apply_population(config, &args.population);
}

fn apply_sampler(config: &mut RunConfig, args: &SamplerArgs) {
    let s = &mut config.sampler;
    if let Some(c) = args.chains {
        s.n_chains = c;
    }
    if let Some(n) = args.iter {
        s.n_iter = n;
        if args.warmup.is_none() {
            s.n_warmup = n / 2;
        }
    }
    if let Some(w) = args.warmup {
        s.n_warmup = w;
    }
    if let Some(alg) = args.algorithm {
        s.algorithm = match alg {
            AlgorithmArg::Nuts => Algorithm::default(),
            AlgorithmArg::Hmc => Algorithm::Hmc {
                step_size: 0.01,
                n_steps: 20,
                target_accept: 0.8,
            },
            AlgorithmArg::RandomWalk => Algorithm::RandomWalk { scale: 0.1 },
        };
    }
    if args.adapt_mass {
        s.mass_matrix = MassMatrix::AdaptDiagonal;
    }
}

fn simulation_i0(config: &RunConfig) -> f64 {
    match config.i0 {
        I0Policy::Fixed(v) => v,
        I0Policy::FirstCase => 1.0,
    }
}

/// Reads either a combined observed file or the separate case and mobility series.
fn load_data(
    config: &RunConfig,
    observed: Option<&Path>,
    manifest: &mut Manifest,
) -> Result<ObservedData, CliError> {
    let data = if let Some(path) = observed {
        manifest.input(path)?;
        let i0 = match config.i0 {
            I0Policy::Fixed(v) => Some(v),
            I0Policy::FirstCase => None,
        };
        let data = read_observed_csv(path, config.population, i0)?;
        match config.days {
            Some(d) if d < data.days() => data.truncate(d),
            _ => data,
        }
    } else {
        let (Some(cases), Some(mobility)) = (&config.cases, &config.mobility) else {
            return Err(CliError::usage(
                "provide --observed, or both --cases and --mobility",
            ));
        };
        manifest.input(cases)?;
        manifest.input(mobility)?;
        let m = load_mobility(
            mobility,
            config.mobility_format,
            config.gap_policy,
            config.start_date,
        )?;
        let c = load_cases(cases, config.start_date)?;
        let (mobility, cases, start) = align(&m, &c, config.days)?;
        let i0 = config.i0.resolve(&cases)?;
        ObservedData::new(mobility, cases, config.population, i0)?.with_start_date(start)
    };
    info!(
        "loaded {} days, N = {}, i0 = {}",
        data.days(),
        data.population,
        data.i0
    );
    Ok(data)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::new("io", e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| {
        CliError::new("io", format!("{}: {e}", path.display()))
            .with("path", path.display().to_string())
    })
}

fn print_summary(summary: &FitSummary) {
    println!(
        "{:<6} {:>12} {:>12} {:>12} {:>7} {:>8}",
        "param", "median", "2.5%", "97.5%", "rhat", "ess"
    );
    for p in &summary.parameters {
        println!(
            "{:<6} {:>12.5} {:>12.5} {:>12.5} {:>7.3} {:>8.0}",
            p.name, p.median, p.q2_5, p.q97_5, p.rhat, p.ess
        );
    }
    println!(
        "{} chains x {} draws, {} divergent",
        summary.n_chains, summary.n_draws_per_chain, summary.n_divergent
    );
}

/// Writes `chains.csv` and `summary.json` for a fitted chain set.
fn write_fit(ctx: &Context, fit: &analysis::FitResult) -> Result<FitSummary, CliError> {
    let table = ChainsTable::from_chain_set(&fit.chains, ctx.config.sampler.n_warmup);
    write_chains_csv(&ctx.out("chains.csv"), &table)?;
    let summary = FitSummary::from_table(&table)?;
    write_json(&ctx.out("summary.json"), &summary)?;
    if fit.ode_failures > 0 {
        warn!(
            "{} ODE solves failed during sampling and were treated as zero density",
            fit.ode_failures
        );
    }
    if summary.max_rhat() > 1.05 {
        warn!(
            "max R-hat {:.3} exceeds 1.05; the chains have not mixed",
            summary.max_rhat()
        );
    }
    Ok(summary)
}

pub fn simulate(mut ctx: Context, args: &SimulateArgs) -> Result<(), CliError> {
    apply_params(&mut ctx.config, &args.params, None);
    apply_population(&mut ctx.config, &args.population);
    if let Some(h) = args.horizon {
        ctx.config.horizon = h;
    }
    if args.start_date.is_some() {
        ctx.config.start_date = args.start_date;
    }
    ctx.prepare()?;
    let config = &ctx.config;
    let params = config.params.unwrap_or(DEFAULT_PARAMS);
    let mut rng = chain_rng(config.seed, 0);
    let (mut data, traj) = generate_synthetic(
        &params,
        config.population,
        simulation_i0(config),
        config.horizon,
        &config.solver,
        &mut rng,
    )?;
    data.start_date = config.start_date;
    let manifest = Manifest::new("simulate", config)?;
    write_trajectory_csv(&ctx.out("trajectory.csv"), &traj, config.start_date)?;
    write_observed_csv(&ctx.out("observed.csv"), &data)?;
    manifest.finish(&ctx.output_dir, &["trajectory.csv", "observed.csv"])?;
    println!(
        "simulated {} days: peak lockdown fraction {:.4}, attack rate {:.4}",
        traj.len(),
        traj.peak_lockdown_fraction(),
        analysis::attack_rate(&traj)
    );
    Ok(())
}

pub fn fit(mut ctx: Context, args: &FitArgs) -> Result<(), CliError> {
    apply_data(&mut ctx.config, &args.data);
    apply_sampler(&mut ctx.config, &args.sampler);
    ctx.prepare()?;
    let mut manifest = Manifest::new("fit", &ctx.config)?;
    let data = load_data(&ctx.config, args.data.observed.as_deref(), &mut manifest)?;
    let result = analysis::fit(&data, &ctx.config.sampler(), &ctx.config.solver)?;
    let summary = write_fit(&ctx, &result)?;
    manifest.finish(&ctx.output_dir, &["chains.csv", "summary.json"])?;
    print_summary(&summary);
    Ok(())
}

pub fn forecast(mut ctx: Context, args: &ForecastArgs) -> Result<(), CliError> {
    apply_data(&mut ctx.config, &args.data);
    apply_sampler(&mut ctx.config, &args.sampler);
    if let Some(p) = args.paths {
        ctx.config.n_paths = p;
    }
    ctx.prepare()?;
    let mut manifest = Manifest::new("forecast", &ctx.config)?;
    let data = load_data(&ctx.config, args.data.observed.as_deref(), &mut manifest)?;
    let total = args.total_days.unwrap_or(data.days());
    let config = ForecastConfig {
        sampler: ctx.config.sampler(),
        solver: ctx.config.solver.clone(),
        n_paths: ctx.config.n_paths,
        seed: ctx.config.seed,
    };
    let result = analysis::forecast(&data, args.train_days, total, &config)?;
    let summary = write_fit(&ctx, &result.fit)?;
    let shown = data.truncate(total.min(data.days()));
    write_band_csv(
        &ctx.out("band.csv"),
        &result.band,
        Some(&shown),
        Some(args.train_days),
    )?;
    manifest.finish(&ctx.output_dir, &["band.csv", "chains.csv", "summary.json"])?;
    print_summary(&summary);
    let covered = result
        .held_out
        .iter()
        .filter(|(t, _, y)| result.band.cases[*t].contains(*y as f64))
        .count();
    println!(
        "held-out case coverage: {covered}/{} days inside the 95% band",
        result.held_out.len()
    );
    Ok(())
}

/// Posterior medians from a `summary.json`; rows with a missing or non-numeric median are rejected.
fn medians_from_summary(path: &Path) -> Result<ModelParams, CliError> {
    let bad = |m: String| CliError::new("io", m).with("path", path.display().to_string());
    let text =
        std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let params = value["parameters"]
        .as_array()
        .ok_or_else(|| bad(format!("{}: no `parameters` array", path.display())))?;
    let mut x = [0.0; PARAM_NAMES.len()];
    for (slot, name) in x.iter_mut().zip(PARAM_NAMES) {
        *slot = params
            .iter()
            .find(|p| p["name"] == name)
            .and_then(|p| p["median"].as_f64())
            .ok_or_else(|| bad(format!("{}: no median for {name}", path.display())))?;
    }
    Ok(ModelParams::from_array(x))
}

pub fn sensitivity(mut ctx: Context, args: &SensitivityArgs) -> Result<(), CliError> {
    let mut manifest_inputs = Vec::new();
    let base = match &args.summary {
        Some(path) => {
            manifest_inputs.push(path.clone());
            Some(medians_from_summary(path)?)
        }
        None => None,
    };
    apply_params(&mut ctx.config, &args.params, base);
    apply_population(&mut ctx.config, &args.population);
    if let Some(h) = args.horizon {
        ctx.config.horizon = h;
    }
    ctx.prepare()?;
    let config = &ctx.config;
    let mut manifest = Manifest::new("sensitivity", config)?;
    for path in &manifest_inputs {
        manifest.input(path)?;
    }
    let params = config.params.unwrap_or(DEFAULT_PARAMS);
    let rows = sensitivity_sweep(
        &params,
        config.population,
        simulation_i0(config),
        config.horizon,
        &args.targets,
        &config.solver,
    );
    write_sensitivity_csv(&ctx.out("sensitivity.csv"), &rows)?;
    manifest.finish(&ctx.output_dir, &["sensitivity.csv"])?;
    println!(
        "{:>8} {:>10} {:>12} {:>12}",
        "target", "peak", "a", "attack_rate"
    );
    for outcome in &rows {
        match &outcome.row {
            Ok(r) => println!(
                "{:>8.3} {:>10.5} {:>12.6} {:>12.5}",
                r.target_decline, r.peak_decline, r.a, r.attack_rate
            ),
            Err(e) => println!("{:>8.3} {e}", outcome.target),
        }
    }
    Ok(())
}

pub fn r0(mut ctx: Context, args: &R0Args) -> Result<(), CliError> {
    apply_params(&mut ctx.config, &args.params, None);
    if let Some(n) = args.population {
        ctx.config.population = n;
    }
    ctx.prepare()?;
    let params = ctx.config.params.unwrap_or(DEFAULT_PARAMS).slir();
    let n = ctx.config.population;
    let report = json!({
        "R0": params.r0,
        "gamma": params.gamma,
        "a": params.a,
        "b": params.b,
        "beta": params.beta(),
        "population": n,
        "fully_susceptible": slir_next_generation(&params, n, DiseaseFreeEquilibrium::FullySusceptible)?,
        "lockdown_balanced": slir_next_generation(&params, n, DiseaseFreeEquilibrium::LockdownBalanced)?,
    });
    write_json(&ctx.out("r0.json"), &report)?;
    Manifest::new("r0", &ctx.config)?.finish(&ctx.output_dir, &["r0.json"])?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).unwrap_or_default()
    );
    Ok(())
}

pub fn diagnose(ctx: Context, args: &DiagnoseArgs) -> Result<(), CliError> {
    ctx.prepare()?;
    let mut manifest = Manifest::new("diagnose", &ctx.config)?;
    manifest.input(&args.chains)?;
    let table = read_chains_csv(&args.chains)?;
    let summary = FitSummary::from_table(&table)?;
    write_json(&ctx.out("summary.json"), &summary)?;
    manifest.finish(&ctx.output_dir, &["summary.json"])?;
    print_summary(&summary);
    Ok(())
}
