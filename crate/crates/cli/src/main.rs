//! Configuration-driven command-line front end.
//!
//! Every command reads one strict JSON config, writes plot-ready CSV
//! artifacts plus a `report.json` that echoes the configuration, and uses
//! the exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{FaultSpec, ModelSpec, PolicySpec, RunConfig};
use orlicz_hjb::calibrate::{fit_station, read_station_csv};
use orlicz_hjb::mc::{estimate_value, Policy};
use orlicz_hjb::verify::FaultInjection;
use orlicz_hjb::{
    compute_a, exact_value, sensitivity_signs, Discretization, Error as CoreError, Field, Grid,
    JumpQuadrature, LinearModelParams,
};

#[derive(Parser)]
#[command(
    name = "orlicz-hjb",
    about = "Robust long-run control of jump-driven population dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discretized equation and write value/policy fields.
    Solve(CommonArgs),
    /// Solve the 1D benchmark at several resolutions and compare with the
    /// closed form.
    ExactCompare(CommonArgs),
    /// Finite-difference sensitivities of the closed-form coefficient.
    Sensitivity(CommonArgs),
    /// Least-squares station calibration.
    Calibrate(CommonArgs),
    /// Monte Carlo evaluation of the long-run objective.
    Simulate(CommonArgs),
    /// Randomized invariant suite.
    Verify(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for randomized commands.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    };
    std::process::exit(code);
}

/// Maps an error chain onto the documented exit codes.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Config(_) | CoreError::Data(_) => 2,
                CoreError::Io(_) => 4,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    // config-shaped failures raised by this crate
    if err.to_string().contains("config") {
        2
    } else {
        3
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed: Option<u64>,
    started: Instant,
    command: &'static str,
}

impl Ctx {
    fn new(args: &CommonArgs, command: &'static str) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(&args.config)
            .map_err(|e| anyhow::anyhow!("config {}: {e}", args.config.display()))?;
        let cfg = RunConfig::parse(&text)
            .map_err(|e| anyhow::anyhow!("config {}: {e}", args.config.display()))?;
        let out = args
            .out
            .clone()
            .or_else(|| cfg.output.as_ref().map(PathBuf::from))
            .ok_or_else(|| anyhow::anyhow!("config error: no output directory (set `output` or use --out)"))?;
        std::fs::create_dir_all(&out)?;
        Ok(Self {
            cfg,
            out,
            seed: args.seed,
            started: Instant::now(),
            command,
        })
    }

    fn write_report(&self, payload: serde_json::Value) -> anyhow::Result<()> {
        let report = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "config": serde_json::to_value(&self.cfg)?,
            "result": payload,
        });
        let path = self.out.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        Ok(())
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(Ctx::new(&args, "solve")?),
        Command::ExactCompare(args) => cmd_exact_compare(Ctx::new(&args, "exact-compare")?),
        Command::Sensitivity(args) => cmd_sensitivity(Ctx::new(&args, "sensitivity")?),
        Command::Calibrate(args) => cmd_calibrate(Ctx::new(&args, "calibrate")?),
        Command::Simulate(args) => cmd_simulate(Ctx::new(&args, "simulate")?),
        Command::Verify(args) => cmd_verify(Ctx::new(&args, "verify")?),
    }
}

fn build_quadrature(cfg: &RunConfig) -> anyhow::Result<JumpQuadrature> {
    let jumps = cfg
        .jumps
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config block 'jumps' missing"))?;
    let m = cfg
        .quadrature
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config block 'quadrature' missing"))?
        .m;
    Ok(JumpQuadrature::build(jumps, m)?)
}

fn cmd_solve(ctx: Ctx) -> anyhow::Result<()> {
    ctx.cfg
        .require(&["model", "jumps", "risk", "grid", "quadrature", "solver"], "solve")?;
    let cfg = &ctx.cfg;
    let spec = cfg.model.as_ref().unwrap();
    let model = spec.build(cfg.jumps.as_ref().unwrap())?;
    let grid = cfg.build_grid(spec.dim())?;
    let quad = build_quadrature(cfg)?;
    let params = cfg.risk.unwrap();
    let solver_cfg = cfg.solver.clone().unwrap();

    let disc = Discretization::new(model.as_ref(), grid, &quad, params, solver_cfg)?;
    let (field, policy, report) = disc.solve()?;

    write_value_csv(&ctx.out.join("value.csv"), &field, params.p)?;
    write_policy_csv(&ctx.out.join("policy.csv"), &policy)?;
    std::fs::write(ctx.out.join("report.txt"), report.to_kv())?;
    ctx.write_report(serde_json::to_value(&report)?)?;
    println!(
        "solve: {} sweeps, final error {:.3e}, converged {}",
        report.iterations, report.final_error, report.converged
    );
    if !report.converged {
        anyhow::bail!(CoreError::Simulation(format!(
            "no convergence within {} sweeps (error {:.3e})",
            report.iterations, report.final_error
        )));
    }
    Ok(())
}

fn cmd_exact_compare(ctx: Ctx) -> anyhow::Result<()> {
    ctx.cfg.require(
        &["model", "jumps", "risk", "solver", "exact_compare"],
        "exact-compare",
    )?;
    let cfg = &ctx.cfg;
    let (a, alpha) = match cfg.model.as_ref().unwrap() {
        ModelSpec::Logistic1d { a, alpha } => (*a, *alpha),
        other => anyhow::bail!(
            "config error: exact-compare needs the logistic-1d model, got {other:?}"
        ),
    };
    let jumps = cfg.jumps.clone().unwrap();
    let params = cfg.risk.unwrap();
    let sol = compute_a(&LinearModelParams {
        a,
        alpha,
        risk: params,
        jumps: jumps.clone(),
    })?;

    let mut summary = Vec::new();
    for &n in &cfg.exact_compare.as_ref().unwrap().resolutions {
        let model = orlicz_hjb::Logistic1d {
            a,
            alpha,
            jumps: jumps.clone(),
        };
        let grid = Grid::new_1d(1.0, n)?;
        let quad = JumpQuadrature::build(&jumps, n)?;
        let (field, _, report) =
            orlicz_hjb::solve(&model, grid, &quad, &params, cfg.solver.as_ref().unwrap())?;
        let path = ctx.out.join(format!("exact_compare_{n}.csv"));
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(out, "x1,numerical_F,exact_F,abs_error,rel_error")?;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let num = field.at(i, 0);
            let exact = exact_value(&sol, x);
            let abs = num - exact;
            let rel = if exact != 0.0 { abs / exact } else { 0.0 };
            writeln!(
                out,
                "{x:.16e},{num:.16e},{exact:.16e},{abs:.16e},{rel:.16e}"
            )?;
        }
        summary.push(json!({
            "resolution": n,
            "iterations": report.iterations,
            "converged": report.converged,
            "final_error": report.final_error,
        }));
        if !report.converged {
            anyhow::bail!(CoreError::Simulation(format!(
                "resolution {n}: no convergence within {} sweeps",
                report.iterations
            )));
        }
    }
    ctx.write_report(json!({
        "a_coef": sol.a_coef,
        "alpha_p": sol.alpha_p,
        "delta_bar": sol.delta_bar,
        "runs": summary,
    }))?;
    println!("exact-compare: A = {:.6}, runs written to {}", sol.a_coef, ctx.out.display());
    Ok(())
}

fn cmd_sensitivity(ctx: Ctx) -> anyhow::Result<()> {
    ctx.cfg.require(&["model", "jumps", "risk"], "sensitivity")?;
    let cfg = &ctx.cfg;
    let (a, alpha) = match cfg.model.as_ref().unwrap() {
        ModelSpec::Logistic1d { a, alpha } | ModelSpec::Linear1d { a, alpha } => (*a, *alpha),
        other => anyhow::bail!("config error: sensitivity needs a 1D benchmark model, got {other:?}"),
    };
    let params = LinearModelParams {
        a,
        alpha,
        risk: cfg.risk.unwrap(),
        jumps: cfg.jumps.clone().unwrap(),
    };
    let bump = cfg.sensitivity.clone().unwrap_or_default().rel_bump;
    let report = sensitivity_signs(&params, bump)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(ctx.out.join("sensitivity.csv"))?);
    writeln!(out, "parameter,derivative,predicted_sign,consistent,note")?;
    for e in &report.entries {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.parameter,
            e.derivative.map_or(String::new(), |d| format!("{d:.16e}")),
            e.predicted_sign.map_or(String::new(), |s| s.to_string()),
            e.consistent,
            e.note.clone().unwrap_or_default()
        )?;
    }
    drop(out);
    ctx.write_report(serde_json::to_value(&report)?)?;
    println!(
        "sensitivity: exponent condition {:.6e}; {} entries written",
        report.exponent_condition,
        report.entries.len()
    );
    Ok(())
}

fn cmd_calibrate(ctx: Ctx) -> anyhow::Result<()> {
    ctx.cfg.require(&["calibrate"], "calibrate")?;
    let spec = ctx.cfg.calibrate.clone().unwrap();
    let text = std::fs::read_to_string(&spec.input)
        .map_err(|e| anyhow::anyhow!("calibrate input {}: {e}", spec.input))?;
    let series = read_station_csv(&text, spec.divisor)?;

    let mut fits = std::io::BufWriter::new(std::fs::File::create(ctx.out.join("fits.csv"))?);
    writeln!(fits, "station_id,r,d,alpha,Q,sse,mean_abs_error")?;
    let mut trajs = std::io::BufWriter::new(std::fs::File::create(ctx.out.join("trajectories.csv"))?);
    writeln!(trajs, "station_id,day_offset,fitted")?;
    let mut payload = Vec::new();
    for s in &series {
        let mut settings = spec.settings.clone();
        if let Some((_, w)) = spec
            .warm_starts
            .iter()
            .find(|(id, _)| *id == s.station_id)
        {
            settings.warm_start = Some(*w);
        }
        let fit = fit_station(s, &settings)?;
        writeln!(
            fits,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            fit.station_id,
            fit.params.r,
            fit.params.d,
            fit.params.alpha_src,
            fit.params.q,
            fit.sse,
            fit.mean_error
        )?;
        for (t, x) in s.day_offsets.iter().zip(fit.trajectory.iter()) {
            writeln!(trajs, "{},{t},{x:.16e}", fit.station_id)?;
        }
        payload.push(serde_json::to_value(&fit)?);
        println!(
            "station {}: sse {:.4e}, mean error {:.4}",
            fit.station_id, fit.sse, fit.mean_error
        );
    }
    drop(fits);
    drop(trajs);
    ctx.write_report(serde_json::Value::Array(payload))?;
    Ok(())
}

fn cmd_simulate(ctx: Ctx) -> anyhow::Result<()> {
    ctx.cfg
        .require(&["model", "jumps", "risk", "quadrature", "sim"], "simulate")?;
    let cfg = &ctx.cfg;
    let spec = cfg.model.as_ref().unwrap();
    let model = spec.build(cfg.jumps.as_ref().unwrap())?;
    let quad = build_quadrature(cfg)?;
    let params = cfg.risk.unwrap();
    let sim_spec = cfg.sim.clone().unwrap();
    let mut sim = sim_spec.to_config();
    if let Some(seed) = ctx.seed {
        sim.seed = seed;
    }

    // policy construction may need the closed form or a previous solve
    let exact_sol;
    let solved;
    let policy = match &sim_spec.policy {
        PolicySpec::Null => Policy::Null,
        PolicySpec::ExactPhi => {
            let (a, alpha) = match spec {
                ModelSpec::Logistic1d { a, alpha } | ModelSpec::Linear1d { a, alpha } => {
                    (*a, *alpha)
                }
                other => anyhow::bail!(
                    "config error: exact-phi policy needs a 1D benchmark model, got {other:?}"
                ),
            };
            exact_sol = compute_a(&LinearModelParams {
                a,
                alpha,
                risk: params,
                jumps: cfg.jumps.clone().unwrap(),
            })?;
            Policy::ExactPhi(&exact_sol)
        }
        PolicySpec::FromSolve { dir } => {
            let grid = cfg.build_grid(spec.dim())?;
            let field = Field::read_csv(&Path::new(dir).join("value.csv"), grid)?;
            let solver_cfg = cfg.solver.clone().unwrap_or_default();
            let disc = Discretization::new(model.as_ref(), grid, &quad, params, solver_cfg)?;
            let bundle = disc.extract_policy(&field);
            solved = (field, bundle);
            Policy::Grid {
                bundle: &solved.1,
                value: &solved.0,
            }
        }
    };

    let est = estimate_value(model.as_ref(), &params, &quad, &sim, &policy)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(ctx.out.join("estimate.csv"))?);
    writeln!(out, "x1,x2,mean,stderr,paths,T,truncation_bound")?;
    writeln!(
        out,
        "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
        sim.state0[0], sim.state0[1], est.mean, est.std_err, est.paths, est.horizon, est.truncation_bound
    )?;
    drop(out);
    ctx.write_report(serde_json::to_value(&est)?)?;
    println!(
        "simulate: mean {:.6e} (se {:.2e}) over {} paths, horizon {:.2}",
        est.mean, est.std_err, est.paths, est.horizon
    );
    Ok(())
}

fn cmd_verify(ctx: Ctx) -> anyhow::Result<()> {
    let spec = ctx.cfg.verify.clone().unwrap_or_default();
    let seed = ctx.seed.unwrap_or(spec.seed);
    let fault = spec.fault.map(|FaultSpec::DivergenceSignFlip| FaultInjection::DivergenceSignFlip);
    let report = orlicz_hjb::verify::run_invariants(seed, spec.trials, fault);
    std::fs::write(
        ctx.out.join("verify.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    for r in &report.results {
        println!(
            "{:<36} {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" }
        );
        if let Some(ce) = &r.counterexample {
            println!("    counterexample: {ce}");
        }
    }
    ctx.write_report(serde_json::to_value(&report)?)?;
    if !report.all_passed {
        anyhow::bail!(CoreError::Simulation("invariant suite failed".into()));
    }
    Ok(())
}

/// `i,j,x1,x2,F,Psi` with full precision.
fn write_value_csv(path: &Path, field: &Field, p: f64) -> anyhow::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,j,x1,x2,F,Psi")?;
    let g = field.grid;
    for j in 0..=g.n[1] {
        for i in 0..=g.n[0] {
            let [x1, x2] = g.vertex(i, j);
            let f = field.at(i, j);
            let psi = if f >= 0.0 { f.powf(1.0 / p) } else { f64::NAN };
            writeln!(out, "{i},{j},{x1:.16e},{x2:.16e},{f:.16e},{psi:.16e}")?;
        }
    }
    Ok(())
}

/// `i,j,x1,x2,u1,u2,delta_tilde`, heatmap-ready.
fn write_policy_csv(path: &Path, policy: &orlicz_hjb::PolicyBundle) -> anyhow::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,j,x1,x2,u1,u2,delta_tilde")?;
    let g = policy.u1.grid;
    for j in 0..=g.n[1] {
        for i in 0..=g.n[0] {
            let [x1, x2] = g.vertex(i, j);
            writeln!(
                out,
                "{i},{j},{x1:.16e},{x2:.16e},{:.16e},{:.16e},{:.16e}",
                policy.u1.at(i, j),
                policy.u2.at(i, j),
                policy.delta_tilde.at(i, j)
            )?;
        }
    }
    Ok(())
}
