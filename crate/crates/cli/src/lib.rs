//! Command-line front end: argument parsing, deterministic seeding, thread
//! control and CSV/JSON report emission for every module of `heatlab`.

use std::fmt::Write as _;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use heatlab::ctrw::{
    exterior_bins, histogram_check, sample_exterior_batch, transform_check, ExteriorMethod, RngStream, ACCEPTANCE_FLOOR,
    TRANSFORM_NODES,
};
use heatlab::dpp::{dpp_solve, refine_directions, walk_estimate, Backend, GameConfig, GameMode, SlabGrid, ValueSlab};
use heatlab::fracheat::{eval_hs, plane_wave_value, symbol_oracle, QuadratureSpec, Route};
use heatlab::infinity::{eval_hs_infinity, Orientation, SphereGrid, GRADIENT_THRESHOLD};
use heatlab::kernel::{kappa, KAPPA_TOL};
use heatlab::limits::{limit_sweep_hs, limit_sweep_infinity, LimitSweep};
use heatlab::meanvalue::expansion_report;
use heatlab::selftest::run_selftest;
use heatlab::{parse_field, Error, FracParams, SpaceTimePoint};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 7;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "heatlab", version, about = "Fractional heat operators, mean value formulas, samplers and games")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of every stochastic step, or `random`.
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel constants.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Operator evaluation and mean value convergence.
    #[command(subcommand)]
    Op(OpCmd),
    /// Coupled random walk sampling and validation.
    #[command(subcommand)]
    Ctrw(CtrwCmd),
    /// Game values by value iteration.
    #[command(subcommand)]
    Game(GameCmd),
    /// Limits as s approaches 1.
    #[command(subcommand)]
    Limits(LimitsCmd),
    /// Runs the acceptance checks and prints a pass/fail table.
    Selftest,
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    /// The normalization constant κ(n,s).
    Kappa {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Hyper,
    Balak,
    Symbol,
    Infinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OrientArg {
    Fwd,
    Bwd,
}

impl From<OrientArg> for Orientation {
    fn from(o: OrientArg) -> Self {
        match o {
            OrientArg::Fwd => Orientation::Forward,
            OrientArg::Bwd => Orientation::Backward,
        }
    }
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Field spec, e.g. `gaussian:1,1,1` or `planewave:1,0`.
    #[arg(long)]
    field: Option<String>,
    /// Evaluation point `x1,..,xn,t`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum OpCmd {
    /// One operator value with its error estimate.
    Evaluate {
        #[arg(long, value_enum)]
        route: RouteArg,
        #[command(flatten)]
        target: FieldArgs,
        #[arg(long)]
        s: f64,
        /// Spatial dimension; must match the point when both are given.
        #[arg(long)]
        n: Option<usize>,
        /// Frequency vector of the symbol route.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value = "bwd")]
        orient: OrientArg,
        #[arg(long, default_value_t = 8)]
        grid_res: usize,
    },
    /// Mean value remainders on an ε-grid.
    Convergence {
        #[command(flatten)]
        target: FieldArgs,
        #[arg(long)]
        s: f64,
        #[arg(long, value_delimiter = ',')]
        eps_grid: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    TwoRegion,
    Rejection,
}

impl From<MethodArg> for ExteriorMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::TwoRegion => ExteriorMethod::TwoRegion,
            MethodArg::Rejection => ExteriorMethod::Rejection,
        }
    }
}

#[derive(Subcommand, Debug)]
enum CtrwCmd {
    /// Transform, histogram and acceptance diagnostics.
    Validate {
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
    /// Exterior draws as CSV rows `w..., tau, weight`.
    Sample {
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, value_enum, default_value = "two-region")]
        method: MethodArg,
    },
}

#[derive(Subcommand, Debug)]
enum GameCmd {
    /// Converged value of the walk or the tug-of-war on a slab.
    Value {
        #[arg(long, value_parser = ["walk", "tug"])]
        mode: String,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        eps: f64,
        /// Box `a,b` or `a1,b1,a2,b2`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        omega: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tspan: Vec<f64>,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        data: String,
        /// Monte Carlo backend with this many draws per jump law.
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Sphere-grid resolution of the tug-of-war.
        #[arg(long, default_value_t = 4)]
        resolution: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_sweeps: usize,
        /// Also simulate this many walks from each `--walk-point`.
        #[arg(long, default_value_t = 0)]
        walks: usize,
        /// Walk start `x1,..,xn,t`; repeatable.
        #[arg(long = "walk-point", allow_hyphen_values = true)]
        walk_points: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LimitTarget {
    Hs,
    InfFwd,
    InfBwd,
}

#[derive(Subcommand, Debug)]
enum LimitsCmd {
    /// Operator values along an s-grid against the local limit.
    Sweep {
        #[arg(long, value_enum)]
        target: LimitTarget,
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.9,0.99,0.999")]
        s_grid: Vec<f64>,
    },
}

/// A finished report: JSON metadata, a JSON payload and optional CSV rows.
struct Report {
    meta: Value,
    payload: Value,
    table: Option<(Vec<String>, Vec<Vec<f64>>)>,
    /// Overrides the default format when `--format` is absent.
    default_format: Format,
    /// Plain-text rendering used in place of the CSV form.
    text: Option<String>,
    exit: i32,
}

impl Report {
    fn json(payload: Value) -> Self {
        Self { meta: Value::Null, payload, table: None, default_format: Format::Json, text: None, exit: EXIT_OK }
    }

    fn csv(payload: Value, header: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        Self { table: Some((header, rows)), default_format: Format::Csv, ..Self::json(payload) }
    }

    fn render(&self, format: Option<Format>) -> String {
        match (format.unwrap_or(self.default_format), &self.table, &self.text) {
            (Format::Csv, Some((header, rows)), _) => {
                let mut head = self.meta.clone();
                head["summary"] = self.payload.clone();
                let mut s = format!("# {head}\n{}\n", header.join(","));
                for row in rows {
                    let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
                s
            }
            (Format::Csv, None, Some(text)) => format!("# {}\n{text}", self.meta),
            _ => {
                let mut v = json!({ "metadata": self.meta, "payload": self.payload });
                if let Some((header, rows)) = &self.table {
                    v["columns"] = json!(header);
                    v["rows"] = json!(rows);
                }
                format!("{}\n", serde_json::to_string_pretty(&v).expect("reports are serializable"))
            }
        }
    }
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type CmdResult = std::result::Result<Report, Failure>;

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// Quadrature defaults with `HEATLAB_ABS_TOL`, `HEATLAB_REL_TOL` and
/// `HEATLAB_MAX_SUBDIVISIONS` overrides.
fn quadrature_spec() -> std::result::Result<QuadratureSpec, Failure> {
    let mut q = QuadratureSpec::default();
    let read = |name: &str| std::env::var(name).ok();
    if let Some(v) = read("HEATLAB_ABS_TOL") {
        q.abs_tol = v.parse().map_err(|_| Failure::Usage(format!("HEATLAB_ABS_TOL: cannot parse `{v}`")))?;
    }
    if let Some(v) = read("HEATLAB_REL_TOL") {
        q.rel_tol = v.parse().map_err(|_| Failure::Usage(format!("HEATLAB_REL_TOL: cannot parse `{v}`")))?;
    }
    if let Some(v) = read("HEATLAB_MAX_SUBDIVISIONS") {
        q.max_subdivisions = v.parse().map_err(|_| Failure::Usage(format!("HEATLAB_MAX_SUBDIVISIONS: cannot parse `{v}`")))?;
    }
    q.validate()?;
    Ok(q)
}

fn split_point(values: &[f64]) -> std::result::Result<SpaceTimePoint, Failure> {
    if values.len() < 2 {
        return usage("a point needs at least one spatial coordinate and a time: x1,..,xn,t");
    }
    let (x, t) = values.split_at(values.len() - 1);
    Ok(SpaceTimePoint::new(x.to_vec(), t[0])?)
}

fn field_and_point(args: &FieldArgs) -> std::result::Result<(heatlab::ScalarField, SpaceTimePoint), Failure> {
    let (Some(spec), Some(point)) = (&args.field, &args.point) else {
        return usage("--field and --point are required");
    };
    let p = split_point(point)?;
    Ok((parse_field(spec, p.dim())?, p))
}

fn kernel_kappa(n: usize, s: f64, tol: Option<f64>) -> CmdResult {
    let fp = FracParams::new(n, s)?;
    let mut t = KAPPA_TOL;
    if let Some(tol) = tol {
        t.abs = tol;
        t.rel = tol;
    }
    let k = kappa(&fp, t)?;
    Ok(Report::json(json!({ "n": n, "s": s, "kappa": k.value, "error": k.error, "evaluations": k.evals })))
}

#[allow(clippy::too_many_arguments)]
fn op_evaluate(
    route: RouteArg,
    target: &FieldArgs,
    s: f64,
    n: Option<usize>,
    xi: Option<Vec<f64>>,
    rho: Option<f64>,
    orient: OrientArg,
    grid_res: usize,
) -> CmdResult {
    let q = quadrature_spec()?;
    if route == RouteArg::Symbol && target.field.is_none() {
        let Some(xi) = xi else { return usage("the symbol route needs --xi (and optionally --rho) or --field") };
        let rho = rho.unwrap_or(0.0);
        if n.is_some_and(|n| n != xi.len()) {
            return usage("--n does not match the length of --xi");
        }
        let value = match &target.point {
            Some(pt) => plane_wave_value(&xi, rho, s, &split_point(pt)?)?,
            None => symbol_oracle(&xi, rho, s)?.0,
        };
        return Ok(Report::json(json!({ "route": "symbol", "s": s, "xi": xi, "rho": rho, "value": value, "error_estimate": 0.0 })));
    }
    let (u, p) = field_and_point(target)?;
    if n.is_some_and(|n| n != p.dim()) {
        return usage("--n does not match the dimension of --point");
    }
    let fp = FracParams::new(p.dim(), s)?;
    let v = match route {
        RouteArg::Hyper => eval_hs(&u, &p, &fp, &q, Route::Hypersingular)?,
        RouteArg::Balak => eval_hs(&u, &p, &fp, &q, Route::Balakrishnan)?,
        RouteArg::Symbol => eval_hs(&u, &p, &fp, &q, Route::Symbol)?,
        RouteArg::Infinity => {
            let grid = SphereGrid::new(p.dim(), grid_res)?;
            let v = eval_hs_infinity(&u, &p, &fp, orient.into(), &grid, GRADIENT_THRESHOLD, &q)?;
            return Ok(Report::json(json!({ "route": "infinity", "s": s, "value": v.value, "error_estimate": v.error_estimate, "detail": v })));
        }
    };
    Ok(Report::json(json!({ "route": v.route, "s": s, "value": v.value, "error_estimate": v.error_estimate })))
}

fn op_convergence(target: &FieldArgs, s: f64, eps_grid: &[f64]) -> CmdResult {
    let q = quadrature_spec()?;
    let (u, p) = field_and_point(target)?;
    let fp = FracParams::new(p.dim(), s)?;
    let r = expansion_report(&u, &p, &fp, eps_grid, &q)?;
    let rows = (0..r.eps_grid.len()).map(|i| vec![r.eps_grid[i], r.mean_values[i], r.remainder[i], r.remainder_error[i]]).collect();
    let fit = json!({ "fitted_order": r.fitted_order, "exact": r.exact, "operator_value": r.operator_value });
    Ok(Report::csv(fit, cols(&["eps", "Ms", "remainder", "remainder_error"]), rows))
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn ctrw_validate(s: f64, n: usize, draws: usize, eps: f64, seed: u64) -> CmdResult {
    let fp = FracParams::new(n, s)?;
    let transforms = transform_check(s, n, draws, &TRANSFORM_NODES, RngStream::new(seed, 0))?;
    let exact = sample_exterior_batch(&fp, eps, draws, ExteriorMethod::TwoRegion, ACCEPTANCE_FLOOR, RngStream::new(seed, 1))?;
    let weighted = sample_exterior_batch(&fp, eps, draws.min(200_000), ExteriorMethod::Rejection, ACCEPTANCE_FLOOR, RngStream::new(seed, 2))?;
    let h_exact = histogram_check(&fp, &exact, 0.0)?;
    let h_weighted = histogram_check(&fp, &weighted, eps * eps)?;
    let passed = transforms.max_z <= 3.0 && h_exact.chi_square.p_value > 0.01 && h_weighted.chi_square.p_value > 0.01;
    let mut r = Report::json(json!({
        "passed": passed,
        "transforms": transforms,
        "histogram_two_region": h_exact,
        "histogram_rejection": h_weighted,
        "acceptance_rate": { "two_region": exact.acceptance_rate, "rejection": weighted.acceptance_rate },
        "bins": exterior_bins(eps).len(),
    }));
    r.exit = if passed { EXIT_OK } else { EXIT_VALIDATION };
    Ok(r)
}

fn ctrw_sample(s: f64, n: usize, eps: f64, draws: usize, method: MethodArg, seed: u64) -> CmdResult {
    let fp = FracParams::new(n, s)?;
    let b = sample_exterior_batch(&fp, eps, draws, method.into(), ACCEPTANCE_FLOOR, RngStream::new(seed, 0))?;
    let mut header: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
    header.extend(cols(&["tau", "weight"]));
    let rows = b
        .draws
        .iter()
        .zip(&b.weights)
        .map(|(d, w)| {
            let mut row = d.w.clone();
            row.extend([d.tau, *w]);
            row
        })
        .collect();
    let summary = json!({ "acceptance_rate": b.acceptance_rate, "effective_sample_size": b.effective_sample_size, "method": b.method });
    Ok(Report::csv(summary, header, rows))
}

#[allow(clippy::too_many_arguments)]
fn game_value(
    mode: &str,
    s: f64,
    eps: f64,
    omega: &[f64],
    tspan: &[f64],
    h: f64,
    k: f64,
    data: &str,
    draws: Option<usize>,
    level: usize,
    resolution: usize,
    tol: f64,
    max_sweeps: usize,
    walks: usize,
    walk_points: &[String],
    seed: u64,
) -> CmdResult {
    if omega.len() != 2 && omega.len() != 4 {
        return usage("--omega takes a,b or a1,b1,a2,b2");
    }
    if tspan.len() != 2 {
        return usage("--tspan takes t0,T");
    }
    if !(h > 0.0 && k > 0.0) {
        return Err(Failure::Validation("h and k must be positive".into()));
    }
    let n = omega.len() / 2;
    let lo: Vec<f64> = (0..n).map(|d| omega[2 * d]).collect();
    let hi: Vec<f64> = (0..n).map(|d| omega[2 * d + 1]).collect();
    let width = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let cells = (width / h).round().max(1.0) as usize;
    let steps = ((tspan[1] - tspan[0]) / k).round().max(1.0) as usize;
    let grid = SlabGrid::new(lo, hi, cells, tspan[0], tspan[1], steps)?;
    let slab = ValueSlab::new(grid.clone(), parse_field(data, n)?, eps)?;
    let fp = FracParams::new(n, s)?;
    let backend = match draws {
        Some(draws) => Backend::MonteCarlo { draws, seed },
        None => Backend::Quadrature { level },
    };
    let cfg = GameConfig { mode: GameMode::parse(mode)?, resolution, backend };
    let mut report = dpp_solve(&slab, &cfg, &fp, tol, max_sweeps)?;
    if cfg.mode == GameMode::TugOfWar {
        refine_directions(&mut report, &cfg, &fp, tol, max_sweeps)?;
    }
    let mut walk_rows = Vec::new();
    if walks > 0 {
        if cfg.mode != GameMode::LinearWalk {
            return usage("--walks applies to the linear walk only");
        }
        for (i, spec) in walk_points.iter().enumerate() {
            let coords = spec
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Failure::Usage(format!("cannot parse walk point `{spec}`")))?;
            let p = split_point(&coords)?;
            let w = walk_estimate(&p, &grid, &slab.exterior, eps, &fp, walks, RngStream::new(seed, 1000 + i as u64))?;
            walk_rows.push(json!({ "point": coords, "dpp": report.slab.read(&p.x, p.t), "walk": w }));
        }
    }
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(cols(&["t", "value"]));
    let rows = (0..grid.len())
        .map(|i| {
            let (mut x, t) = grid.node(i);
            x.extend([t, report.slab.values[i]]);
            x
        })
        .collect();
    let log = json!({
        "cells": cells,
        "steps": steps,
        "converged": report.converged,
        "sweeps": report.residuals.len(),
        "residuals": report.residuals,
        "interpolation_bound": report.interpolation_bound,
        "jump_nodes": report.jump_nodes,
        "refinement": report.refinement,
        "walks": walk_rows,
    });
    let mut r = Report::csv(log, header, rows);
    r.exit = if report.converged { EXIT_OK } else { EXIT_VALIDATION };
    Ok(r)
}

fn sweep_rows(sw: &LimitSweep) -> Vec<Vec<f64>> {
    (0..sw.s_grid.len()).map(|i| vec![sw.s_grid[i], sw.values[i], sw.local_target, sw.gaps[i], sw.errors[i]]).collect()
}

fn limits_sweep(target: LimitTarget, field: &FieldArgs, s_grid: &[f64]) -> CmdResult {
    let q = quadrature_spec()?;
    let (u, p) = field_and_point(field)?;
    let sw = match target {
        LimitTarget::Hs => limit_sweep_hs(&u, &p, s_grid, &q)?,
        LimitTarget::InfFwd => limit_sweep_infinity(&u, &p, s_grid, Orientation::Forward, &q)?,
        LimitTarget::InfBwd => limit_sweep_infinity(&u, &p, s_grid, Orientation::Backward, &q)?,
    };
    let summary = json!({ "local_target": sw.local_target, "extrapolated": sw.extrapolated });
    Ok(Report::csv(summary, cols(&["s", "value", "target", "gap", "error"]), sweep_rows(&sw)))
}

fn selftest(seed: u64) -> CmdResult {
    let r = run_selftest(seed)?;
    let exit = if r.passed() { EXIT_OK } else { EXIT_VALIDATION };
    let text = r.table();
    Ok(Report { text: Some(text), default_format: Format::Csv, exit, ..Report::json(serde_json::to_value(&r).expect("serializable")) })
}

fn resolve_seed(arg: &Option<String>) -> std::result::Result<u64, Failure> {
    match arg.as_deref() {
        None => Ok(DEFAULT_SEED),
        Some("random") => {
            let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
            Ok((nanos as u64) ^ ((nanos >> 64) as u64) ^ u64::from(std::process::id()))
        }
        Some(v) => v.parse().map_err(|_| Failure::Usage(format!("--seed takes an unsigned integer or `random`, got `{v}`"))),
    }
}

fn dispatch(cli: &Cli, seed: u64) -> CmdResult {
    match &cli.command {
        Command::Kernel(KernelCmd::Kappa { n, s, tol }) => kernel_kappa(*n, *s, *tol),
        Command::Op(OpCmd::Evaluate { route, target, s, n, xi, rho, orient, grid_res }) => {
            op_evaluate(*route, target, *s, *n, xi.clone(), *rho, *orient, *grid_res)
        }
        Command::Op(OpCmd::Convergence { target, s, eps_grid }) => op_convergence(target, *s, eps_grid),
        Command::Ctrw(CtrwCmd::Validate { s, n, draws, eps }) => ctrw_validate(*s, *n, *draws, *eps, seed),
        Command::Ctrw(CtrwCmd::Sample { s, n, eps, draws, method }) => ctrw_sample(*s, *n, *eps, *draws, *method, seed),
        Command::Game(GameCmd::Value {
            mode,
            s,
            eps,
            omega,
            tspan,
            h,
            k,
            data,
            draws,
            level,
            resolution,
            tol,
            max_sweeps,
            walks,
            walk_points,
        }) => game_value(
            mode, *s, *eps, omega, tspan, *h, *k, data, *draws, *level, *resolution, *tol, *max_sweeps, *walks, walk_points, seed,
        ),
        Command::Limits(LimitsCmd::Sweep { target, field, s_grid }) => limits_sweep(*target, field, s_grid),
        Command::Selftest => selftest(seed),
    }
}

/// The command line without the options that cannot change results
/// (`--threads`, `--out`), so reports compare equal across them.
fn config_echo(argv: &[std::ffi::OsString]) -> String {
    let mut kept = Vec::new();
    let mut args = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = args.next() {
        match a.as_str() {
            "--threads" | "--out" => {
                args.next();
            }
            _ if a.starts_with("--threads=") || a.starts_with("--out=") => {}
            _ => kept.push(a),
        }
    }
    kept.join(" ")
}

/// Parses `argv` (program name first), runs the command and writes the
/// report to `out` or to `--out`. Returns the process exit code: 0 on
/// success, 2 when validation fails, 1 on usage errors.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = resolve_seed(&cli.seed).and_then(|seed| {
        let threads = cli.threads.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot build a pool of {threads} threads: {e}")))?;
        let mut report = pool.install(|| dispatch(&cli, seed))?;
        report.meta = json!({
            "tool": "heatlab",
            "version": env!("CARGO_PKG_VERSION"),
            "command": config_echo(&argv),
            "seed": seed,
            "quadrature": quadrature_spec()?,
        });
        Ok(report)
    });
    match result {
        Ok(report) => {
            let text = report.render(cli.format);
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: cannot write the report: {e}");
                return EXIT_VALIDATION;
            }
            report.exit
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Validation(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_VALIDATION
        }
    }
}
