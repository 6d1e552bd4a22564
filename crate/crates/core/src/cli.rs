//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bnb::{lipschitz_tolerance, recommended_loops, run_modified_bnb, BnbConfig, BnbResult};
use crate::error::{Error, Result};
use crate::oracle::{check_point, grid_minimize, GridOptions};
use crate::parser::parse_problem;
use crate::problem::{initial_box, normalize, GpoProblem};
use crate::relax::{glb_bk, GlbStatus};
use crate::sdp::SdpOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "polybnb", version, about = "Box-constrained polynomial optimization by SOS branch and bound")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Debug, Subcommand)]
enum Mode {
    /// Run the modified branch and bound and write a trace.
    Solve(SolveArgs),
    /// Evaluate a single order-k lower bound on the problem box.
    Glb(GlbArgs),
    /// Minimize over a uniform grid.
    Oracle(OracleArgs),
    /// Report constraint values at a point.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Problem file.
    problem: PathBuf,
    /// Half-width of the initial box [-r, r]^n when the file declares none.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, Args)]
struct SdpArgs {
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    psd_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SdpArgs {
    fn options(&self) -> SdpOptions {
        let mut o = SdpOptions::default();
        if let Some(v) = self.gap_tol {
            o.gap_tol = v;
        }
        if let Some(v) = self.psd_tol {
            o.psd_tol = v;
        }
        if let Some(v) = self.max_iter {
            o.max_iter = v;
        }
        o
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Loop count; defaults to the smallest l above n log2(L sqrt(n) / eta).
    #[arg(long)]
    loops: Option<usize>,
    /// Trace CSV output path.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    sdp: SdpArgs,
}

#[derive(Debug, Args)]
struct GlbArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[command(flatten)]
    sdp: SdpArgs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    grid: usize,
    /// Inequality tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tau_feas: f64,
    /// Equality tolerance.
    #[arg(long, default_value_t = 1e-3)]
    tau_eq: f64,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Problem file.
    problem: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    point: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Solver { .. } => EXIT_SOLVER,
        Error::GloballyInfeasible { .. } => EXIT_INFEASIBLE,
        _ => EXIT_PARSE,
    }
}

fn load(path: &Path) -> Result<GpoProblem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn vec_str(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
}

/// Renders the trace as CSV with a fixed header.
pub fn trace_csv(result: &BnbResult, nvars: usize) -> String {
    let mut s = String::from("m,branch_id,lambda_m,lambda_star,longest_edge,volume");
    for i in 1..=nvars {
        s.push_str(&format!(",center_{i}"));
    }
    s.push_str(",f_center,ineq_violation_sum,eq_violation_sum,gap\n");
    for r in &result.trace {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.m,
            r.branch_id,
            num(r.lambda_m),
            num(r.lambda_star),
            num(r.longest_edge),
            num(r.volume),
            vec_str(&r.center),
            num(r.f_center),
            num(r.ineq_violation),
            num(r.eq_violation),
            num(r.gap)
        ));
    }
    s
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let gpo = load(&a.common.problem)?;
    let bx = initial_box(&gpo, a.common.radius.unwrap_or(0.0))?;
    let p = normalize(&gpo);
    let loops = a.loops.unwrap_or_else(|| recommended_loops(&bx, a.eta));
    let cfg = BnbConfig {
        k: a.k,
        eta: a.eta,
        loops,
        initial_box: bx.clone(),
        sdp: a.sdp.options(),
    };
    let r = run_modified_bnb(&p, &cfg)?;
    if let Some(path) = &a.trace {
        std::fs::write(path, trace_csv(&r, p.nvars))
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?;
    }
    let half_diag = r.last_box.edges().map(|e| 0.25 * e * e).sum::<f64>().sqrt();
    let (gv, hv) = crate::bnb::violation_sums(&p, &r.x);
    let fx = p.objective.eval_unchecked(&r.x);
    let _ = writeln!(out, "loops = {loops}");
    let _ = writeln!(out, "lambda_star = {}", num(r.lambda_star));
    for (name, v) in gpo.var_names.iter().zip(&r.x) {
        let _ = writeln!(out, "{name} = {}", num(*v));
    }
    let _ = writeln!(out, "f(x) = {}", num(fx));
    let _ = writeln!(out, "gap = {}", num((fx - r.lambda_star).abs()));
    let _ = writeln!(out, "ineq_violation_sum = {}", num(gv));
    let _ = writeln!(out, "eq_violation_sum = {}", num(hv));
    let _ = writeln!(out, "lipschitz_delta = {}", num(lipschitz_tolerance(&p, &bx, half_diag)));
    let _ = writeln!(out, "solver_failures = {}", r.solver_failures);
    if r.solver_failures > 0 {
        log::warn!("{} child boxes were pruned after solver failures", r.solver_failures);
    }
    Ok(EXIT_OK)
}

fn glb(a: &GlbArgs, out: &mut dyn Write) -> Result<i32> {
    let gpo = load(&a.common.problem)?;
    let bx = initial_box(&gpo, a.common.radius.unwrap_or(0.0))?;
    let p = normalize(&gpo);
    let r = glb_bk(&p, &bx, a.k, &a.sdp.options())?;
    let code = match r.status {
        GlbStatus::Bound(v) => {
            let _ = writeln!(out, "bound = {}", num(v));
            if let Some(d) = r.moment_bound {
                let _ = writeln!(out, "moment_bound = {}", num(d));
            }
            EXIT_OK
        }
        GlbStatus::BoxInfeasible => {
            let _ = writeln!(out, "infeasible");
            EXIT_INFEASIBLE
        }
        GlbStatus::SolverFailure(s) => {
            log::error!("solver failure on {bx}: {s}");
            EXIT_SOLVER
        }
    };
    let _ = writeln!(out, "sdp_iterations = {}", r.iterations);
    Ok(code)
}

fn oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<i32> {
    let gpo = load(&a.common.problem)?;
    let bx = initial_box(&gpo, a.common.radius.unwrap_or(0.0))?;
    let p = normalize(&gpo);
    let opts = GridOptions {
        tau_feas: a.tau_feas,
        tau_eq: a.tau_eq,
        ..GridOptions::default()
    };
    let r = grid_minimize(&p, &bx, a.grid, &opts)?;
    let _ = writeln!(out, "grid = {}", r.points_per_axis);
    let _ = writeln!(out, "feasible_points = {}", r.feasible_points);
    match r.best {
        Some((x, v)) => {
            for (name, xi) in gpo.var_names.iter().zip(&x) {
                let _ = writeln!(out, "{name} = {}", num(*xi));
            }
            let _ = writeln!(out, "f = {}", num(v));
        }
        None => {
            let _ = writeln!(out, "no feasible grid point");
        }
    }
    Ok(EXIT_OK)
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let gpo = load(&a.problem)?;
    let r = check_point(&gpo, &a.point, a.delta)?;
    let _ = writeln!(out, "f = {}", num(r.objective));
    for (i, v) in r.inequalities.iter().enumerate() {
        let flag = if *v >= -a.delta { "ok" } else { "VIOLATED" };
        let _ = writeln!(out, "g{} = {} {flag}", i + 1, num(*v));
    }
    for (j, v) in r.equalities.iter().enumerate() {
        let flag = if *v <= a.delta { "ok" } else { "VIOLATED" };
        let _ = writeln!(out, "|h{}| = {} {flag}", j + 1, num(*v));
    }
    for (j, v) in r.box_values.iter().enumerate() {
        let flag = if *v >= -a.delta { "ok" } else { "VIOLATED" };
        let _ = writeln!(out, "w{} = {} {flag}", j + 1, num(*v));
    }
    let _ = writeln!(out, "{}", if r.feasible { "PASS" } else { "FAIL" });
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let res = match &cli.mode {
        Mode::Solve(a) => solve(a, out),
        Mode::Glb(a) => glb(a, out),
        Mode::Oracle(a) => oracle(a, out),
        Mode::Check(a) => check(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
