//! `nilsteer` command-line front end.
//!
//! Exit codes: 0 success, 1 check or tolerance failure, 2 usage error,
//! 3 internal error (a synthesized schedule failed its own verification).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cfs::{cfs_equations, InputStrategy, DEFAULT_NODES, DEFAULT_SPAN_TOL, DEFAULT_STEPS};
use crate::error::Error;
use crate::free_lie::FreeNilpotentLieAlgebra;
use crate::rational::qi;
use crate::sim::{
    integrate_flow, steer, steer_via_feedback, PlanResult, StageDiagnostics, SteerOptions,
    Trajectory, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::synth::{synth_order3_m2, ControlSchedule, SynthMode};
use crate::systems::{builtin, load_system, unicycle_feedback, unicycle_nilpotent};
use crate::vfield::{
    involutivity_check, larc_check, nilpotency_check, ControlSystem, DEFAULT_NILP_TOL,
    DEFAULT_RANK_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "nilsteer", version, about = "Steer drift-free control systems with piecewise-constant inputs")]
pub struct Cli {
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the Hall basis of the free nilpotent Lie algebra.
    Basis(BasisArgs),
    /// Bracket-generating, involutivity and nilpotency checks.
    Check(CheckArgs),
    /// Plan a schedule from one state to another and verify it by simulation.
    Steer(SteerArgs),
    /// Simulate a schedule file.
    Simulate(SimulateArgs),
    /// Tour of the worked examples.
    Demo,
}

#[derive(Args, Debug)]
pub struct BasisArgs {
    #[arg(short = 'm', long)]
    pub m: usize,
    #[arg(short = 'k', long)]
    pub k: usize,
    /// Also print the Hall coordinate equations.
    #[arg(long)]
    pub cfs: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct SystemSource {
    /// Builtin system name.
    #[arg(long)]
    pub builtin: Option<String>,
    /// System definition file (JSON).
    #[arg(long)]
    pub system: Option<PathBuf>,
}

impl SystemSource {
    fn load(&self) -> crate::Result<ControlSystem> {
        match (&self.builtin, &self.system) {
            (Some(name), _) => builtin(name),
            (None, Some(path)) => load_system(path),
            (None, None) => Err(Error::Usage("no system given".into())),
        }
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub source: SystemSource,
    /// Random sample count.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Explicit sample point (repeatable); replaces random sampling.
    #[arg(long = "at", value_parser = parse_vec, allow_hyphen_values = true)]
    pub at: Vec<Point>,
    /// Nilpotency order to test (default: declared order, else 2).
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    /// Largest bracket degree used for the rank condition (default: declared
    /// order, else 3).
    #[arg(long)]
    pub larc_order: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL, value_parser = positive)]
    pub rank_tol: f64,
    #[arg(long, default_value_t = DEFAULT_NILP_TOL, value_parser = positive)]
    pub nilp_tol: f64,
    #[arg(long)]
    pub require_larc: bool,
    #[arg(long)]
    pub require_nilpotent: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Approximate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeedbackArg {
    /// Plan on the nilpotentized unicycle, execute through its feedback.
    Unicycle,
}

#[derive(Args, Debug)]
pub struct SteerArgs {
    #[command(flatten)]
    pub source: SystemSource,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    pub from: Point,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    pub to: Point,
    /// Intermediate curve point (repeatable).
    #[arg(long = "waypoint", value_parser = parse_vec, allow_hyphen_values = true)]
    pub waypoints: Vec<Point>,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Planning order (default: declared order, else 2).
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL, value_parser = positive)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_SPAN_TOL, value_parser = positive)]
    pub span_tol: f64,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// RK4 step (default: 1e-3 of the planned duration).
    #[arg(long, value_parser = positive)]
    pub max_step: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Solve fictitious inputs on the earliest independent Hall columns.
    #[arg(long)]
    pub prefer_low_degree: bool,
    #[arg(long, value_enum)]
    pub feedback: Option<FeedbackArg>,
    #[arg(long)]
    pub schedule_out: Option<PathBuf>,
    #[arg(long)]
    pub trajectory_out: Option<PathBuf>,
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SystemSource,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    pub from: Point,
    /// Schedule CSV.
    #[arg(long)]
    pub schedule: PathBuf,
    /// Optional target; the exit code then reflects `--tol`.
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    pub to: Option<Point>,
    #[arg(long, default_value_t = DEFAULT_TOL, value_parser = positive)]
    pub tol: f64,
    #[arg(long, value_parser = positive)]
    pub max_step: Option<f64>,
    #[arg(long, value_enum)]
    pub feedback: Option<FeedbackArg>,
    #[arg(long)]
    pub trajectory_out: Option<PathBuf>,
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

/// Comma-separated state vector, e.g. `0,0,-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

fn parse_vec(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| format!("'{t}' is not a number"))?;
            if v.is_finite() { Ok(v) } else { Err(format!("'{t}' is not finite")) }
        })
        .collect::<Result<Vec<f64>, String>>()
        .map(Point)
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' must be a positive number")),
    }
}

// ---------------------------------------------------------------------------
// JSON output

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceJson {
    pub duration: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageJson {
    pub span_residual: f64,
    pub cfs_steps: usize,
    pub hall_target: Vec<f64>,
    pub oracle_residual: f64,
    pub exact_synthesis: bool,
    pub pieces: usize,
    pub endpoint_error: f64,
}

impl From<&StageDiagnostics> for StageJson {
    fn from(d: &StageDiagnostics) -> Self {
        StageJson {
            span_residual: d.span_residual,
            cfs_steps: d.cfs_steps,
            hall_target: d.hall_target.clone(),
            oracle_residual: d.oracle_residual,
            exact_synthesis: d.exact_synthesis,
            pieces: d.pieces,
            endpoint_error: d.endpoint_error,
        }
    }
}

/// `steer --json` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerSummary {
    pub system: String,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub achieved: Vec<f64>,
    pub endpoint_error: f64,
    pub tol: f64,
    pub success: bool,
    pub iterations: usize,
    pub order: usize,
    pub mode: String,
    pub max_step: f64,
    pub total_duration: f64,
    pub schedule: Vec<PieceJson>,
    pub diagnostics: Vec<StageJson>,
}

impl SteerSummary {
    pub fn new(system: &str, plan: &PlanResult, from: &[f64], tol: f64, mode: ModeArg) -> Self {
        SteerSummary {
            system: system.to_string(),
            from: from.to_vec(),
            to: plan.target.clone(),
            achieved: plan.achieved.clone(),
            endpoint_error: plan.endpoint_error,
            tol,
            success: plan.endpoint_error < tol,
            iterations: plan.iterations,
            order: plan.order,
            mode: match mode {
                ModeArg::Exact => "exact".into(),
                ModeArg::Approximate => "approximate".into(),
            },
            max_step: plan.max_step,
            total_duration: plan.schedule.total_duration(),
            schedule: plan
                .schedule
                .pieces
                .iter()
                .map(|p| PieceJson { duration: p.duration, u: p.u.clone() })
                .collect(),
            diagnostics: plan.diagnostics.iter().map(StageJson::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub system: String,
    pub samples: usize,
    pub larc_order: usize,
    pub spanning: bool,
    pub min_rank: usize,
    pub involutive: bool,
    pub involutivity_residual: f64,
    pub nilpotency_order: usize,
    pub nilpotent: bool,
    pub nilpotency_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub system: String,
    pub from: Vec<f64>,
    pub achieved: Vec<f64>,
    pub to: Option<Vec<f64>>,
    pub endpoint_error: Option<f64>,
    pub pieces: usize,
    pub total_duration: f64,
}

// ---------------------------------------------------------------------------

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Verification { .. } => EXIT_INTERNAL,
        Error::Refinement { .. }
        | Error::RankDeficient { .. }
        | Error::Domain { .. }
        | Error::Divergence { .. } => EXIT_CHECK,
        Error::Usage(_)
        | Error::Size { .. }
        | Error::UnsupportedOrder { .. }
        | Error::UnsupportedConfiguration { .. }
        | Error::Schema(_)
        | Error::UnknownSystem(_)
        | Error::Io(_) => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let res = match &cli.command {
        Command::Basis(a) => cmd_basis(a, out),
        Command::Check(a) => cmd_check(a, cli.seed, out),
        Command::Steer(a) => cmd_steer(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Demo => cmd_demo(out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn json_line(out: &mut dyn Write, v: &impl Serialize) -> crate::Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{s}").map_err(io)
}

fn cmd_basis(a: &BasisArgs, out: &mut dyn Write) -> crate::Result<i32> {
    let alg = FreeNilpotentLieAlgebra::build(a.m, a.k)?;
    if a.json {
        let basis: Vec<String> = (0..alg.s()).map(|i| alg.expression(i)).collect();
        let mut v = serde_json::json!({ "m": a.m, "k": a.k, "s": alg.s(), "basis": basis });
        if a.cfs {
            let eqs = cfs_equations(&alg);
            v["cfs"] = eqs.dump().lines().collect::<Vec<_>>().into();
        }
        json_line(out, &v)?;
    } else {
        write!(out, "{}", alg.dump()).map_err(io)?;
        if a.cfs {
            write!(out, "{}", cfs_equations(&alg).dump()).map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

/// Uniform samples in `[-1, 1]^n`, shrunk into any builtin validity domain.
fn sample_points(sys: &ControlSystem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains: Vec<_> = sys.fields().iter().filter_map(|f| f.domain()).collect();
    (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for d in &domains {
                x[d.var] = x[d.var].clamp(-0.95 * d.bound, 0.95 * d.bound);
            }
            x
        })
        .collect()
}

fn cmd_check(a: &CheckArgs, seed: u64, out: &mut dyn Write) -> crate::Result<i32> {
    let sys = a.source.load()?;
    let samples = if a.at.is_empty() {
        if a.samples == 0 {
            return Err(Error::Usage("--samples must be >= 1".into()));
        }
        sample_points(&sys, a.samples, seed)
    } else {
        a.at.iter().map(|p| p.0.clone()).collect()
    };
    let larc_order = a.larc_order.or(sys.declared_order).unwrap_or(3);
    let k = a.k.or(sys.declared_order).unwrap_or(2);
    let mut min_rank = usize::MAX;
    for x in &samples {
        min_rank = min_rank.min(larc_check(&sys, x, larc_order, a.rank_tol)?.rank);
    }
    let inv = involutivity_check(sys.fields(), &samples, a.rank_tol)?;
    let alg = FreeNilpotentLieAlgebra::build(sys.m(), k)?;
    let nil = nilpotency_check(&sys, &alg, &samples, a.nilp_tol)?;
    let summary = CheckSummary {
        system: sys.name.clone(),
        samples: samples.len(),
        larc_order,
        spanning: min_rank == sys.n(),
        min_rank,
        involutive: inv.involutive,
        involutivity_residual: inv.worst_residual,
        nilpotency_order: k,
        nilpotent: nil.nilpotent,
        nilpotency_residual: nil.worst_residual,
    };
    let yn = |b: bool| if b { "yes" } else { "no" };
    if a.json {
        json_line(out, &summary)?;
    } else {
        writeln!(
            out,
            "system: {}\nsamples: {}\nspanning: {} (min rank {} of {}, brackets up to degree {})\n\
             involutive: {} (worst residual {:.3e})\nnilpotent({}): {} (worst residual {:.3e})",
            summary.system,
            summary.samples,
            yn(summary.spanning),
            min_rank,
            sys.n(),
            larc_order,
            yn(inv.involutive),
            inv.worst_residual,
            k,
            yn(nil.nilpotent),
            nil.worst_residual
        )
        .map_err(io)?;
    }
    let failed = (a.require_larc && !summary.spanning) || (a.require_nilpotent && !summary.nilpotent);
    Ok(if failed { EXIT_CHECK } else { EXIT_OK })
}

fn write_file(path: &PathBuf, text: &str) -> crate::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_trajectory(traj: &Trajectory, csv: Option<&PathBuf>, plot: Option<&PathBuf>) -> crate::Result<()> {
    if let Some(p) = csv {
        write_file(p, &traj.to_csv())?;
    }
    if let Some(p) = plot {
        write_file(p, &traj.to_plot_data())?;
    }
    Ok(())
}

fn feedback_systems(
    sys: ControlSystem,
    fb: Option<FeedbackArg>,
) -> crate::Result<(ControlSystem, ControlSystem, Option<crate::systems::FeedbackTransform>)> {
    match fb {
        None => Ok((sys.clone(), sys, None)),
        Some(FeedbackArg::Unicycle) => {
            if (sys.n(), sys.m()) != (3, 2) {
                return Err(Error::Usage("unicycle feedback needs a system with n=3, m=2".into()));
            }
            Ok((unicycle_nilpotent(), sys, Some(unicycle_feedback())))
        }
    }
}

fn cmd_steer(a: &SteerArgs, out: &mut dyn Write) -> crate::Result<i32> {
    let sys = a.source.load()?;
    let name = sys.name.clone();
    let (plan_sys, exec_sys, fb) = feedback_systems(sys, a.feedback)?;
    let opts = SteerOptions {
        tol: a.tol,
        nodes: a.nodes,
        steps: a.steps,
        span_tol: a.span_tol,
        max_step: a.max_step,
        max_iters: a.max_iters,
        mode: match a.mode {
            ModeArg::Exact => SynthMode::Exact,
            ModeArg::Approximate => SynthMode::Approximate,
        },
        strategy: if a.prefer_low_degree { InputStrategy::LowDegree } else { InputStrategy::MinNorm },
        waypoints: a.waypoints.iter().map(|p| p.0.clone()).collect(),
        order: a.order,
    };
    let plan = match &fb {
        Some(fb) => steer_via_feedback(&plan_sys, &exec_sys, fb, &a.from.0, &a.to.0, &opts)?,
        None => steer(&exec_sys, &a.from.0, &a.to.0, &opts)?,
    };
    if let Some(p) = &a.schedule_out {
        let mut buf = Vec::new();
        plan.schedule.write_csv(&mut buf)?;
        write_file(p, &String::from_utf8_lossy(&buf))?;
    }
    if a.trajectory_out.is_some() || a.emit_plot_data.is_some() {
        let step = (plan.max_step > 0.0).then_some(plan.max_step);
        let traj = integrate_flow(&exec_sys, &a.from.0, &plan.schedule, step, fb.as_ref())?;
        write_trajectory(&traj, a.trajectory_out.as_ref(), a.emit_plot_data.as_ref())?;
    }
    let summary = SteerSummary::new(&name, &plan, &a.from.0, a.tol, a.mode);
    if a.json {
        json_line(out, &summary)?;
    } else {
        writeln!(
            out,
            "system: {name}\npieces: {}\ntotal duration: {}\niterations: {}\nachieved: {:?}\nendpoint error: {:.3e}",
            plan.schedule.len(),
            plan.schedule.total_duration(),
            plan.iterations,
            plan.achieved,
            plan.endpoint_error
        )
        .map_err(io)?;
        if a.schedule_out.is_none() {
            write!(out, "{}", plan.schedule).map_err(io)?;
        }
    }
    Ok(if summary.success { EXIT_OK } else { EXIT_CHECK })
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> crate::Result<i32> {
    let sys = a.source.load()?;
    let name = sys.name.clone();
    let (_, exec_sys, fb) = feedback_systems(sys, a.feedback)?;
    let file = std::fs::File::open(&a.schedule)
        .map_err(|e| Error::Io(format!("{}: {e}", a.schedule.display())))?;
    let sched = ControlSchedule::read_csv(std::io::BufReader::new(file), Some(exec_sys.m()))?;
    let traj = integrate_flow(&exec_sys, &a.from.0, &sched, a.max_step, fb.as_ref())?;
    write_trajectory(&traj, a.trajectory_out.as_ref(), a.emit_plot_data.as_ref())?;
    let achieved = traj.endpoint().to_vec();
    let to = a.to.as_ref().map(|p| p.0.clone());
    let err = match &to {
        Some(q) if q.len() != exec_sys.n() => {
            return Err(Error::Usage(format!("--to has {} entries, system has {}", q.len(), exec_sys.n())))
        }
        Some(q) => Some(exec_sys.state_error(&achieved, q)),
        None => None,
    };
    let summary = SimulateSummary {
        system: name,
        from: a.from.0.clone(),
        achieved,
        to,
        endpoint_error: err,
        pieces: sched.len(),
        total_duration: sched.total_duration(),
    };
    if a.json {
        json_line(out, &summary)?;
    } else {
        writeln!(out, "achieved: {:?}", summary.achieved).map_err(io)?;
        if let Some(e) = err {
            writeln!(out, "endpoint error: {e:.3e}").map_err(io)?;
        }
    }
    Ok(match err {
        Some(e) if !(e < a.tol) => EXIT_CHECK,
        _ => EXIT_OK,
    })
}

fn cmd_demo(out: &mut dyn Write) -> crate::Result<i32> {
    let mut ok = true;
    let opts = SteerOptions::default();

    writeln!(out, "== Heisenberg: (0,0,0) -> (0,0,1)").map_err(io)?;
    let heis = builtin("heisenberg")?;
    let plan = steer(&heis, &[0.0; 3], &[0.0, 0.0, 1.0], &opts)?;
    write!(out, "{}", plan.schedule).map_err(io)?;
    writeln!(out, "endpoint error: {:.3e}", plan.endpoint_error).map_err(io)?;
    ok &= plan.endpoint_error < 1e-8;

    writeln!(out, "\n== Hall basis and coordinate equations, m=2, k=3").map_err(io)?;
    let alg = FreeNilpotentLieAlgebra::build(2, 3)?;
    write!(out, "{}{}", alg.dump(), cfs_equations(&alg).dump()).map_err(io)?;

    writeln!(out, "\n== Order-3 synthesis for h = (1,1,1,1,1)").map_err(io)?;
    let syn = synth_order3_m2(&alg, &[qi(1), qi(1), qi(1), qi(1), qi(1)])?;
    writeln!(
        out,
        "{} pieces, total duration {:.6}, oracle residual {:.3e}",
        syn.schedule.len(),
        syn.schedule.total_duration(),
        syn.ledger.residual.max_abs()
    )
    .map_err(io)?;
    let chained = builtin("chained4")?;
    let q = [0.5, 0.4, -0.3, 0.7];
    let plan = steer(&chained, &[0.0; 4], &q, &opts)?;
    writeln!(
        out,
        "chained4 (0,0,0,0) -> {q:?}: {} pieces, endpoint error {:.3e}",
        plan.schedule.len(),
        plan.endpoint_error
    )
    .map_err(io)?;
    ok &= plan.endpoint_error < 1e-6;

    writeln!(out, "\n== Unicycle via feedback: (0,0,0) -> (1,0.5,0.8)").map_err(io)?;
    let plan = steer_via_feedback(
        &unicycle_nilpotent(),
        &builtin("unicycle")?,
        &unicycle_feedback(),
        &[0.0; 3],
        &[1.0, 0.5, 0.8],
        &opts,
    )?;
    writeln!(
        out,
        "{} pieces over {} plan(s), endpoint error {:.3e}",
        plan.schedule.len(),
        plan.iterations,
        plan.endpoint_error
    )
    .map_err(io)?;
    ok &= plan.endpoint_error < 1e-6;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK })
}
