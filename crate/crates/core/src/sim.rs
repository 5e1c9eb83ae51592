//! Forward simulation of schedules, the steer-and-verify pipeline with
//! iterative refinement, and numeric harnesses for the bracket/commutator
//! relation and for leaf confinement.

use rand::Rng;
use serde::Serialize;

use crate::cfs::{
    cfs_equations, fictitious_inputs_along, integrate_cfs, CfsEquations, FictitiousOptions,
    InputStrategy, DEFAULT_NODES, DEFAULT_SPAN_TOL, DEFAULT_STEPS,
};
use crate::error::{Error, Result};
use crate::free_lie::FreeNilpotentLieAlgebra;
use crate::rational::{from_f64, Q};
use crate::synth::{synthesize, ControlSchedule, SynthMode};
use crate::systems::FeedbackTransform;
use crate::vfield::{involutivity_check, lie_bracket, lie_bracket_at, ControlSystem, VectorField};

/// Default RK4 step as a fraction of the schedule's total duration.
pub const DEFAULT_STEP_FRACTION: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 20;
/// Hall coordinates below this (relative) size are treated as integration
/// noise and zeroed before synthesis.
pub const HALL_SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Input applied from each sample onward (the actual `u` under feedback).
    pub inputs: Vec<Vec<f64>>,
    /// Sample indices at which a new piece starts.
    pub piece_boundaries: Vec<usize>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states.last().expect("trajectory has its initial state")
    }

    /// `t,x_1,...,x_n,u_1,...,u_m` rows with a header line.
    pub fn to_csv(&self) -> String {
        let n = self.states[0].len();
        let m = self.inputs.first().map_or(0, Vec::len);
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x_{i}")));
        head.extend((1..=m).map(|i| format!("u_{i}")));
        let mut out = head.join(",") + "\n";
        for ((t, x), u) in self.times.iter().zip(&self.states).zip(&self.inputs) {
            let row: Vec<String> =
                std::iter::once(t).chain(x).chain(u).map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated columns for gnuplot, one block per piece.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# t x_1 .. x_n u_1 .. u_m\n");
        for (i, ((t, x), u)) in self.times.iter().zip(&self.states).zip(&self.inputs).enumerate() {
            if i > 0 && self.piece_boundaries.contains(&i) {
                out.push('\n');
            }
            let row: Vec<String> =
                std::iter::once(t).chain(x).chain(u).map(|v| format!("{v:.17e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Fixed-step RK4 over a schedule; each piece is split into
/// `ceil(duration / max_step)` equal steps so boundaries are hit exactly.
/// With `feedback`, the schedule holds `v` and the applied input is
/// `u = feedback(x, v)`, re-evaluated at every stage.
pub fn integrate_flow(
    sys: &ControlSystem,
    x0: &[f64],
    sched: &ControlSchedule,
    max_step: Option<f64>,
    feedback: Option<&FeedbackTransform>,
) -> Result<Trajectory> {
    if x0.len() != sys.n() {
        return Err(Error::Usage(format!(
            "initial state has dimension {}, system has {}",
            x0.len(),
            sys.n()
        )));
    }
    if sched.m != sys.m() {
        return Err(Error::Usage(format!(
            "schedule has {} inputs, system has {}",
            sched.m,
            sys.m()
        )));
    }
    sched.validate()?;
    let max_step = max_step.unwrap_or(DEFAULT_STEP_FRACTION * sched.total_duration());
    if !(max_step > 0.0 || sched.total_duration() == 0.0) {
        return Err(Error::Usage(format!("max_step must be positive, got {max_step}")));
    }
    sys.check_domain(x0)?;
    let input = |x: &[f64], v: &[f64]| -> Result<Vec<f64>> {
        match feedback {
            Some(fb) => fb.apply(x, v),
            None => Ok(v.to_vec()),
        }
    };
    let rhs = |x: &[f64], v: &[f64]| -> Result<Vec<f64>> { sys.velocity(x, &input(x, v)?) };

    let mut x = x0.to_vec();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        inputs: vec![],
        piece_boundaries: vec![],
    };
    let bounds = sched.boundaries();
    for (p, piece) in sched.pieces.iter().enumerate() {
        if piece.duration == 0.0 {
            continue;
        }
        let steps = (piece.duration / max_step).ceil().max(1.0) as usize;
        let dt = piece.duration / steps as f64;
        traj.piece_boundaries.push(traj.times.len() - 1);
        let v = &piece.u;
        for step in 0..steps {
            traj.inputs.push(input(&x, v)?);
            let k1 = rhs(&x, v)?;
            let k2 = rhs(&axpy(&x, dt / 2.0, &k1), v)?;
            let k3 = rhs(&axpy(&x, dt / 2.0, &k2), v)?;
            let k4 = rhs(&axpy(&x, dt, &k3), v)?;
            for i in 0..x.len() {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t = if step + 1 == steps { bounds[p + 1] } else { bounds[p] + (step + 1) as f64 * dt };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { t });
            }
            sys.check_domain(&x)?;
            traj.times.push(t);
            traj.states.push(x.clone());
        }
    }
    let last = match (sched.pieces.last(), traj.inputs.last()) {
        (_, Some(u)) => u.clone(),
        (Some(p), None) => p.u.clone(),
        (None, None) => vec![0.0; sys.m()],
    };
    traj.inputs.push(last);
    Ok(traj)
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

// ---------------------------------------------------------------------------
// Steering

#[derive(Debug, Clone, PartialEq)]
pub struct SteerOptions {
    pub tol: f64,
    pub nodes: usize,
    pub steps: usize,
    pub span_tol: f64,
    /// Absolute RK4 step; defaults to 1e-3 of the first segment's duration.
    pub max_step: Option<f64>,
    pub max_iters: usize,
    pub mode: SynthMode,
    pub strategy: InputStrategy,
    /// Intermediate points of the first planned curve.
    pub waypoints: Vec<Vec<f64>>,
    /// Nilpotency order used for planning; defaults to the declared order,
    /// then to 2.
    pub order: Option<usize>,
}

impl Default for SteerOptions {
    fn default() -> Self {
        SteerOptions {
            tol: DEFAULT_TOL,
            nodes: DEFAULT_NODES,
            steps: DEFAULT_STEPS,
            span_tol: DEFAULT_SPAN_TOL,
            max_step: None,
            max_iters: DEFAULT_MAX_ITERS,
            mode: SynthMode::Exact,
            strategy: InputStrategy::MinNorm,
            waypoints: vec![],
            order: None,
        }
    }
}

/// Per-iteration record of the planning stages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDiagnostics {
    pub span_residual: f64,
    pub cfs_steps: usize,
    pub hall_target: Vec<f64>,
    pub oracle_residual: f64,
    pub exact_synthesis: bool,
    pub pieces: usize,
    pub endpoint_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub schedule: ControlSchedule,
    pub achieved: Vec<f64>,
    pub target: Vec<f64>,
    pub endpoint_error: f64,
    pub iterations: usize,
    pub order: usize,
    pub max_step: f64,
    pub diagnostics: Vec<StageDiagnostics>,
}

struct Planner<'a> {
    sys: &'a ControlSystem,
    alg: FreeNilpotentLieAlgebra,
    eqs: CfsEquations,
    opts: &'a SteerOptions,
}

impl Planner<'_> {
    fn plan(&self, points: &[Vec<f64>]) -> Result<(ControlSchedule, StageDiagnostics)> {
        let fopts = FictitiousOptions {
            nodes: self.opts.nodes,
            span_tol: self.opts.span_tol,
            strategy: self.opts.strategy,
        };
        let v = fictitious_inputs_along(self.sys, &self.alg, points, &fopts)?;
        let path = integrate_cfs(&self.eqs, &v, self.opts.steps)?;
        let mut h = path.terminal().to_vec();
        let scale = h.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for x in h.iter_mut() {
            if x.abs() < HALL_SNAP_TOL * scale {
                *x = 0.0;
            }
        }
        let hq: Vec<Q> = h.iter().map(|&x| from_f64(x)).collect();
        let syn = synthesize(&self.alg, &hq, self.opts.mode)?;
        let diag = StageDiagnostics {
            span_residual: v.max_residual(),
            cfs_steps: path.times.len() - 1,
            hall_target: h,
            oracle_residual: syn.ledger.residual.max_abs(),
            exact_synthesis: syn.ledger.exact,
            pieces: syn.schedule.len(),
            endpoint_error: f64::NAN,
        };
        Ok((syn.schedule, diag))
    }
}

/// Plans on `sys` and executes on `sys`.
pub fn steer(sys: &ControlSystem, p: &[f64], q: &[f64], opts: &SteerOptions) -> Result<PlanResult> {
    steer_with_execution(sys, sys, None, p, q, opts)
}

/// Plans on the nilpotent `plan_sys`, executes on `exec_sys` through the
/// feedback `u = fb(x, v)`.
pub fn steer_via_feedback(
    plan_sys: &ControlSystem,
    exec_sys: &ControlSystem,
    fb: &FeedbackTransform,
    p: &[f64],
    q: &[f64],
    opts: &SteerOptions,
) -> Result<PlanResult> {
    steer_with_execution(plan_sys, exec_sys, Some(fb), p, q, opts)
}

/// Plan, execute, and re-plan from the achieved endpoint until the error is
/// below `opts.tol`. Every re-plan must reduce the error; otherwise, or after
/// `max_iters` plans, the error history is returned as a refinement error.
fn steer_with_execution(
    plan_sys: &ControlSystem,
    exec_sys: &ControlSystem,
    fb: Option<&FeedbackTransform>,
    p: &[f64],
    q: &[f64],
    opts: &SteerOptions,
) -> Result<PlanResult> {
    if plan_sys.drift().is_some() || exec_sys.drift().is_some() {
        return Err(Error::Usage("planning needs a drift-free system".into()));
    }
    if !(opts.tol > 0.0 && opts.span_tol > 0.0) || opts.max_iters == 0 {
        return Err(Error::Usage("tolerances and max_iters must be positive".into()));
    }
    if plan_sys.m() != exec_sys.m() || plan_sys.n() != exec_sys.n() {
        return Err(Error::Usage("planning and execution systems differ in shape".into()));
    }
    for x in [p, q] {
        if x.len() != plan_sys.n() {
            return Err(Error::Usage(format!(
                "state {x:?} has dimension {}, system has {}",
                x.len(),
                plan_sys.n()
            )));
        }
    }
    let order = opts.order.or(plan_sys.declared_order).unwrap_or(2);
    let alg = FreeNilpotentLieAlgebra::build(plan_sys.m(), order)?;
    let eqs = cfs_equations(&alg);
    let planner = Planner { sys: plan_sys, alg, eqs, opts };

    let mut result = PlanResult {
        schedule: ControlSchedule::empty(plan_sys.m()),
        achieved: p.to_vec(),
        target: q.to_vec(),
        endpoint_error: exec_sys.state_error(p, q),
        iterations: 0,
        order,
        max_step: opts.max_step.unwrap_or(0.0),
        diagnostics: vec![],
    };
    if p == q {
        return Ok(result);
    }
    let mut history = Vec::new();
    let mut x = p.to_vec();
    for iter in 0..opts.max_iters {
        let mut points = vec![x.clone()];
        if iter == 0 {
            points.extend(opts.waypoints.iter().cloned());
        }
        points.push(q.to_vec());
        let (seg, mut diag) = planner.plan(&points)?;
        if result.max_step == 0.0 {
            result.max_step = DEFAULT_STEP_FRACTION * seg.total_duration();
        }
        let step = if result.max_step > 0.0 { Some(result.max_step) } else { None };
        let traj = integrate_flow(exec_sys, &x, &seg, step, fb)?;
        x = traj.endpoint().to_vec();
        let err = exec_sys.state_error(&x, q);
        diag.endpoint_error = err;
        result.diagnostics.push(diag);
        result.schedule.extend(seg);
        result.achieved = x.clone();
        result.endpoint_error = err;
        result.iterations = iter + 1;
        history.push(err);
        if err < opts.tol {
            return Ok(result);
        }
        if history.len() >= 2 && err >= history[history.len() - 2] {
            return Err(Error::Refinement { history });
        }
    }
    Err(Error::Refinement { history })
}

// ---------------------------------------------------------------------------
// Harnesses

fn flow(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    t: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let dt = t / steps as f64;
    let mut x = x0.to_vec();
    for _ in 0..steps {
        let k1 = f(&x)?;
        let k2 = f(&axpy(&x, dt / 2.0, &k1))?;
        let k3 = f(&axpy(&x, dt / 2.0, &k2))?;
        let k4 = f(&axpy(&x, dt, &k3))?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t });
        }
    }
    Ok(x)
}

/// For each `t`: `|[X^t, Y^t](p) - Z^{t^2}(p)| / t^2` with `Z = [X,Y]`, where
/// `[X^t, Y^t]` flows along `X`, `Y`, `-X`, `-Y` for time `t` each.
pub fn commutator_ratio_test(
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
    t_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let symbolic = lie_bracket(x, y).ok();
    let z = |s: &[f64]| -> Result<Vec<f64>> {
        match &symbolic {
            Some(zf) => zf.evaluate(s),
            None => lie_bracket_at(x, y, s),
        }
    };
    let fx = |s: &[f64]| x.evaluate(s);
    let fy = |s: &[f64]| y.evaluate(s);
    let neg = |f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, s: &[f64]| -> Result<Vec<f64>> {
        Ok(f(s)?.into_iter().map(|v| -v).collect())
    };
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if !(t > 0.0) {
            return Err(Error::Usage(format!("ratio test times must be positive, got {t}")));
        }
        let steps = 64;
        let a = flow(&fx, p, t, steps)?;
        let b = flow(&fy, &a, t, steps)?;
        let c = flow(&|s: &[f64]| neg(&fx, s), &b, t, steps)?;
        let d = flow(&|s: &[f64]| neg(&fy, s), &c, t, steps)?;
        let zt = flow(&z, p, t * t, steps)?;
        let diff: f64 = d.iter().zip(&zt).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        out.push((t, diff / (t * t)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafReport {
    pub involutive: bool,
    pub involutivity_residual: f64,
    pub max_deviation: f64,
}

/// Runs `trials` random schedules (1 to 8 pieces, durations in [0,1), inputs
/// in [-1,1)) from `x0` and reports the largest change of the level-set
/// coordinates `leaf`.
pub fn leaf_confinement_test<R: Rng>(
    sys: &ControlSystem,
    leaf: &[usize],
    x0: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<LeafReport> {
    if let Some(&i) = leaf.iter().find(|&&i| i >= sys.n()) {
        return Err(Error::Usage(format!("leaf coordinate {i} out of range")));
    }
    let inv = involutivity_check(sys.fields(), &[x0.to_vec()], crate::vfield::DEFAULT_RANK_TOL)?;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let pieces = rng.gen_range(1..=8);
        let mut sched = ControlSchedule::empty(sys.m());
        for _ in 0..pieces {
            let d: f64 = rng.gen_range(0.0..1.0);
            let u: Vec<f64> = (0..sys.m()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            sched.push(d, u);
        }
        let traj = integrate_flow(sys, x0, &sched, None, None)?;
        let end = traj.endpoint();
        for &i in leaf {
            worst = worst.max((end[i] - x0[i]).abs());
        }
    }
    Ok(LeafReport { involutive: inv.involutive, involutivity_residual: inv.worst_residual, max_deviation: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{constant_plane, heisenberg};
    use rand::SeedableRng;

    #[test]
    fn single_piece_flow() {
        let sys = heisenberg();
        let mut s = ControlSchedule::empty(2);
        s.push(1.0, vec![1.0, 0.0]);
        let tr = integrate_flow(&sys, &[0.0; 3], &s, None, None).unwrap();
        let e = tr.endpoint();
        assert!((e[0] - 1.0).abs() < 1e-12 && e[1] == 0.0 && e[2] == 0.0);
        assert_eq!(tr.times.len(), 1001);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert_eq!(tr.inputs.len(), tr.times.len());
    }

    #[test]
    fn empty_schedule_stays_put() {
        let sys = heisenberg();
        let tr = integrate_flow(&sys, &[1.0, 2.0, 3.0], &ControlSchedule::empty(2), None, None).unwrap();
        assert_eq!(tr.endpoint(), &[1.0, 2.0, 3.0]);
        let r = steer(&sys, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &SteerOptions::default()).unwrap();
        assert!(r.schedule.is_empty() && r.endpoint_error == 0.0);
    }

    #[test]
    fn heisenberg_steer_unit_z() {
        let r = steer(&heisenberg(), &[0.0; 3], &[0.0, 0.0, 1.0], &SteerOptions::default()).unwrap();
        assert_eq!(r.schedule.len(), 4);
        assert!(r.endpoint_error < 1e-8, "{}", r.endpoint_error);
    }

    #[test]
    fn leaf_of_constant_plane() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rep = leaf_confinement_test(&constant_plane(), &[2], &[0.1, 0.2, 0.3], 20, &mut rng).unwrap();
        assert!(rep.involutive);
        assert!(rep.max_deviation < 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let sys = heisenberg();
        let mut s = ControlSchedule::empty(2);
        s.push(0.5, vec![0.0, 1.0]);
        let tr = integrate_flow(&sys, &[0.0; 3], &s, Some(0.25), None).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,x_3,u_1,u_2");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "0.5,0,0.5,0,0,1");
    }
}
