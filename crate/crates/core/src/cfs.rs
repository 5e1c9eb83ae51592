//! Fictitious inputs, the adjoint table `P(h)`, and the Hall coordinate
//! equation `h' = Q(h) v` with `Q = (P^T)^{-1}`.
//!
//! With `S = exp(h_s B_s) ... exp(h_1 B_1)` and `S' = S (v_1 B_1 + ... + v_s B_s)`,
//! differentiating the product gives `v_j = sum_i p_ij(h) h'_i` where row `i`
//! of `P` expands `exp(ad(-h_1 B_1)) ... exp(ad(-h_{i-1} B_{i-1})) B_i`.

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::free_lie::FreeNilpotentLieAlgebra;
use crate::linalg::{low_index_solve, min_norm_solve, norm};
use crate::poly::{render_monomial, Poly};
use crate::rational::{fmt_q, qi, Q};
use crate::vfield::{ControlSystem, HallFields};

pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_STEPS: usize = 256;
pub const DEFAULT_SPAN_TOL: f64 = 1e-8;

/// Rows of `P(h)`: `p[i][j]` is a polynomial in `h_1..h_s`.
#[derive(Debug, Clone)]
pub struct AdjointTable {
    s: usize,
    p: Vec<Vec<Poly<Q>>>,
}

fn ad(alg: &FreeNilpotentLieAlgebra, l: usize, x: &[Poly<Q>]) -> Vec<Poly<Q>> {
    let s = alg.s();
    let mut out = vec![Poly::zero(s); s];
    for (j, c) in x.iter().enumerate() {
        if c.is_zero() || alg.degree(l) + alg.degree(j) > alg.k() {
            continue;
        }
        for (t, w) in alg.bracket_basis(l, j) {
            out[t] = &out[t] + &c.scale(&w);
        }
    }
    out
}

/// Expands every row of `P(h)` symbolically. Nilpotency bounds each
/// exponential series at `k` terms, so this works for any order.
pub fn adjoint_table(alg: &FreeNilpotentLieAlgebra) -> AdjointTable {
    let s = alg.s();
    let mut rows = Vec::with_capacity(s);
    for i in 0..s {
        let mut x: Vec<Poly<Q>> = vec![Poly::zero(s); s];
        x[i] = Poly::constant(s, Q::one());
        for l in (0..i).rev() {
            // exp(ad(-h_l B_l)) x = sum_n (-h_l)^n / n! ad_{B_l}^n x
            let minus_h = Poly::monomial(s, unit_exp(s, l), -Q::one());
            let mut term = x.clone();
            let mut acc = x.clone();
            let mut n = 1;
            loop {
                term = ad(alg, l, &term);
                if term.iter().all(Poly::is_zero) {
                    break;
                }
                let scale = Poly::constant(s, Q::one() / qi(n));
                term = term.iter().map(|c| &(c * &minus_h) * &scale).collect();
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a = &*a + t;
                }
                n += 1;
            }
            x = acc;
        }
        rows.push(x);
    }
    AdjointTable { s, p: rows }
}

fn unit_exp(s: usize, l: usize) -> Vec<u16> {
    let mut e = vec![0; s];
    e[l] = 1;
    e
}

impl AdjointTable {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly<Q> {
        &self.p[i][j]
    }

    pub fn row(&self, i: usize) -> &[Poly<Q>] {
        &self.p[i]
    }

    pub fn matrix(&self, h: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.s, self.s, |i, j| self.p[i][j].eval(h))
    }
}

/// `h' = Q(h) v`, both symbolically and as a numeric solver.
#[derive(Debug, Clone)]
pub struct CfsEquations {
    table: AdjointTable,
    /// Off-diagonal entries `p_ij`, `i < j`, as float polynomials.
    lower: Vec<Vec<(usize, Poly<f64>)>>,
    /// `q[j][l]`: coefficient polynomial of `v_l` in `h'_j`.
    q: Vec<Vec<Poly<Q>>>,
}

pub fn cfs_equations(alg: &FreeNilpotentLieAlgebra) -> CfsEquations {
    let table = adjoint_table(alg);
    let s = table.s;
    let lower: Vec<Vec<(usize, Poly<f64>)>> = (0..s)
        .map(|j| {
            (0..j)
                .filter(|&i| !table.p[i][j].is_zero())
                .map(|i| (i, table.p[i][j].to_f64_poly()))
                .collect()
        })
        .collect();
    let mut q: Vec<Vec<Poly<Q>>> = Vec::with_capacity(s);
    for j in 0..s {
        let mut row = vec![Poly::zero(s); s];
        row[j] = Poly::constant(s, Q::one());
        for i in 0..j {
            let pij = &table.p[i][j];
            if pij.is_zero() {
                continue;
            }
            for l in 0..s {
                if !q[i][l].is_zero() {
                    row[l] = &row[l] - &(pij * &q[i][l]);
                }
            }
        }
        q.push(row);
    }
    CfsEquations { table, lower, q }
}

impl CfsEquations {
    pub fn s(&self) -> usize {
        self.table.s
    }

    pub fn table(&self) -> &AdjointTable {
        &self.table
    }

    /// Coefficient of `v_l` in the equation for `h'_j`.
    pub fn coefficient(&self, j: usize, l: usize) -> &Poly<Q> {
        &self.q[j][l]
    }

    /// Solves `P(h)^T h' = v` by forward substitution.
    pub fn hdot(&self, h: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.s()];
        for j in 0..self.s() {
            let mut acc = v[j];
            for (i, p) in &self.lower[j] {
                acc -= p.eval(h) * out[*i];
            }
            out[j] = acc;
        }
        out
    }

    /// `P(h)^{-1}` by triangular back substitution.
    pub fn p_inverse(&self, h: &[f64]) -> DMatrix<f64> {
        let s = self.s();
        let p = self.table.matrix(h);
        let mut inv = DMatrix::<f64>::identity(s, s);
        for col in 0..s {
            for i in (0..s).rev() {
                let mut acc = if i == col { 1.0 } else { 0.0 };
                for j in i + 1..s {
                    acc -= p[(i, j)] * inv[(j, col)];
                }
                inv[(i, col)] = acc;
            }
        }
        inv
    }

    /// One equation per line, e.g. `h4' = 1/2 h1^2 v2 + h1 v3 + v4`.
    pub fn dump(&self) -> String {
        let s = self.s();
        let hn: Vec<String> = (1..=s).map(|i| format!("h{i}")).collect();
        let mut out = String::new();
        for j in 0..s {
            let mut rhs = String::new();
            for l in 0..s {
                let c = &self.q[j][l];
                if c.is_zero() {
                    continue;
                }
                let (neg, body) = render_coefficient(c, &hn);
                let term = if body.is_empty() { format!("v{}", l + 1) } else { format!("{body} v{}", l + 1) };
                if rhs.is_empty() {
                    rhs = if neg { format!("-{term}") } else { term };
                } else {
                    rhs.push_str(if neg { " - " } else { " + " });
                    rhs.push_str(&term);
                }
            }
            if rhs.is_empty() {
                rhs.push('0');
            }
            out.push_str(&format!("h{}' = {rhs}\n", j + 1));
        }
        out
    }
}

/// Splits a coefficient into sign and magnitude text; multi-term
/// coefficients are parenthesized and keep their own signs.
fn render_coefficient(c: &Poly<Q>, names: &[String]) -> (bool, String) {
    if c.num_terms() > 1 {
        return (false, format!("({})", c.render(names)));
    }
    let (e, v) = c.terms().next().expect("non-zero");
    let neg = v < &Q::zero();
    let mag = if neg { -v.clone() } else { v.clone() };
    let mono = render_monomial(e, names);
    let body = match (mono.is_empty(), mag.is_one()) {
        (true, true) => String::new(),
        (true, false) => fmt_q(&mag),
        (false, true) => mono,
        (false, false) => format!("{} {mono}", fmt_q(&mag)),
    };
    (neg, body)
}

// ---------------------------------------------------------------------------
// Fictitious inputs

/// How each node's underdetermined system is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputStrategy {
    /// Pseudo-inverse solution.
    #[default]
    MinNorm,
    /// Support restricted to the earliest independent Hall columns.
    LowDegree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousOptions {
    pub nodes: usize,
    pub span_tol: f64,
    pub strategy: InputStrategy,
}

impl Default for FictitiousOptions {
    fn default() -> Self {
        FictitiousOptions { nodes: DEFAULT_NODES, span_tol: DEFAULT_SPAN_TOL, strategy: InputStrategy::MinNorm }
    }
}

/// One straight leg of the connecting curve, traversed on `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub times: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl Segment {
    /// Piecewise-linear interpolation, clamped to the segment.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len() - 1;
        let frac = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0) * n as f64;
        let i = (frac.floor() as usize).min(n - 1);
        let w = frac - i as f64;
        self.v[i].iter().zip(&self.v[i + 1]).map(|(a, b)| a + w * (b - a)).collect()
    }
}

/// Fictitious inputs along a polyline from `p` to `q` with horizon `T = 1`;
/// each leg gets an equal share of time and its own node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousInputs {
    pub horizon: f64,
    pub segments: Vec<Segment>,
}

impl FictitiousInputs {
    pub fn max_residual(&self) -> f64 {
        self.segments.iter().flat_map(|s| s.residuals.iter().copied()).fold(0.0, f64::max)
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let seg = self
            .segments
            .iter()
            .find(|s| t <= s.t1)
            .unwrap_or_else(|| self.segments.last().expect("non-empty"));
        seg.value_at(t)
    }
}

/// Straight line from `p` to `q`.
pub fn fictitious_inputs(
    sys: &ControlSystem,
    alg: &FreeNilpotentLieAlgebra,
    p: &[f64],
    q: &[f64],
    nodes: usize,
) -> Result<FictitiousInputs> {
    let opts = FictitiousOptions { nodes, ..Default::default() };
    fictitious_inputs_along(sys, alg, &[p.to_vec(), q.to_vec()], &opts)
}

/// Polyline through `points` (first is `p`, last is `q`).
pub fn fictitious_inputs_along(
    sys: &ControlSystem,
    alg: &FreeNilpotentLieAlgebra,
    points: &[Vec<f64>],
    opts: &FictitiousOptions,
) -> Result<FictitiousInputs> {
    if opts.nodes == 0 {
        return Err(Error::Usage("collocation count must be >= 1".into()));
    }
    if points.len() < 2 {
        return Err(Error::Usage("curve needs at least two points".into()));
    }
    if let Some(bad) = points.iter().find(|x| x.len() != sys.n()) {
        return Err(Error::Usage(format!(
            "point {bad:?} has dimension {}, system has dimension {}",
            bad.len(),
            sys.n()
        )));
    }
    let hall = HallFields::new(sys, alg)?;
    let legs = points.len() - 1;
    let dt = 1.0 / legs as f64;
    let n = opts.nodes;
    let mut segments = Vec::with_capacity(legs);
    for (leg, w) in points.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let vel: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect();
        let t0 = leg as f64 * dt;
        let mut seg = Segment { t0, t1: t0 + dt, times: vec![], v: vec![], residuals: vec![] };
        for node in 0..=n {
            let frac = node as f64 / n as f64;
            let x: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect();
            let cols = hall.evaluate_all(&x)?;
            let (v, res) = match opts.strategy {
                InputStrategy::MinNorm => min_norm_solve(&cols, &vel),
                InputStrategy::LowDegree => low_index_solve(&cols, &vel, opts.span_tol),
            };
            if !(res <= opts.span_tol * norm(&vel).max(1.0)) {
                return Err(Error::RankDeficient { node: leg * (n + 1) + node, residual: res });
            }
            seg.times.push(t0 + frac * dt);
            seg.v.push(v);
            seg.residuals.push(res);
        }
        segments.push(seg);
    }
    Ok(FictitiousInputs { horizon: 1.0, segments })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct HallPath {
    pub times: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

impl HallPath {
    pub fn terminal(&self) -> &[f64] {
        self.h.last().expect("path has at least h(0)")
    }
}

/// Classical RK4 from `h(0) = 0`, with `steps` spread evenly over the legs so
/// that no step straddles a corner of the curve.
pub fn integrate_cfs(eqs: &CfsEquations, v: &FictitiousInputs, steps: usize) -> Result<HallPath> {
    let nodes = v.segments.iter().map(|s| s.times.len() - 1).max().unwrap_or(0);
    if steps < nodes {
        return Err(Error::Usage(format!("steps ({steps}) must be >= collocation count ({nodes})")));
    }
    let s = eqs.s();
    if let Some(seg) = v.segments.iter().find(|seg| seg.v.iter().any(|x| x.len() != s)) {
        return Err(Error::Usage(format!(
            "fictitious inputs have {} entries, algebra has {s}",
            seg.v[0].len()
        )));
    }
    let per_leg = steps.div_ceil(v.segments.len().max(1)).max(1);
    let mut h = vec![0.0; s];
    let mut path = HallPath { times: vec![0.0], h: vec![h.clone()] };
    for seg in &v.segments {
        let dt = (seg.t1 - seg.t0) / per_leg as f64;
        for step in 0..per_leg {
            let t = seg.t0 + step as f64 * dt;
            let f = |tt: f64, hh: &[f64]| eqs.hdot(hh, &seg.value_at(tt));
            let k1 = f(t, &h);
            let k2 = f(t + dt / 2.0, &axpy(&h, dt / 2.0, &k1));
            let k3 = f(t + dt / 2.0, &axpy(&h, dt / 2.0, &k2));
            let k4 = f(t + dt, &axpy(&h, dt, &k3));
            for i in 0..s {
                h[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t_end = if step + 1 == per_leg { seg.t1 } else { t + dt };
            if h.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { t: t_end });
            }
            path.times.push(t_end);
            path.h.push(h.clone());
        }
    }
    Ok(path)
}

pub(crate) fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}
