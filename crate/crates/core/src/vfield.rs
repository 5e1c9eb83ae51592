//! Vector fields on R^n, Lie brackets, and distribution predicates.
//!
//! The bracket convention throughout is `[X,Y](p) = DY(p) X(p) - DX(p) Y(p)`.
//!
//! Three field representations are supported:
//! - polynomial fields with exact rational coefficients, bracketed symbolically;
//! - analytic builtin fields (trigonometric components of a single
//!   coordinate) carrying exact derivatives of every order through local
//!   Taylor models;
//! - user callables, with an optional Jacobian and central finite differences
//!   otherwise.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::free_lie::{FreeNilpotentLieAlgebra, HallKind, LieSeries};
use crate::linalg::{distance_to_span, norm, pivoted_rank};
use crate::poly::{Coeff, Poly};
use crate::rational::{from_f64, to_f64, Q};

/// Largest exponent accepted in a polynomial field definition.
pub const MAX_EXPONENT: u16 = 16;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_NILP_TOL: f64 = 1e-8;

/// Central-difference step for coordinate `xi`.
pub fn fd_step(xi: f64) -> f64 {
    f64::EPSILON.cbrt() * xi.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Polynomial fields

#[derive(Clone)]
pub struct PolyField {
    comps: Vec<Poly<Q>>,
    approx: Vec<Poly<f64>>,
    jac: Vec<Vec<Poly<f64>>>,
}

impl PolyField {
    pub fn new(comps: Vec<Poly<Q>>) -> Result<Self> {
        let n = comps.len();
        if n == 0 {
            return Err(Error::Usage("vector field needs at least one component".into()));
        }
        if let Some(i) = comps.iter().position(|p| p.nvars() != n) {
            return Err(Error::Usage(format!(
                "component {} has {} variables, field dimension is {n}",
                i + 1,
                comps[i].nvars()
            )));
        }
        let approx: Vec<Poly<f64>> = comps.iter().map(Poly::to_f64_poly).collect();
        let jac = approx.iter().map(|p| (0..n).map(|j| p.derivative(j)).collect()).collect();
        Ok(PolyField { comps, approx, jac })
    }

    /// Constant field.
    pub fn constant(v: &[f64]) -> Self {
        let n = v.len();
        PolyField::new(v.iter().map(|&c| Poly::constant(n, from_f64(c))).collect())
            .expect("non-empty constant field")
    }

    pub fn n(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Poly<Q>] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.approx.iter().map(|p| p.eval(x)).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.jac[i][j].eval(x))
    }

    pub fn lie_bracket(&self, other: &PolyField) -> Result<PolyField> {
        if self.n() != other.n() {
            return Err(Error::Usage(format!(
                "bracket of fields on R^{} and R^{}",
                self.n(),
                other.n()
            )));
        }
        PolyField::new(bracket_polys(&self.comps, &other.comps, usize::MAX))
    }

    pub fn add(&self, other: &PolyField) -> PolyField {
        PolyField::new(self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect())
            .expect("same dimension")
    }

    pub fn scale(&self, c: &Q) -> PolyField {
        PolyField::new(self.comps.iter().map(|p| p.scale(c)).collect()).expect("same dimension")
    }

    /// Taylor model around `x0` in shifted variables, truncated at `order`.
    pub fn taylor(&self, x0: &[f64], order: usize) -> Vec<Poly<f64>> {
        let n = self.n();
        let shifted: Vec<Poly<f64>> =
            (0..n).map(|i| &Poly::constant(n, x0[i]) + &Poly::var(n, i)).collect();
        self.approx
            .iter()
            .map(|p| {
                let mut acc = Poly::zero(n);
                for (e, c) in p.terms() {
                    let mut t = Poly::constant(n, *c);
                    for (i, &pw) in e.iter().enumerate() {
                        for _ in 0..pw {
                            t = t.mul_truncated(&shifted[i], order);
                        }
                    }
                    acc = &acc + &t;
                }
                acc
            })
            .collect()
    }
}

impl PartialEq for PolyField {
    fn eq(&self, other: &Self) -> bool {
        self.comps == other.comps
    }
}

impl fmt::Debug for PolyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("PolyField").field(&self.comps).finish()
    }
}

/// `[X,Y]_i = sum_j (d_j Y_i) X_j - (d_j X_i) Y_j`, monomials above
/// `max_degree` discarded.
pub fn bracket_polys<C: Coeff>(x: &[Poly<C>], y: &[Poly<C>], max_degree: usize) -> Vec<Poly<C>> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = Poly::zero(n);
            for j in 0..n {
                if !x[j].is_zero() {
                    let dy = y[i].derivative(j);
                    if !dy.is_zero() {
                        acc = &acc + &dy.mul_truncated(&x[j], max_degree);
                    }
                }
                if !y[j].is_zero() {
                    let dx = x[i].derivative(j);
                    if !dx.is_zero() {
                        acc = &acc - &dx.mul_truncated(&y[j], max_degree);
                    }
                }
            }
            acc.truncate(max_degree)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Analytic builtin fields

/// A component depending on at most one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analytic {
    Const(f64),
    Cos(usize),
    Sin(usize),
    Tan(usize),
    CosSq(usize),
}

impl Analytic {
    fn var(&self) -> Option<usize> {
        match *self {
            Analytic::Const(_) => None,
            Analytic::Cos(v) | Analytic::Sin(v) | Analytic::Tan(v) | Analytic::CosSq(v) => Some(v),
        }
    }

    /// Univariate Taylor coefficients `c_j` of `f(z0 + d) = sum c_j d^j`.
    fn series(&self, z0: f64, order: usize) -> Vec<f64> {
        let (s, c) = z0.sin_cos();
        let mut fact = 1.0;
        let mut cos_s = Vec::with_capacity(order + 1);
        let mut sin_s = Vec::with_capacity(order + 1);
        for j in 0..=order {
            if j > 0 {
                fact *= j as f64;
            }
            let (dc, ds) = match j % 4 {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            cos_s.push(dc / fact);
            sin_s.push(ds / fact);
        }
        match self {
            Analytic::Const(v) => {
                let mut out = vec![0.0; order + 1];
                out[0] = *v;
                out
            }
            Analytic::Cos(_) => cos_s,
            Analytic::Sin(_) => sin_s,
            Analytic::Tan(_) => {
                let mut t = vec![0.0; order + 1];
                for j in 0..=order {
                    let acc: f64 = (0..j).map(|i| t[i] * cos_s[j - i]).sum();
                    t[j] = (sin_s[j] - acc) / cos_s[0];
                }
                t
            }
            Analytic::CosSq(_) => (0..=order)
                .map(|j| (0..=j).map(|i| cos_s[i] * cos_s[j - i]).sum())
                .collect(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Analytic::Const(v) => v,
            Analytic::Cos(i) => x[i].cos(),
            Analytic::Sin(i) => x[i].sin(),
            Analytic::Tan(i) => x[i].tan(),
            Analytic::CosSq(i) => x[i].cos().powi(2),
        }
    }

    fn derivative(&self, x: &[f64]) -> f64 {
        match *self {
            Analytic::Const(_) => 0.0,
            Analytic::Cos(i) => -x[i].sin(),
            Analytic::Sin(i) => x[i].cos(),
            Analytic::Tan(i) => 1.0 + x[i].tan().powi(2),
            Analytic::CosSq(i) => -2.0 * x[i].cos() * x[i].sin(),
        }
    }
}

/// Open box `|x[var]| < bound` on which a builtin field is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub var: usize,
    pub bound: f64,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        x[self.var].abs() < self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinField {
    pub label: String,
    pub comps: Vec<Analytic>,
    pub domain: Option<Domain>,
}

impl BuiltinField {
    fn taylor(&self, x0: &[f64], order: usize) -> Vec<Poly<f64>> {
        let n = self.comps.len();
        self.comps
            .iter()
            .map(|a| match a.var() {
                None => Poly::constant(n, a.eval(x0)),
                Some(v) => {
                    let mut p = Poly::zero(n);
                    for (j, c) in a.series(x0[v], order).into_iter().enumerate() {
                        let mut e = vec![0u16; n];
                        e[v] = j as u16;
                        p.add_term(e, c);
                    }
                    p
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// User callables

pub type FieldFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub struct CustomField {
    pub label: String,
    pub n: usize,
    pub f: FieldFn,
    pub jac: Option<JacobianFn>,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum VectorField {
    Polynomial(PolyField),
    Builtin(BuiltinField),
    Custom(CustomField),
}

impl PartialEq for VectorField {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (VectorField::Polynomial(a), VectorField::Polynomial(b)) => a == b,
            (VectorField::Builtin(a), VectorField::Builtin(b)) => a == b,
            (VectorField::Custom(a), VectorField::Custom(b)) => Arc::ptr_eq(&a.f, &b.f),
            _ => false,
        }
    }
}

impl VectorField {
    pub fn constant(v: &[f64]) -> Self {
        VectorField::Polynomial(PolyField::constant(v))
    }

    pub fn custom(label: &str, n: usize, f: FieldFn, jac: Option<JacobianFn>) -> Self {
        VectorField::Custom(CustomField { label: label.into(), n, f, jac })
    }

    pub fn n(&self) -> usize {
        match self {
            VectorField::Polynomial(p) => p.n(),
            VectorField::Builtin(b) => b.comps.len(),
            VectorField::Custom(c) => c.n,
        }
    }

    pub fn as_polynomial(&self) -> Option<&PolyField> {
        match self {
            VectorField::Polynomial(p) => Some(p),
            _ => None,
        }
    }

    pub fn domain(&self) -> Option<Domain> {
        match self {
            VectorField::Builtin(b) => b.domain,
            _ => None,
        }
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Usage(format!(
                "point has dimension {}, field has dimension {}",
                x.len(),
                self.n()
            )));
        }
        if let VectorField::Builtin(b) = self {
            if let Some(d) = b.domain {
                if !d.contains(x) {
                    return Err(Error::Domain { what: b.label.clone(), state: x.to_vec() });
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(match self {
            VectorField::Polynomial(p) => p.evaluate(x),
            VectorField::Builtin(b) => b.comps.iter().map(|a| a.eval(x)).collect(),
            VectorField::Custom(c) => (c.f)(x),
        })
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        Ok(match self {
            VectorField::Polynomial(p) => p.jacobian(x),
            VectorField::Builtin(b) => {
                let n = b.comps.len();
                let mut jac = DMatrix::zeros(n, n);
                for (i, a) in b.comps.iter().enumerate() {
                    if let Some(v) = a.var() {
                        jac[(i, v)] = a.derivative(x);
                    }
                }
                jac
            }
            VectorField::Custom(c) => match &c.jac {
                Some(j) => j(x),
                None => fd_jacobian(&|y: &[f64]| Ok((c.f)(y)), x)?,
            },
        })
    }

    /// Local Taylor model in shifted variables; not available for callables.
    pub fn taylor(&self, x0: &[f64], order: usize) -> Result<Vec<Poly<f64>>> {
        self.check_domain(x0)?;
        match self {
            VectorField::Polynomial(p) => Ok(p.taylor(x0, order)),
            VectorField::Builtin(b) => Ok(b.taylor(x0, order)),
            VectorField::Custom(c) => {
                Err(Error::Usage(format!("field '{}' has no Taylor model", c.label)))
            }
        }
    }
}

/// Symbolic bracket; both fields must be polynomial.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    match (x, y) {
        (VectorField::Polynomial(a), VectorField::Polynomial(b)) => {
            Ok(VectorField::Polynomial(a.lie_bracket(b)?))
        }
        _ => Err(Error::Usage(
            "symbolic bracket needs polynomial fields; use lie_bracket_at".into(),
        )),
    }
}

/// `[X,Y](p) = DY(p) X(p) - DX(p) Y(p)`.
pub fn lie_bracket_at(x: &VectorField, y: &VectorField, p: &[f64]) -> Result<Vec<f64>> {
    let xv = x.evaluate(p)?;
    let yv = y.evaluate(p)?;
    let dx = x.jacobian(p)?;
    let dy = y.jacobian(p)?;
    Ok(bracket_values(&xv, &yv, &dx, &dy))
}

fn bracket_values(xv: &[f64], yv: &[f64], dx: &DMatrix<f64>, dy: &DMatrix<f64>) -> Vec<f64> {
    let n = xv.len();
    (0..n)
        .map(|i| (0..n).map(|j| dy[(i, j)] * xv[j] - dx[(i, j)] * yv[j]).sum())
        .collect()
}

// ---------------------------------------------------------------------------
// Control systems

/// Affine control system `x' = f0(x) + sum_i u_i X_i(x)`; planning requires
/// `f0 = 0`, the drift exists only for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    pub name: String,
    n: usize,
    fields: Vec<VectorField>,
    drift: Option<VectorField>,
    pub declared_order: Option<usize>,
    /// Inputs are clamped to this interval at execution.
    pub input_bounds: Option<(f64, f64)>,
    /// Coordinates wrapped to (-pi, pi] when measuring endpoint error.
    pub angular: Vec<usize>,
    /// Coordinates that are constant on the integral leaves (involutive
    /// systems only).
    pub leaf: Option<Vec<usize>>,
}

impl ControlSystem {
    pub fn new(name: &str, fields: Vec<VectorField>) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(Error::Usage("control system needs at least one field".into()));
        };
        let n = first.n();
        if let Some(i) = fields.iter().position(|f| f.n() != n) {
            return Err(Error::Usage(format!(
                "field {} has dimension {}, expected {n}",
                i + 1,
                fields[i].n()
            )));
        }
        Ok(ControlSystem {
            name: name.into(),
            n,
            fields,
            drift: None,
            declared_order: None,
            input_bounds: None,
            angular: vec![],
            leaf: None,
        })
    }

    pub fn with_order(mut self, k: usize) -> Self {
        self.declared_order = Some(k);
        self
    }

    pub fn with_drift(mut self, drift: VectorField) -> Result<Self> {
        if drift.n() != self.n {
            return Err(Error::Usage("drift dimension mismatch".into()));
        }
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn with_input_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.input_bounds = Some((lo, hi));
        self
    }

    pub fn with_angular(mut self, coords: Vec<usize>) -> Self {
        self.angular = coords;
        self
    }

    pub fn with_leaf(mut self, coords: Vec<usize>) -> Self {
        self.leaf = Some(coords);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }

    pub fn drift(&self) -> Option<&VectorField> {
        self.drift.as_ref()
    }

    pub fn is_polynomial(&self) -> bool {
        self.fields.iter().all(|f| f.as_polynomial().is_some())
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        self.fields.iter().chain(&self.drift).try_for_each(|f| f.check_domain(x))
    }

    /// Right-hand side with inputs clamped to `input_bounds`.
    pub fn velocity(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.m() {
            return Err(Error::Usage(format!(
                "input has {} entries, system has {} inputs",
                u.len(),
                self.m()
            )));
        }
        let mut v = match &self.drift {
            Some(d) => d.evaluate(x)?,
            None => vec![0.0; self.n],
        };
        for (f, &ui) in self.fields.iter().zip(u) {
            let ui = match self.input_bounds {
                Some((lo, hi)) => ui.clamp(lo, hi),
                None => ui,
            };
            if ui != 0.0 {
                let fx = f.evaluate(x)?;
                v.iter_mut().zip(fx).for_each(|(vi, fi)| *vi += ui * fi);
            } else {
                f.check_domain(x)?;
            }
        }
        Ok(v)
    }

    /// Euclidean distance with angular coordinates wrapped to (-pi, pi].
    pub fn state_error(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        for &i in &self.angular {
            d[i] = wrap_angle(d[i]);
        }
        norm(&d)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

// ---------------------------------------------------------------------------
// Hall basis fields of a concrete system

enum HallMode {
    Symbolic(Vec<PolyField>),
    Taylor,
    FiniteDifference,
}

/// Concrete vector fields `B_1, ..., B_s` of a system, obtained by
/// evaluating the Hall bracket words on its control fields.
///
/// Polynomial systems get every bracket symbolically at construction, so the
/// value is immutable afterwards and can be shared between threads.
pub struct HallFields<'a> {
    sys: &'a ControlSystem,
    alg: &'a FreeNilpotentLieAlgebra,
    mode: HallMode,
}

impl<'a> HallFields<'a> {
    pub fn new(sys: &'a ControlSystem, alg: &'a FreeNilpotentLieAlgebra) -> Result<Self> {
        if alg.m() != sys.m() {
            return Err(Error::Usage(format!(
                "algebra has {} generators, system has {} inputs",
                alg.m(),
                sys.m()
            )));
        }
        let mode = if sys.is_polynomial() {
            let mut out: Vec<PolyField> = Vec::with_capacity(alg.s());
            for e in alg.basis() {
                let f = match e.kind {
                    HallKind::Generator(g) => sys.fields[g].as_polynomial().unwrap().clone(),
                    HallKind::Bracket(a, b) => out[a].lie_bracket(&out[b])?,
                };
                out.push(f);
            }
            HallMode::Symbolic(out)
        } else if sys.fields.iter().any(|f| matches!(f, VectorField::Custom(_))) {
            HallMode::FiniteDifference
        } else {
            HallMode::Taylor
        };
        Ok(HallFields { sys, alg, mode })
    }

    pub fn algebra(&self) -> &FreeNilpotentLieAlgebra {
        self.alg
    }

    /// Symbolic field of element `i` (polynomial systems only).
    pub fn symbolic(&self, i: usize) -> Option<&PolyField> {
        match &self.mode {
            HallMode::Symbolic(v) => v.get(i),
            _ => None,
        }
    }

    pub fn evaluate(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.sys.check_domain(x)?;
        match &self.mode {
            HallMode::Symbolic(v) => Ok(v[i].evaluate(x)),
            HallMode::Taylor => {
                let d = self.alg.degree(i);
                Ok(self.taylor_columns(x, d)?.swap_remove(i))
            }
            HallMode::FiniteDifference => self.eval_fd(i, x),
        }
    }

    /// Values of all elements of degree `<= max_degree` at `x`, in basis order.
    pub fn evaluate_up_to(&self, x: &[f64], max_degree: usize) -> Result<Vec<Vec<f64>>> {
        self.sys.check_domain(x)?;
        let count = self.alg.basis().iter().take_while(|e| e.degree <= max_degree).count();
        match &self.mode {
            HallMode::Symbolic(v) => Ok(v[..count].iter().map(|f| f.evaluate(x)).collect()),
            HallMode::Taylor => {
                let mut cols = self.taylor_columns(x, max_degree)?;
                cols.truncate(count);
                Ok(cols)
            }
            HallMode::FiniteDifference => (0..count).map(|i| self.eval_fd(i, x)).collect(),
        }
    }

    pub fn evaluate_all(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.evaluate_up_to(x, self.alg.k())
    }

    /// `sum_i c_i B_i(x)` for a series of the underlying algebra.
    pub fn evaluate_series(&self, a: &LieSeries, x: &[f64]) -> Result<Vec<f64>> {
        let cols = self.evaluate_all(x)?;
        let mut out = vec![0.0; self.sys.n()];
        for (c, col) in a.coeffs().iter().zip(&cols) {
            if !c.is_zero() {
                let c = to_f64(c);
                out.iter_mut().zip(col).for_each(|(o, v)| *o += c * v);
            }
        }
        Ok(out)
    }

    /// Taylor models of all elements with degree `<= max_degree`; element of
    /// degree `d` is kept to order `max_degree - d`, enough for its value.
    fn taylor_columns(&self, x: &[f64], max_degree: usize) -> Result<Vec<Vec<f64>>> {
        let mut models: Vec<Vec<Poly<f64>>> = Vec::new();
        for e in self.alg.basis().iter().take_while(|e| e.degree <= max_degree) {
            let order = max_degree - e.degree;
            let model = match e.kind {
                HallKind::Generator(g) => self.sys.fields[g].taylor(x, order)?,
                HallKind::Bracket(a, b) => bracket_polys(&models[a], &models[b], order),
            };
            models.push(model);
        }
        Ok(models
            .iter()
            .map(|m| m.iter().map(|p| p.constant_term()).collect())
            .collect())
    }

    fn eval_fd(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        match self.alg.element(i).kind {
            HallKind::Generator(g) => self.sys.fields[g].evaluate(x),
            HallKind::Bracket(a, b) => {
                let xa = self.eval_fd(a, x)?;
                let xb = self.eval_fd(b, x)?;
                let ja = self.jac_fd(a, x)?;
                let jb = self.jac_fd(b, x)?;
                Ok(bracket_values(&xa, &xb, &ja, &jb))
            }
        }
    }

    fn jac_fd(&self, i: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        match self.alg.element(i).kind {
            HallKind::Generator(g) => self.sys.fields[g].jacobian(x),
            HallKind::Bracket(..) => fd_jacobian(&|y: &[f64]| self.eval_fd(i, y), x),
        }
    }
}

/// Value of a single Hall element of `alg` on `sys` at `x`.
pub fn evaluate_hall(
    sys: &ControlSystem,
    alg: &FreeNilpotentLieAlgebra,
    index: usize,
    x: &[f64],
) -> Result<Vec<f64>> {
    HallFields::new(sys, alg)?.evaluate(index, x)
}

// ---------------------------------------------------------------------------
// Predicates

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub point: Vec<f64>,
    pub rank: usize,
    pub spanning: bool,
    /// Hall element indices selected by the pivoting, in selection order.
    pub used_brackets: Vec<usize>,
    /// Residual norm of each selected column when it was selected.
    pub residuals: Vec<f64>,
}

/// Lie algebra rank condition at `x` using brackets of degree `<= max_order`.
pub fn larc_check(
    sys: &ControlSystem,
    x: &[f64],
    max_order: usize,
    rank_tol: f64,
) -> Result<DistributionReport> {
    if max_order == 0 {
        return Err(Error::Usage("max_order must be >= 1".into()));
    }
    let alg = FreeNilpotentLieAlgebra::build(sys.m(), max_order)?;
    let hall = HallFields::new(sys, &alg)?;
    let cols = hall.evaluate_all(x)?;
    let r = pivoted_rank(&cols, rank_tol);
    Ok(DistributionReport {
        point: x.to_vec(),
        rank: r.rank,
        spanning: r.rank == sys.n(),
        used_brackets: r.pivots,
        residuals: r.pivot_norms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvolutivityReport {
    pub involutive: bool,
    pub worst_residual: f64,
}

/// Distance of every pairwise bracket from the span of the fields, at each
/// sample; involutive iff all residuals stay below `rank_tol`.
pub fn involutivity_check(
    fields: &[VectorField],
    samples: &[Vec<f64>],
    rank_tol: f64,
) -> Result<InvolutivityReport> {
    if samples.is_empty() {
        return Err(Error::Usage("involutivity check needs at least one sample".into()));
    }
    let mut worst: f64 = 0.0;
    for x in samples {
        let vals: Vec<Vec<f64>> = fields.iter().map(|f| f.evaluate(x)).collect::<Result<_>>()?;
        let span = pivoted_rank(&vals, rank_tol);
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                let br = lie_bracket_at(&fields[i], &fields[j], x)?;
                worst = worst.max(distance_to_span(&br, &span.basis));
            }
        }
    }
    Ok(InvolutivityReport { involutive: worst < rank_tol, worst_residual: worst })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NilpotencyReport {
    pub order: usize,
    pub nilpotent: bool,
    pub worst_residual: f64,
}

/// Evaluates every Hall bracket of degree `k + 1` at the samples; the system
/// is treated as nilpotent of order `k` there iff their sup-norm stays below
/// `nilp_tol`.
pub fn nilpotency_check(
    sys: &ControlSystem,
    alg: &FreeNilpotentLieAlgebra,
    samples: &[Vec<f64>],
    nilp_tol: f64,
) -> Result<NilpotencyReport> {
    let k = alg.k();
    let next = FreeNilpotentLieAlgebra::build(alg.m(), k + 1)?;
    let hall = HallFields::new(sys, &next)?;
    let range = next.indices_of_degree(k + 1);
    let mut worst: f64 = 0.0;
    for x in samples {
        let cols = hall.evaluate_up_to(x, k + 1)?;
        for col in &cols[range.clone()] {
            worst = worst.max(col.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
        }
    }
    Ok(NilpotencyReport { order: k, nilpotent: worst < nilp_tol, worst_residual: worst })
}
