//! Piecewise-constant input synthesis from terminal Hall coordinates.
//!
//! A schedule executes piece 1 first, so its log is
//! `log(exp(tau_1 U_1) exp(tau_2 U_2) ... )` with `U_p = sum_i u_i B_i`. The
//! target for Hall coordinates `h` is `log(exp(h_s B_s) ... exp(h_1 B_1))`.
//!
//! Every synthesized leg uses a unit input `+-e_i`; durations carry all the
//! scaling and stay exact rationals unless an irrational root shows up.

use std::fmt;
use std::io::{BufRead, Write};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::free_lie::{FreeNilpotentLieAlgebra, LieSeries};
use crate::rational::{from_f64, Real, Q};

pub const SCHEDULE_HEADER: &str = "# nilsteer schedule v1";

/// Relative tolerance used when roots force floating-point durations.
pub const FLOAT_VERIFY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Piece<T = f64> {
    pub duration: T,
    pub u: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule<T = f64> {
    pub m: usize,
    pub pieces: Vec<Piece<T>>,
}

/// Scalars that convert exactly to rationals.
pub trait ExactScalar: Clone {
    fn to_q(&self) -> Q;
    fn is_zero_value(&self) -> bool;
}

impl ExactScalar for f64 {
    fn to_q(&self) -> Q {
        from_f64(*self)
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
}

impl ExactScalar for Q {
    fn to_q(&self) -> Q {
        self.clone()
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
}

impl<T: ExactScalar> ControlSchedule<T> {
    pub fn empty(m: usize) -> Self {
        ControlSchedule { m, pieces: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn push(&mut self, duration: T, u: Vec<T>) {
        assert_eq!(u.len(), self.m, "input width");
        self.pieces.push(Piece { duration, u });
    }

    pub fn extend(&mut self, other: ControlSchedule<T>) {
        assert_eq!(other.m, self.m, "input width");
        self.pieces.extend(other.pieces);
    }

    /// Drops zero-duration pieces.
    pub fn pruned(mut self) -> Self {
        self.pieces.retain(|p| !p.duration.is_zero_value());
        self
    }
}

impl ControlSchedule<f64> {
    pub fn total_duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    /// Start time of every piece, followed by the end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for p in &self.pieces {
            t += p.duration;
            out.push(t);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.pieces.iter().enumerate() {
            if !(p.duration.is_finite() && p.duration >= 0.0) {
                return Err(Error::Usage(format!("piece {} has invalid duration {}", i + 1, p.duration)));
            }
            if p.u.len() != self.m || p.u.iter().any(|x| !x.is_finite()) {
                return Err(Error::Usage(format!("piece {} has invalid input {:?}", i + 1, p.u)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SCHEDULE_HEADER}")?;
        for p in &self.pieces {
            let mut row = p.duration.to_string();
            for u in &p.u {
                row.push(',');
                row.push_str(&u.to_string());
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Self::write_csv`]. `m` is inferred from the
    /// first row; an empty file needs it supplied.
    pub fn read_csv<R: BufRead>(r: R, m: Option<usize>) -> Result<Self> {
        let mut pieces: Vec<Piece> = Vec::new();
        let mut width = m;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Schema(format!("schedule line {}: {e}", lineno + 1)))?;
            if vals.len() < 2 {
                return Err(Error::Schema(format!("schedule line {}: need duration and inputs", lineno + 1)));
            }
            let w = *width.get_or_insert(vals.len() - 1);
            if vals.len() - 1 != w {
                return Err(Error::Schema(format!(
                    "schedule line {}: expected {} inputs, found {}",
                    lineno + 1,
                    w,
                    vals.len() - 1
                )));
            }
            pieces.push(Piece { duration: vals[0], u: vals[1..].to_vec() });
        }
        let sched = ControlSchedule {
            m: width.ok_or_else(|| Error::Schema("empty schedule without input count".into()))?,
            pieces,
        };
        sched.validate().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(sched)
    }
}

impl fmt::Display for ControlSchedule<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pieces.iter().enumerate() {
            writeln!(f, "{:>3}  {:<24} u = {:?}", i + 1, p.duration, p.u)?;
        }
        Ok(())
    }
}

/// Log of the group element produced by a schedule.
pub fn schedule_log<T: ExactScalar>(
    alg: &FreeNilpotentLieAlgebra,
    sched: &ControlSchedule<T>,
) -> Result<LieSeries> {
    if sched.m != alg.m() {
        return Err(Error::Usage(format!(
            "schedule has {} inputs, algebra has {} generators",
            sched.m,
            alg.m()
        )));
    }
    let factors: Vec<LieSeries> = sched
        .pieces
        .iter()
        .filter(|p| !p.duration.is_zero_value())
        .map(|p| {
            let tau = p.duration.to_q();
            let mut c = vec![Q::zero(); alg.s()];
            for (i, ui) in p.u.iter().enumerate() {
                c[i] = &tau * ui.to_q();
            }
            alg.series(c)
        })
        .collect::<Result<_>>()?;
    alg.exp_product_log(&factors)
}

// ---------------------------------------------------------------------------

/// A leg on a single input: `duration * sign * e_input`.
#[derive(Debug, Clone, PartialEq)]
struct Leg {
    duration: Real,
    input: usize,
    sign: i8,
}

/// Leg tables `(sign, input)` whose product with common leg time `r` has log
/// `r^3 [B1,[B1,B2]]` and `r^3 [B2,[B1,B2]]` respectively in the (2,3)
/// algebra.
const RHO_BLOCK: [(i8, usize); 10] =
    [(1, 0), (1, 0), (1, 1), (-1, 0), (-1, 1), (-1, 0), (1, 1), (1, 0), (-1, 1), (-1, 0)];
const SIGMA_BLOCK: [(i8, usize); 10] =
    [(1, 1), (1, 0), (1, 1), (-1, 0), (-1, 1), (-1, 1), (1, 1), (1, 0), (-1, 1), (-1, 0)];

/// Appends a block with leg time `|r|`; a negative `r` flips every sign.
fn block(out: &mut Vec<Leg>, table: &[(i8, usize)], r: &Real) {
    if r.is_zero() {
        return;
    }
    let flip: i8 = if r.is_negative() { -1 } else { 1 };
    let t = r.abs();
    out.extend(table.iter().map(|&(s, i)| Leg { duration: t.clone(), input: i, sign: s * flip }));
}

/// `exp(tB_i) exp(tB_j) exp(-tB_i) exp(-tB_j)` realizing `c [B_i,B_j]` at
/// leading order, `t = sqrt|c|`. Returns the leg time.
fn commutator(out: &mut Vec<Leg>, i: usize, j: usize, c: &Real) -> Real {
    let t = c.sqrt_abs();
    if c.is_zero() {
        return t;
    }
    let (a, b) = if c.is_negative() { (j, i) } else { (i, j) };
    for (input, sign) in [(a, 1), (b, 1), (a, -1), (b, -1)] {
        out.push(Leg { duration: t.clone(), input, sign });
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthMode {
    /// Realize the full target; only `k <= 2` or `(m, k) = (2, 3)`.
    #[default]
    Exact,
    /// Realize the degree `<= 2` truncation of the target.
    Approximate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisLedger {
    pub target: LieSeries,
    pub achieved: LieSeries,
    /// `bch(-achieved, target)`; zero on exact success.
    pub residual: LieSeries,
    /// True when every duration is an exact rational and the check was exact.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub schedule: ControlSchedule<f64>,
    /// Same schedule with exact durations, when no irrational root appeared.
    pub exact_schedule: Option<ControlSchedule<Q>>,
    pub ledger: SynthesisLedger,
}

pub fn exact_supported(m: usize, k: usize) -> bool {
    k <= 2 || m == 1 || (m == 2 && k == 3)
}

/// Degree-1 pieces `exp(h_m B_m) ... exp(h_1 B_1)` and the log of their product.
fn degree_one(alg: &FreeNilpotentLieAlgebra, h: &[Q]) -> Result<(Vec<Leg>, LieSeries)> {
    let m = alg.m();
    let mut legs = Vec::new();
    let mut factors = Vec::new();
    for i in (0..m).rev() {
        if h[i].is_zero() {
            continue;
        }
        let neg = h[i] < Q::zero();
        let d = if neg { -h[i].clone() } else { h[i].clone() };
        legs.push(Leg { duration: Real::Exact(d), input: i, sign: if neg { -1 } else { 1 } });
        factors.push(alg.unit(i).scale(&h[i]));
    }
    Ok((legs, alg.exp_product_log(&factors)?))
}

fn check_target(alg: &FreeNilpotentLieAlgebra, h: &[Q]) -> Result<()> {
    if h.len() != alg.s() {
        return Err(Error::Usage(format!(
            "target has {} Hall coordinates, algebra has {}",
            h.len(),
            alg.s()
        )));
    }
    Ok(())
}

/// Order-2 synthesis (any `m`): degree-2 commutator blocks for the prefix
/// `bch(target, -D)`, then the degree-1 flows `D`.
pub fn synth_order2(alg: &FreeNilpotentLieAlgebra, h: &[Q]) -> Result<Synthesis> {
    if alg.k() > 2 && alg.s() > alg.m() {
        return Err(Error::UnsupportedConfiguration { m: alg.m(), k: alg.k() });
    }
    check_target(alg, h)?;
    let target = alg.hall_product_log(h)?;
    let (tail, d) = degree_one(alg, h)?;
    let prefix = alg.bch(&target, &d.neg())?;
    let mut legs = Vec::new();
    for idx in alg.indices_of_degree(2) {
        if let crate::free_lie::HallKind::Bracket(i, j) = alg.element(idx).kind {
            commutator(&mut legs, i, j, &Real::Exact(prefix.coeff(idx).clone()));
        }
    }
    legs.extend(tail);
    finish(alg, legs, target)
}

/// Exact synthesis for `(m, k) = (2, 3)`: a commutator block for the `B3`
/// coordinate, then a rho-block and a sigma-block absorbing what remains on
/// `B4` and `B5`, then the degree-1 flows. At most 26 pieces.
pub fn synth_order3_m2(alg: &FreeNilpotentLieAlgebra, h: &[Q]) -> Result<Synthesis> {
    if alg.m() != 2 || alg.k() != 3 {
        return Err(Error::UnsupportedConfiguration { m: alg.m(), k: alg.k() });
    }
    check_target(alg, h)?;
    let target = alg.hall_product_log(h)?;
    let (tail, d) = degree_one(alg, h)?;
    let prefix = alg.bch(&target, &d.neg())?;
    let gamma = Real::Exact(prefix.coeff(2).clone());
    let mut legs = Vec::new();
    let t = commutator(&mut legs, 0, 1, &gamma);
    // the commutator block leaves gamma_hat on both B4 and B5
    let gamma_hat = gamma.mul(&t).half();
    let rho = Real::Exact(prefix.coeff(3).clone()).sub(&gamma_hat).cbrt();
    let sigma = Real::Exact(prefix.coeff(4).clone()).sub(&gamma_hat).cbrt();
    block(&mut legs, &RHO_BLOCK, &rho);
    block(&mut legs, &SIGMA_BLOCK, &sigma);
    legs.extend(tail);
    finish(alg, legs, target)
}

/// Dispatches on `(m, k)`; approximate mode synthesizes the degree `<= 2`
/// truncation in the order-2 quotient algebra.
pub fn synthesize(alg: &FreeNilpotentLieAlgebra, h: &[Q], mode: SynthMode) -> Result<Synthesis> {
    check_target(alg, h)?;
    let (m, k) = (alg.m(), alg.k());
    match mode {
        SynthMode::Exact if k <= 2 || alg.s() == m => synth_order2(alg, h),
        SynthMode::Exact if m == 2 && k == 3 => synth_order3_m2(alg, h),
        SynthMode::Exact => Err(Error::UnsupportedConfiguration { m, k }),
        SynthMode::Approximate => {
            if k <= 2 {
                return synth_order2(alg, h);
            }
            let low = FreeNilpotentLieAlgebra::build(m, 2)?;
            synth_order2(&low, &h[..low.s()])
        }
    }
}

fn finish(alg: &FreeNilpotentLieAlgebra, legs: Vec<Leg>, target: LieSeries) -> Result<Synthesis> {
    let m = alg.m();
    let unit = |i: usize, sign: i8| -> Vec<f64> {
        let mut u = vec![0.0; m];
        u[i] = f64::from(sign);
        u
    };
    let legs: Vec<Leg> = legs.into_iter().filter(|l| !l.duration.is_zero()).collect();
    let mut schedule = ControlSchedule::empty(m);
    for l in &legs {
        schedule.push(l.duration.to_f64(), unit(l.input, l.sign));
    }
    let exact_schedule = legs
        .iter()
        .map(|l| {
            l.duration.as_exact().map(|d| {
                let mut u = vec![Q::zero(); m];
                u[l.input] = if l.sign > 0 { Q::one() } else { -Q::one() };
                Piece { duration: d.clone(), u }
            })
        })
        .collect::<Option<Vec<_>>>()
        .map(|pieces| ControlSchedule { m, pieces });

    let achieved = match &exact_schedule {
        Some(s) => schedule_log(alg, s)?,
        None => schedule_log(alg, &schedule)?,
    };
    let residual = alg.bch(&achieved.neg(), &target)?;
    let exact = exact_schedule.is_some();
    let ok = if exact {
        residual.is_zero()
    } else {
        let scale = target.max_abs().max(1.0);
        residual.max_abs() <= FLOAT_VERIFY_TOL * scale
    };
    if !ok {
        let r = residual.to_f64();
        return Err(Error::Verification {
            max_residual: r.iter().fold(0.0, |a: f64, x| a.max(x.abs())),
            residual: r,
        });
    }
    Ok(Synthesis { schedule, exact_schedule, ledger: SynthesisLedger { target, achieved, residual, exact } })
}
