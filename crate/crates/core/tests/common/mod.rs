//! Independent oracles shared by the integration tests.
//!
//! The main one is the truncated free associative algebra on `m` letters:
//! a Lie element maps to a noncommutative polynomial with `[a,b] = ab - ba`,
//! and group products are computed with the plain power series of `exp` and
//! `log`. The embedding is injective, so equality of images is equality in
//! the free nilpotent Lie algebra.

#![allow(dead_code)]

use nilsteer::free_lie::{FreeNilpotentLieAlgebra, HallKind, LieSeries};
use nilsteer::rational::{q, Q};
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

pub trait Scalar: Clone + std::fmt::Debug + PartialEq {
    fn c_zero() -> Self;
    fn c_one() -> Self;
    fn from_q(x: &Q) -> Self;
    fn c_add(&self, o: &Self) -> Self;
    fn c_mul(&self, o: &Self) -> Self;
    fn c_is_zero(&self) -> bool;
    fn c_f64(&self) -> f64;
}

impl Scalar for Q {
    fn c_zero() -> Self {
        q(0, 1)
    }
    fn c_one() -> Self {
        q(1, 1)
    }
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn c_add(&self, o: &Self) -> Self {
        self + o
    }
    fn c_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn c_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn c_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap()
    }
}

impl Scalar for f64 {
    fn c_zero() -> Self {
        0.0
    }
    fn c_one() -> Self {
        1.0
    }
    fn from_q(x: &Q) -> Self {
        ToPrimitive::to_f64(x).unwrap()
    }
    fn c_add(&self, o: &Self) -> Self {
        self + o
    }
    fn c_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn c_is_zero(&self) -> bool {
        *self == 0.0
    }
    fn c_f64(&self) -> f64 {
        *self
    }
}

/// Element of the free associative algebra truncated above word length `k`.
/// Dense storage: words of length `d` sit at `offset(d) + base-m value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<C> {
    pub m: usize,
    pub k: usize,
    pub c: Vec<C>,
}

impl<C: Scalar> Tensor<C> {
    fn offset(m: usize, d: usize) -> usize {
        (0..d).map(|j| m.pow(j as u32)).sum()
    }

    pub fn zero(m: usize, k: usize) -> Self {
        Tensor { m, k, c: vec![C::c_zero(); Self::offset(m, k + 1)] }
    }

    pub fn one(m: usize, k: usize) -> Self {
        let mut t = Self::zero(m, k);
        t.c[0] = C::c_one();
        t
    }

    pub fn letter(m: usize, k: usize, i: usize) -> Self {
        let mut t = Self::zero(m, k);
        if k >= 1 {
            t.c[1 + i] = C::c_one();
        }
        t
    }

    pub fn add(&self, o: &Self) -> Self {
        let c = self.c.iter().zip(&o.c).map(|(a, b)| a.c_add(b)).collect();
        Tensor { m: self.m, k: self.k, c }
    }

    pub fn scale(&self, s: &C) -> Self {
        Tensor { m: self.m, k: self.k, c: self.c.iter().map(|a| a.c_mul(s)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&C::from_q(&q(-1, 1))))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (m, k) = (self.m, self.k);
        let mut out = Self::zero(m, k);
        for da in 0..=k {
            let oa = Self::offset(m, da);
            for ia in 0..m.pow(da as u32) {
                let a = &self.c[oa + ia];
                if a.c_is_zero() {
                    continue;
                }
                for db in 0..=k - da {
                    let ob = Self::offset(m, db);
                    let shift = m.pow(db as u32);
                    for ib in 0..shift {
                        let b = &o.c[ob + ib];
                        if b.c_is_zero() {
                            continue;
                        }
                        let idx = Self::offset(m, da + db) + ia * shift + ib;
                        out.c[idx] = out.c[idx].c_add(&a.c_mul(b));
                    }
                }
            }
        }
        out
    }

    pub fn commutator(&self, o: &Self) -> Self {
        self.mul(o).sub(&o.mul(self))
    }

    /// `exp(x)` for `x` without constant term.
    pub fn exp(&self) -> Self {
        let mut term = Self::one(self.m, self.k);
        let mut acc = term.clone();
        for n in 1..=self.k {
            term = term.mul(self).scale(&C::from_q(&q(1, n as i64)));
            acc = acc.add(&term);
        }
        acc
    }

    /// `log(x)` for `x` with constant term 1.
    pub fn log(&self) -> Self {
        let y = self.sub(&Self::one(self.m, self.k));
        let mut power = Self::one(self.m, self.k);
        let mut acc = Self::zero(self.m, self.k);
        for n in 1..=self.k {
            power = power.mul(&y);
            let sign = if n % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&power.scale(&C::from_q(&q(sign, n as i64))));
        }
        acc
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.c.iter().zip(&o.c).map(|(a, b)| (a.c_f64() - b.c_f64()).abs()).fold(0.0, f64::max)
    }
}

/// Images of the Hall basis, built from the bracket words alone.
pub fn hall_images<C: Scalar>(alg: &FreeNilpotentLieAlgebra) -> Vec<Tensor<C>> {
    let (m, k) = (alg.m(), alg.k());
    let mut out: Vec<Tensor<C>> = Vec::with_capacity(alg.s());
    for e in alg.basis() {
        let t = match e.kind {
            HallKind::Generator(g) => Tensor::letter(m, k, g),
            HallKind::Bracket(a, b) => out[a].commutator(&out[b]),
        };
        out.push(t);
    }
    out
}

pub fn image<C: Scalar>(images: &[Tensor<C>], a: &LieSeries) -> Tensor<C> {
    let mut acc = Tensor::zero(images[0].m, images[0].k);
    for (c, img) in a.coeffs().iter().zip(images) {
        if !Zero::is_zero(c) {
            acc = acc.add(&img.scale(&C::from_q(c)));
        }
    }
    acc
}

pub fn image_f64(images: &[Tensor<f64>], a: &[f64]) -> Tensor<f64> {
    let mut acc = Tensor::zero(images[0].m, images[0].k);
    for (c, img) in a.iter().zip(images) {
        acc = acc.add(&img.scale(c));
    }
    acc
}

/// `log(exp(f_1) ... exp(f_N))` in the tensor model.
pub fn product_log<C: Scalar>(factors: &[Tensor<C>]) -> Tensor<C> {
    let (m, k) = (factors[0].m, factors[0].k);
    factors.iter().fold(Tensor::one(m, k), |acc, f| acc.mul(&f.exp())).log()
}

/// The Heisenberg algebra as strictly upper-triangular 3x3 matrices:
/// `X1 = E12`, `X2 = E23`, `[X1,X2] = E13`. Faithful on the (2,2) algebra.
pub type Mat3 = [[Q; 3]; 3];

pub fn mat_zero() -> Mat3 {
    std::array::from_fn(|_| std::array::from_fn(|_| q(0, 1)))
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                out[i][j] += &a[i][l] * &b[l][j];
            }
        }
    }
    out
}

pub fn heis_matrix(c: &[Q]) -> Mat3 {
    let mut x = mat_zero();
    x[0][1] = c[0].clone();
    x[1][2] = c[1].clone();
    x[0][2] = c[2].clone();
    x
}

/// `exp` of a nilpotent 3x3 matrix: `I + X + X^2/2`.
pub fn mat_exp(x: &Mat3) -> Mat3 {
    let x2 = mat_mul(x, x);
    let mut out = mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = &x[i][j] + &x2[i][j] * q(1, 2);
            if i == j {
                out[i][j] += q(1, 1);
            }
        }
    }
    out
}

/// `log` of a unipotent 3x3 matrix: `Y - Y^2/2` with `Y = G - I`.
pub fn mat_log(g: &Mat3) -> Mat3 {
    let mut y = g.clone();
    for (i, row) in y.iter_mut().enumerate() {
        row[i] -= q(1, 1);
    }
    let y2 = mat_mul(&y, &y);
    let mut out = mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = &y[i][j] - &y2[i][j] * q(1, 2);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// proptest strategies

pub fn small_q() -> impl Strategy<Value = Q> {
    (-12i64..=12, 1i64..=5).prop_map(|(n, d)| q(n, d))
}

pub fn q_vec(len: usize) -> impl Strategy<Value = Vec<Q>> {
    proptest::collection::vec(small_q(), len)
}

/// Nonzero rational with rational square root.
pub fn square_q() -> impl Strategy<Value = Q> {
    (1i64..=6, 1i64..=4, any::<bool>())
        .prop_map(|(n, d, neg)| if neg { -q(n * n, d * d) } else { q(n * n, d * d) })
}

pub fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
