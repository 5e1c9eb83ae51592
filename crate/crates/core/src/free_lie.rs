//! Free nilpotent Lie algebras in a Hall basis.
//!
//! Basis elements are numbered from zero internally and printed as `B1`,
//! `B2`, ... in every user-facing rendering. Elements are sorted by degree
//! and then by construction order, so for a fixed generator count `m` the
//! first elements of an order-`k` algebra coincide with the whole order-`k'`
//! algebra for any `k' < k`.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, from_f64, q, to_f64, Q};

/// Default upper bound on the basis size accepted by [`FreeNilpotentLieAlgebra::build`].
pub const DEFAULT_BASIS_CAP: usize = 200;

/// Highest nilpotency order for which the truncated BCH series is exact.
pub const MAX_BCH_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HallKind {
    /// Generator `X_{i+1}`.
    Generator(usize),
    /// `[B_left, B_right]`, both indices into the basis.
    Bracket(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HallElement {
    pub index: usize,
    pub degree: usize,
    pub kind: HallKind,
}

/// Dimension of the free nilpotent Lie algebra on `m` generators of order `k`
/// (sum of Witt necklace counts). Saturates at `u64::MAX`.
pub fn witt_dimension(m: usize, k: usize) -> u64 {
    (1..=k).fold(0u64, |acc, d| acc.saturating_add(witt(m, d)))
}

fn witt(m: usize, d: usize) -> u64 {
    let mut total: i128 = 0;
    for e in (1..=d).filter(|e| d.is_multiple_of(*e)) {
        let mu = mobius(e);
        if mu == 0 {
            continue;
        }
        let Some(p) = (m as i128).checked_pow((d / e) as u32) else {
            return u64::MAX;
        };
        total += mu as i128 * p;
    }
    u64::try_from(total / d as i128).unwrap_or(u64::MAX)
}

fn mobius(mut n: usize) -> i32 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

type Sparse = Vec<(usize, Q)>;

#[derive(Debug, Clone)]
pub struct FreeNilpotentLieAlgebra {
    m: usize,
    k: usize,
    basis: Vec<HallElement>,
    /// `[B_i, B_j]` for `i < j`, only non-zero entries.
    structure: HashMap<(usize, usize), Sparse>,
}

impl FreeNilpotentLieAlgebra {
    pub fn build(m: usize, k: usize) -> Result<Self> {
        Self::build_with_cap(m, k, DEFAULT_BASIS_CAP)
    }

    pub fn build_with_cap(m: usize, k: usize, cap: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::Usage(format!(
                "algebra needs m >= 1 and k >= 1 (got m={m}, k={k})"
            )));
        }
        let s = witt_dimension(m, k);
        if s > cap as u64 {
            return Err(Error::Size { s, cap });
        }

        let mut basis: Vec<HallElement> = (0..m)
            .map(|i| HallElement { index: i, degree: 1, kind: HallKind::Generator(i) })
            .collect();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for d in 2..=k {
            let lower = basis.len();
            for a in 0..lower {
                for b in a + 1..lower {
                    if basis[a].degree + basis[b].degree != d {
                        continue;
                    }
                    let hall = match basis[b].kind {
                        HallKind::Generator(_) => true,
                        HallKind::Bracket(c, _) => c <= a,
                    };
                    if hall {
                        let index = basis.len();
                        basis.push(HallElement { index, degree: d, kind: HallKind::Bracket(a, b) });
                        lookup.insert((a, b), index);
                    }
                }
            }
        }
        debug_assert_eq!(basis.len() as u64, s);

        let mut memo: HashMap<(usize, usize), Sparse> = HashMap::new();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                normalize(&basis, &lookup, k, i, j, &mut memo);
            }
        }
        memo.retain(|_, v| !v.is_empty());

        Ok(FreeNilpotentLieAlgebra { m, k, basis, structure: memo })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Basis size.
    pub fn s(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[HallElement] {
        &self.basis
    }

    pub fn element(&self, i: usize) -> &HallElement {
        &self.basis[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.basis[i].degree
    }

    /// Indices of elements with degree exactly `d`.
    pub fn indices_of_degree(&self, d: usize) -> std::ops::Range<usize> {
        let start = self.basis.iter().position(|e| e.degree >= d).unwrap_or(self.s());
        let end = self.basis.iter().position(|e| e.degree > d).unwrap_or(self.s());
        start..end.max(start)
    }

    /// `[B_i, B_j]` in Hall coordinates as sparse `(index, coeff)` pairs.
    pub fn bracket_basis(&self, i: usize, j: usize) -> Sparse {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Vec::new(),
            std::cmp::Ordering::Less => self.structure.get(&(i, j)).cloned().unwrap_or_default(),
            std::cmp::Ordering::Greater => self
                .structure
                .get(&(j, i))
                .map(|v| v.iter().map(|(t, c)| (*t, -c.clone())).collect())
                .unwrap_or_default(),
        }
    }

    /// Bracket expression of a basis element, e.g. `[X1,[X1,X2]]`.
    pub fn expression(&self, i: usize) -> String {
        match self.basis[i].kind {
            HallKind::Generator(g) => format!("X{}", g + 1),
            HallKind::Bracket(a, b) => format!("[{},{}]", self.expression(a), self.expression(b)),
        }
    }

    /// One line per element: `B<i> = <bracket expression>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.s() {
            out.push_str(&format!("B{} = {}\n", i + 1, self.expression(i)));
        }
        out
    }

    pub fn zero(&self) -> LieSeries {
        LieSeries { m: self.m, k: self.k, coeffs: vec![Q::zero(); self.s()] }
    }

    /// The basis element `B_{i+1}` as a series.
    pub fn unit(&self, i: usize) -> LieSeries {
        let mut z = self.zero();
        z.coeffs[i] = Q::one();
        z
    }

    pub fn series(&self, coeffs: Vec<Q>) -> Result<LieSeries> {
        if coeffs.len() != self.s() {
            return Err(Error::Usage(format!(
                "series has {} coefficients, algebra has {} basis elements",
                coeffs.len(),
                self.s()
            )));
        }
        Ok(LieSeries { m: self.m, k: self.k, coeffs })
    }

    pub fn series_from_f64(&self, coeffs: &[f64]) -> Result<LieSeries> {
        self.series(coeffs.iter().map(|&x| from_f64(x)).collect())
    }

    fn check(&self, a: &LieSeries) -> Result<()> {
        if a.m != self.m || a.k != self.k || a.coeffs.len() != self.s() {
            return Err(Error::Usage(format!(
                "series from algebra (m={}, k={}) used with algebra (m={}, k={})",
                a.m, a.k, self.m, self.k
            )));
        }
        Ok(())
    }

    /// Bilinear extension of the structure constants.
    pub fn bracket(&self, a: &LieSeries, b: &LieSeries) -> Result<LieSeries> {
        self.check(a)?;
        self.check(b)?;
        let mut out = self.zero();
        for (i, ai) in a.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            for (j, bj) in b.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                if i == j || self.degree(i) + self.degree(j) > self.k {
                    continue;
                }
                let w = ai * bj;
                for (t, c) in self.bracket_basis(i, j) {
                    out.coeffs[t] += &w * c;
                }
            }
        }
        Ok(out)
    }

    /// `log(exp(a) exp(b))`, truncated at the algebra's nilpotency order.
    pub fn bch(&self, a: &LieSeries, b: &LieSeries) -> Result<LieSeries> {
        if self.k > MAX_BCH_ORDER {
            return Err(Error::UnsupportedOrder { k: self.k, max: MAX_BCH_ORDER });
        }
        self.check(a)?;
        self.check(b)?;
        let mut z = a.add(b);
        if self.k >= 2 {
            let ab = self.bracket(a, b)?;
            z = z.add(&ab.scale(&q(1, 2)));
            if self.k >= 3 {
                let a_ab = self.bracket(a, &ab)?;
                let b_ab = self.bracket(b, &ab)?;
                z = z.add(&a_ab.sub(&b_ab).scale(&q(1, 12)));
                if self.k >= 4 {
                    let b_a_ab = self.bracket(b, &a_ab)?;
                    z = z.sub(&b_a_ab.scale(&q(1, 24)));
                }
            }
        }
        Ok(z)
    }

    /// `log(exp(f_1) exp(f_2) ... exp(f_N))` by left-folding [`Self::bch`].
    pub fn exp_product_log(&self, factors: &[LieSeries]) -> Result<LieSeries> {
        let mut acc = self.zero();
        for f in factors {
            acc = self.bch(&acc, f)?;
        }
        Ok(acc)
    }

    /// Log of the ordered product `exp(h_s B_s) ... exp(h_1 B_1)`.
    pub fn hall_product_log(&self, h: &[Q]) -> Result<LieSeries> {
        if h.len() != self.s() {
            return Err(Error::Usage(format!(
                "expected {} Hall coordinates, got {}",
                self.s(),
                h.len()
            )));
        }
        let factors: Vec<LieSeries> = h
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| self.unit(i).scale(c))
            .collect();
        self.exp_product_log(&factors)
    }

    /// Inverse of [`Self::hall_product_log`]: Hall coordinates `h` with
    /// `log(exp(h_s B_s) ... exp(h_1 B_1)) = a`, corrected degree by degree.
    pub fn hall_coordinates(&self, a: &LieSeries) -> Result<Vec<Q>> {
        self.check(a)?;
        let mut h = vec![Q::zero(); self.s()];
        for d in 1..=self.k {
            let cur = self.hall_product_log(&h)?;
            for i in self.indices_of_degree(d) {
                h[i] += &a.coeffs[i] - &cur.coeffs[i];
            }
        }
        Ok(h)
    }

    /// Projection onto elements of degree `<= d` (a homomorphism onto the
    /// order-`d` quotient).
    pub fn truncate(&self, a: &LieSeries, d: usize) -> Result<LieSeries> {
        self.check(a)?;
        let alg = FreeNilpotentLieAlgebra::build(self.m, d.min(self.k))?;
        alg.series(a.coeffs[..alg.s()].to_vec())
    }
}

fn normalize(
    basis: &[HallElement],
    lookup: &HashMap<(usize, usize), usize>,
    k: usize,
    i: usize,
    j: usize,
    memo: &mut HashMap<(usize, usize), Sparse>,
) -> Sparse {
    if i == j {
        return Vec::new();
    }
    if i > j {
        return normalize(basis, lookup, k, j, i, memo)
            .into_iter()
            .map(|(t, c)| (t, -c))
            .collect();
    }
    if basis[i].degree + basis[j].degree > k {
        return Vec::new();
    }
    if let Some(v) = memo.get(&(i, j)) {
        return v.clone();
    }
    let result = if let Some(&t) = lookup.get(&(i, j)) {
        vec![(t, Q::one())]
    } else {
        // Not a Hall word: B_j = [B_c, B_e] with c > i. Jacobi gives
        // [B_i,[B_c,B_e]] = [[B_i,B_c],B_e] + [B_c,[B_i,B_e]]; the smaller
        // operand strictly increases in both terms, so this terminates.
        let HallKind::Bracket(c, e) = basis[j].kind else {
            unreachable!("generator right factor always forms a Hall word");
        };
        let mut acc: HashMap<usize, Q> = HashMap::new();
        for (t, ct) in normalize(basis, lookup, k, i, c, memo) {
            for (u, cu) in normalize(basis, lookup, k, t, e, memo) {
                *acc.entry(u).or_insert_with(Q::zero) += &ct * cu;
            }
        }
        for (t, ct) in normalize(basis, lookup, k, i, e, memo) {
            for (u, cu) in normalize(basis, lookup, k, c, t, memo) {
                *acc.entry(u).or_insert_with(Q::zero) += &ct * cu;
            }
        }
        let mut v: Sparse = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        v.sort_by_key(|(t, _)| *t);
        v
    };
    memo.insert((i, j), result.clone());
    result
}

/// Element of a free nilpotent Lie algebra in Hall coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LieSeries {
    m: usize,
    k: usize,
    coeffs: Vec<Q>,
}

impl LieSeries {
    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &Q {
        &self.coeffs[i]
    }

    pub fn into_coeffs(self) -> Vec<Q> {
        self.coeffs
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| to_f64(&c.abs())).fold(0.0, f64::max)
    }

    fn zip(&self, other: &LieSeries, f: impl Fn(&Q, &Q) -> Q) -> LieSeries {
        assert_eq!(
            (self.m, self.k, self.coeffs.len()),
            (other.m, other.k, other.coeffs.len()),
            "series from different algebras"
        );
        LieSeries {
            m: self.m,
            k: self.k,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &LieSeries) -> LieSeries {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LieSeries) -> LieSeries {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> LieSeries {
        LieSeries { m: self.m, k: self.k, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn scale(&self, s: &Q) -> LieSeries {
        LieSeries { m: self.m, k: self.k, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }
}

impl fmt::Display for LieSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            let neg = c.is_negative();
            let mag = c.abs();
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            if mag.is_one() {
                write!(f, "B{}", i + 1)?;
            } else {
                write!(f, "{} B{}", fmt_q(&mag), i + 1)?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
