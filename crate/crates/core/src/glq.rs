//! Complex-size matrices: the algebra `gl_q` and its loop algebra, the
//! interpolation trace, and the shift calculus on diagonal fields that
//! determines the universal diagonal r-matrix.

use std::collections::BTreeMap;

use rand::Rng;

use crate::a0::{random_a0, A0Function, A0Function2, A0Laurent, A0Laurent2};
use crate::error::{Error, Result};
use crate::laurent::{qpow, random_poly, C64, LaurentSeries};
use crate::loopfin::{validate_delta, DiagMatrix, LoopMatrix};

/// Cutoff value meaning "every upper diagonal is known".
pub const EXACT_DMAX: i64 = i64::MAX / 4;
/// Largest block accepted by [`GlqMatrix::evaluate`].
pub const MAX_BLOCK: usize = 64;
pub const DEFAULT_DMAX: i64 = 8;

const ZERO: C64 = C64::new(0.0, 0.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn clamp_dmax(d: i64) -> i64 {
    if d >= EXACT_DMAX / 2 {
        EXACT_DMAX
    } else {
        d
    }
}

/// Element of `L gl_q`.
///
/// Rows `i > reg` are read from the diagonal interpolants `A^(d)(w, t, z)`
/// at `w = i`; rows `i <= reg` are stored explicitly. Columns are
/// nonnegative, so entries left of column 0 do not exist. Diagonals above
/// `d_max` are unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct GlqMatrix {
    reg: usize,
    diagonals: BTreeMap<i64, A0Laurent2>,
    exceptional: BTreeMap<(usize, usize), A0Laurent>,
    d_max: i64,
}

impl GlqMatrix {
    pub fn new(reg: usize, d_max: i64) -> Self {
        Self { reg, diagonals: BTreeMap::new(), exceptional: BTreeMap::new(), d_max: clamp_dmax(d_max) }
    }

    /// Builds from interpolants, filling rows `0..=reg` by evaluation.
    pub fn from_interpolants(reg: usize, diagonals: BTreeMap<i64, A0Laurent2>, d_max: i64, q: C64) -> Self {
        let mut a = Self::new(reg, d_max);
        a.diagonals = diagonals.into_iter().filter(|(d, f)| *d <= a.d_max && !f.is_zero()).collect();
        a.fill_rows(q);
        a
    }

    fn fill_rows(&mut self, q: C64) {
        for i in 0..=self.reg {
            for (d, f) in &self.diagonals {
                let j = i as i64 + d;
                if j >= 0 {
                    let e = f.partial_eval_w(re(i as f64), q);
                    if !e.is_zero() {
                        self.exceptional.insert((i, j as usize), e);
                    }
                }
            }
        }
    }

    pub fn identity(q: C64) -> Self {
        let mut d = BTreeMap::new();
        d.insert(0, A0Laurent2::constant(A0Function2::constant(re(1.0))));
        Self::from_interpolants(0, d, EXACT_DMAX, q)
    }

    /// The shift `Lambda` with ones on the subdiagonal.
    pub fn lambda(q: C64) -> Self {
        let mut d = BTreeMap::new();
        d.insert(-1, A0Laurent2::constant(A0Function2::constant(re(1.0))));
        Self::from_interpolants(0, d, EXACT_DMAX, q)
    }

    pub fn reg(&self) -> usize {
        self.reg
    }
    pub fn d_max(&self) -> i64 {
        self.d_max
    }
    pub fn diagonals(&self) -> &BTreeMap<i64, A0Laurent2> {
        &self.diagonals
    }
    pub fn diagonal(&self, d: i64) -> A0Laurent2 {
        self.diagonals.get(&d).cloned().unwrap_or_else(A0Laurent2::zero)
    }
    pub fn exceptional(&self) -> &BTreeMap<(usize, usize), A0Laurent> {
        &self.exceptional
    }

    pub fn set_diagonal(&mut self, d: i64, f: A0Laurent2) {
        if f.is_zero() {
            self.diagonals.remove(&d);
        } else {
            self.diagonals.insert(d, f);
        }
    }

    /// Overrides an entry in an explicit row.
    pub fn set_exceptional(&mut self, i: usize, j: usize, f: A0Laurent) -> Result<()> {
        if i > self.reg {
            return Err(Error::Shape(format!("row {i} is above reg = {}", self.reg)));
        }
        if f.is_zero() {
            self.exceptional.remove(&(i, j));
        } else {
            self.exceptional.insert((i, j), f);
        }
        Ok(())
    }

    /// Raises `reg`, materializing the newly explicit rows.
    pub fn with_reg(&self, reg: usize, q: C64) -> Self {
        if reg <= self.reg {
            return self.clone();
        }
        let mut a = self.clone();
        for i in self.reg + 1..=reg {
            for (d, f) in &self.diagonals {
                let j = i as i64 + d;
                if j >= 0 {
                    let e = f.partial_eval_w(re(i as f64), q);
                    if !e.is_zero() {
                        a.exceptional.insert((i, j as usize), e);
                    }
                }
            }
        }
        a.reg = reg;
        a
    }

    /// Lowest occupied diagonal (at most 0).
    pub fn low(&self) -> i64 {
        let d = self.diagonals.keys().next().copied().unwrap_or(0);
        let e = self.exceptional.keys().map(|(i, j)| *j as i64 - *i as i64).min().unwrap_or(0);
        d.min(e).min(0)
    }

    /// Highest occupied diagonal (at least 0).
    pub fn high(&self) -> i64 {
        let d = self.diagonals.keys().next_back().copied().unwrap_or(0);
        let e = self.exceptional.keys().map(|(i, j)| *j as i64 - *i as i64).max().unwrap_or(0);
        d.max(e).max(0)
    }

    /// Entry `A_{ij}(t, z)`.
    pub fn entry(&self, i: usize, j: usize, q: C64) -> Result<A0Laurent> {
        let d = j as i64 - i as i64;
        if d > self.d_max {
            return Err(Error::CutoffExceeded { requested: d, available: self.d_max });
        }
        if i <= self.reg {
            return Ok(self.exceptional.get(&(i, j)).cloned().unwrap_or_else(A0Laurent::zero));
        }
        Ok(match self.diagonals.get(&d) {
            Some(f) => f.partial_eval_w(re(i as f64), q),
            None => A0Laurent::zero(),
        })
    }

    /// Top-left `block x block` corner of `A(lambda)`.
    pub fn evaluate(&self, lambda: C64, block: usize, q: C64) -> Result<LoopMatrix> {
        if block > MAX_BLOCK {
            return Err(Error::Shape(format!("block {block} exceeds {MAX_BLOCK}")));
        }
        let mut rows = Vec::with_capacity(block);
        for i in 0..block {
            let mut row = Vec::with_capacity(block);
            for j in 0..block {
                if j as i64 - i as i64 > self.d_max {
                    return Err(Error::CutoffExceeded { requested: j as i64 - i as i64, available: self.d_max });
                }
                row.push(self.entry(i, j, q)?.eval_at(lambda, q));
            }
            rows.push(row);
        }
        LoopMatrix::from_rows(rows)
    }

    /// The `gl_m` block of `A(m)`.
    pub fn restrict(&self, m: usize, q: C64) -> Result<LoopMatrix> {
        self.evaluate(re(m as f64), m, q)
    }

    /// `(Tr A)(t) = D_A(t, t)` with `D_A(n, t) = sum_{i<n} A_ii(t)`.
    pub fn tr_glq(&self, q: C64, eps: f64) -> Result<A0Laurent> {
        if self.d_max < 0 {
            return Err(Error::CutoffExceeded { requested: 0, available: self.d_max });
        }
        let a0 = self.diagonal(0);
        let mut d = a0.interpolate_w(0, 0, q, eps)?;
        let mut corr = A0Laurent::zero();
        for i in 0..=self.reg {
            let e = self.exceptional.get(&(i, i)).cloned().unwrap_or_else(A0Laurent::zero);
            corr = corr.add(&e.sub(&a0.partial_eval_w(re(i as f64), q)));
        }
        d = d.add(&A0Laurent2::from_t(&corr));
        Ok(d.diag_eval(ZERO, q))
    }

    pub fn tr_at(&self, lambda: C64, q: C64, eps: f64) -> Result<LaurentSeries> {
        Ok(self.tr_glq(q, eps)?.eval_at(lambda, q))
    }

    /// `self + c * other`.
    fn combine(&self, other: &Self, c: C64, q: C64) -> Result<Self> {
        let reg = self.reg.max(other.reg);
        let a = self.with_reg(reg, q);
        let b = other.with_reg(reg, q);
        let mut out = Self::new(reg, a.d_max.min(b.d_max));
        let keys: std::collections::BTreeSet<i64> = a.diagonals.keys().chain(b.diagonals.keys()).copied().collect();
        for d in keys {
            if d <= out.d_max {
                let v = a.diagonal(d).add(&b.diagonal(d).scale(c));
                out.set_diagonal(d, v);
            }
        }
        let cells: std::collections::BTreeSet<(usize, usize)> =
            a.exceptional.keys().chain(b.exceptional.keys()).copied().collect();
        for (i, j) in cells {
            if j as i64 - i as i64 <= out.d_max {
                let z = A0Laurent::zero();
                let v = a.exceptional.get(&(i, j)).unwrap_or(&z).add(&b.exceptional.get(&(i, j)).unwrap_or(&z).scale(c));
                out.set_exceptional(i, j, v)?;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self, q: C64) -> Result<Self> {
        self.combine(other, re(1.0), q)
    }

    pub fn sub(&self, other: &Self, q: C64) -> Result<Self> {
        self.combine(other, re(-1.0), q)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for f in out.diagonals.values_mut() {
            *f = f.scale(c);
        }
        for f in out.exceptional.values_mut() {
            *f = f.scale(c);
        }
        out
    }

    /// Every entry `a(t, z) -> a(t, q^c z)`.
    pub fn dilate_z(&self, c: i64, q: C64) -> Self {
        let mut out = self.clone();
        for f in out.diagonals.values_mut() {
            *f = f.dilate_affine(0, 0, c, q);
        }
        for f in out.exceptional.values_mut() {
            *f = f.dilate_affine(0, c, q);
        }
        out
    }

    /// Keeps only the diagonals `<= d`.
    pub fn cut(&self, d: i64) -> Self {
        let mut out = self.clone();
        out.d_max = out.d_max.min(d);
        out.diagonals.retain(|k, _| *k <= d);
        out.exceptional.retain(|(i, j), _| *j as i64 - *i as i64 <= d);
        out
    }

    /// Restriction to one diagonal.
    pub fn diagonal_part(&self, d: i64) -> Self {
        let mut out = Self::new(self.reg, EXACT_DMAX);
        out.set_diagonal(d, self.diagonal(d));
        for ((i, j), f) in &self.exceptional {
            if *j as i64 - *i as i64 == d {
                out.exceptional.insert((*i, *j), f.clone());
            }
        }
        out
    }

    /// Max abs coefficient on each diagonal `lo..=hi`, interpolant and explicit rows.
    pub fn diagonal_norms(&self, lo: i64, hi: i64) -> BTreeMap<i64, f64> {
        let mut out: BTreeMap<i64, f64> = (lo..=hi).map(|d| (d, 0.0)).collect();
        for (d, f) in &self.diagonals {
            if let Some(v) = out.get_mut(d) {
                *v = v.max(f.max_abs());
            }
        }
        for ((i, j), f) in &self.exceptional {
            if let Some(v) = out.get_mut(&(*j as i64 - *i as i64)) {
                *v = v.max(f.max_abs());
            }
        }
        out
    }

    /// Largest `|A_ij(m)|` over `m` in `(reg, reg + 5]`, `reg < i < m <= j`.
    pub fn condition3_residual(&self, q: C64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let top = self.high().min(self.d_max);
        for m in self.reg + 1..=self.reg + 5 {
            for i in self.reg + 1..m {
                for j in m..=(i as i64 + top).max(m as i64) as usize {
                    let v = self.entry(i, j, q)?.eval_at(re(m as f64), q).max_abs();
                    worst = worst.max(v);
                }
            }
        }
        Ok(worst)
    }

    /// Largest `|A^(d)(w, w + l)|`, `1 <= l <= d`, over the given `w`.
    pub fn zero_pattern_residual(&self, ws: &[C64], q: C64) -> f64 {
        let mut worst: f64 = 0.0;
        for (d, f) in self.diagonals.range(1..) {
            for l in 1..=*d {
                for w in ws {
                    worst = worst.max(f.eval_at(*w, w + l as f64, q).max_abs());
                }
            }
        }
        worst
    }
}

/// Exact cutoff of a product.
pub fn product_dmax(a: &GlqMatrix, b: &GlqMatrix) -> i64 {
    clamp_dmax(a.d_max.saturating_add(b.low()).min(b.d_max.saturating_add(a.low())))
}

pub fn mul_glq(a: &GlqMatrix, b: &GlqMatrix, q: C64) -> Result<GlqMatrix> {
    mul_glq_to(a, b, product_dmax(a, b), q)
}

/// Product known on diagonals `<= d_max`.
///
/// `C^(d)(w) = sum A^(d1)(w) B^(d2)(w + d1)`; rows up to
/// `max(reg A, reg B + band A)` are recomputed explicitly.
pub fn mul_glq_to(a: &GlqMatrix, b: &GlqMatrix, d_max: i64, q: C64) -> Result<GlqMatrix> {
    let avail = product_dmax(a, b);
    if d_max > avail {
        return Err(Error::CutoffExceeded { requested: d_max, available: avail });
    }
    let band_a = (-a.low()).max(0) as usize;
    let reg = a.reg.max(b.reg + band_a);
    let mut out = GlqMatrix::new(reg, d_max);
    let mut diags: BTreeMap<i64, A0Laurent2> = BTreeMap::new();
    for (d1, fa) in &a.diagonals {
        for (d2, fb) in &b.diagonals {
            let d = d1 + d2;
            if d > d_max {
                continue;
            }
            let p = fa.mul(&fb.shift_w(re(*d1 as f64), q));
            let e = diags.entry(d).or_insert_with(A0Laurent2::zero);
            *e = e.add(&p);
        }
    }
    for (d, f) in diags {
        out.set_diagonal(d, f);
    }
    let (alo, ahi, blo, bhi) = (a.low(), a.high(), b.low(), b.high());
    for i in 0..=reg {
        let jlo = (i as i64 + alo + blo).max(0);
        let jhi = i as i64 + (ahi + bhi).min(d_max);
        for j in jlo..=jhi {
            let mut acc = A0Laurent::zero();
            let klo = (i as i64 + alo).max(j - bhi).max(0);
            let khi = (i as i64 + ahi).min(j - blo);
            for k in klo..=khi {
                let x = a.entry(i, k as usize, q)?;
                if x.is_zero() {
                    continue;
                }
                let y = b.entry(k as usize, j as usize, q)?;
                if !y.is_zero() {
                    acc = acc.add(&x.mul(&y));
                }
            }
            out.set_exceptional(i, j as usize, acc)?;
        }
    }
    Ok(out)
}

/// `prod_{l=1}^{k} (1 - q^{w + l - t})`, vanishing on `t = w + l`. Multiplying
/// a diagonal by it enforces the zero pattern of `gl_q` without raising the
/// polynomial degree.
pub fn vanishing_factor(k: i64, q: C64) -> A0Function2 {
    let mut p = A0Function2::constant(re(1.0));
    for l in 1..=k {
        let f = A0Function2::from_terms([((0, 0, 0, 0), re(1.0)), ((0, 1, 0, -1), -q.powi(l as i32))]);
        p = p.mul(&f);
    }
    p
}

/// Random two-variable A0 function, a sum of `nterms` tensors.
pub fn random_a02<R: Rng>(rng: &mut R, deg: u32, nterms: usize) -> A0Function2 {
    let mut f = A0Function2::zero();
    for _ in 0..nterms {
        f = f.add(&A0Function2::tensor(&random_a0(rng, deg, 1), &random_a0(rng, deg, 1)));
    }
    f
}

/// Random exact `A0Laurent2` on z-exponents `zlo..=zhi`.
pub fn random_a0l2<R: Rng>(rng: &mut R, deg: u32, nterms: usize, zlo: i64, zhi: i64) -> A0Laurent2 {
    A0Laurent2::poly((zlo..=zhi).map(|m| (m, random_a02(rng, deg, nterms))))
}

/// Random element of `L S_k` with explicit rows `0..=reg`.
pub fn random_sk<R: Rng>(rng: &mut R, k: i64, reg: usize, deg: u32, zlo: i64, zhi: i64, q: C64) -> GlqMatrix {
    let g = random_a0l2(rng, deg, 1, zlo, zhi);
    let f = if k > 0 { g.map(|_, c| c.mul(&vanishing_factor(k, q))) } else { g };
    let mut d = BTreeMap::new();
    d.insert(k, f);
    let mut a = GlqMatrix::from_interpolants(reg, d, EXACT_DMAX, q);
    for i in 0..=reg {
        let j = i as i64 + k;
        if j >= 0 {
            let e = A0Laurent::poly((zlo..=zhi).map(|m| (m, random_a0(rng, deg, 2))));
            a.set_exceptional(i, j as usize, e).expect("row within reg");
        }
    }
    a
}

/// Element `diag(f(0, z), f(1, z), ...)` of `L h^lambda` given by one interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagField {
    f: A0Laurent,
}

impl DiagField {
    pub fn new(f: A0Laurent) -> Self {
        Self { f }
    }

    pub fn zero() -> Self {
        Self { f: A0Laurent::zero() }
    }

    /// The `U` element `diag(F0(z), F0(q^-1 z), ...)`.
    pub fn from_u(f0: &LaurentSeries) -> Self {
        Self { f: f0.map(|m, c| A0Function::zeta(0, -m).scale(*c)) }
    }

    pub fn field(&self) -> &A0Laurent {
        &self.f
    }

    pub fn eval(&self, w: C64, q: C64) -> LaurentSeries {
        self.f.eval_at(w, q)
    }

    pub fn row(&self, i: usize, q: C64) -> LaurentSeries {
        self.eval(re(i as f64), q)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { f: self.f.add(&o.f) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { f: self.f.sub(&o.f) }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { f: self.f.scale(c) }
    }

    pub fn max_abs(&self) -> f64 {
        self.f.max_abs()
    }

    /// `h`: `f(w, z) -> f(w, qz)`.
    pub fn dilate(&self, c: i64, q: C64) -> Self {
        Self { f: self.f.dilate_affine(0, c, q) }
    }

    /// `s`: `f(w, z) -> f(w + 1, z)`.
    pub fn shift_s(&self, q: C64) -> Self {
        Self { f: self.f.shift(re(1.0), q) }
    }

    /// `A = 1 - h s`: `f(w, z) - f(w + 1, qz)`.
    pub fn apply_a(&self, q: C64) -> Self {
        self.sub(&self.shift_s(q).dilate(1, q))
    }

    /// `(A^-1 F)_n(z) = -sum_{i<n} F_i(q^{i-n} z)`, landing in `V^lambda`.
    pub fn apply_a_inverse(&self, q: C64, eps: f64) -> Result<Self> {
        let mut out = A0Laurent::new(self.f.lo(), self.f.hi())?;
        for (m, c) in self.f.iter() {
            let s = c.interpolate_partial_sum(m, q, eps)?.mul_qw(-m).scale(re(-1.0));
            if !s.is_zero() {
                out.add_term(m, s);
            }
        }
        Ok(Self { f: out })
    }

    /// `F0` of the `U` component: `-(1/lambda) (A^-1 F)(lambda, q^lambda z)`.
    pub fn u_component(&self, lambda: C64, q: C64, eps: f64) -> Result<LaurentSeries> {
        if lambda.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        let v = self.apply_a_inverse(q, eps)?.eval(lambda, q);
        Ok(v.dilate(lambda, q).scale(-1.0 / lambda))
    }

    /// Orthogonal projection onto `U`.
    pub fn proj_u(&self, lambda: C64, q: C64, eps: f64) -> Result<Self> {
        Ok(Self::from_u(&self.u_component(lambda, q, eps)?))
    }

    /// `<f, g> = res_z D_{fg}(lambda, z)`, `D_h(n, z) = sum_{i<n} h_i(z)`.
    pub fn inner(&self, o: &Self, lambda: C64, q: C64, eps: f64) -> Result<C64> {
        let p = self.f.mul(&o.f);
        let c0 = p.coeff(0)?;
        Ok(c0.interpolate_partial_sum(0, q, eps)?.eval(lambda, q))
    }

    /// Rows `0..m`.
    pub fn restrict(&self, m: usize, q: C64) -> DiagMatrix {
        DiagMatrix::new((0..m).map(|i| self.row(i, q)).collect())
    }

    /// Polynomial interpolant in `w` through the rows of `d`.
    pub fn lift(d: &DiagMatrix) -> Self {
        let n = d.n();
        let lo = d.entries().iter().map(|a| a.lo()).max().unwrap_or(0);
        let hi = d.entries().iter().map(|a| a.hi()).max().unwrap_or(0).max(lo);
        let mut exps = std::collections::BTreeSet::new();
        for a in d.entries() {
            exps.extend(a.iter().map(|(m, _)| m));
        }
        let mut f = A0Laurent::new(lo, hi).expect("lo <= hi");
        if lo == crate::laurent::EXACT_LO {
            f = A0Laurent::zero();
        }
        for m in exps {
            if m < lo {
                continue;
            }
            let vals: Vec<C64> = (0..n).map(|i| d.get(i).get(m)).collect();
            let p = newton_poly(&vals);
            if lo == crate::laurent::EXACT_LO {
                f = f.add(&A0Laurent::monomial(A0Function::poly(&p), m));
            } else {
                f.add_term(m, A0Function::poly(&p));
            }
        }
        Self { f }
    }

    /// Whether coefficient `m` is a multiple of `q^{-wm}`.
    pub fn is_in_u(&self, tol: f64) -> bool {
        self.f.iter().all(|(m, c)| c.terms().all(|((k, n), v)| (k == 0 && n == -m) || v.norm() < tol))
    }
}

/// Monomial coefficients of the polynomial through `(i, vals[i])`.
fn newton_poly(vals: &[C64]) -> Vec<C64> {
    let n = vals.len();
    let mut diffs = vals.to_vec();
    let mut lead = Vec::with_capacity(n);
    for k in 0..n {
        lead.push(diffs[0]);
        for i in 0..n - k - 1 {
            diffs[i] = diffs[i + 1] - diffs[i];
        }
    }
    let mut out = vec![ZERO; n.max(1)];
    // basis w (w-1) ... (w-k+1) / k!
    let mut basis = vec![re(1.0)];
    for (k, c) in lead.iter().enumerate() {
        for (e, b) in basis.iter().enumerate() {
            out[e] += c * b;
        }
        let mut next = vec![ZERO; basis.len() + 1];
        for (e, b) in basis.iter().enumerate() {
            next[e + 1] += b;
            next[e] -= b * k as f64;
        }
        basis = next.into_iter().map(|b| b / (k + 1) as f64).collect();
    }
    out
}

/// Universal diagonal r-matrix data: `lambda` and the skew multiplier `Delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniversalRMatrixSpec {
    pub lambda: C64,
    pub delta: BTreeMap<i64, C64>,
}

impl UniversalRMatrixSpec {
    pub fn new(lambda: C64, delta: BTreeMap<i64, C64>) -> Result<Self> {
        if lambda.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        validate_delta(&delta)?;
        Ok(Self { lambda, delta })
    }

    /// Fails when `|1 - q^{lambda m}| <= eps` for some `m != 0` in the window.
    pub fn check_generic(&self, mlo: i64, mhi: i64, q: C64, eps: f64) -> Result<()> {
        for m in mlo..=mhi {
            if m != 0 {
                self.cayley(m, q, eps)?;
            }
        }
        Ok(())
    }

    fn cayley(&self, m: i64, q: C64, eps: f64) -> Result<C64> {
        let h = qpow(q, self.lambda * m as f64);
        let den = re(1.0) - h;
        if den.norm() <= eps {
            return Err(Error::NonGenericParameter(format!("|1 - q^(lambda {m})| = {:e}", den.norm())));
        }
        Ok((re(1.0) + h) / den * 0.5)
    }

    /// Multiplier of `B + lambda/2` on `z^m` of `F0`.
    pub fn multiplier(&self, m: i64, q: C64, eps: f64) -> Result<C64> {
        let half = self.lambda * 0.5;
        if m == 0 {
            return Ok(half);
        }
        let d = self.delta.get(&m).copied().unwrap_or(ZERO);
        Ok(self.lambda * (self.cayley(m, q, eps)? + d) + half)
    }
}

/// `r0 = -1/2 + A^-1 + (B + lambda/2) P_U`.
pub fn r0_universal(f: &DiagField, spec: &UniversalRMatrixSpec, q: C64, eps: f64) -> Result<DiagField> {
    let f0 = f.u_component(spec.lambda, q, eps)?;
    let mut mult = BTreeMap::new();
    for (m, _) in f0.iter() {
        mult.insert(m, spec.multiplier(m, q, eps)?);
    }
    r0_with_multiplier(f, spec.lambda, |m| mult.get(&m).copied().unwrap_or(ZERO), q, eps)
}

/// `-1/2 f + A^-1 f + from_u(mult * F0)` for an arbitrary multiplier on `U`.
pub fn r0_with_multiplier(
    f: &DiagField,
    lambda: C64,
    mult: impl Fn(i64) -> C64,
    q: C64,
    eps: f64,
) -> Result<DiagField> {
    let f0 = f.u_component(lambda, q, eps)?;
    let u = DiagField::from_u(&f0.scale_by(mult));
    Ok(f.scale(re(-0.5)).add(&f.apply_a_inverse(q, eps)?).add(&u))
}

/// `(r0^{m, Delta})_{|m}` on `L h_m`, through a lift to `L h^m`.
///
/// At `lambda = m` every ingredient of `r0` reads only rows `0..m`, so any
/// lift agreeing on those rows gives the same block.
pub fn r0_restricted(d: &DiagMatrix, delta: &BTreeMap<i64, C64>, q: C64, eps: f64) -> Result<DiagMatrix> {
    let m = d.n();
    let spec = UniversalRMatrixSpec::new(re(m as f64), delta.clone())?;
    let r = r0_universal(&DiagField::lift(d), &spec, q, eps)?;
    Ok(r.restrict(m, q))
}

/// Random field with A0 coefficients on `z^zlo..=z^zhi`.
pub fn random_field<R: Rng>(rng: &mut R, deg: u32, nterms: usize, zlo: i64, zhi: i64) -> DiagField {
    DiagField::new(A0Laurent::poly((zlo..=zhi).map(|m| (m, random_a0(rng, deg, nterms)))))
}

/// Random element of `V^lambda` (row 0 vanishes).
pub fn random_v<R: Rng>(rng: &mut R, deg: u32, nterms: usize, zlo: i64, zhi: i64, q: C64) -> DiagField {
    let f = random_field(rng, deg, nterms, zlo, zhi);
    DiagField::new(f.f.map(|_, c| c.sub(&A0Function::constant(c.eval(ZERO, q)))))
}

/// Random element of `V_1^lambda` (rows 0 and `lambda` vanish).
pub fn random_v1<R: Rng>(
    rng: &mut R,
    lambda: C64,
    deg: u32,
    nterms: usize,
    zlo: i64,
    zhi: i64,
    q: C64,
) -> DiagField {
    let f = random_v(rng, deg, nterms, zlo, zhi, q);
    DiagField::new(f.f.map(|_, c| c.sub(&A0Function::zeta(1, 0).scale(c.eval(lambda, q) / lambda))))
}

/// Random element of `U`.
pub fn random_u<R: Rng>(rng: &mut R, zlo: i64, zhi: i64) -> DiagField {
    DiagField::from_u(&random_poly(rng, zlo, zhi))
}
