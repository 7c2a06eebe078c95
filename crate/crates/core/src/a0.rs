//! The algebra A0 spanned by `w^m q^{nw}`, two-variable tensors, and the
//! partial-sum interpolation operator.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::laurent::{qpow_i, random_c64, C64, Coeff, LaurentSeries, Series};

/// Terms below this magnitude are dropped after arithmetic.
pub const CLEANUP: f64 = 1e-30;
/// Largest polynomial degree accepted by the interpolation solver.
pub const MAX_POLY_DEGREE: u32 = 32;
pub const DEFAULT_EPS: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// `q^{n w}` on the principal branch of `ln q`.
fn qexp(q: C64, n: i64, w: C64) -> C64 {
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    if w.im == 0.0 && w.re.fract() == 0.0 && w.re.abs() < 1e6 {
        return qpow_i(q, n * w.re as i64);
    }
    (q.ln() * w * n as f64).exp()
}

fn powu(w: C64, m: u32) -> C64 {
    w.powu(m)
}

fn insert_add<K: Ord>(map: &mut BTreeMap<K, C64>, k: K, c: C64) {
    *map.entry(k).or_insert(ZERO) += c;
}

/// `sum f_{m,n} w^m q^{nw}`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct A0Function {
    terms: BTreeMap<(u32, i64), C64>,
}

impl A0Function {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn zeta(m: u32, n: i64) -> Self {
        Self::from_terms([((m, n), C64::new(1.0, 0.0))])
    }

    pub fn constant(c: C64) -> Self {
        Self::from_terms([((0, 0), c)])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, i64), C64)>) -> Self {
        let mut t = BTreeMap::new();
        for (k, c) in terms {
            insert_add(&mut t, k, c);
        }
        Self { terms: t }.cleaned()
    }

    /// Polynomial `sum_k p[k] w^k`.
    pub fn poly(p: &[C64]) -> Self {
        Self::from_terms(p.iter().enumerate().map(|(k, c)| ((k as u32, 0), *c)))
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, i64), C64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn coeff(&self, m: u32, n: i64) -> C64 {
        self.terms.get(&(m, n)).copied().unwrap_or(ZERO)
    }

    fn cleaned(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() >= CLEANUP);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Structural zero test with a coefficient threshold.
    pub fn is_zero_eps(&self, eps: f64) -> bool {
        self.terms.values().all(|c| c.norm() < eps)
    }

    /// Samples `deg + 2` consecutive integers from `n0` and reports whether
    /// every value is below `eps`.
    pub fn sampled_zero(&self, q: C64, n0: i64, eps: f64) -> bool {
        let count = self.deg() as i64 + 2;
        (n0..n0 + count).all(|n| self.eval(C64::new(n as f64, 0.0), q).norm() < eps)
    }

    /// `max(m + |n|)` over nonzero terms.
    pub fn deg(&self) -> u32 {
        self.terms.keys().map(|(m, n)| m + n.unsigned_abs() as u32).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, w: C64, q: C64) -> C64 {
        self.terms.iter().map(|((m, n), c)| c * powu(w, *m) * qexp(q, *n, w)).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut t = self.terms.clone();
        for (k, c) in &other.terms {
            insert_add(&mut t, *k, *c);
        }
        Self { terms: t }.cleaned()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { terms: self.terms.iter().map(|(k, c)| (*k, c * s)).collect() }.cleaned()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut t = BTreeMap::new();
        for ((m1, n1), a) in &self.terms {
            for ((m2, n2), b) in &other.terms {
                insert_add(&mut t, (m1 + m2, n1 + n2), a * b);
            }
        }
        Self { terms: t }.cleaned()
    }

    /// Multiplies by `q^{n w}`.
    pub fn mul_qw(&self, n: i64) -> Self {
        Self { terms: self.terms.iter().map(|((m, k), c)| ((*m, k + n), *c)).collect() }
    }

    /// `f(w + c)`.
    pub fn shift(&self, c: C64, q: C64) -> Self {
        let mut t = BTreeMap::new();
        for ((m, n), a) in &self.terms {
            let f = a * qexp(q, *n, c);
            for k in 0..=*m {
                insert_add(&mut t, (k, *n), f * binom(*m, k) * powu(c, m - k));
            }
        }
        Self { terms: t }.cleaned()
    }

    /// The unique A0 function `F` with `F(N) = sum_{i<N} f(i) q^{il}` for all
    /// positive integers `N`.
    pub fn interpolate_partial_sum(&self, l: i64, q: C64, eps: f64) -> Result<Self> {
        let mut t = BTreeMap::new();
        for ((m, n), a) in &self.terms {
            if *m > MAX_POLY_DEGREE {
                return Err(Error::DegreeMismatch(format!(
                    "polynomial degree {m} exceeds {MAX_POLY_DEGREE}"
                )));
            }
            let e = n + l;
            if e == 0 {
                let alpha = faulhaber(*m);
                for (k, ak) in alpha.iter().enumerate() {
                    insert_add(&mut t, (k as u32, 0), a * ak);
                }
            } else {
                let c = qpow_i(q, e);
                if (c - 1.0).norm() < eps {
                    return Err(Error::NonGenericParameter(format!(
                        "q^{e} is within {eps:e} of 1"
                    )));
                }
                let alpha = geometric_poly(*m, c);
                for (k, ak) in alpha.iter().enumerate() {
                    insert_add(&mut t, (k as u32, e), a * ak);
                }
                insert_add(&mut t, (0, 0), -a * alpha[0]);
            }
        }
        Ok(Self { terms: t }.cleaned())
    }

    /// `(m, n, re, im)` records.
    pub fn to_records(&self) -> Vec<(u32, i64, f64, f64)> {
        self.terms.iter().map(|((m, n), c)| (*m, *n, c.re, c.im)).collect()
    }

    pub fn from_records(r: &[(u32, i64, f64, f64)]) -> Self {
        Self::from_terms(r.iter().map(|(m, n, re, im)| ((*m, *n), C64::new(*re, *im))))
    }
}

/// Degree-`m` polynomial `alpha` with `c alpha(x+1) - alpha(x) = x^m`.
fn geometric_poly(m: u32, c: C64) -> Vec<C64> {
    let m = m as usize;
    let mut a = vec![ZERO; m + 1];
    for j in (0..=m).rev() {
        let mut rhs = if j == m { C64::new(1.0, 0.0) } else { ZERO };
        for k in j + 1..=m {
            rhs -= c * a[k] * binom(k as u32, j as u32);
        }
        a[j] = rhs / (c - 1.0);
    }
    a
}

/// Degree-`m+1` polynomial `alpha` with `alpha(x+1) - alpha(x) = x^m`, `alpha(0) = 0`.
fn faulhaber(m: u32) -> Vec<C64> {
    let m = m as usize;
    let mut a = vec![ZERO; m + 2];
    for j in (0..=m).rev() {
        let mut rhs = if j == m { C64::new(1.0, 0.0) } else { ZERO };
        for k in j + 2..=m + 1 {
            rhs -= a[k] * binom(k as u32, j as u32);
        }
        a[j + 1] = rhs / (j + 1) as f64;
    }
    a
}

impl Coeff for A0Function {
    fn zero() -> Self {
        Self::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_ref(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scale(&self, c: C64) -> Self {
        A0Function::scale(self, c)
    }
    fn max_abs(&self) -> f64 {
        A0Function::max_abs(self)
    }
}

/// `sum c w^{m1} q^{n1 w} t^{m2} q^{n2 t}`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct A0Function2 {
    terms: BTreeMap<(u32, i64, u32, i64), C64>,
}

impl A0Function2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, i64, u32, i64), C64)>) -> Self {
        let mut t = BTreeMap::new();
        for (k, c) in terms {
            insert_add(&mut t, k, c);
        }
        Self { terms: t }.cleaned()
    }

    pub fn constant(c: C64) -> Self {
        Self::from_terms([((0, 0, 0, 0), c)])
    }

    /// `f(w) g(t)`.
    pub fn tensor(f: &A0Function, g: &A0Function) -> Self {
        let mut t = BTreeMap::new();
        for ((m1, n1), a) in f.terms() {
            for ((m2, n2), b) in g.terms() {
                insert_add(&mut t, (m1, n1, m2, n2), a * b);
            }
        }
        Self { terms: t }.cleaned()
    }

    pub fn from_w(f: &A0Function) -> Self {
        Self::tensor(f, &A0Function::constant(C64::new(1.0, 0.0)))
    }

    pub fn from_t(g: &A0Function) -> Self {
        Self::tensor(&A0Function::constant(C64::new(1.0, 0.0)), g)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, i64, u32, i64), C64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    fn cleaned(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() >= CLEANUP);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, w: C64, t: C64, q: C64) -> C64 {
        self.terms
            .iter()
            .map(|((m1, n1, m2, n2), c)| c * powu(w, *m1) * qexp(q, *n1, w) * powu(t, *m2) * qexp(q, *n2, t))
            .sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut t = self.terms.clone();
        for (k, c) in &other.terms {
            insert_add(&mut t, *k, *c);
        }
        Self { terms: t }.cleaned()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { terms: self.terms.iter().map(|(k, c)| (*k, c * s)).collect() }.cleaned()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut t = BTreeMap::new();
        for ((a1, b1, c1, d1), x) in &self.terms {
            for ((a2, b2, c2, d2), y) in &other.terms {
                insert_add(&mut t, (a1 + a2, b1 + b2, c1 + c2, d1 + d2), x * y);
            }
        }
        Self { terms: t }.cleaned()
    }

    /// Multiplies by `q^{a w + b t}`.
    pub fn mul_q(&self, a: i64, b: i64) -> Self {
        Self {
            terms: self.terms.iter().map(|((m1, n1, m2, n2), c)| ((*m1, n1 + a, *m2, n2 + b), *c)).collect(),
        }
    }

    /// Function of `t` obtained by fixing `w`.
    pub fn partial_eval_w(&self, w: C64, q: C64) -> A0Function {
        A0Function::from_terms(
            self.terms.iter().map(|((m1, n1, m2, n2), c)| ((*m2, *n2), c * powu(w, *m1) * qexp(q, *n1, w))),
        )
    }

    /// Function of `w` obtained by fixing `t`.
    pub fn partial_eval_t(&self, t: C64, q: C64) -> A0Function {
        A0Function::from_terms(
            self.terms.iter().map(|((m1, n1, m2, n2), c)| ((*m1, *n1), c * powu(t, *m2) * qexp(q, *n2, t))),
        )
    }

    /// `f(w, w + offset)` as a function of `w`.
    pub fn diag_eval(&self, offset: C64, q: C64) -> A0Function {
        let mut t = BTreeMap::new();
        for ((m1, n1, m2, n2), c) in &self.terms {
            let f = c * qexp(q, *n2, offset);
            for k in 0..=*m2 {
                insert_add(&mut t, (m1 + k, n1 + n2), f * binom(*m2, k) * powu(offset, m2 - k));
            }
        }
        A0Function { terms: t }.cleaned()
    }

    /// `f(w + c, t)`.
    pub fn shift_w(&self, c: C64, q: C64) -> Self {
        self.map_w(|f| f.shift(c, q))
    }

    /// `f(w, t + c)`.
    pub fn shift_t(&self, c: C64, q: C64) -> Self {
        self.swap().shift_w(c, q).swap()
    }

    /// `g(w, t) = f(t, w)`.
    pub fn swap(&self) -> Self {
        Self { terms: self.terms.iter().map(|((a, b, c, d), x)| ((*c, *d, *a, *b), *x)).collect() }
    }

    /// Partial-sum interpolation in `w`, with `t` as a spectator.
    pub fn interpolate_w(&self, l: i64, q: C64, eps: f64) -> Result<Self> {
        let mut out = Self::zero();
        for ((m2, n2), f) in self.groups_by_t() {
            let g = f.interpolate_partial_sum(l, q, eps)?;
            out = out.add(&Self::tensor(&g, &A0Function::zeta(m2, n2)));
        }
        Ok(out)
    }

    /// Decomposition `sum_k f_k(w) t^{m_k} q^{n_k t}`.
    pub fn groups_by_t(&self) -> BTreeMap<(u32, i64), A0Function> {
        let mut g: BTreeMap<(u32, i64), BTreeMap<(u32, i64), C64>> = BTreeMap::new();
        for ((m1, n1, m2, n2), c) in &self.terms {
            insert_add(g.entry((*m2, *n2)).or_default(), (*m1, *n1), *c);
        }
        g.into_iter().map(|(k, t)| (k, A0Function { terms: t })).collect()
    }

    fn map_w(&self, f: impl Fn(&A0Function) -> A0Function) -> Self {
        let mut out = Self::zero();
        for ((m2, n2), g) in self.groups_by_t() {
            out = out.add(&Self::tensor(&f(&g), &A0Function::zeta(m2, n2)));
        }
        out
    }
}

impl Coeff for A0Function2 {
    fn zero() -> Self {
        Self::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_ref(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scale(&self, c: C64) -> Self {
        A0Function2::scale(self, c)
    }
    fn max_abs(&self) -> f64 {
        A0Function2::max_abs(self)
    }
}

/// Laurent series in `z` with coefficients in A0.
pub type A0Laurent = Series<A0Function>;
/// Laurent series in `z` with coefficients in A0 (x) A0.
pub type A0Laurent2 = Series<A0Function2>;

impl Series<A0Function> {
    pub fn from_laurent(a: &LaurentSeries) -> Self {
        a.map(|_, c| A0Function::constant(*c))
    }

    pub fn eval_at(&self, w: C64, q: C64) -> LaurentSeries {
        self.map(|_, f| f.eval(w, q))
    }

    /// `f(w + c, z)`.
    pub fn shift(&self, c: C64, q: C64) -> Self {
        self.map(|_, f| f.shift(c, q))
    }

    /// `f(w, q^{a w + b} z)`.
    pub fn dilate_affine(&self, a: i64, b: i64, q: C64) -> Self {
        self.map(|m, f| f.mul_qw(a * m).scale(qpow_i(q, b * m)))
    }

    /// Multiplies pointwise in `w`.
    pub fn mul_pointwise(&self, other: &Self) -> Self {
        self.mul(other)
    }
}

impl Series<A0Function2> {
    pub fn from_w(f: &A0Laurent) -> Self {
        f.map(|_, g| A0Function2::from_w(g))
    }

    pub fn from_t(f: &A0Laurent) -> Self {
        f.map(|_, g| A0Function2::from_t(g))
    }

    pub fn eval_at(&self, w: C64, t: C64, q: C64) -> LaurentSeries {
        self.map(|_, f| f.eval(w, t, q))
    }

    pub fn partial_eval_w(&self, w: C64, q: C64) -> A0Laurent {
        self.map(|_, f| f.partial_eval_w(w, q))
    }

    pub fn partial_eval_t(&self, t: C64, q: C64) -> A0Laurent {
        self.map(|_, f| f.partial_eval_t(t, q))
    }

    pub fn diag_eval(&self, offset: C64, q: C64) -> A0Laurent {
        self.map(|_, f| f.diag_eval(offset, q))
    }

    pub fn shift_w(&self, c: C64, q: C64) -> Self {
        self.map(|_, f| f.shift_w(c, q))
    }

    pub fn shift_t(&self, c: C64, q: C64) -> Self {
        self.map(|_, f| f.shift_t(c, q))
    }

    /// `f(w, t, q^{a w + b t + c} z)`.
    pub fn dilate_affine(&self, a: i64, b: i64, c: i64, q: C64) -> Self {
        self.map(|m, f| f.mul_q(a * m, b * m).scale(qpow_i(q, c * m)))
    }

    /// Per-`z^m` interpolation in `w` with weight `q^{i (l + s m)}`.
    pub fn interpolate_w(&self, l: i64, s: i64, q: C64, eps: f64) -> Result<Self> {
        let mut out = Self::new(self.lo(), self.hi())?;
        for (m, f) in self.iter() {
            let g = f.interpolate_w(l + s * m, q, eps)?;
            if !g.is_zero() {
                out.add_term(m, g);
            }
        }
        Ok(out)
    }
}

/// Random A0 function with `m + |n| <= deg`.
pub fn random_a0<R: Rng>(rng: &mut R, deg: u32, nterms: usize) -> A0Function {
    let mut t = Vec::new();
    for _ in 0..nterms {
        let m = rng.gen_range(0..=deg);
        let rest = (deg - m) as i64;
        let n = rng.gen_range(-rest..=rest);
        t.push(((m, n), random_c64(rng)));
    }
    A0Function::from_terms(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q() -> C64 {
        C64::new(0.4, 0.0)
    }
    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn eval_examples() {
        assert!((A0Function::zeta(1, 0).eval(r(7.0), q()) - r(7.0)).norm() < 1e-15);
        assert!((A0Function::zeta(0, 1).eval(r(2.0), q()) - q() * q()).norm() < 1e-15);
        let v = A0Function::zeta(2, -1).eval(r(3.0), q());
        assert!((v - r(9.0) / q().powi(3)).norm() < 1e-12);
    }

    #[test]
    fn interpolation_examples() {
        let one = A0Function::constant(r(1.0));
        let f = one.interpolate_partial_sum(0, q(), DEFAULT_EPS).unwrap();
        assert_eq!(f, A0Function::zeta(1, 0));
        let g = one.interpolate_partial_sum(1, q(), DEFAULT_EPS).unwrap();
        for n in 1..=40 {
            let w = r(n as f64);
            let brute: C64 = (0..n).map(|i| q().powi(i)).sum();
            let closed = (r(1.0) - q().powi(n)) / (r(1.0) - q());
            assert!((g.eval(w, q()) - brute).norm() < 1e-12 * brute.norm());
            assert!((closed - brute).norm() < 1e-12);
        }
        let h = A0Function::zeta(1, 0).interpolate_partial_sum(0, q(), DEFAULT_EPS).unwrap();
        for n in 1..=40i64 {
            let brute = (0..n).sum::<i64>() as f64;
            assert!((h.eval(r(n as f64), q()) - r(brute)).norm() < 1e-9);
            assert!((r((n * (n - 1) / 2) as f64) - r(brute)).norm() == 0.0);
        }
    }

    #[test]
    fn zero_tests() {
        assert!(A0Function::zero().is_zero());
        assert!(A0Function::zeta(0, 1).sub(&A0Function::zeta(0, 1)).is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_a0(&mut rng, 4, 5);
        assert!(!f.is_zero());
        assert!(!f.sampled_zero(q(), 1, 1e-12));
    }

    #[test]
    fn diag_eval_examples() {
        let t = A0Function2::from_t(&A0Function::zeta(1, 0));
        assert_eq!(t.diag_eval(r(0.0), q()), A0Function::zeta(1, 0));
        let qt = A0Function2::from_t(&A0Function::zeta(0, 1));
        let d = qt.diag_eval(r(1.0), q());
        assert!((d.coeff(0, 1) - q()).norm() < 1e-15);
        let wt = A0Function2::tensor(&A0Function::zeta(1, 0), &A0Function::zeta(1, 0));
        let e = wt.diag_eval(r(2.0), q());
        assert_eq!(e, A0Function::poly(&[r(0.0), r(2.0), r(1.0)]));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(A0Function::zeta(1, 0).mul(&A0Function::zeta(0, 1)), A0Function::zeta(1, 1));
        let s = A0Function::zeta(1, 0).add(&A0Function::zeta(0, 1));
        let sq = s.mul(&s);
        assert_eq!(sq.coeff(2, 0), r(1.0));
        assert_eq!(sq.coeff(1, 1), r(2.0));
        assert_eq!(sq.coeff(0, 2), r(1.0));
        assert!(s.mul(&A0Function::zero()).is_zero());
    }

    #[test]
    fn root_of_unity_guard() {
        let one = A0Function::constant(r(1.0));
        let qq = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert!(matches!(one.interpolate_partial_sum(3, qq, DEFAULT_EPS), Err(Error::NonGenericParameter(_))));
    }

    fn arb_a0() -> impl Strategy<Value = A0Function> {
        any::<u64>().prop_map(|s| random_a0(&mut ChaCha8Rng::seed_from_u64(s), 5, 4))
    }

    proptest! {
        #[test]
        fn interpolation_difference_identity(f in arb_a0(), l in -4i64..=4) {
            let g = f.interpolate_partial_sum(l, q(), DEFAULT_EPS).unwrap();
            for n in 1..=40 {
                let w = r(n as f64);
                let lhs = g.eval(w + 1.0, q()) - g.eval(w, q());
                let rhs = f.eval(w, q()) * q().powi((n * l) as i32);
                prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(lhs.norm()).max(1e-3));
            }
        }

        #[test]
        fn interpolation_is_linear(f in arb_a0(), g in arb_a0(), l in -4i64..=4) {
            let s = f.add(&g).interpolate_partial_sum(l, q(), DEFAULT_EPS).unwrap();
            let t = f.interpolate_partial_sum(l, q(), DEFAULT_EPS).unwrap()
                .add(&g.interpolate_partial_sum(l, q(), DEFAULT_EPS).unwrap());
            prop_assert!(s.sub(&t).max_abs() < 1e-9 * s.max_abs().max(1.0));
        }

        #[test]
        fn mul_commutative_associative(a in arb_a0(), b in arb_a0(), c in arb_a0()) {
            prop_assert!(a.mul(&b).sub(&b.mul(&a)).max_abs() < 1e-12);
            let x = a.mul(&b).mul(&c);
            let y = a.mul(&b.mul(&c));
            prop_assert!(x.sub(&y).max_abs() < 1e-12 * x.max_abs().max(1.0));
        }

        #[test]
        fn diag_eval_matches_pointwise(a in arb_a0(), b in arb_a0(), re in -3.0f64..3.0, im in -1.0f64..1.0) {
            let f = A0Function2::tensor(&a, &b).add(&A0Function2::tensor(&b, &a));
            let d = f.diag_eval(r(0.0), q());
            let w = C64::new(re, im);
            let x = d.eval(w, q());
            let y = f.eval(w, w, q());
            prop_assert!((x - y).norm() < 1e-9 * y.norm().max(1.0));
        }

        #[test]
        fn shift_matches_eval(a in arb_a0(), c in -2.0f64..2.0, w in -2.0f64..2.0) {
            let s = a.shift(r(c), q());
            let x = s.eval(r(w), q());
            let y = a.eval(r(w + c), q());
            prop_assert!((x - y).norm() < 1e-9 * y.norm().max(1.0));
        }
    }
}
