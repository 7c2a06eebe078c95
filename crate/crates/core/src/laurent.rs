//! Truncated formal Laurent series in `z` over complex scalars.
//!
//! A series lives in C((z^-1)): its support is bounded above and it may be
//! truncated from below. The window `[lo, hi]` records both facts. Exponents
//! above `hi` are known to vanish, exponents below `lo` are unknown. A series
//! with `lo == EXACT_LO` is a Laurent polynomial known to all orders.

use std::collections::BTreeMap;
use std::fmt::Debug;

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Lower window bound standing for "exact to all negative orders".
pub const EXACT_LO: i64 = i64::MIN / 4;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `q^w` on the fixed branch `exp(w ln q)`; integer exponents use repeated products.
pub fn qpow(q: C64, w: C64) -> C64 {
    if w.im == 0.0 && w.re.fract() == 0.0 && w.re.abs() < 1e6 {
        qpow_i(q, w.re as i64)
    } else {
        (w * q.ln()).exp()
    }
}

pub fn qpow_i(q: C64, k: i64) -> C64 {
    q.powi(k as i32)
}

fn clamp_lo(x: i64) -> i64 {
    x.max(EXACT_LO)
}

/// Coefficient ring for [`Series`].
pub trait Coeff: Clone + Debug + PartialEq {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn scale(&self, c: C64) -> Self;
    fn max_abs(&self) -> f64;
}

impl Coeff for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: C64) -> Self {
        self * c
    }
    fn max_abs(&self) -> f64 {
        self.norm()
    }
}

/// Sparse series `sum_m c_m z^m` with a window of known exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct Series<T: Coeff> {
    coeffs: BTreeMap<i64, T>,
    lo: i64,
    hi: i64,
}

pub type LaurentSeries = Series<C64>;

impl<T: Coeff> Series<T> {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::EmptyWindow { lo, hi });
        }
        Ok(Self { coeffs: BTreeMap::new(), lo: clamp_lo(lo), hi: clamp_lo(hi) })
    }

    /// The exact zero series.
    pub fn zero() -> Self {
        Self { coeffs: BTreeMap::new(), lo: EXACT_LO, hi: EXACT_LO }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i64, T)>, lo: i64, hi: i64) -> Result<Self> {
        let mut s = Self::new(lo, hi)?;
        for (m, c) in terms {
            if m < s.lo || m > s.hi {
                return Err(Error::Truncation(format!("exponent {m} outside window [{lo}, {hi}]")));
            }
            s.add_term(m, c);
        }
        Ok(s)
    }

    /// Laurent polynomial, exact to all orders.
    pub fn poly(terms: impl IntoIterator<Item = (i64, T)>) -> Self {
        let mut s = Self::zero();
        for (m, c) in terms {
            s.hi = s.hi.max(m);
            s.add_term(m, c);
        }
        s
    }

    pub fn monomial(c: T, m: i64) -> Self {
        Self::poly([(m, c)])
    }

    pub fn constant(c: T) -> Self {
        Self::poly([(0, c)])
    }

    /// Adds `c z^m`; `m` must lie in the window.
    pub fn add_term(&mut self, m: i64, c: T) {
        debug_assert!(m >= self.lo && m <= self.hi);
        let e = self.coeffs.entry(m).or_insert_with(T::zero);
        *e = e.add_ref(&c);
        if e.is_zero() {
            self.coeffs.remove(&m);
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }
    pub fn hi(&self) -> i64 {
        self.hi
    }
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }
    pub fn is_exact(&self) -> bool {
        self.lo == EXACT_LO
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> {
        self.coeffs.iter().map(|(m, c)| (*m, c))
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Stored exponent range, if any.
    pub fn support(&self) -> Option<(i64, i64)> {
        Some((*self.coeffs.keys().next()?, *self.coeffs.keys().next_back()?))
    }

    /// Coefficient at `z^m`; zero above the window, an error below it.
    pub fn coeff(&self, m: i64) -> Result<T> {
        if m < self.lo {
            return Err(Error::Truncation(format!("coefficient z^{m} below window start {}", self.lo)));
        }
        Ok(self.coeffs.get(&m).cloned().unwrap_or_else(T::zero))
    }

    /// Stored coefficient or zero, without window checks.
    pub fn get(&self, m: i64) -> T {
        self.coeffs.get(&m).cloned().unwrap_or_else(T::zero)
    }

    /// Raises the lower bound, forgetting coefficients below it.
    pub fn truncate(&self, lo: i64) -> Self {
        let lo = lo.max(self.lo);
        let coeffs = self.coeffs.range(lo..).map(|(m, c)| (*m, c.clone())).collect();
        Self { coeffs, lo, hi: self.hi.max(lo) }
    }

    /// Tightens `hi` to the largest stored exponent.
    pub fn tighten(mut self) -> Self {
        self.hi = self.coeffs.keys().next_back().copied().unwrap_or(self.lo).max(self.lo);
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.max(other.hi).max(lo);
        let mut out = Self { coeffs: BTreeMap::new(), lo, hi };
        for (m, c) in self.coeffs.range(lo..).chain(other.coeffs.range(lo..)) {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self { coeffs: BTreeMap::new(), lo: self.lo, hi: self.hi };
        for (m, v) in &self.coeffs {
            let s = v.scale(c);
            if !s.is_zero() {
                out.coeffs.insert(*m, s);
            }
        }
        out
    }

    /// Cauchy product on the window where every contributing pair is known.
    pub fn mul(&self, other: &Self) -> Self {
        let lo = clamp_lo(
            self.lo.saturating_add(other.hi).max(other.lo.saturating_add(self.hi)),
        );
        let hi = clamp_lo(self.hi.saturating_add(other.hi)).max(lo);
        let mut out = Self { coeffs: BTreeMap::new(), lo, hi };
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                let k = i + j;
                if k >= lo {
                    let p = a.mul_ref(b);
                    let e = out.coeffs.entry(k).or_insert_with(T::zero);
                    *e = e.add_ref(&p);
                }
            }
        }
        out.coeffs.retain(|_, v| !v.is_zero());
        out
    }

    /// Multiplies the coefficient of `z^m` by `f(m)`.
    pub fn scale_by(&self, f: impl Fn(i64) -> C64) -> Self {
        let mut out = Self { coeffs: BTreeMap::new(), lo: self.lo, hi: self.hi };
        for (m, v) in &self.coeffs {
            let s = v.scale(f(*m));
            if !s.is_zero() {
                out.coeffs.insert(*m, s);
            }
        }
        out
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(i64, &T) -> U) -> Series<U> {
        let mut out = Series::<U> { coeffs: BTreeMap::new(), lo: self.lo, hi: self.hi };
        for (m, v) in &self.coeffs {
            let u = f(*m, v);
            if !u.is_zero() {
                out.coeffs.insert(*m, u);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// Same data with a different window, keeping only exponents inside it.
    pub fn with_window(&self, lo: i64, hi: i64) -> Self {
        let lo = clamp_lo(lo);
        let hi = clamp_lo(hi).max(lo);
        let coeffs = self.coeffs.range(lo..=hi).map(|(m, c)| (*m, c.clone())).collect();
        Self { coeffs, lo, hi }
    }
}

impl Series<C64> {
    /// `a(q^w z)`: the coefficient of `z^m` is multiplied by `q^{wm}`.
    pub fn dilate(&self, w: C64, q: C64) -> Self {
        let lq = q.ln();
        let integer = w.im == 0.0 && w.re.fract() == 0.0;
        self.scale_by(|m| {
            if integer {
                qpow_i(q, m * w.re as i64)
            } else {
                (w * lq * m as f64).exp()
            }
        })
    }

    /// Constant term, i.e. the formal integral against dz/z.
    pub fn res(&self) -> Result<C64> {
        self.coeff(0)
    }

    /// `sum_m a_m b_{-m}`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if -other.hi < self.lo || -self.hi < other.lo {
            let needs_a = -other.hi < self.lo && self.lo <= self.hi;
            let needs_b = -self.hi < other.lo && other.lo <= other.hi;
            if needs_a || needs_b {
                return Err(Error::Truncation(format!(
                    "pairing of windows {:?} and {:?} reaches unknown coefficients",
                    self.window(),
                    other.window()
                )));
            }
        }
        let mut acc = C64::new(0.0, 0.0);
        for (m, a) in &self.coeffs {
            if let Some(b) = other.coeffs.get(&-m) {
                acc += a * b;
            }
        }
        Ok(acc)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().map(|(m, c)| c * z.powi(*m as i32)).sum()
    }

    /// Largest coefficient difference over exponents known in both series.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let lo = self.lo.max(other.lo);
        let mut d: f64 = 0.0;
        for (m, c) in self.coeffs.range(lo..) {
            d = d.max((c - other.get(*m)).norm());
        }
        for (m, c) in other.coeffs.range(lo..) {
            if !self.coeffs.contains_key(m) {
                d = d.max(c.norm());
            }
        }
        d
    }

    /// `(exponent, re, im)` records plus the window.
    pub fn to_records(&self) -> (Vec<(i64, f64, f64)>, (i64, i64)) {
        (self.coeffs.iter().map(|(m, c)| (*m, c.re, c.im)).collect(), self.window())
    }

    pub fn from_records(records: &[(i64, f64, f64)], window: (i64, i64)) -> Result<Self> {
        Self::from_terms(records.iter().map(|(m, re, im)| (*m, C64::new(*re, *im))), window.0, window.1)
    }
}

/// Addition on the combined window.
pub fn add(a: &LaurentSeries, b: &LaurentSeries) -> Result<LaurentSeries> {
    Ok(a.add(b))
}

pub fn mul(a: &LaurentSeries, b: &LaurentSeries) -> Result<LaurentSeries> {
    Ok(a.mul(b))
}

pub fn scale(a: &LaurentSeries, c: C64) -> LaurentSeries {
    a.scale(c)
}

pub fn dilate(a: &LaurentSeries, w: C64, q: C64) -> LaurentSeries {
    a.dilate(w, q)
}

pub fn res(a: &LaurentSeries) -> Result<C64> {
    a.res()
}

pub fn inner(a: &LaurentSeries, b: &LaurentSeries) -> Result<C64> {
    a.inner(b)
}

pub fn random_c64<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random Laurent polynomial with support in `[lo, hi]`.
pub fn random_poly<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> LaurentSeries {
    let mut s = LaurentSeries::zero();
    for m in lo..=hi {
        s.hi = s.hi.max(m);
        s.add_term(m, random_c64(rng));
    }
    s
}
