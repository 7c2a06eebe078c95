//! q-pseudodifference symbols `sum_k a_k(z) D^{beta + k}` with `D a = a(qz) D`,
//! projections, trace, lambda-th roots and spectral invariants.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::laurent::{random_poly, C64, LaurentSeries, EXACT_LO};

/// Tolerance for recognising an integer base degree.
pub const INT_TOL: f64 = 1e-9;

fn near_integer(x: C64) -> Option<i64> {
    let r = x.re.round();
    if x.im.abs() < INT_TOL && (x.re - r).abs() < INT_TOL {
        Some(r as i64)
    } else {
        None
    }
}

fn sat_add(a: i64, b: i64) -> i64 {
    a.saturating_add(b).max(EXACT_LO)
}

/// Symbol `sum_k a_k(z) D^{base + k}` known for offsets in `[klo, khi]`.
///
/// Offsets above `khi` vanish, offsets below `klo` are unknown. `klo ==
/// EXACT_LO` marks a finite symbol. Bases within `INT_TOL` of an integer are
/// folded into the offsets so that `base == 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QPsiSymbol {
    base: C64,
    coeffs: BTreeMap<i64, LaurentSeries>,
    klo: i64,
    khi: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Plus,
    Zero,
    /// `J_0` with the constants removed.
    ZeroPrime,
    Minus,
}

impl QPsiSymbol {
    pub fn new(base: C64, klo: i64, khi: i64) -> Result<Self> {
        if klo > khi {
            return Err(Error::EmptyWindow { lo: klo, hi: khi });
        }
        Ok(Self { base, coeffs: BTreeMap::new(), klo: klo.max(EXACT_LO), khi }.normalized())
    }

    pub fn zero() -> Self {
        Self { base: C64::new(0.0, 0.0), coeffs: BTreeMap::new(), klo: EXACT_LO, khi: EXACT_LO }
    }

    /// Exact `a(z) D^{base}`.
    pub fn monomial(a: LaurentSeries, base: C64) -> Self {
        let mut s = Self { base, coeffs: BTreeMap::new(), klo: EXACT_LO, khi: 0 };
        s.set(0, a);
        s.normalized()
    }

    pub fn d_pow(base: C64) -> Self {
        Self::monomial(LaurentSeries::constant(C64::new(1.0, 0.0)), base)
    }

    pub fn d_int(k: i64) -> Self {
        Self::d_pow(C64::new(k as f64, 0.0))
    }

    pub fn scalar(a: LaurentSeries) -> Self {
        Self::monomial(a, C64::new(0.0, 0.0))
    }

    pub fn from_coeffs(
        base: C64,
        coeffs: impl IntoIterator<Item = (i64, LaurentSeries)>,
        klo: i64,
        khi: i64,
    ) -> Result<Self> {
        let mut s = Self { base, coeffs: BTreeMap::new(), klo: klo.max(EXACT_LO), khi };
        if klo > khi {
            return Err(Error::EmptyWindow { lo: klo, hi: khi });
        }
        for (k, a) in coeffs {
            if k < s.klo || k > khi {
                return Err(Error::Truncation(format!("offset {k} outside [{klo}, {khi}]")));
            }
            s.set(k, a);
        }
        Ok(s.normalized())
    }

    /// `D^lambda + sum_i u_i D^{lambda - i}`; exact when `exact` is set, else
    /// known down to offset `-u.len()`.
    pub fn from_u(lambda: C64, u: &[LaurentSeries], exact: bool) -> Self {
        let klo = if exact { EXACT_LO } else { -(u.len() as i64) };
        let mut s = Self { base: lambda, coeffs: BTreeMap::new(), klo, khi: 0 };
        s.set(0, LaurentSeries::constant(C64::new(1.0, 0.0)));
        for (i, ui) in u.iter().enumerate() {
            s.set(-(i as i64) - 1, ui.clone());
        }
        s.normalized()
    }

    fn normalized(mut self) -> Self {
        if let Some(n) = near_integer(self.base) {
            if n != 0 || self.base.im != 0.0 || self.base.re != 0.0 {
                self.coeffs = self.coeffs.into_iter().map(|(k, a)| (k + n, a)).collect();
                self.klo = sat_add(self.klo, n);
                self.khi = sat_add(self.khi, n);
                self.base = C64::new(0.0, 0.0);
            }
        }
        self
    }

    pub fn set(&mut self, k: i64, a: LaurentSeries) {
        if a.is_zero() && a.is_exact() {
            self.coeffs.remove(&k);
        } else {
            self.coeffs.insert(k, a);
        }
    }

    pub fn base(&self) -> C64 {
        self.base
    }
    pub fn window(&self) -> (i64, i64) {
        (self.klo, self.khi)
    }
    pub fn is_integer(&self) -> bool {
        near_integer(self.base).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &LaurentSeries)> {
        self.coeffs.iter().map(|(k, a)| (*k, a))
    }

    /// Coefficient of `D^{base + k}`.
    pub fn coeff(&self, k: i64) -> Result<LaurentSeries> {
        if k < self.klo {
            return Err(Error::Truncation(format!("offset {k} below window start {}", self.klo)));
        }
        Ok(self.coeffs.get(&k).cloned().unwrap_or_else(LaurentSeries::zero))
    }

    /// Forgets offsets below `klo`.
    pub fn truncate(&self, klo: i64) -> Self {
        let klo = klo.max(self.klo);
        Self {
            base: self.base,
            coeffs: self.coeffs.range(klo..).map(|(k, a)| (*k, a.clone())).collect(),
            klo,
            khi: self.khi.max(klo),
        }
    }

    /// Integer shift between two bases, if any.
    fn align(&self, other: &Self) -> Result<i64> {
        near_integer(other.base - self.base)
            .ok_or_else(|| Error::DegreeMismatch(format!("bases {} and {} differ by a non-integer", self.base, other.base)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.coeffs.is_empty() && self.klo == EXACT_LO {
            return Ok(other.clone());
        }
        if other.coeffs.is_empty() && other.klo == EXACT_LO {
            return Ok(self.clone());
        }
        let d = self.align(other)?;
        let klo = self.klo.max(sat_add(other.klo, d));
        let khi = self.khi.max(sat_add(other.khi, d)).max(klo);
        let mut out = Self { base: self.base, coeffs: BTreeMap::new(), klo, khi };
        for (k, a) in self.coeffs.range(klo..) {
            out.set(*k, a.clone());
        }
        for (k, b) in &other.coeffs {
            let k = k + d;
            if k >= klo {
                let s = out.coeffs.get(&k).map(|a| a.add(b)).unwrap_or_else(|| b.clone());
                out.set(k, s);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for a in out.coeffs.values_mut() {
            *a = a.scale(c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Left multiplication of every coefficient by a function of `z`.
    pub fn lmul_z(&self, a: &LaurentSeries) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = a.mul(c);
        }
        out
    }

    pub fn mul(&self, other: &Self, q: C64) -> Self {
        let klo = sat_add(self.klo, other.khi).max(sat_add(other.klo, self.khi));
        let khi = sat_add(self.khi, other.khi).max(klo);
        let mut acc: BTreeMap<i64, LaurentSeries> = BTreeMap::new();
        for (k1, a) in &self.coeffs {
            let shift = self.base + *k1 as f64;
            for (k2, b) in &other.coeffs {
                let k = k1 + k2;
                if k < klo {
                    continue;
                }
                let t = a.mul(&b.dilate(shift, q));
                let e = acc.entry(k).or_insert_with(LaurentSeries::zero);
                *e = e.add(&t);
            }
        }
        let mut out = Self { base: self.base + other.base, coeffs: BTreeMap::new(), klo, khi };
        for (k, a) in acc {
            out.set(k, a);
        }
        out.normalized()
    }

    pub fn pow(&self, n: u32, q: C64) -> Self {
        let mut r = Self::d_int(0);
        for _ in 0..n {
            r = r.mul(self, q);
        }
        r
    }

    fn require_integer(&self) -> Result<()> {
        if self.base != C64::new(0.0, 0.0) {
            return Err(Error::DegreeMismatch(format!("base degree {} is not an integer", self.base)));
        }
        Ok(())
    }

    pub fn proj(&self, part: Part) -> Result<Self> {
        self.require_integer()?;
        let (need, klo, khi) = match part {
            Part::Plus => (1, EXACT_LO, self.khi.max(1)),
            Part::Zero | Part::ZeroPrime => (0, EXACT_LO, 0),
            Part::Minus => (-1, self.klo, -1),
        };
        if self.klo > need {
            return Err(Error::Truncation(format!("projection needs offset {need}, window starts at {}", self.klo)));
        }
        let mut out = Self { base: self.base, coeffs: BTreeMap::new(), klo, khi };
        for (k, a) in &self.coeffs {
            let keep = match part {
                Part::Plus => *k > 0,
                Part::Zero | Part::ZeroPrime => *k == 0,
                Part::Minus => *k < 0,
            };
            if keep {
                let mut a = a.clone();
                if part == Part::ZeroPrime {
                    let c0 = a.coeff(0)?;
                    a = a.sub(&LaurentSeries::constant(c0));
                }
                out.set(*k, a);
            }
        }
        Ok(out)
    }

    /// `P_+ + P_0`.
    pub fn proj_plus_zero(&self) -> Result<Self> {
        self.proj(Part::Plus)?.add(&self.proj(Part::Zero)?)
    }

    /// Constant term of the `D^0` coefficient.
    pub fn tr(&self) -> Result<C64> {
        self.require_integer()?;
        self.coeff(0)?.res()
    }

    pub fn inner(&self, other: &Self, q: C64) -> Result<C64> {
        self.mul(other, q).tr()
    }

    /// Inverse of a symbol with leading coefficient 1, known to `depth`
    /// offsets below the leading one.
    pub fn inverse(&self, depth: usize, q: C64) -> Result<Self> {
        let lead = self.coeff(self.khi)?;
        if lead.max_diff(&LaurentSeries::constant(C64::new(1.0, 0.0))) > 0.0 || !lead.is_exact() {
            return Err(Error::DegreeMismatch("inverse needs a monic symbol".into()));
        }
        let top = self.base + self.khi as f64;
        // self = U D^{top}
        let u = self.mul(&Self::d_pow(-top), q);
        let one = Self::d_int(0);
        let x = one.sub(&u)?.truncate(-(depth as i64));
        let mut inv = one.clone();
        let mut p = one;
        for _ in 0..depth {
            p = p.mul(&x, q).truncate(-(depth as i64));
            inv = inv.add(&p)?;
        }
        let inv = inv.truncate(-(depth as i64)).with_klo_at_least(-(depth as i64));
        Ok(Self::d_pow(-top).mul(&inv, q))
    }

    fn with_klo_at_least(mut self, klo: i64) -> Self {
        if self.klo < klo {
            self.klo = klo;
            self.coeffs = self.coeffs.split_off(&klo);
        }
        self
    }

    /// Largest coefficient difference over offsets known in both symbols.
    pub fn max_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.coeffs.values().map(|a| a.max_abs()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|a| a.max_abs()).fold(0.0, f64::max)
    }

    /// Offset of a coefficient relative to `D^{round(base)}`.
    pub fn round_base(&self) -> i64 {
        self.base.re.round() as i64
    }

    /// Text form `D^{b} + (..) D^{b-1} + ...`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, a) in self.coeffs.iter().rev() {
            if !s.is_empty() {
                s.push_str(" + ");
            }
            let _ = write!(s, "(");
            let mut first = true;
            for (m, c) in a.iter() {
                if !first {
                    s.push_str(" + ");
                }
                first = false;
                let _ = write!(s, "({:.17e}{:+.17e}i) z^{}", c.re, c.im, m);
            }
            let _ = write!(s, ") D^{{({:.17e}{:+.17e}i){:+}}}", self.base.re, self.base.im, k);
        }
        if s.is_empty() {
            s.push('0');
        }
        s
    }
}

/// Dressing data `L phi = phi C` with `C = D^lambda (1 + sum c_k D^{-k})`.
struct Dressing {
    phi: QPsiSymbol,
    c: Vec<C64>,
}

fn dress(l: &QPsiSymbol, lambda: C64, depth: usize, q: C64, eps: f64) -> Result<Dressing> {
    let off = near_integer(lambda - l.base)
        .ok_or_else(|| Error::DegreeMismatch("symbol base does not match lambda".into()))?;
    let u = |i: usize| -> Result<LaurentSeries> { l.coeff(off - i as i64) };
    if u(0)?.max_diff(&LaurentSeries::constant(C64::new(1.0, 0.0))) > 1e-14 {
        return Err(Error::DegreeMismatch("leading coefficient must be 1".into()));
    }
    if off - (depth as i64) < l.klo {
        return Err(Error::Truncation(format!("symbol known to {} terms, root depth {depth} requested", off - l.klo)));
    }
    let one = LaurentSeries::constant(C64::new(1.0, 0.0));
    let mut phi: Vec<LaurentSeries> = vec![one];
    let mut c = vec![C64::new(1.0, 0.0)];
    for k in 1..=depth {
        let mut rhs = u(k)?.neg();
        for i in 1..k {
            let j = k - i;
            let ui = u(i)?;
            rhs = rhs.sub(&ui.mul(&phi[j].dilate(lambda - i as f64, q)));
            rhs = rhs.add(&phi[j].scale(c[i]));
        }
        let mut pk = LaurentSeries::zero();
        let mut ck = C64::new(0.0, 0.0);
        for (m, v) in rhs.iter() {
            if m == 0 {
                ck = -*v;
            } else {
                let den = (lambda * q.ln() * m as f64).exp() - 1.0;
                if den.norm() < eps {
                    return Err(Error::NonGenericParameter(format!("|1 - q^(lambda {m})| = {:e}", den.norm())));
                }
                let mut t = LaurentSeries::monomial(*v / den, m);
                t = t.with_window(EXACT_LO, m);
                pk = pk.add(&t);
            }
        }
        phi.push(pk.tighten());
        c.push(ck);
    }
    let phi = QPsiSymbol::from_coeffs(
        C64::new(0.0, 0.0),
        phi.into_iter().enumerate().map(|(k, p)| (-(k as i64), p)),
        -(depth as i64),
        0,
    )?;
    Ok(Dressing { phi, c })
}

fn binom_c(a: C64, j: usize) -> C64 {
    let mut r = C64::new(1.0, 0.0);
    for i in 0..j {
        r = r * (a - i as f64) / (i + 1) as f64;
    }
    r
}

/// The unique `M = D + v_0 + v_1 D^{-1} + ...` with `M^lambda = L`, known to
/// `depth` offsets below the leading one.
pub fn root(l: &QPsiSymbol, lambda: C64, depth: usize, q: C64, eps: f64) -> Result<QPsiSymbol> {
    if lambda.norm() == 0.0 {
        return Err(Error::ZeroLambda);
    }
    let dr = dress(l, lambda, depth, q, eps)?;
    let kd = -(depth as i64);
    let x = QPsiSymbol::from_coeffs(
        C64::new(0.0, 0.0),
        (1..=depth).map(|k| (-(k as i64), LaurentSeries::constant(dr.c[k]))),
        kd,
        0,
    )?;
    let mut b = QPsiSymbol::d_int(0);
    let mut p = QPsiSymbol::d_int(0);
    for j in 1..=depth {
        p = p.mul(&x, q).truncate(kd);
        b = b.add(&p.scale(binom_c(C64::new(1.0, 0.0) / lambda, j)))?;
    }
    let b = b.truncate(kd);
    let phi_inv = dr.phi.inverse(depth, q)?;
    let m = dr.phi.mul(&QPsiSymbol::d_int(1), q).mul(&b, q).mul(&phi_inv, q);
    Ok(m.truncate(1 - depth as i64))
}

/// `(lambda/m) Tr M^m` for the lambda-th root `M`.
pub fn spectral_invariant(l: &QPsiSymbol, lambda: C64, m: u32, q: C64, eps: f64) -> Result<C64> {
    let mm = root(l, lambda, m as usize + 1, q, eps)?;
    Ok(lambda / m as f64 * mm.pow(m, q).tr()?)
}

/// `[P_{(+)}(M^m), L]`.
pub fn lax_rhs(l: &QPsiSymbol, lambda: C64, m: u32, q: C64, eps: f64) -> Result<QPsiSymbol> {
    let depth = m as usize + 1;
    let mm = root(l, lambda, depth, q, eps)?.pow(m, q);
    let p = mm.proj_plus_zero()?;
    p.mul(l, q).sub(&l.mul(&p, q))
}

/// Gradient `D^{-lambda} P_+(D^lambda M^m L^{-1})` of the spectral invariant,
/// with `depth` offsets below the top.
pub fn spectral_gradient(l: &QPsiSymbol, lambda: C64, m: u32, depth: usize, q: C64, eps: f64) -> Result<QPsiSymbol> {
    let d = depth + m as usize + 1;
    let mm = root(l, lambda, d, q, eps)?.pow(m, q);
    let linv = l.inverse(d, q)?;
    let g = mm.mul(&linv, q);
    let shifted = QPsiSymbol::d_pow(lambda).mul(&g, q);
    let top = shifted.proj(Part::Plus)?;
    Ok(QPsiSymbol::d_pow(-lambda).mul(&top, q))
}

/// Functionals on symbols of base `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FunctionalSpec {
    /// `Tr(z^{-j} A D^{-i-frac})` with `frac = beta - round(beta)`.
    Elementary { i: i64, j: i64 },
    /// `H_m`.
    Spectral { m: u32 },
}

impl FunctionalSpec {
    pub fn eval(&self, l: &QPsiSymbol, lambda: C64, q: C64, eps: f64) -> Result<C64> {
        match *self {
            FunctionalSpec::Elementary { i, j } => {
                let o = i - l.round_base();
                l.coeff(o)?.coeff(j)
            }
            FunctionalSpec::Spectral { m } => spectral_invariant(l, lambda, m, q, eps),
        }
    }
}

/// Random `D^lambda + sum_{i<=n} u_i D^{lambda-i}` with polynomial `u_i`
/// supported in `[-zw, zw]`.
pub fn random_symbol<R: Rng>(rng: &mut R, lambda: C64, n: usize, zw: i64, scale: f64) -> QPsiSymbol {
    let u: Vec<LaurentSeries> = (0..n).map(|_| random_poly(rng, -zw, zw).scale(C64::new(scale, 0.0))).collect();
    QPsiSymbol::from_u(lambda, &u, true)
}
