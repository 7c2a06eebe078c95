//! Quadratic brackets on q-difference operators and on loop matrices, and
//! the checks tying them together through the reduction.
//!
//! Scalar brackets have the form
//! `<<((R + a P0, b P0), (c P0, R + d P0)) (grad, grad'), (grad, grad')>>`
//! with `R = 1/2 (P+ - P-)` and `a, b, c, d` multipliers on `z^m`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::glq::r0_restricted;
use crate::laurent::{qpow, random_poly, C64, LaurentSeries};
use crate::loopfin::{
    delta_apply, matrix_bracket_block, matrix_bracket_with, r_finite, u_component, validate_delta, DiagMatrix,
    FiniteRMatrixSpec, LoopMatrix,
};
use crate::psido::{spectral_gradient, FunctionalSpec, Part, QPsiSymbol};

/// Tolerance for the skew conditions on raw multipliers.
pub const SKEW_TOL: f64 = 1e-12;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// The unique involutive bracket for integer order.
    E,
    /// Reduced bracket with a skew `Delta`, integer order.
    E161,
    /// Reduced bracket with a skew `Delta`, complex order.
    F48,
    Raw,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::E => "e",
            Preset::E161 => "e161",
            Preset::F48 => "f48",
            Preset::Raw => "raw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(Preset::E),
            "e161" => Ok(Preset::E161),
            "f48" => Ok(Preset::F48),
            "raw" => Ok(Preset::Raw),
            _ => Err(Error::Parse(format!("unknown preset {s:?}"))),
        }
    }
}

/// Rank-one operators `x -> <x, v> 1` on `J_0` shifting the bracket kernel by
/// `((h - k*, f + k*), (h + g*, f - g*))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub f: LaurentSeries,
    pub g: LaurentSeries,
    pub h: LaurentSeries,
    pub k: LaurentSeries,
}

/// The operators `a, b, c, d` on `J_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadOperatorSpec {
    preset: Preset,
    lambda: C64,
    delta: BTreeMap<i64, C64>,
    raw: BTreeMap<i64, [C64; 4]>,
    theta: Option<Theta>,
}

impl QuadOperatorSpec {
    pub fn e(n: usize) -> Self {
        Self { preset: Preset::E, lambda: re(n as f64), delta: BTreeMap::new(), raw: BTreeMap::new(), theta: None }
    }

    pub fn e161(n: usize, delta: BTreeMap<i64, C64>) -> Result<Self> {
        validate_delta(&delta)?;
        Ok(Self { preset: Preset::E161, lambda: re(n as f64), delta, raw: BTreeMap::new(), theta: None })
    }

    pub fn f48(lambda: C64, delta: BTreeMap<i64, C64>) -> Result<Self> {
        if lambda.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        validate_delta(&delta)?;
        Ok(Self { preset: Preset::F48, lambda, delta, raw: BTreeMap::new(), theta: None })
    }

    /// Multipliers `[a_m, b_m, c_m, d_m]`; missing exponents are zero.
    pub fn raw(mults: BTreeMap<i64, [C64; 4]>) -> Result<Self> {
        let get = |m: i64| mults.get(&m).copied().unwrap_or([zero(); 4]);
        for &m in mults.keys() {
            let (p, n) = (get(m), get(-m));
            if (p[0] + n[0]).norm() > SKEW_TOL {
                return Err(Error::Shape(format!("a is not skew at m = {m}")));
            }
            if (p[3] + n[3]).norm() > SKEW_TOL {
                return Err(Error::Shape(format!("d is not skew at m = {m}")));
            }
            if (p[1] - n[2]).norm() > SKEW_TOL || (p[2] - n[1]).norm() > SKEW_TOL {
                return Err(Error::Shape(format!("c is not the transpose of b at m = {m}")));
            }
        }
        Ok(Self { preset: Preset::Raw, lambda: zero(), delta: BTreeMap::new(), raw: mults, theta: None })
    }

    pub fn with_theta(mut self, theta: Theta) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn delta(&self) -> &BTreeMap<i64, C64> {
        &self.delta
    }

    /// `[a_m, b_m, c_m, d_m]`.
    pub fn mult(&self, m: i64, q: C64, eps: f64) -> Result<[C64; 4]> {
        if self.preset == Preset::Raw {
            return Ok(self.raw.get(&m).copied().unwrap_or([zero(); 4]));
        }
        if m == 0 {
            return Ok([zero(); 4]);
        }
        let h = qpow(q, self.lambda * m as f64);
        let den = re(1.0) - h;
        if den.norm() < eps {
            return Err(Error::NonGenericParameter(format!("|1 - q^(lambda {m})| = {:e}", den.norm())));
        }
        let dl = self.delta.get(&m).copied().unwrap_or(zero());
        let a = (re(1.0) + h) / den * 0.5 + dl;
        let b = -(re(1.0) / den + dl) * h;
        let c = (h / den + dl) / h;
        Ok([a, b, c, -a])
    }

    fn apply(&self, idx: usize, s: &LaurentSeries, q: C64, eps: f64) -> Result<LaurentSeries> {
        let mut table = BTreeMap::new();
        for (m, _) in s.iter() {
            table.insert(m, self.mult(m, q, eps)?[idx]);
        }
        Ok(s.scale_by(|m| table.get(&m).copied().unwrap_or(zero())))
    }
}

/// `|a_m + b_m - c_m - d_m|` for `m` in `[mlo, mhi]`.
pub fn involutivity_residual(spec: &QuadOperatorSpec, mlo: i64, mhi: i64, q: C64, eps: f64) -> Result<BTreeMap<i64, f64>> {
    let mut out = BTreeMap::new();
    for m in mlo..=mhi {
        let [a, b, c, d] = spec.mult(m, q, eps)?;
        out.insert(m, (a + b - c - d).norm());
    }
    Ok(out)
}

/// Differential `d phi` together with `grad = L d phi` and `grad' = d phi L`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPair<T> {
    pub d: T,
    pub grad: T,
    pub gradp: T,
}

pub type ScalarGradient = GradientPair<QPsiSymbol>;
pub type MatrixGradient = GradientPair<LoopMatrix>;

impl ScalarGradient {
    pub fn new(d: QPsiSymbol, l: &QPsiSymbol, q: C64) -> Self {
        let grad = l.mul(&d, q);
        let gradp = d.mul(l, q);
        Self { d, grad, gradp }
    }

    /// Recomputes both gradients against `l`.
    pub fn residual(&self, l: &QPsiSymbol, q: C64) -> Result<f64> {
        let a = l.mul(&self.d, q).max_diff(&self.grad)?;
        let b = self.d.mul(l, q).max_diff(&self.gradp)?;
        Ok(a.max(b))
    }
}

impl MatrixGradient {
    pub fn new(d: LoopMatrix, l: &LoopMatrix) -> Self {
        let grad = l.mul(&d);
        let gradp = d.mul(l);
        Self { d, grad, gradp }
    }

    pub fn residual(&self, l: &LoopMatrix) -> f64 {
        l.mul(&self.d).max_diff(&self.grad).max(self.d.mul(l).max_diff(&self.gradp))
    }
}

/// `D^{-lambda} D^k z^{-j}`, the differential of the `z^j` coefficient of `u_k`.
pub fn coordinate_differential(k: i64, j: i64, lambda: C64, q: C64) -> QPsiSymbol {
    let zj = QPsiSymbol::scalar(LaurentSeries::monomial(re(1.0), -j));
    QPsiSymbol::d_pow(-lambda).mul(&QPsiSymbol::d_int(k).mul(&zj, q), q)
}

/// Differential of a functional at `l`, in the model `D^{-lambda} J_+`.
pub fn differential(phi: &FunctionalSpec, l: &QPsiSymbol, lambda: C64, q: C64, eps: f64) -> Result<QPsiSymbol> {
    match *phi {
        FunctionalSpec::Elementary { i, j } => {
            let k = lambda.re.round() as i64 - i;
            if k <= 0 {
                Ok(QPsiSymbol::d_pow(-lambda).scale(zero()))
            } else {
                Ok(coordinate_differential(k, j, lambda, q))
            }
        }
        FunctionalSpec::Spectral { m } => spectral_gradient(l, lambda, m, m as usize + 2, q, eps),
    }
}

pub fn gradient_scalar(phi: &FunctionalSpec, l: &QPsiSymbol, lambda: C64, q: C64, eps: f64) -> Result<ScalarGradient> {
    Ok(ScalarGradient::new(differential(phi, l, lambda, q, eps)?, l, q))
}

/// `<R x, y>` with `R = 1/2 (P+ - P-)`.
fn r_pair(x: &QPsiSymbol, y: &QPsiSymbol, q: C64) -> Result<C64> {
    let p = x.proj(Part::Plus)?.inner(y, q)?;
    let m = x.proj(Part::Minus)?.inner(y, q)?;
    Ok((p - m) * 0.5)
}

fn theta_terms(t: &Theta, x1: &LaurentSeries, x2: &LaurentSeries, y1: &LaurentSeries, y2: &LaurentSeries) -> Result<C64> {
    let (x10, x20) = (x1.coeff(0)?, x2.coeff(0)?);
    let (y10, y20) = (y1.coeff(0)?, y2.coeff(0)?);
    let common = x1.inner(&t.h)? + x2.inner(&t.f)?;
    let row1 = common * y10 + (x20 - x10) * t.k.inner(y1)?;
    let row2 = common * y20 + (x10 - x20) * t.g.inner(y2)?;
    Ok(row1 - row2)
}

/// The scalar bracket of two functionals given by their gradients.
pub fn bracket_scalar(gphi: &ScalarGradient, gpsi: &ScalarGradient, spec: &QuadOperatorSpec, q: C64, eps: f64) -> Result<C64> {
    let (x1, x2) = (&gphi.grad, &gphi.gradp);
    let (y1, y2) = (&gpsi.grad, &gpsi.gradp);
    let (p1, p2) = (x1.coeff(0)?, x2.coeff(0)?);
    let (s1, s2) = (y1.coeff(0)?, y2.coeff(0)?);
    let top = spec.apply(0, &p1, q, eps)?.add(&spec.apply(1, &p2, q, eps)?);
    let bot = spec.apply(2, &p1, q, eps)?.add(&spec.apply(3, &p2, q, eps)?);
    let mut v = r_pair(x1, y1, q)? + top.inner(&s1)? - bot.inner(&s2)? - r_pair(x2, y2, q)?;
    if let Some(t) = &spec.theta {
        v += theta_terms(t, &p1, &p2, &s1, &s2)?;
    }
    Ok(v)
}

/// Scalar operator of a matrix `Lambda_n + A` with the auxiliary operators
/// `P_i` (`Psi_i = P_i psi`) and the propagators `Q_i`.
#[derive(Clone, Debug)]
pub struct LaxOperator {
    pub l: QPsiSymbol,
    pub p: Vec<QPsiSymbol>,
    pub qs: Vec<QPsiSymbol>,
}

/// Eliminates `Psi_0, ..., Psi_{n-2}` from `D Psi = L Psi`.
pub fn lax_operator(lm: &LoopMatrix, q: C64) -> Result<LaxOperator> {
    lm.check_yn()?;
    let n = lm.n();
    let a = |i: usize, j: usize| QPsiSymbol::scalar(lm.get(i, j).clone());
    let dd = QPsiSymbol::d_int(1);
    let row = |i: usize, p: &[QPsiSymbol]| -> Result<QPsiSymbol> {
        let mut acc = dd.mul(&p[i], q);
        for (j, pj) in p.iter().enumerate().skip(i) {
            acc = acc.sub(&a(i, j).mul(pj, q))?;
        }
        Ok(acc)
    };
    let mut p = vec![QPsiSymbol::zero(); n];
    p[n - 1] = QPsiSymbol::d_int(0);
    for i in (1..n).rev() {
        p[i - 1] = row(i, &p)?;
    }
    let l = row(0, &p)?;
    let mut qs = vec![QPsiSymbol::d_int(0)];
    for i in 1..n {
        let mut acc = qs[i - 1].mul(&dd.sub(&a(i - 1, i - 1))?, q);
        for k in 0..i - 1 {
            acc = acc.sub(&qs[k].mul(&a(k, i - 1), q))?;
        }
        qs.push(acc);
    }
    Ok(LaxOperator { l, p, qs })
}

/// Lower triangular differential `(d phi)_{ji} = -P0(P_j d phi Q_i)`, `i <= j`.
pub fn matrix_differential(lax: &LaxOperator, dphi: &QPsiSymbol, q: C64) -> Result<LoopMatrix> {
    let n = lax.p.len();
    let mut d = LoopMatrix::zero(n);
    for i in 0..n {
        for j in i..n {
            let s = lax.p[j].mul(dphi, q).mul(&lax.qs[i], q);
            d.set(j, i, s.coeff(0)?.neg());
        }
    }
    Ok(d)
}

pub fn matrix_gradient(lm: &LoopMatrix, lax: &LaxOperator, dphi: &QPsiSymbol, q: C64) -> Result<MatrixGradient> {
    Ok(MatrixGradient::new(matrix_differential(lax, dphi, q)?, lm))
}

/// Diagonal r-matrix on `L gl_n`.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixR {
    /// Cayley transform of `h tau_n` plus `n Delta P_U`.
    Finite(FiniteRMatrixSpec),
    /// The universal r-matrix at `lambda = n`, restricted to the top block.
    Restricted { delta: BTreeMap<i64, C64> },
}

impl MatrixR {
    pub fn apply(&self, x: &LoopMatrix, q: C64, eps: f64) -> Result<LoopMatrix> {
        match self {
            MatrixR::Finite(spec) => r_finite(x, spec, q, eps),
            MatrixR::Restricted { delta } => {
                let half = re(0.5);
                let off = x.proj_plus().sub(&x.proj_minus()).scale(half);
                Ok(off.add(&r0_restricted(&x.diag(), delta, q, eps)?.to_matrix()))
            }
        }
    }
}

/// `<Z_phi, 1/2 Zbar_psi - r Z_psi>`.
pub fn bracket_matrix(gphi: &MatrixGradient, gpsi: &MatrixGradient, r: &MatrixR, q: C64, eps: f64) -> Result<C64> {
    matrix_bracket_with((&gphi.grad, &gphi.gradp), (&gpsi.grad, &gpsi.gradp), q, |x| r.apply(x, q, eps))
}

/// The same bracket through the block kernel `((r, -h r+), (r- h^-1, -r))`.
pub fn bracket_matrix_block(gphi: &MatrixGradient, gpsi: &MatrixGradient, r: &MatrixR, q: C64, eps: f64) -> Result<C64> {
    matrix_bracket_block((&gphi.grad, &gphi.gradp), (&gpsi.grad, &gpsi.gradp), q, |x| r.apply(x, q, eps))
}

/// `diag(h^-1 P0 grad, 0, ..., 0, -P0 grad')`, the diagonal of `Z` at a companion point.
pub fn z0_companion(g: &ScalarGradient, n: usize, q: C64) -> Result<DiagMatrix> {
    let mut d = vec![LaurentSeries::zero(); n];
    d[0] = g.grad.coeff(0)?.dilate(re(-1.0), q);
    d[n - 1] = d[n - 1].sub(&g.gradp.coeff(0)?);
    Ok(DiagMatrix::new(d))
}

/// Contribution of `n Delta P_U` to the bracket, computed on the matrix side
/// and from the scalar `2 x 2` kernel `((Delta, -Delta h^n), (Delta h^-n, -Delta)) P0`.
pub fn jdelta_contribution(
    gphi: &ScalarGradient,
    gpsi: &ScalarGradient,
    n: usize,
    delta: &BTreeMap<i64, C64>,
    q: C64,
) -> Result<(C64, C64)> {
    let zf = z0_companion(gphi, n, q)?;
    let zp = z0_companion(gpsi, n, q)?;
    let du = DiagMatrix::from_u(n, &delta_apply(delta, &u_component(&zf, q)), q).scale(re(n as f64));
    let matrix = du.inner(&zp)?;
    let nf = re(n as f64);
    let (x1, x2) = (gphi.grad.coeff(0)?, gphi.gradp.coeff(0)?);
    let (y1, y2) = (gpsi.grad.coeff(0)?, gpsi.gradp.coeff(0)?);
    let dl = |s: &LaurentSeries| delta_apply(delta, s);
    let top = dl(&x1).sub(&dl(&x2.dilate(nf, q)));
    let bot = dl(&x1.dilate(-nf, q)).sub(&dl(&x2));
    let scalar = top.inner(&y1)? - bot.inner(&y2)?;
    Ok((matrix, scalar))
}

/// Largest discrepancies found by [`quotient_equivalence_check`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuotientReport {
    pub trials: usize,
    /// Finite r-matrix against the restricted universal one.
    pub finite_vs_restricted: f64,
    /// Matrix bracket against the scalar reduced bracket.
    pub matrix_vs_scalar: f64,
    /// Scalar operator recovered from the companion matrix.
    pub lax_residual: f64,
}

impl QuotientReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.finite_vs_restricted.max(self.matrix_vs_scalar)
    }
}

/// Compares the matrix bracket at companion points (finite and restricted
/// universal r-matrix) with the scalar reduced bracket on elementary functionals.
pub fn quotient_equivalence_check<R: Rng>(
    rng: &mut R,
    n: usize,
    delta: &BTreeMap<i64, C64>,
    trials: usize,
    q: C64,
    eps: f64,
) -> Result<QuotientReport> {
    let lambda = re(n as f64);
    let spec = QuadOperatorSpec::e161(n, delta.clone())?;
    let finite = MatrixR::Finite(FiniteRMatrixSpec::new(n, delta.clone())?);
    let restricted = MatrixR::Restricted { delta: delta.clone() };
    let mut rep = QuotientReport { trials, ..Default::default() };
    for _ in 0..trials {
        let u: Vec<LaurentSeries> = (0..n).map(|_| random_poly(rng, -1, 1).scale(re(0.5))).collect();
        let lm = LoopMatrix::companion(&u);
        let l = QPsiSymbol::from_u(lambda, &u, true);
        let lax = lax_operator(&lm, q)?;
        rep.lax_residual = rep.lax_residual.max(lax.l.max_diff(&l)?);
        let mut pick = || FunctionalSpec::Elementary { i: rng.gen_range(0..n as i64), j: rng.gen_range(-2..=2) };
        let (phi, psi) = (pick(), pick());
        let df = differential(&phi, &l, lambda, q, eps)?;
        let dp = differential(&psi, &l, lambda, q, eps)?;
        let (sf, sp) = (ScalarGradient::new(df.clone(), &l, q), ScalarGradient::new(dp.clone(), &l, q));
        let (mf, mp) = (matrix_gradient(&lm, &lax, &df, q)?, matrix_gradient(&lm, &lax, &dp, q)?);
        let vf = bracket_matrix(&mf, &mp, &finite, q, eps)?;
        let vr = bracket_matrix(&mf, &mp, &restricted, q, eps)?;
        let vs = bracket_scalar(&sf, &sp, &spec, q, eps)?;
        rep.finite_vs_restricted = rep.finite_vs_restricted.max((vf - vr).norm());
        rep.matrix_vs_scalar = rep.matrix_vs_scalar.max((vf - vs).norm());
    }
    Ok(rep)
}

/// Bracket of two functionals at `D^lambda + sum u_k D^{lambda-k}`.
pub fn bracket_at(
    u: &[LaurentSeries],
    lambda: C64,
    phi: &FunctionalSpec,
    psi: &FunctionalSpec,
    spec: &QuadOperatorSpec,
    q: C64,
    eps: f64,
) -> Result<C64> {
    let l = QPsiSymbol::from_u(lambda, u, true);
    let gf = gradient_scalar(phi, &l, lambda, q, eps)?;
    let gp = gradient_scalar(psi, &l, lambda, q, eps)?;
    bracket_scalar(&gf, &gp, spec, q, eps)
}

/// Differential of `f(u)` by central differences in the coefficients `u_k^j`,
/// `k = 1..=u.len()`, `|j| <= jmax`.
pub fn fd_differential(
    u: &[LaurentSeries],
    lambda: C64,
    jmax: i64,
    step: f64,
    q: C64,
    f: impl Fn(&[LaurentSeries]) -> Result<C64>,
) -> Result<QPsiSymbol> {
    let mut d = QPsiSymbol::zero();
    for k in 0..u.len() {
        for j in -jmax..=jmax {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[k] = up[k].add(&LaurentSeries::monomial(re(step), j));
            dn[k] = dn[k].add(&LaurentSeries::monomial(re(-step), j));
            let g = (f(&up)? - f(&dn)?) / (2.0 * step);
            if g.norm() > 0.0 {
                d = d.add(&coordinate_differential(k as i64 + 1, j, lambda, q).scale(g))?;
            }
        }
    }
    Ok(d)
}

/// Cyclic sum `{{f,g},h} + {{g,h},f} + {{h,f},g}` for elementary or spectral
/// functionals, with the gradients of inner brackets taken by finite differences.
#[allow(clippy::too_many_arguments)]
pub fn jacobi_residual(
    u: &[LaurentSeries],
    lambda: C64,
    fs: [FunctionalSpec; 3],
    spec: &QuadOperatorSpec,
    jmax: i64,
    step: f64,
    q: C64,
    eps: f64,
) -> Result<C64> {
    let l = QPsiSymbol::from_u(lambda, u, true);
    let mut total = zero();
    for c in 0..3 {
        let (f, g, h) = (fs[c], fs[(c + 1) % 3], fs[(c + 2) % 3]);
        let inner = |v: &[LaurentSeries]| bracket_at(v, lambda, &f, &g, spec, q, eps);
        let dfg = fd_differential(u, lambda, jmax, step, q, inner)?;
        let gfg = ScalarGradient::new(dfg, &l, q);
        let gh = gradient_scalar(&h, &l, lambda, q, eps)?;
        total += bracket_scalar(&gfg, &gh, spec, q, eps)?;
    }
    Ok(total)
}
