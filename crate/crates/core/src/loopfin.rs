//! Finite loop algebras `L gl_n`: gauge action, cross-section reduction,
//! the cyclic operator `h tau_n`, and the finite diagonal r-matrix.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::laurent::{random_poly, C64, LaurentSeries};

fn one() -> LaurentSeries {
    LaurentSeries::constant(C64::new(1.0, 0.0))
}

/// `n x n` matrix over C((z^-1)).
#[derive(Clone, Debug, PartialEq)]
pub struct LoopMatrix {
    n: usize,
    e: Vec<LaurentSeries>,
}

impl LoopMatrix {
    pub fn zero(n: usize) -> Self {
        Self { n, e: vec![LaurentSeries::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.set(i, i, one());
        }
        m
    }

    /// The shift `Lambda_n` with ones on the subdiagonal.
    pub fn lambda_n(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 1..n {
            m.set(i, i - 1, one());
        }
        m
    }

    /// Companion matrix with first row `-u_1, ..., -u_n`.
    pub fn companion(u: &[LaurentSeries]) -> Self {
        let n = u.len();
        let mut m = Self::lambda_n(n);
        for (j, uj) in u.iter().enumerate() {
            m.set(0, j, uj.neg());
        }
        m
    }

    /// Builds from rows; entry windows are aligned to the common lower bound.
    pub fn from_rows(rows: Vec<Vec<LaurentSeries>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix is not square".into()));
        }
        let e: Vec<LaurentSeries> = rows.into_iter().flatten().collect();
        let lo = e.iter().map(|a| a.lo()).max().unwrap_or(0);
        let e = e.into_iter().map(|a| a.truncate(lo)).collect();
        Ok(Self { n, e })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentSeries {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, a: LaurentSeries) {
        self.e[i * self.n + j] = a;
    }

    fn zip(&self, other: &Self, f: impl Fn(&LaurentSeries, &LaurentSeries) -> LaurentSeries) -> Self {
        Self { n: self.n, e: self.e.iter().zip(&other.e).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn map(&self, f: impl Fn(usize, usize, &LaurentSeries) -> LaurentSeries) -> Self {
        let n = self.n;
        Self { n, e: self.e.iter().enumerate().map(|(k, a)| f(k / n, k % n, a)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|_, _, a| a.scale(c))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = LaurentSeries::zero();
                for k in 0..n {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b));
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Every entry `a(z) -> a(q^w z)`.
    pub fn dilate(&self, w: f64, q: C64) -> Self {
        self.map(|_, _, a| a.dilate(C64::new(w, 0.0), q))
    }

    /// `sum_{ij} <X_ij, Y_ji>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.get(i, j).inner(other.get(j, i))?;
            }
        }
        Ok(acc)
    }

    /// Strictly upper part.
    pub fn proj_plus(&self) -> Self {
        self.map(|i, j, a| if j > i { a.clone() } else { LaurentSeries::zero() })
    }

    /// Strictly lower part.
    pub fn proj_minus(&self) -> Self {
        self.map(|i, j, a| if j < i { a.clone() } else { LaurentSeries::zero() })
    }

    pub fn diag(&self) -> DiagMatrix {
        DiagMatrix::new((0..self.n).map(|i| self.get(i, i).clone()).collect())
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.e.iter().zip(&other.e).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.e.iter().map(|a| a.max_abs()).fold(0.0, f64::max)
    }

    /// Inverse of a unipotent upper triangular matrix by the finite Neumann series.
    pub fn unipotent_inverse(&self) -> Result<Self> {
        let n = self.n;
        for i in 0..n {
            if self.get(i, i).max_diff(&one()) > 0.0 {
                return Err(Error::Shape("diagonal of a unipotent matrix must be 1".into()));
            }
            for j in 0..i {
                if !self.get(i, j).is_zero() {
                    return Err(Error::Shape("unipotent matrix must be upper triangular".into()));
                }
            }
        }
        let nil = self.sub(&Self::identity(n)).scale(C64::new(-1.0, 0.0));
        let mut inv = Self::identity(n);
        let mut p = Self::identity(n);
        for _ in 1..n {
            p = p.mul(&nil);
            inv = inv.add(&p);
        }
        Ok(inv)
    }

    /// Checks the form `Lambda_n + A` with `A` upper triangular.
    pub fn check_yn(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                let a = self.get(i, j);
                if j + 1 == i {
                    if a.max_diff(&one()) > 0.0 || !a.is_exact() {
                        return Err(Error::Shape(format!("subdiagonal entry ({i},{j}) is not 1")));
                    }
                } else if !a.is_zero() {
                    return Err(Error::Shape(format!("entry ({i},{j}) below the subdiagonal is nonzero")));
                }
            }
        }
        Ok(())
    }
}

/// `h T L T^{-1}` for unipotent upper triangular `T`.
pub fn gauge(t: &LoopMatrix, l: &LoopMatrix, q: C64) -> Result<LoopMatrix> {
    Ok(t.dilate(1.0, q).mul(l).mul(&t.unipotent_inverse()?))
}

/// Companion form of `L in Y_n` and the gauge element with `gauge(T, L) = companion`.
pub fn reduce_finite(l: &LoopMatrix, q: C64) -> Result<(LoopMatrix, LoopMatrix)> {
    l.check_yn()?;
    let n = l.n();
    let mut t = LoopMatrix::identity(n);
    // first-row entries of the companion form
    let mut e: Vec<LaurentSeries> = Vec::with_capacity(n);
    for lev in 0..n {
        let mut f: Vec<LaurentSeries> = (0..n - lev).map(|i| l.get(i, i + lev).clone()).collect();
        for j in 1..=lev {
            // companion part: only row 0, e_{lev-j+1} T_{lev-j, lev}
            let c = e[lev - j].mul(t.get(lev - j, lev));
            f[0] = f[0].sub(&c);
            for (i, fi) in f.iter_mut().enumerate() {
                if i + j < n {
                    let h = t.get(i, i + j).dilate(C64::new(1.0, 0.0), q).mul(l.get(i + j, i + lev));
                    *fi = fi.add(&h);
                }
            }
        }
        let mut el = LaurentSeries::zero();
        for (i, fi) in f.iter().enumerate() {
            el = el.add(&fi.dilate(C64::new(i as f64, 0.0), q));
        }
        for row in 0..n {
            if row + lev + 1 > n - 1 {
                break;
            }
            let mut v = el.dilate(C64::new(-(row as f64) - 1.0, 0.0), q);
            for (i, fi) in f.iter().enumerate().take(row + 1) {
                v = v.sub(&fi.dilate(C64::new(i as f64 - row as f64 - 1.0, 0.0), q));
            }
            t.set(row, row + lev + 1, v);
        }
        e.push(el);
    }
    let u: Vec<LaurentSeries> = e.iter().map(|x| x.neg()).collect();
    Ok((LoopMatrix::companion(&u), t))
}

/// First-row coefficients `u_i` of a companion matrix.
pub fn companion_u(c: &LoopMatrix) -> Vec<LaurentSeries> {
    (0..c.n()).map(|j| c.get(0, j).neg()).collect()
}

/// Random element of `Y_n` with polynomial entries supported in `[-zw, zw]`.
pub fn random_yn<R: Rng>(rng: &mut R, n: usize, zw: i64, scale: f64) -> LoopMatrix {
    let mut m = LoopMatrix::lambda_n(n);
    for i in 0..n {
        for j in i..n {
            m.set(i, j, random_poly(rng, -zw, zw).scale(C64::new(scale, 0.0)));
        }
    }
    m
}

/// Element of `L h_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagMatrix {
    d: Vec<LaurentSeries>,
}

impl DiagMatrix {
    pub fn new(d: Vec<LaurentSeries>) -> Self {
        Self { d }
    }

    pub fn zero(n: usize) -> Self {
        Self { d: vec![LaurentSeries::zero(); n] }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        Self { d: vec![LaurentSeries::constant(c); n] }
    }

    /// `diag(f0(z), f0(q^-1 z), ..., f0(q^{-(n-1)} z))`.
    pub fn from_u(n: usize, f0: &LaurentSeries, q: C64) -> Self {
        Self { d: (0..n).map(|i| f0.dilate(C64::new(-(i as f64), 0.0), q)).collect() }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn entries(&self) -> &[LaurentSeries] {
        &self.d
    }

    pub fn get(&self, i: usize) -> &LaurentSeries {
        &self.d[i]
    }

    pub fn to_matrix(&self) -> LoopMatrix {
        let n = self.n();
        let mut m = LoopMatrix::zero(n);
        for i in 0..n {
            m.set(i, i, self.d[i].clone());
        }
        m
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { d: self.d.iter().zip(&o.d).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { d: self.d.iter().zip(&o.d).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { d: self.d.iter().map(|a| a.scale(c)).collect() }
    }

    pub fn inner(&self, o: &Self) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.d.iter().zip(&o.d) {
            acc += a.inner(b)?;
        }
        Ok(acc)
    }

    /// `h tau_n`: entry `i` becomes `f_{i+1}(qz)`.
    pub fn h_tau(&self, q: C64) -> Self {
        let n = self.n();
        Self { d: (0..n).map(|i| self.d[(i + 1) % n].dilate(C64::new(1.0, 0.0), q)).collect() }
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.d.iter().zip(&o.d).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.d.iter().map(|a| a.max_abs()).fold(0.0, f64::max)
    }

    /// Union of the z-supports of the entries.
    fn z_support(&self) -> Option<(i64, i64)> {
        let mut r: Option<(i64, i64)> = None;
        for a in &self.d {
            if let Some((lo, hi)) = a.support() {
                r = Some(match r {
                    None => (lo, hi),
                    Some((l, h)) => (l.min(lo), h.max(hi)),
                });
            }
        }
        r
    }
}

/// `diag(f_1, ..., f_{n-1}, f_0)`.
pub fn tau_n(f: &DiagMatrix) -> DiagMatrix {
    let n = f.n();
    DiagMatrix::new((0..n).map(|i| f.get((i + 1) % n).clone()).collect())
}

pub fn omega(n: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI / n as f64)
}

/// One eigenvector `E_{m,alpha} = z^m e_alpha` of `h tau_n` with eigenvalue `xi`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub m: i64,
    pub alpha: usize,
    pub e: DiagMatrix,
    pub xi: C64,
}

pub fn eigenbasis(n: usize, mlo: i64, mhi: i64, q: C64) -> Vec<Eigen> {
    let w = omega(n);
    let mut out = Vec::new();
    for m in mlo..=mhi {
        for alpha in 0..n {
            let d = (0..n).map(|i| LaurentSeries::monomial(w.powi((i * alpha) as i32), m)).collect();
            out.push(Eigen { m, alpha, e: DiagMatrix::new(d), xi: q.powi(m as i32) * w.powi(alpha as i32) });
        }
    }
    out
}

/// Coefficients `c_{m,alpha} = (1/n) sum_i f_{i,m} omega^{-i alpha}`.
pub fn eigen_expand(f: &DiagMatrix) -> BTreeMap<(i64, usize), C64> {
    let n = f.n();
    let w = omega(n);
    let mut out = BTreeMap::new();
    let Some((lo, hi)) = f.z_support() else { return out };
    for m in lo..=hi {
        for alpha in 0..n {
            let mut c = C64::new(0.0, 0.0);
            for i in 0..n {
                c += f.get(i).get(m) * w.powi(-((i * alpha) as i32));
            }
            out.insert((m, alpha), c / n as f64);
        }
    }
    out
}

fn eigen_sum(n: usize, coeffs: &BTreeMap<(i64, usize), C64>) -> DiagMatrix {
    let w = omega(n);
    let mut d = vec![LaurentSeries::zero(); n];
    for ((m, alpha), c) in coeffs {
        for (i, di) in d.iter_mut().enumerate() {
            *di = di.add(&LaurentSeries::monomial(c * w.powi((i * alpha) as i32), *m));
        }
    }
    DiagMatrix::new(d)
}

/// Skew multiplier operator `Delta` on `U_n`, diagonal in `z^m`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FiniteRMatrixSpec {
    pub n: usize,
    pub delta: BTreeMap<i64, C64>,
}

/// Validates `delta_{-m} = -delta_m` and `delta_0 = 0`.
pub fn validate_delta(delta: &BTreeMap<i64, C64>) -> Result<()> {
    for (m, d) in delta {
        let other = delta.get(&-m).copied().unwrap_or(C64::new(0.0, 0.0));
        if (d + other).norm() > 1e-14 {
            return Err(Error::Shape(format!("delta is not skew at m = {m}")));
        }
    }
    Ok(())
}

pub fn delta_apply(delta: &BTreeMap<i64, C64>, f: &LaurentSeries) -> LaurentSeries {
    f.scale_by(|m| delta.get(&m).copied().unwrap_or(C64::new(0.0, 0.0)))
}

impl FiniteRMatrixSpec {
    pub fn new(n: usize, delta: BTreeMap<i64, C64>) -> Result<Self> {
        validate_delta(&delta)?;
        Ok(Self { n, delta })
    }
}

/// `f_0(z) = (1/n) sum_i F_i(q^i z)`.
pub fn u_component(f: &DiagMatrix, q: C64) -> LaurentSeries {
    let n = f.n();
    let mut acc = LaurentSeries::zero();
    for i in 0..n {
        acc = acc.add(&f.get(i).dilate(C64::new(i as f64, 0.0), q));
    }
    acc.scale(C64::new(1.0 / n as f64, 0.0))
}

/// Orthogonal projection onto `U_n`.
pub fn proj_un(f: &DiagMatrix, q: C64) -> DiagMatrix {
    DiagMatrix::from_u(f.n(), &u_component(f, q), q)
}

/// `1/2 (1 + h tau)/(1 - h tau) P_0' + n Delta P_U`.
pub fn r0_finite(f: &DiagMatrix, spec: &FiniteRMatrixSpec, q: C64, eps: f64) -> Result<DiagMatrix> {
    let n = f.n();
    let mut c = eigen_expand(f);
    let w = omega(n);
    c.remove(&(0, 0));
    for ((m, alpha), v) in c.iter_mut() {
        let xi = q.powi(*m as i32) * w.powi(*alpha as i32);
        let den = C64::new(1.0, 0.0) - xi;
        if den.norm() < eps {
            return Err(Error::NonGenericParameter(format!("|1 - xi_({m},{alpha})| = {:e}", den.norm())));
        }
        *v *= (C64::new(1.0, 0.0) + xi) / den * 0.5;
    }
    let cayley = eigen_sum(n, &c);
    let f0 = u_component(f, q);
    let du = DiagMatrix::from_u(n, &delta_apply(&spec.delta, &f0), q).scale(C64::new(n as f64, 0.0));
    Ok(cayley.add(&du))
}

/// `(n/2) (1 + h^n)/(1 - h^n) P_0'` applied entrywise; on `U_n` it has the
/// same pairing with `U_n` as `r0_finite` at `Delta = 0`.
pub fn un_block(f: &DiagMatrix, q: C64, eps: f64) -> Result<DiagMatrix> {
    let n = f.n();
    let mut mult = BTreeMap::new();
    for d in f.entries() {
        for (m, _) in d.iter() {
            if m == 0 || mult.contains_key(&m) {
                continue;
            }
            let h = q.powi((n as i64 * m) as i32);
            let den = C64::new(1.0, 0.0) - h;
            if den.norm() < eps {
                return Err(Error::NonGenericParameter(format!("|1 - q^({n} {m})| = {:e}", den.norm())));
            }
            mult.insert(m, (C64::new(1.0, 0.0) + h) / den * (0.5 * n as f64));
        }
    }
    let zero = C64::new(0.0, 0.0);
    Ok(DiagMatrix::new(
        f.entries().iter().map(|d| d.scale_by(|m| mult.get(&m).copied().unwrap_or(zero))).collect(),
    ))
}

/// `(1/n) sum_alpha xi (1 + xi)/(1 - xi)^3` over `xi = q^m omega^alpha`.
pub fn eigen_cube_sum(n: usize, m: i64, q: C64) -> C64 {
    let w = omega(n);
    let one = C64::new(1.0, 0.0);
    let mut s = C64::new(0.0, 0.0);
    for alpha in 0..n {
        let xi = q.powi(m as i32) * w.powi(alpha as i32);
        s += xi * (one + xi) / (one - xi).powi(3);
    }
    s / n as f64
}

/// Closed form of `eigen_cube_sum`: `n^2 x (1 + x)/(1 - x)^3`, `x = q^{mn}`.
pub fn eigen_cube_closed(n: usize, m: i64, q: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let x = q.powi((m * n as i64) as i32);
    x * (one + x) / (one - x).powi(3) * (n * n) as f64
}

/// `r = 1/2 (P_+ - P_-) + r0 P_0` on a loop matrix.
pub fn r_finite(x: &LoopMatrix, spec: &FiniteRMatrixSpec, q: C64, eps: f64) -> Result<LoopMatrix> {
    let half = C64::new(0.5, 0.0);
    let off = x.proj_plus().sub(&x.proj_minus()).scale(half);
    Ok(off.add(&r0_finite(&x.diag(), spec, q, eps)?.to_matrix()))
}

/// `Z = h^{-1} grad - grad'` and `Zbar = h^{-1} grad + grad'`.
pub fn z_pair(grad: &LoopMatrix, gradp: &LoopMatrix, q: C64) -> (LoopMatrix, LoopMatrix) {
    let h = grad.dilate(-1.0, q);
    (h.sub(gradp), h.add(gradp))
}

/// `<Z_phi, 1/2 Zbar_psi - r Z_psi>`.
pub fn matrix_bracket_finite(
    gphi: (&LoopMatrix, &LoopMatrix),
    gpsi: (&LoopMatrix, &LoopMatrix),
    spec: &FiniteRMatrixSpec,
    q: C64,
    eps: f64,
) -> Result<C64> {
    matrix_bracket_with(gphi, gpsi, q, |x| r_finite(x, spec, q, eps))
}

/// Same bracket with an arbitrary `r`.
pub fn matrix_bracket_with(
    gphi: (&LoopMatrix, &LoopMatrix),
    gpsi: (&LoopMatrix, &LoopMatrix),
    q: C64,
    r: impl Fn(&LoopMatrix) -> Result<LoopMatrix>,
) -> Result<C64> {
    let (zf, _) = z_pair(gphi.0, gphi.1, q);
    let (zp, zbp) = z_pair(gpsi.0, gpsi.1, q);
    let rhs = zbp.scale(C64::new(0.5, 0.0)).sub(&r(&zp)?);
    zf.inner(&rhs)
}

/// The block form `<<((r, -h r_+), (r_- h^-1, -r)) (grad, grad'), (grad, grad')>>`.
pub fn matrix_bracket_block(
    gphi: (&LoopMatrix, &LoopMatrix),
    gpsi: (&LoopMatrix, &LoopMatrix),
    q: C64,
    r: impl Fn(&LoopMatrix) -> Result<LoopMatrix>,
) -> Result<C64> {
    let half = C64::new(0.5, 0.0);
    let rp = |x: &LoopMatrix| -> Result<LoopMatrix> { Ok(r(x)?.add(&x.scale(half))) };
    let rm = |x: &LoopMatrix| -> Result<LoopMatrix> { Ok(r(x)?.sub(&x.scale(half))) };
    let top = r(gphi.0)?.sub(&rp(gphi.1)?.dilate(1.0, q));
    let bot = rm(&gphi.0.dilate(-1.0, q))?.sub(&r(gphi.1)?);
    Ok(top.inner(gpsi.0)? - bot.inner(gpsi.1)?)
}

/// Adds `alpha_hat - alpha_hat^*` with `alpha_hat(f) = <f, alpha> 1` to a diagonal r-matrix.
pub fn with_alpha(
    r0: impl Fn(&DiagMatrix) -> Result<DiagMatrix>,
    alpha: DiagMatrix,
) -> impl Fn(&DiagMatrix) -> Result<DiagMatrix> {
    move |f: &DiagMatrix| {
        let n = f.n();
        let a = DiagMatrix::constant(n, f.inner(&alpha)?);
        let ones = DiagMatrix::constant(n, C64::new(1.0, 0.0));
        let astar = alpha.scale(f.inner(&ones)?);
        Ok(r0(f)?.add(&a).sub(&astar))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-12;
    fn q() -> C64 {
        C64::new(0.4, 0.0)
    }
    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn spec(n: usize, d: f64) -> FiniteRMatrixSpec {
        let mut delta = BTreeMap::new();
        if d != 0.0 {
            delta.insert(1, r(d));
            delta.insert(-1, r(-d));
            delta.insert(2, r(0.5 * d));
            delta.insert(-2, r(-0.5 * d));
        }
        FiniteRMatrixSpec::new(n, delta).unwrap()
    }

    fn random_diag(rng: &mut ChaCha8Rng, n: usize, zw: i64) -> DiagMatrix {
        DiagMatrix::new((0..n).map(|_| random_poly(rng, -zw, zw)).collect())
    }

    #[test]
    fn gauge_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = random_yn(&mut rng, 3, 2, 1.0);
        assert!(gauge(&LoopMatrix::identity(3), &l, q()).unwrap().max_diff(&l) < 1e-15);
        let (_, t) = reduce_finite(&l, q()).unwrap();
        let there = gauge(&t, &l, q()).unwrap();
        let back = gauge(&t.unipotent_inverse().unwrap(), &there, q()).unwrap();
        assert!(back.max_diff(&l) < 1e-12 * l.max_abs().max(1.0));
        assert!(there.check_yn().is_ok());
    }

    #[test]
    fn reduction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<LaurentSeries> = (0..3).map(|_| random_poly(&mut rng, -1, 1)).collect();
        let c = LoopMatrix::companion(&u);
        let (c2, t) = reduce_finite(&c, q()).unwrap();
        assert!(c2.max_diff(&c) < 1e-14);
        assert!(t.max_diff(&LoopMatrix::identity(3)) < 1e-14);
        let (c3, t3) = reduce_finite(&LoopMatrix::lambda_n(3), q()).unwrap();
        assert_eq!(c3, LoopMatrix::lambda_n(3));
        assert_eq!(t3, LoopMatrix::identity(3));
        for _ in 0..10 {
            let l = random_yn(&mut rng, 3, 2, 1.0);
            let (comp, t) = reduce_finite(&l, q()).unwrap();
            let g = gauge(&t, &l, q()).unwrap();
            assert!(g.max_diff(&comp) < 1e-10 * comp.max_abs().max(1.0));
        }
    }

    #[test]
    fn shape_errors() {
        let mut l = LoopMatrix::lambda_n(3);
        l.set(2, 1, LaurentSeries::constant(r(2.0)));
        assert!(matches!(reduce_finite(&l, q()), Err(Error::Shape(_))));
        let mut l = LoopMatrix::lambda_n(3);
        l.set(2, 0, LaurentSeries::constant(r(1.0)));
        assert!(matches!(reduce_finite(&l, q()), Err(Error::Shape(_))));
    }

    #[test]
    fn tau_examples() {
        let a = LaurentSeries::constant(r(1.0));
        let b = LaurentSeries::constant(r(2.0));
        let c = LaurentSeries::constant(r(3.0));
        let f = DiagMatrix::new(vec![a.clone(), b.clone(), c.clone()]);
        assert_eq!(tau_n(&f), DiagMatrix::new(vec![b, c, a]));
        let k = DiagMatrix::constant(4, r(2.0));
        assert_eq!(tau_n(&k), k);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_diag(&mut rng, 4, 2);
        let mut x = g.clone();
        for _ in 0..4 {
            x = tau_n(&x);
        }
        assert_eq!(x, g);
    }

    #[test]
    fn eigenbasis_relations() {
        for n in 2..5 {
            let basis = eigenbasis(n, -2, 2, q());
            for e in &basis {
                let lhs = e.e.h_tau(q());
                assert!(lhs.max_diff(&e.e.scale(e.xi)) < 1e-14);
            }
            for a in &basis {
                for b in &basis {
                    let v = a.e.inner(&b.e).unwrap();
                    let expect = if a.m == -b.m && (a.alpha + b.alpha) % n == 0 { r(n as f64) } else { r(0.0) };
                    assert!((v - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn r0_on_eigenvector() {
        let e = &eigenbasis(3, 1, 1, q())[0];
        let out = r0_finite(&e.e, &spec(3, 0.0), q(), EPS).unwrap();
        let k = (r(1.0) + q()) / (r(1.0) - q()) * 0.5;
        assert!(out.max_diff(&e.e.scale(k)) < 1e-13);
        let one = DiagMatrix::constant(3, r(2.0));
        assert!(r0_finite(&one, &spec(3, 0.4), q(), EPS).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn proj_un_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f0 = random_poly(&mut rng, -2, 2);
        let u = DiagMatrix::from_u(3, &f0, q());
        assert!(proj_un(&u, q()).max_diff(&u) < 1e-13);
        let g = random_poly(&mut rng, -2, 2);
        let f = DiagMatrix::new(vec![g.clone(), LaurentSeries::zero(), LaurentSeries::zero()]);
        let p = proj_un(&f, q());
        for i in 0..3 {
            let want = g.scale(r(1.0 / 3.0)).dilate(r(-(i as f64)), q());
            assert!(p.get(i).max_diff(&want) < 1e-13);
        }
        let big = random_diag(&mut rng, 3, 2);
        let p1 = proj_un(&big, q());
        assert!(proj_un(&p1, q()).max_diff(&p1) < 1e-12);
    }

    #[test]
    fn orthogonal_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 2..5 {
            let f = random_diag(&mut rng, n, 2);
            let ones = DiagMatrix::constant(n, r(1.0));
            let c = f.inner(&ones).unwrap() / n as f64;
            let const_part = ones.scale(c);
            let u_part = proj_un(&f, q()).sub(&const_part);
            let v_part = f.sub(&proj_un(&f, q()));
            assert!(const_part.inner(&u_part).unwrap().norm() < 1e-11);
            assert!(const_part.inner(&v_part).unwrap().norm() < 1e-11);
            assert!(u_part.inner(&v_part).unwrap().norm() < 1e-11);
            let g = random_diag(&mut rng, n, 2);
            let im_v = {
                let mut gv = g.clone();
                gv.d[0] = LaurentSeries::zero();
                gv.sub(&gv.h_tau(q()))
            };
            assert!(proj_un(&im_v, q()).max_abs() < 1e-11);
        }
    }

    #[test]
    fn constraint_on_v_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 2..5 {
            for d in [0.0, 0.3] {
                let mut f = random_diag(&mut rng, n, 2);
                f.d[0] = LaurentSeries::zero();
                let lhs = r0_finite(&f.sub(&f.h_tau(q())), &spec(n, d), q(), EPS).unwrap();
                let rhs = f.add(&f.h_tau(q())).scale(r(0.5));
                let diff = lhs.sub(&rhs);
                // the difference must be a constant multiple of 1
                let c0 = diff.get(0).get(0);
                assert!(diff.max_diff(&DiagMatrix::constant(n, c0)) < 1e-11);
            }
        }
    }

    #[test]
    fn cube_sum_closed_form() {
        for n in 2..7 {
            for m in [-3i64, -1, 1, 2, 4] {
                let a = eigen_cube_sum(n, m, q());
                let b = eigen_cube_closed(n, m, q());
                assert!((a - b).norm() < 1e-12, "n = {n}, m = {m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn un_block_pairs_like_r0() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2usize, 3] {
            let f = DiagMatrix::from_u(n, &random_poly(&mut rng, -3, 3), q());
            let g = DiagMatrix::from_u(n, &random_poly(&mut rng, -3, 3), q());
            let lhs = r0_finite(&f, &spec(n, 0.0), q(), EPS).unwrap().inner(&g).unwrap();
            let rhs = un_block(&f, q(), EPS).unwrap().inner(&g).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "n = {n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn matrix_bracket_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 3;
        let sp = spec(n, 0.3);
        let rnd = |rng: &mut ChaCha8Rng| {
            let mut m = LoopMatrix::zero(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, random_poly(rng, -1, 1));
                }
            }
            m
        };
        // genuine gradients: grad = L dphi, grad' = dphi L
        let l = random_yn(&mut rng, n, 1, 1.0);
        let x = rnd(&mut rng);
        let y = rnd(&mut rng);
        let (a, b) = (l.mul(&x), x.mul(&l));
        let (c, d) = (l.mul(&y), y.mul(&l));
        let v = matrix_bracket_finite((&a, &b), (&a, &b), &sp, q(), EPS).unwrap();
        assert!(v.norm() < 1e-10 * a.max_abs().powi(2));
        let s1 = matrix_bracket_finite((&a, &b), (&c, &d), &sp, q(), EPS).unwrap();
        let s2 = matrix_bracket_finite((&c, &d), (&a, &b), &sp, q(), EPS).unwrap();
        assert!((s1 + s2).norm() < 1e-10 * s1.norm().max(1.0));
        let blk = matrix_bracket_block((&a, &b), (&c, &d), q(), |x| r_finite(x, &sp, q(), EPS)).unwrap();
        assert!((blk - s1).norm() < 1e-12 * s1.norm().max(1.0));
        let k = LoopMatrix::identity(n).scale(r(2.5));
        let hk = k.dilate(1.0, q());
        assert!(matrix_bracket_finite((&hk, &k), (&c, &d), &sp, q(), EPS).unwrap().norm() < 1e-12);
        let alpha = {
            let g = DiagMatrix::new((0..n).map(|_| random_poly(&mut rng, -1, 1)).collect());
            g.sub(&proj_un(&g, q()))
        };
        let r0a = with_alpha(|f: &DiagMatrix| r0_finite(f, &sp, q(), EPS), alpha);
        let ra = |x: &LoopMatrix| -> Result<LoopMatrix> {
            let half = r(0.5);
            Ok(x.proj_plus().sub(&x.proj_minus()).scale(half).add(&r0a(&x.diag())?.to_matrix()))
        };
        let s3 = matrix_bracket_with((&a, &b), (&c, &d), q(), ra).unwrap();
        assert!((s3 - s1).norm() < 1e-11 * s1.norm().max(1.0));
    }
}
