//! Universal cross-section: gauge `L = Lambda + A` (A upper triangular in
//! `L gl_q`) into companion form, diagonal by diagonal.

use std::collections::BTreeMap;

use rand::Rng;

use crate::a0::{A0Function2, A0Laurent, A0Laurent2};
use crate::error::{Error, Result};
use crate::glq::{mul_glq_to, random_sk, GlqMatrix, EXACT_DMAX};
use crate::laurent::{LaurentSeries, C64};
use crate::psido::QPsiSymbol;

/// Tolerance on the consistency zeros `T^(l+1)(w, w+k) = 0`.
pub const CONSISTENCY_TOL: f64 = 1e-9;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn one2() -> A0Laurent2 {
    A0Laurent2::constant(A0Function2::constant(re(1.0)))
}

/// Element `Lambda + A` of `Y_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct YqElement {
    l: GlqMatrix,
}

impl YqElement {
    /// Checks the shape and raises `reg` to at least 1, the smallest value
    /// compatible with the subdiagonal.
    pub fn new(l: GlqMatrix, q: C64) -> Result<Self> {
        let l = l.with_reg(l.reg().max(1), q);
        if l.diagonals().range(..-1).next().is_some() {
            return Err(Error::Shape("interpolants below the subdiagonal".into()));
        }
        let sub = l.diagonal(-1);
        if sub != one2() {
            return Err(Error::Shape("subdiagonal interpolant is not 1".into()));
        }
        let one = A0Laurent::constant(crate::a0::A0Function::constant(re(1.0)));
        for i in 0..=l.reg() {
            for ((r, c), f) in l.exceptional().range((i, 0)..(i + 1, 0)) {
                debug_assert_eq!(*r, i);
                let d = *c as i64 - i as i64;
                if d < -1 || (d == -1 && *f != one) {
                    return Err(Error::Shape(format!("explicit entry ({i},{c}) breaks the Y_q shape")));
                }
            }
            if i >= 1 && !l.exceptional().contains_key(&(i, i - 1)) {
                return Err(Error::Shape(format!("subdiagonal entry ({i},{}) is not 1", i - 1)));
            }
        }
        Ok(Self { l })
    }

    /// `Lambda + a` for upper triangular `a`.
    pub fn from_upper(a: &GlqMatrix, q: C64) -> Result<Self> {
        Self::new(GlqMatrix::lambda(q).add(a, q)?, q)
    }

    pub fn matrix(&self) -> &GlqMatrix {
        &self.l
    }

    pub fn reg(&self) -> usize {
        self.l.reg()
    }
}

/// First-row data of the companion form, `u_i(t, z)` with the row holding `-u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionForm {
    pub u: Vec<A0Laurent>,
}

impl CompanionForm {
    /// `Lambda` plus first row `-u_1, -u_2, ...`.
    pub fn matrix(&self, q: C64) -> GlqMatrix {
        let mut c = GlqMatrix::lambda(q).with_reg(1, q);
        for (j, uj) in self.u.iter().enumerate() {
            c.set_exceptional(0, j, uj.neg()).expect("row 0");
        }
        c.cut(self.u.len() as i64 - 1)
    }

    pub fn eval_at(&self, lambda: C64, q: C64) -> Vec<LaurentSeries> {
        self.u.iter().map(|f| f.eval_at(lambda, q)).collect()
    }
}

/// Reduction output: `h T L = L~ T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub companion: CompanionForm,
    pub gauge: GlqMatrix,
    /// Largest consistency-zero coefficient seen.
    pub consistency: f64,
}

/// Runs the recursion for `u_1..u_{d_max}` and `T^(1)..T^(d_max)`.
pub fn reduce_universal(l: &YqElement, d_max: usize, q: C64, eps: f64) -> Result<Reduction> {
    let lm = l.matrix();
    let dm = d_max as i64;
    if lm.d_max() < dm - 1 {
        return Err(Error::CutoffExceeded { requested: dm - 1, available: lm.d_max() });
    }
    let reg = lm.reg();
    let mut t = GlqMatrix::identity(q).with_reg(reg, q);
    let mut tparts: Vec<GlqMatrix> = vec![GlqMatrix::identity(q).with_reg(reg, q)];
    // first-row entries of the companion form
    let mut e: Vec<A0Laurent> = Vec::with_capacity(d_max);
    let mut worst: f64 = 0.0;
    for lev in 0..d_max {
        let li = lev as i64;
        let mut f = lm.diagonal_part(li).with_reg(reg, q);
        for j in 1..=lev {
            let tj = &tparts[j];
            let mut comp = GlqMatrix::new(reg, EXACT_DMAX);
            comp.set_exceptional(0, lev - j, e[lev - j].clone())?;
            let a = mul_glq_to(&comp, tj, li, q)?;
            let b = mul_glq_to(&tj.dilate_z(1, q), &lm.diagonal_part(li - j as i64), li, q)?;
            f = f.sub(&a, q)?.add(&b, q)?;
        }
        let f = f.with_reg(reg, q);
        let fint = f.diagonal(li);
        let fexc: Vec<A0Laurent> = (0..=reg).map(|i| f.entry(i, i + lev, q)).collect::<Result<_>>()?;
        // rows i <= reg: explicit minus interpolant, weighted by q^{im}
        let mut c = A0Laurent::zero();
        for (i, fe) in fexc.iter().enumerate() {
            let d = fe.sub(&fint.partial_eval_w(re(i as f64), q));
            c = c.add(&d.dilate_affine(0, i as i64, q));
        }
        let p = fint.interpolate_w(0, 1, q, eps)?;
        let el = c.add(&p.diag_eval(re(li as f64), q).shift(re(-(li as f64)), q));
        let tint = A0Laurent2::from_t(&el.sub(&c)).sub(&p.shift_w(re(1.0), q)).dilate_affine(-1, 0, -1, q);
        for k in 1..=li + 1 {
            let v = tint.diag_eval(re(k as f64), q).max_abs();
            worst = worst.max(v);
            if v > CONSISTENCY_TOL {
                return Err(Error::Consistency { level: lev + 1, k: k as usize, value: v });
            }
        }
        let mut tl = GlqMatrix::new(reg, EXACT_DMAX);
        tl.set_diagonal(li + 1, tint);
        for n in 0..=reg {
            let mut v = el.dilate_affine(0, -(n as i64) - 1, q);
            for (i, fe) in fexc.iter().enumerate().take(n + 1) {
                v = v.sub(&fe.dilate_affine(0, i as i64 - n as i64 - 1, q));
            }
            tl.set_exceptional(n, n + lev + 1, v)?;
        }
        t = t.add(&tl, q)?;
        tparts.push(tl);
        e.push(el);
    }
    let u = e.iter().map(|x| x.neg()).collect();
    Ok(Reduction { companion: CompanionForm { u }, gauge: t.cut(dm), consistency: worst })
}

/// Per-diagonal max coefficient of `h T L - L~ T` on diagonals `-1..=d_max-1`.
pub fn verify_gauge(
    t: &GlqMatrix,
    l: &YqElement,
    companion: &CompanionForm,
    d_max: usize,
    q: C64,
) -> Result<BTreeMap<i64, f64>> {
    let top = d_max as i64 - 1;
    let lhs = mul_glq_to(&t.dilate_z(1, q), l.matrix(), top, q)?;
    let rhs = mul_glq_to(&companion.matrix(q), t, top, q)?;
    Ok(lhs.sub(&rhs, q)?.diagonal_norms(-1, top))
}

/// The reduced symbol `D^lambda + sum_i u_i(lambda) D^{lambda - i}`.
pub fn reduce_at(l: &YqElement, lambda: C64, d_max: usize, q: C64, eps: f64) -> Result<QPsiSymbol> {
    let r = reduce_universal(l, d_max, q, eps)?;
    Ok(QPsiSymbol::from_u(lambda, &r.companion.eval_at(lambda, q), false))
}

/// Smallest `N` such that every explicit row `i > N` agrees with the
/// interpolants to `tol`.
pub fn effective_reg(a: &GlqMatrix, q: C64, tol: f64) -> usize {
    let mut n = 0;
    for ((i, j), f) in a.exceptional() {
        let d = *j as i64 - *i as i64;
        let g = a.diagonal(d).partial_eval_w(re(*i as f64), q);
        if f.sub(&g).max_abs() > tol {
            n = n.max(*i);
        }
    }
    for (d, g) in a.diagonals() {
        for i in 0..=a.reg() {
            let j = i as i64 + d;
            if j >= 0 && !a.exceptional().contains_key(&(i, j as usize)) {
                if g.partial_eval_w(re(i as f64), q).max_abs() > tol {
                    n = n.max(i);
                }
            }
        }
    }
    n
}

/// Random `Lambda + A` with `A` on diagonals `0..=top`, each obeying the
/// `gl_q` zero pattern, explicit rows `0..=reg`.
pub fn random_yq<R: Rng>(rng: &mut R, reg: usize, top: i64, deg: u32, zlo: i64, zhi: i64, scale: f64, q: C64) -> Result<YqElement> {
    let mut a = GlqMatrix::new(reg, EXACT_DMAX);
    for k in 0..=top {
        a = a.add(&random_sk(rng, k, reg, deg, zlo, zhi, q), q)?;
    }
    YqElement::from_upper(&a.scale(C64::new(scale, 0.0)), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a0::A0Function;
    use crate::laurent::{c64, random_poly};
    use crate::loopfin::reduce_finite;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-12;

    fn q() -> C64 {
        c64(0.4, 0.0)
    }
    fn lam() -> C64 {
        c64(2.3, -0.7)
    }

    #[test]
    fn lambda_reduces_to_itself() {
        let l = YqElement::new(GlqMatrix::lambda(q()), q()).unwrap();
        let r = reduce_universal(&l, 4, q(), EPS).unwrap();
        assert!(r.companion.u.iter().all(|u| u.max_abs() == 0.0));
        let id = GlqMatrix::identity(q()).with_reg(1, q());
        assert!(r.gauge.sub(&id, q()).unwrap().diagonal_norms(0, 4).values().all(|v| *v == 0.0));
        let s = reduce_at(&l, lam(), 4, q(), EPS).unwrap();
        assert!(s.max_diff(&QPsiSymbol::from_u(lam(), &[], false)).unwrap() == 0.0);
    }

    #[test]
    fn companion_input_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<A0Laurent> = (0..4)
            .map(|_| A0Laurent::poly((-1..=1).map(|m| (m, crate::a0::random_a0(&mut rng, 1, 2)))))
            .collect();
        let cf = CompanionForm { u: u.clone() };
        let l = YqElement::new(cf.matrix(q()).cut(EXACT_DMAX), q()).unwrap();
        let r = reduce_universal(&l, 4, q(), EPS).unwrap();
        for (a, b) in r.companion.u.iter().zip(&u) {
            assert!(a.sub(b).max_abs() < 1e-12);
        }
        let res = verify_gauge(&GlqMatrix::identity(q()).with_reg(1, q()).cut(4), &l, &cf, 4, q()).unwrap();
        assert!(res.values().all(|v| *v == 0.0), "{res:?}");
    }

    #[test]
    fn random_inputs_satisfy_gauge_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for reg in 1..=2 {
            let l = random_yq(&mut rng, reg, 4, 0, -1, 1, 0.1, q()).unwrap();
            let r = reduce_universal(&l, 5, q(), EPS).unwrap();
            let res = verify_gauge(&r.gauge, &l, &r.companion, 5, q()).unwrap();
            for (d, v) in &res {
                assert!(*v < 1e-10, "reg {reg}, diagonal {d}: {v:e}");
            }
            assert!(effective_reg(&r.gauge, q(), 1e-10) <= l.reg());
            let ws: Vec<C64> = (0..10).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let p = r.gauge.zero_pattern_residual(&ws, q());
            assert!(p < 1e-9, "reg {reg}: {p:e}");
        }
    }

    #[test]
    fn corrupted_gauge_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = random_yq(&mut rng, 1, 3, 0, -1, 1, 0.1, q()).unwrap();
        let r = reduce_universal(&l, 4, q(), EPS).unwrap();
        let mut t = r.gauge.clone();
        let bump = A0Laurent::constant(A0Function::constant(c64(1e-3, 0.0)));
        let old = t.entry(0, 2, q()).unwrap();
        t.set_exceptional(0, 2, old.add(&bump)).unwrap();
        let res = verify_gauge(&t, &l, &r.companion, 4, q()).unwrap();
        assert!(res.values().any(|v| *v >= 1e-4));
    }

    #[test]
    fn integer_lambda_matches_finite_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2usize, 3] {
            // rows 0..n-1 explicit and supported in the top-left block
            let mut a = GlqMatrix::new(n - 1, EXACT_DMAX);
            for i in 0..n {
                for j in i..n {
                    a.set_exceptional(i, j, A0Laurent::from_laurent(&random_poly(&mut rng, -1, 1))).unwrap();
                }
            }
            let l = YqElement::from_upper(&a, q()).unwrap();
            let s = reduce_at(&l, c64(n as f64, 0.0), n, q(), EPS).unwrap();
            let block = l.matrix().restrict(n, q()).unwrap();
            let (c, _) = reduce_finite(&block, q()).unwrap();
            let uf = crate::loopfin::companion_u(&c);
            for (i, ui) in uf.iter().enumerate() {
                let got = s.coeff(-(i as i64) - 1 + n as i64).unwrap();
                assert!(got.max_diff(ui) < 1e-10, "n = {n}, i = {i}");
            }
        }
    }

    #[test]
    fn gauge_equivalent_inputs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = random_yq(&mut rng, 1, 3, 0, -1, 1, 0.1, q()).unwrap();
        let r = reduce_universal(&l, 4, q(), EPS).unwrap();
        // the companion is itself gauge equivalent to l
        let c = YqElement::new(r.companion.matrix(q()), q()).unwrap();
        let a = reduce_at(&l, lam(), 4, q(), EPS).unwrap();
        let b = reduce_at(&c, lam(), 4, q(), EPS).unwrap();
        assert!(a.max_diff(&b).unwrap() < 1e-10);
    }

    #[test]
    fn shape_errors() {
        let mut a = GlqMatrix::lambda(q());
        a.set_diagonal(-1, A0Laurent2::constant(A0Function2::constant(c64(2.0, 0.0))));
        assert!(matches!(YqElement::new(a, q()), Err(Error::Shape(_))));
        let mut b = GlqMatrix::lambda(q());
        b.set_diagonal(-2, one2());
        assert!(matches!(YqElement::new(b, q()), Err(Error::Shape(_))));
    }
}
