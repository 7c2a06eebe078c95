//! Verification suites behind `qdsred verify`. Sample counts and tolerance
//! names mirror the acceptance criteria.

use std::collections::BTreeMap;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::report::Check;
use crate::a0::random_a0;
use crate::error::Result;
use crate::glq::{
    mul_glq, r0_restricted, r0_universal, r0_with_multiplier, random_field, random_sk, random_u, random_v,
    random_v1, UniversalRMatrixSpec,
};
use crate::laurent::{qpow_i, random_poly, LaurentSeries, C64};
use crate::loopfin::{
    eigen_cube_closed, eigen_cube_sum, gauge, r0_finite, random_yn, reduce_finite, un_block, DiagMatrix,
    FiniteRMatrixSpec, LoopMatrix,
};
use crate::poisson::{bracket_at, involutivity_residual, jacobi_residual, quotient_equivalence_check, QuadOperatorSpec};
use crate::psido::FunctionalSpec;
use crate::reduction::{effective_reg, random_yq, reduce_universal, verify_gauge};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Suite {
    Trace,
    Interpolation,
    Ll13,
    Tt13,
    P31,
    P32,
    Reduction,
    Involutivity,
    QuotientEquivalence,
    Jacobi,
    All,
}

impl Suite {
    pub fn name(&self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => Suite::value_variants().iter().copied().filter(|s| *s != Suite::All).collect(),
            s => vec![s],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteOptions {
    /// Replaces the default `delta = 0.3` of the involutivity suite.
    pub inject_delta: Option<f64>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Skew multiplier with `delta_{+-1} = +-d`, `delta_{+-2} = +-d/2`.
pub fn sample_delta(d: f64) -> BTreeMap<i64, C64> {
    if d == 0.0 {
        return BTreeMap::new();
    }
    BTreeMap::from([(1, c(d, 0.0)), (-1, c(-d, 0.0)), (2, c(0.5 * d, 0.0)), (-2, c(-0.5 * d, 0.0))])
}

pub fn run_suite(suite: Suite, cfg: &RunConfig, opts: &SuiteOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for s in suite.members() {
        // one stream per suite so that `all` reproduces the single runs
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let checks = match s {
            Suite::Trace => trace(cfg, &mut rng)?,
            Suite::Interpolation => interpolation(cfg, &mut rng)?,
            Suite::Ll13 => ll13(cfg),
            Suite::Tt13 => tt13(cfg, &mut rng)?,
            Suite::P31 => shift_calculus(cfg, &mut rng)?,
            Suite::P32 => skew_classification(cfg, &mut rng)?,
            Suite::Reduction => reduction(cfg, &mut rng)?,
            Suite::Involutivity => involutivity(cfg, opts, &mut rng)?,
            Suite::QuotientEquivalence => quotient(cfg, &mut rng)?,
            Suite::Jacobi => jacobi(cfg, &mut rng)?,
            Suite::All => unreachable!(),
        };
        out.extend(checks);
    }
    Ok(out)
}

fn trace(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let (zlo, zhi) = cfg.z_window;
    let ts = [cfg.lambda, c(1.5, 0.3), c(4.0, 0.0), c(0.7, -0.2), c(-0.5, 1.2)];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(0..=4);
        let (ra, rb) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let a = random_sk(rng, k, ra, 1, zlo, zhi, q);
        let b = random_sk(rng, -k, rb, 1, zlo, zhi, q);
        let ab = mul_glq(&a, &b, q)?.tr_glq(q, eps)?;
        let ba = mul_glq(&b, &a, q)?.tr_glq(q, eps)?;
        for t in ts {
            worst = worst.max(ab.eval_at(t, q).max_diff(&ba.eval_at(t, q)));
        }
    }
    Ok(vec![Check::below("trace.commutator", worst, cfg.tol("trace"))])
}

fn interpolation(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let deg = rng.gen_range(0..=6);
        let f = random_a0(rng, deg, 3);
        let l = rng.gen_range(-4..=4);
        let big = f.interpolate_partial_sum(l, q, eps)?;
        let scale: f64 = f.terms().map(|(_, v)| v.norm()).sum();
        let (mut acc, mut abs) = (c(0.0, 0.0), 0.0);
        for n in 1..=40i64 {
            let i = n - 1;
            let term = f.eval(c(i as f64, 0.0), q) * qpow_i(q, l * i);
            acc += term;
            abs += term.norm();
            let den = if abs > 0.0 { abs } else { scale };
            worst = worst.max((big.eval(c(n as f64, 0.0), q) - acc).norm() / den);
        }
    }
    Ok(vec![Check::below("interpolation.relative", worst, cfg.tol("interpolation"))])
}

fn ll13(cfg: &RunConfig) -> Vec<Check> {
    let mut worst: f64 = 0.0;
    for n in 2..=6 {
        for m in (-4..=4).filter(|m| *m != 0) {
            worst = worst.max((eigen_cube_sum(n, m, cfg.q) - eigen_cube_closed(n, m, cfg.q)).norm());
        }
    }
    vec![Check::below("ll13.closed_form", worst, cfg.tol("ll13"))]
}

fn tt13(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let mut out = Vec::new();
    for n in [2usize, 3] {
        let spec = FiniteRMatrixSpec::new(n, BTreeMap::new())?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let f = DiagMatrix::from_u(n, &random_poly(rng, -5, 5), q);
            let g = DiagMatrix::from_u(n, &random_poly(rng, -5, 5), q);
            let lhs = r0_finite(&f, &spec, q, eps)?.inner(&g)?;
            let rhs = un_block(&f, q, eps)?.inner(&g)?;
            worst = worst.max((lhs - rhs).norm());
        }
        out.push(Check::below(format!("tt13.n{n}"), worst, cfg.tol("tt13")));
    }
    Ok(out)
}

fn shift_calculus(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps, lam) = (cfg.q, cfg.epsilon_generic, cfg.lambda);
    let (zlo, zhi) = cfg.z_window;
    let tol = cfg.tol("shift");
    let (mut inv, mut orth, mut idem, mut proj, mut lemma) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..50 {
        let f = random_field(rng, 2, 2, zlo, zhi);
        let v = random_v(rng, 2, 2, zlo, zhi, q);
        inv = inv.max(f.apply_a_inverse(q, eps)?.apply_a(q).sub(&f).max_abs());
        inv = inv.max(v.apply_a(q).apply_a_inverse(q, eps)?.sub(&v).max_abs());

        let v1 = random_v1(rng, lam, 2, 2, zlo, zhi, q);
        let u = random_u(rng, zlo, zhi);
        orth = orth.max(v1.apply_a(q).inner(&u, lam, q, eps)?.norm());

        let p = f.proj_u(lam, q, eps)?;
        idem = idem.max(p.proj_u(lam, q, eps)?.sub(&p).max_abs());
        proj = proj.max(f.sub(&p).inner(&u, lam, q, eps)?.norm());

        let g = random_v(rng, 2, 2, zlo, zhi, q);
        let lhs = v.inner(&g, lam, q, eps)? - v.shift_s(q).inner(&g.shift_s(q), lam, q, eps)?;
        let rhs = -v.eval(lam, q).inner(&g.eval(lam, q))?;
        lemma = lemma.max((lhs - rhs).norm());
    }
    Ok(vec![
        Check::below("p31.a_inverse", inv, tol),
        Check::below("p31.orthogonality", orth, tol),
        Check::below("p31.projection_idempotent", idem, tol),
        Check::below("p31.projection_orthogonal", proj, tol),
        Check::below("p31.shift_lemma", lemma, tol),
    ])
}

fn skew_classification(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps, lam) = (cfg.q, cfg.epsilon_generic, cfg.lambda);
    let (zlo, zhi) = cfg.z_window;
    let spec = UniversalRMatrixSpec::new(lam, sample_delta(0.3))?;
    let mut table = BTreeMap::new();
    for m in zlo.min(-1)..=zhi.max(1) {
        table.insert(m, spec.multiplier(m, q, eps)?);
    }
    // non-skew: only z^1 is perturbed
    let bent = |m: i64| table.get(&m).copied().unwrap_or(c(0.0, 0.0)) + if m == 1 { c(0.1, 0.0) } else { c(0.0, 0.0) };
    let (mut skew, mut pert, mut cons) = (0f64, f64::INFINITY, 0f64);
    for _ in 0..50 {
        let f = random_field(rng, 1, 2, zlo, zhi).add(&random_u(rng, zlo, zhi));
        let g = random_field(rng, 1, 2, zlo, zhi).add(&random_u(rng, zlo, zhi));
        let rf = r0_universal(&f, &spec, q, eps)?;
        let rg = r0_universal(&g, &spec, q, eps)?;
        skew = skew.max((rf.inner(&g, lam, q, eps)? + f.inner(&rg, lam, q, eps)?).norm());

        let pf = r0_with_multiplier(&f, lam, bent, q, eps)?;
        let pg = r0_with_multiplier(&g, lam, bent, q, eps)?;
        pert = pert.min((pf.inner(&g, lam, q, eps)? + f.inner(&pg, lam, q, eps)?).norm());

        let v = random_v1(rng, lam, 2, 2, zlo, zhi, q);
        let lhs = r0_universal(&v.apply_a(q), &spec, q, eps)?;
        let rhs = v.add(&v.shift_s(q).dilate(1, q)).scale(c(0.5, 0.0));
        cons = cons.max(lhs.sub(&rhs).max_abs());
    }
    Ok(vec![
        Check::below("p32.skew", skew, cfg.tol("skew")),
        Check::above("p32.perturbation_detected", pert, cfg.tol("perturbation")),
        Check::below("p32.constraint", cons, cfg.tol("constraint")),
    ])
}

fn reduction(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let (zlo, zhi) = cfg.z_window;
    let (mut fg, mut fid) = (0f64, 0f64);
    for _ in 0..30 {
        let l = random_yn(rng, 3, 1, 1.0);
        let (comp, t) = reduce_finite(&l, q)?;
        fg = fg.max(gauge(&t, &l, q)?.max_diff(&comp));
        let (_, t2) = reduce_finite(&comp, q)?;
        fid = fid.max(t2.max_diff(&LoopMatrix::identity(3)));
    }
    let d = cfg.d_max;
    let (mut ug, mut cons, mut zeros, mut excess) = (0f64, 0f64, 0f64, 0usize);
    for k in 0..20 {
        let reg = 1 + k % 2;
        let l = random_yq(rng, reg, d as i64 - 1, 0, zlo, zhi, 0.1, q)?;
        let r = reduce_universal(&l, d, q, eps)?;
        for v in verify_gauge(&r.gauge, &l, &r.companion, d, q)?.values() {
            ug = ug.max(*v);
        }
        cons = cons.max(r.consistency);
        let ws: Vec<C64> = (0..10).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        zeros = zeros.max(r.gauge.zero_pattern_residual(&ws, q));
        excess = excess.max(effective_reg(&r.gauge, q, cfg.tol("universal_gauge")).saturating_sub(l.reg()));
    }
    Ok(vec![
        Check::below("reduction.finite_gauge", fg, cfg.tol("finite_gauge")),
        Check::below("reduction.finite_identity", fid, cfg.tol("finite_identity")),
        Check::below("reduction.universal_gauge", ug, cfg.tol("universal_gauge")),
        Check::below("reduction.consistency", cons, cfg.tol("consistency")),
        Check::below("reduction.gauge_zero_pattern", zeros, cfg.tol("consistency")),
        Check::below("reduction.regularity_excess", excess as f64, 1.0),
    ])
}

fn random_u_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<LaurentSeries> {
    (0..n).map(|_| random_poly(rng, -1, 1).scale(c(0.5, 0.0))).collect()
}

fn involutivity(cfg: &RunConfig, opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let mut out = Vec::new();
    for (n, m2) in [(2usize, 2u32), (3, 3)] {
        let spec = QuadOperatorSpec::e(n);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let u = random_u_vec(rng, n);
            let h1 = FunctionalSpec::Spectral { m: 1 };
            let hm = FunctionalSpec::Spectral { m: m2 };
            worst = worst.max(bracket_at(&u, c(n as f64, 0.0), &h1, &hm, &spec, q, eps)?.norm());
        }
        out.push(Check::below(format!("involutivity.h1_h{m2}"), worst, cfg.tol("involutivity")));
    }
    let d = opts.inject_delta.unwrap_or(0.3);
    let delta = sample_delta(d);
    let (mut zero, mut factor, mut detect) = (0f64, 0f64, f64::INFINITY);
    for n in [2usize, 3] {
        for v in involutivity_residual(&QuadOperatorSpec::e161(n, BTreeMap::new())?, -4, 4, q, eps)?.values() {
            zero = zero.max(*v);
        }
        let r = involutivity_residual(&QuadOperatorSpec::e161(n, delta.clone())?, -4, 4, q, eps)?;
        for (m, v) in &r {
            let h = qpow_i(q, n as i64 * m);
            let dm = delta.get(m).copied().unwrap_or(c(0.0, 0.0));
            let want = (dm * (c(2.0, 0.0) - h - h.inv())).norm();
            factor = factor.max((v - want).abs() / want.max(1.0));
            if dm.norm() > 0.0 {
                detect = detect.min(*v);
            }
        }
    }
    out.push(Check::below("involutivity.zero_delta", zero, cfg.tol("factor")));
    out.push(Check::below("involutivity.factor", factor, cfg.tol("factor")));
    if d != 0.0 {
        out.push(Check::above("involutivity.delta_detected", detect, cfg.tol("perturbation")));
    }
    Ok(out)
}

fn quotient(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let (zlo, zhi) = cfg.z_window;
    let mut out = Vec::new();
    for (tag, d) in [("delta0", 0.0), ("delta", 0.3)] {
        let delta = sample_delta(d);
        let mut worst: f64 = 0.0;
        for m in [2usize, 3] {
            let fin = FiniteRMatrixSpec::new(m, delta.clone())?;
            for _ in 0..50 {
                let f = DiagMatrix::from_u(m, &random_poly(rng, zlo, zhi), q);
                let g = DiagMatrix::from_u(m, &random_poly(rng, zlo, zhi), q);
                let a = r0_restricted(&f, &delta, q, eps)?.inner(&g)?;
                let b = r0_finite(&f, &fin, q, eps)?.inner(&g)?;
                worst = worst.max((a - b).norm());
            }
        }
        out.push(Check::below(format!("restriction.{tag}"), worst, cfg.tol("restriction")));
    }
    for n in [2usize, 3] {
        let rep = quotient_equivalence_check(rng, n, &sample_delta(0.3), 30, q, eps)?;
        out.push(Check::below(format!("quotient.n{n}"), rep.max_discrepancy(), cfg.tol("quotient")));
    }
    Ok(out)
}

fn jacobi(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (q, eps) = (cfg.q, cfg.epsilon_generic);
    let n = 2;
    let spec = QuadOperatorSpec::e(n);
    let mut worst: f64 = 0.0;
    let el = |rng: &mut ChaCha8Rng| FunctionalSpec::Elementary { i: rng.gen_range(0..n as i64), j: rng.gen_range(-2..=2) };
    for _ in 0..5 {
        let u: Vec<LaurentSeries> = (0..n).map(|_| random_poly(rng, 0, 0).scale(c(0.5, 0.0))).collect();
        let fs = [el(rng), el(rng), el(rng)];
        worst = worst.max(jacobi_residual(&u, c(n as f64, 0.0), fs, &spec, 6, 1e-5, q, eps)?.norm());
    }
    Ok(vec![Check::below("jacobi.cyclic", worst, cfg.tol("jacobi"))])
}
