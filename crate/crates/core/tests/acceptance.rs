//! Acceptance criteria, one test each. Every test writes a single
//! `PASS`/`FAIL` line to stderr (outside the test harness capture) and then
//! asserts on it.

use std::collections::BTreeMap;
use std::io::Write;

use qdsred::a0::{random_a0, A0Function, A0Function2, A0Laurent2};
use qdsred::cli::{cmd_verify, RunConfig, Suite, SuiteOptions};
use qdsred::glq::{
    mul_glq, r0_restricted, r0_universal, r0_with_multiplier, random_field, random_sk, random_u, random_v,
    random_v1, GlqMatrix, UniversalRMatrixSpec, EXACT_DMAX,
};
use qdsred::laurent::{qpow, random_poly};
use qdsred::loopfin::{
    companion_u, eigen_cube_closed, eigen_cube_sum, r0_finite, random_yn, reduce_finite, DiagMatrix,
    FiniteRMatrixSpec, LoopMatrix,
};
use qdsred::poisson::{bracket_at, involutivity_residual, jacobi_residual, quotient_equivalence_check, QuadOperatorSpec};
use qdsred::psido::FunctionalSpec;
use qdsred::reduction::{effective_reg, random_yq, reduce_universal, verify_gauge};
use qdsred::{c64, LaurentSeries, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Q: f64 = 0.4;
const EPS: f64 = 1e-12;
const SEED: u64 = 20240611;

const TOL_TRACE: f64 = 1e-9;
const TOL_INTERPOLATION: f64 = 1e-10;
const TOL_CUBE: f64 = 1e-12;
const TOL_BILINEAR: f64 = 1e-10;
const TOL_FINITE_GAUGE: f64 = 1e-10;
const TOL_FINITE_IDENTITY: f64 = 1e-12;
const TOL_UNIVERSAL_GAUGE: f64 = 1e-10;
const TOL_CONSISTENCY: f64 = 1e-9;
const TOL_SHIFT: f64 = 1e-10;
const TOL_SKEW: f64 = 1e-10;
const TOL_DETECT: f64 = 1e-6;
const TOL_CONSTRAINT: f64 = 1e-10;
const TOL_RESTRICTION: f64 = 1e-10;
const TOL_QUOTIENT: f64 = 1e-9;
const TOL_INVOLUTIVITY: f64 = 1e-9;
const TOL_FACTOR: f64 = 1e-12;
const TOL_JACOBI: f64 = 1e-4;

fn q() -> C64 {
    c64(Q, 0.0)
}

fn lam() -> C64 {
    c64(2.3, -0.7)
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

/// Writes the criterion line and returns whether it passed.
fn line(id: u32, name: &str, parts: &[(&str, f64, f64, bool)]) -> bool {
    let pass = parts.iter().all(|(_, v, t, above)| if *above { v > t } else { v < t });
    let detail: Vec<String> = parts
        .iter()
        .map(|(k, v, t, above)| format!("{k}={v:.3e}{}{t:.0e}", if *above { ">" } else { "<" }))
        .collect();
    let text = format!("{} criterion {id:>2} {name}: {}\n", if pass { "PASS" } else { "FAIL" }, detail.join(" "));
    let _ = std::io::stderr().write_all(text.as_bytes());
    pass
}

/// Brute-force value of `sum_(a, b) c w^a q^{bw}`.
fn a0_at(f: &A0Function, w: C64) -> C64 {
    f.terms().map(|((a, b), c)| c * w.powi(a as i32) * qpow(q(), w * b as f64)).sum()
}

#[test]
fn trace_commutes_on_graded_pairs() {
    let mut r = rng(1);
    let ts = [lam(), c64(1.5, 0.3), c64(4.0, 0.0), c64(0.7, -0.2), c64(-0.5, 1.2)];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = r.gen_range(0..=4);
        let (ra, rb) = (r.gen_range(0..=2), r.gen_range(0..=2));
        let a = random_sk(&mut r, k, ra, 1, -1, 1, q());
        let b = random_sk(&mut r, -k, rb, 1, -1, 1, q());
        let ab = mul_glq(&a, &b, q()).unwrap().tr_glq(q(), EPS).unwrap();
        let ba = mul_glq(&b, &a, q()).unwrap().tr_glq(q(), EPS).unwrap();
        for t in ts {
            worst = worst.max(ab.eval_at(t, q()).max_diff(&ba.eval_at(t, q())));
        }
    }
    // geometric-sum oracle: diagonal q^w has trace (q^t - 1)/(q - 1)
    let f = A0Function2::from_terms([((0, 1, 0, 0), c64(1.0, 0.0))]);
    let g = GlqMatrix::from_interpolants(0, BTreeMap::from([(0, A0Laurent2::monomial(f, 0))]), EXACT_DMAX, q());
    let tr = g.tr_glq(q(), EPS).unwrap();
    let mut geo: f64 = 0.0;
    for t in ts {
        let want = (qpow(q(), t) - 1.0) / (q() - 1.0);
        geo = geo.max((tr.eval_at(t, q()).get(0) - want).norm());
    }
    let ok = line(1, "trace commutativity", &[("commutator", worst, TOL_TRACE, false), ("geometric", geo, TOL_TRACE, false)]);
    assert!(ok);
}

#[test]
fn interpolated_partial_sums_match_brute_force() {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let deg = r.gen_range(0..=6);
        let f = random_a0(&mut r, deg, 3);
        let l = r.gen_range(-4..=4i64);
        let big = f.interpolate_partial_sum(l, q(), EPS).unwrap();
        let (mut acc, mut abs) = (c64(0.0, 0.0), 0.0);
        for n in 1..=40i64 {
            let i = n - 1;
            let term = a0_at(&f, c64(i as f64, 0.0)) * Q.powi(l as i32 * i as i32);
            acc += term;
            abs += term.norm();
            let den = if abs > 0.0 { abs } else { 1.0 };
            worst = worst.max((a0_at(&big, c64(n as f64, 0.0)) - acc).norm() / den);
        }
    }
    assert!(line(2, "interpolation engine", &[("relative", worst, TOL_INTERPOLATION, false)]));
}

#[test]
fn eigenvalue_cube_sum_has_closed_form() {
    let mut worst: f64 = 0.0;
    for n in 2..=6usize {
        for m in (-4..=4i64).filter(|m| *m != 0) {
            // power-series oracle: sum_j (jn)^2 x^j for x = q^{|m| n}, odd in m
            let x = Q.powi((m.abs() * n as i64) as i32);
            let mut s = 0.0;
            let mut j = 1.0;
            loop {
                let t = (j * n as f64).powi(2) * x.powf(j);
                s += t;
                if t < 1e-20 {
                    break;
                }
                j += 1.0;
            }
            let oracle = if m > 0 { s } else { -s };
            let closed = eigen_cube_closed(n, m, q());
            worst = worst.max((eigen_cube_sum(n, m, q()) - closed).norm());
            worst = worst.max((closed - c64(oracle, 0.0)).norm());
        }
    }
    assert!(line(3, "eigenvalue cube sum", &[("absolute", worst, TOL_CUBE, false)]));
}

#[test]
fn zero_mode_bilinear_form_on_un() {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let spec = FiniteRMatrixSpec::new(n, BTreeMap::new()).unwrap();
        let nn = n as f64;
        for _ in 0..50 {
            let u = random_poly(&mut r, -5, 5);
            let v = random_poly(&mut r, -5, 5);
            let f = DiagMatrix::from_u(n, &u, q());
            let g = DiagMatrix::from_u(n, &v, q());
            let lhs = r0_finite(&f, &spec, q(), EPS).unwrap().inner(&g).unwrap();
            // (n^2/2) sum_{m != 0} (1 + q^{nm})/(1 - q^{nm}) u_m v_{-m}
            let mut rhs = c64(0.0, 0.0);
            for m in (-5..=5i64).filter(|m| *m != 0) {
                let h = Q.powi((n as i64 * m) as i32);
                rhs += u.get(m) * v.get(-m) * ((1.0 + h) / (1.0 - h)) * (nn * nn / 2.0);
            }
            worst = worst.max((lhs - rhs).norm());
        }
    }
    assert!(line(4, "zero-mode bilinear form", &[("absolute", worst, TOL_BILINEAR, false)]));
}

fn is_companion(c: &LoopMatrix) -> bool {
    let n = c.n();
    (1..n).all(|i| (0..n).all(|j| c.get(i, j).max_diff(&LaurentSeries::constant(c64((j + 1 == i) as u8 as f64, 0.0))) == 0.0))
}

#[test]
fn finite_cross_section() {
    let mut r = rng(5);
    let (mut res, mut ident, mut shape) = (0f64, 0f64, 0f64);
    for _ in 0..30 {
        let l = random_yn(&mut r, 3, 1, 1.0);
        let (comp, t) = reduce_finite(&l, q()).unwrap();
        // h T L = C T, without inverting T
        res = res.max(t.dilate(1.0, q()).mul(&l).max_diff(&comp.mul(&t)));
        if !is_companion(&comp) || comp.max_diff(&LoopMatrix::companion(&companion_u(&comp))) != 0.0 {
            shape = 1.0;
        }
        let (_, t2) = reduce_finite(&comp, q()).unwrap();
        ident = ident.max(t2.max_diff(&LoopMatrix::identity(3)));
    }
    let ok = line(
        5,
        "finite cross-section",
        &[("gauge", res, TOL_FINITE_GAUGE, false), ("identity", ident, TOL_FINITE_IDENTITY, false), ("shape", shape, 0.5, false)],
    );
    assert!(ok);
}

/// Top-left corner of `A(lambda)`, zero beyond the diagonal cutoff.
fn banded_block(a: &GlqMatrix, at: C64, size: usize) -> LoopMatrix {
    let rows = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    if j as i64 - i as i64 > a.d_max() {
                        LaurentSeries::zero()
                    } else {
                        a.entry(i, j, q()).unwrap().eval_at(at, q())
                    }
                })
                .collect()
        })
        .collect();
    LoopMatrix::from_rows(rows).unwrap()
}

#[test]
fn universal_cross_section() {
    let mut r = rng(6);
    let d = 5usize;
    let (mut res, mut cons, mut block, mut excess) = (0f64, 0f64, 0f64, 0f64);
    for k in 0..20 {
        let reg = 1 + k % 2;
        let l = random_yq(&mut r, reg, d as i64 - 1, 0, -1, 1, 0.1, q()).unwrap();
        let red = reduce_universal(&l, d, q(), EPS).unwrap();
        for v in verify_gauge(&red.gauge, &l, &red.companion, d, q()).unwrap().values() {
            res = res.max(*v);
        }
        cons = cons.max(red.consistency);
        if effective_reg(&red.gauge, q(), TOL_UNIVERSAL_GAUGE) > l.reg() {
            excess = 1.0;
        }
        // evaluated blocks: h T(lam) L(lam) = C(lam) T(lam) on diagonals -1..d-1
        let (nb, big) = (6usize, 6 + d + 2);
        for at in [lam(), c64(3.7, 0.4)] {
            let t = banded_block(&red.gauge, at, big);
            let lm = banded_block(l.matrix(), at, big);
            let c = banded_block(&red.companion.matrix(q()), at, big);
            let lhs = t.dilate(1.0, q()).mul(&lm);
            let rhs = c.mul(&t);
            for i in 0..nb {
                for j in i.saturating_sub(1)..(i + d).min(nb) {
                    block = block.max(lhs.get(i, j).max_diff(rhs.get(i, j)));
                }
            }
        }
    }
    let ok = line(
        6,
        "universal cross-section",
        &[
            ("gauge", res, TOL_UNIVERSAL_GAUGE, false),
            ("evaluated", block, TOL_UNIVERSAL_GAUGE, false),
            ("consistency", cons, TOL_CONSISTENCY, false),
            ("reg_excess", excess, 0.5, false),
        ],
    );
    assert!(ok);
}

#[test]
fn shift_operator_calculus() {
    let mut r = rng(7);
    let (qq, l) = (q(), lam());
    let (mut inv, mut orth, mut idem, mut proj, mut lemma, mut rows) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..50 {
        let f = random_field(&mut r, 2, 2, -1, 1);
        let v = random_v(&mut r, 2, 2, -1, 1, qq);
        let ai = f.apply_a_inverse(qq, EPS).unwrap();
        inv = inv.max(ai.apply_a(qq).sub(&f).max_abs());
        inv = inv.max(v.apply_a(qq).apply_a_inverse(qq, EPS).unwrap().sub(&v).max_abs());
        // row oracle: (A^-1 F)_n(z) = -sum_{i<n} F_i(q^{i-n} z)
        for n in 0..6usize {
            let mut want = LaurentSeries::zero();
            for i in 0..n {
                want = want.sub(&f.row(i, qq).dilate(c64(i as f64 - n as f64, 0.0), qq));
            }
            rows = rows.max(ai.row(n, qq).max_diff(&want));
        }

        let v1 = random_v1(&mut r, l, 2, 2, -1, 1, qq);
        let u = random_u(&mut r, -1, 1);
        orth = orth.max(v1.apply_a(qq).inner(&u, l, qq, EPS).unwrap().norm());

        let p = f.proj_u(l, qq, EPS).unwrap();
        idem = idem.max(p.proj_u(l, qq, EPS).unwrap().sub(&p).max_abs());
        proj = proj.max(f.sub(&p).inner(&u, l, qq, EPS).unwrap().norm());

        let g = random_v(&mut r, 2, 2, -1, 1, qq);
        let lhs = v.inner(&g, l, qq, EPS).unwrap() - v.shift_s(qq).inner(&g.shift_s(qq), l, qq, EPS).unwrap();
        let rhs = -v.eval(l, qq).inner(&g.eval(l, qq)).unwrap();
        lemma = lemma.max((lhs - rhs).norm());
    }
    let ok = line(
        7,
        "shift calculus",
        &[
            ("inverse", inv, TOL_SHIFT, false),
            ("inverse_rows", rows, TOL_SHIFT, false),
            ("orthogonality", orth, TOL_SHIFT, false),
            ("idempotent", idem, TOL_SHIFT, false),
            ("projection", proj, TOL_SHIFT, false),
            ("shift_lemma", lemma, TOL_SHIFT, false),
        ],
    );
    assert!(ok);
}

fn delta(d: f64) -> BTreeMap<i64, C64> {
    BTreeMap::from([(1, c64(d, 0.0)), (-1, c64(-d, 0.0)), (2, c64(d / 2.0, 0.0)), (-2, c64(-d / 2.0, 0.0))])
}

#[test]
fn skew_symmetry_classification() {
    let mut r = rng(8);
    let (qq, l) = (q(), lam());
    let dl = delta(0.3);
    let spec = UniversalRMatrixSpec::new(l, dl.clone()).unwrap();
    // multiplier oracle: lambda ((1 + h)/(2(1 - h)) + delta_m) + lambda/2, h = q^{lambda m}
    let mult = |m: i64| {
        if m == 0 {
            return l * 0.5;
        }
        let h = qpow(qq, l * m as f64);
        l * ((1.0 + h) / (2.0 * (1.0 - h)) + dl.get(&m).copied().unwrap_or_default()) + l * 0.5
    };
    let mut mdiff: f64 = 0.0;
    for m in -3..=3 {
        mdiff = mdiff.max((spec.multiplier(m, qq, EPS).unwrap() - mult(m)).norm());
    }
    let bent = |m: i64| mult(m) + if m == 1 { c64(0.1, 0.0) } else { c64(0.0, 0.0) };
    let (mut skew, mut pert, mut cons) = (0f64, f64::INFINITY, 0f64);
    for _ in 0..50 {
        let f = random_field(&mut r, 1, 2, -1, 1).add(&random_u(&mut r, -1, 1));
        let g = random_field(&mut r, 1, 2, -1, 1).add(&random_u(&mut r, -1, 1));
        let rf = r0_universal(&f, &spec, qq, EPS).unwrap();
        let rg = r0_universal(&g, &spec, qq, EPS).unwrap();
        skew = skew.max((rf.inner(&g, l, qq, EPS).unwrap() + f.inner(&rg, l, qq, EPS).unwrap()).norm());

        let pf = r0_with_multiplier(&f, l, bent, qq, EPS).unwrap();
        let pg = r0_with_multiplier(&g, l, bent, qq, EPS).unwrap();
        pert = pert.min((pf.inner(&g, l, qq, EPS).unwrap() + f.inner(&pg, l, qq, EPS).unwrap()).norm());

        let v = random_v1(&mut r, l, 2, 2, -1, 1, qq);
        let lhs = r0_universal(&v.apply_a(qq), &spec, qq, EPS).unwrap();
        let rhs = v.add(&v.shift_s(qq).dilate(1, qq)).scale(c64(0.5, 0.0));
        cons = cons.max(lhs.sub(&rhs).max_abs());
    }
    let ok = line(
        8,
        "skew-symmetry classification",
        &[
            ("multiplier", mdiff, TOL_SKEW, false),
            ("skew", skew, TOL_SKEW, false),
            ("perturbation", pert, TOL_DETECT, true),
            ("constraint", cons, TOL_CONSTRAINT, false),
        ],
    );
    assert!(ok);
}

#[test]
fn restriction_to_integer_size() {
    let mut r = rng(9);
    let mut worst: f64 = 0.0;
    for d in [0.0, 0.3] {
        let dl = if d == 0.0 { BTreeMap::new() } else { delta(d) };
        for m in [2usize, 3] {
            let fin = FiniteRMatrixSpec::new(m, dl.clone()).unwrap();
            for _ in 0..50 {
                let f = DiagMatrix::from_u(m, &random_poly(&mut r, -1, 1), q());
                let g = DiagMatrix::from_u(m, &random_poly(&mut r, -1, 1), q());
                let a = r0_restricted(&f, &dl, q(), EPS).unwrap().inner(&g).unwrap();
                let b = r0_finite(&f, &fin, q(), EPS).unwrap().inner(&g).unwrap();
                worst = worst.max((a - b).norm());
            }
        }
    }
    assert!(line(9, "restriction", &[("absolute", worst, TOL_RESTRICTION, false)]));
}

#[test]
fn quotient_bracket_equivalence() {
    let mut r = rng(10);
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let rep = quotient_equivalence_check(&mut r, n, &delta(0.3), 30, q(), EPS).unwrap();
        worst = worst.max(rep.max_discrepancy());
    }
    assert!(line(10, "quotient-bracket equivalence", &[("absolute", worst, TOL_QUOTIENT, false)]));
}

#[test]
fn involutivity_and_uniqueness() {
    let mut r = rng(11);
    let mut inv: f64 = 0.0;
    for (n, m2) in [(2usize, 2u32), (3, 3)] {
        let spec = QuadOperatorSpec::e(n);
        for _ in 0..5 {
            let u: Vec<LaurentSeries> = (0..n).map(|_| random_poly(&mut r, -1, 1).scale(c64(0.5, 0.0))).collect();
            let h1 = FunctionalSpec::Spectral { m: 1 };
            let hm = FunctionalSpec::Spectral { m: m2 };
            inv = inv.max(bracket_at(&u, c64(n as f64, 0.0), &h1, &hm, &spec, q(), EPS).unwrap().norm());
        }
    }
    let dl = delta(0.3);
    let (mut zero, mut factor, mut seen) = (0f64, 0f64, f64::INFINITY);
    for n in [2usize, 3] {
        for v in involutivity_residual(&QuadOperatorSpec::e161(n, BTreeMap::new()).unwrap(), -4, 4, q(), EPS).unwrap().values() {
            zero = zero.max(*v);
        }
        let res = involutivity_residual(&QuadOperatorSpec::e161(n, dl.clone()).unwrap(), -4, 4, q(), EPS).unwrap();
        for (m, v) in res {
            let h = Q.powi((n as i64 * m) as i32);
            let dm = dl.get(&m).copied().unwrap_or_default();
            let want = (dm * (2.0 - h - 1.0 / h)).norm();
            factor = factor.max((v - want).abs() / want.max(1.0));
            if dm.norm() > 0.0 {
                seen = seen.min(v);
            }
        }
    }
    let ok = line(
        11,
        "involutivity and uniqueness",
        &[
            ("h1_hm", inv, TOL_INVOLUTIVITY, false),
            ("zero_delta", zero, TOL_FACTOR, false),
            ("factor", factor, TOL_FACTOR, false),
            ("nonzero_delta", seen, TOL_DETECT, true),
        ],
    );
    assert!(ok);
}

#[test]
fn jacobi_identity_smoke() {
    let mut r = rng(12);
    let n = 2usize;
    let spec = QuadOperatorSpec::e(n);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let u: Vec<LaurentSeries> = (0..n).map(|_| random_poly(&mut r, 0, 0).scale(c64(0.5, 0.0))).collect();
        let mut el = || FunctionalSpec::Elementary { i: r.gen_range(0..n as i64), j: r.gen_range(-2..=2) };
        let fs = [el(), el(), el()];
        worst = worst.max(jacobi_residual(&u, c64(n as f64, 0.0), fs, &spec, 6, 1e-5, q(), EPS).unwrap().norm());
    }
    assert!(line(12, "jacobi identity", &[("cyclic", worst, TOL_JACOBI, false)]));
}

#[test]
fn verify_reports_are_deterministic() {
    let mut cfg = RunConfig::default();
    cfg.seed = SEED;
    let opts = SuiteOptions::default();
    let mut diff = 0.0;
    for s in [Suite::Ll13, Suite::Tt13, Suite::Reduction, Suite::QuotientEquivalence] {
        let a = cmd_verify(s, &cfg, &opts).unwrap().render();
        let b = cmd_verify(s, &cfg, &opts).unwrap().render();
        if a.as_bytes() != b.as_bytes() {
            diff = 1.0;
        }
    }
    assert!(line(13, "deterministic reports", &[("differing", diff, 0.5, false)]));
}
