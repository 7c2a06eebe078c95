//! Input files for `reduce` and `bracket`.
//!
//! A reduction input names its kind and lists entries; series are lists of
//! `[exponent, re, im]`.
//!
//! ```toml
//! format = 1
//! kind = "finite"            # finite | universal | random-finite | random-universal
//! n = 3                      # finite kinds
//!
//! [[entry]]                  # finite: the full matrix, missing entries are 0
//! row = 1
//! col = 0
//! terms = [[0, 1.0, 0.0]]
//! ```
//!
//! Universal inputs give `reg`, interpolants and explicit rows. A
//! `[[diagonal]]` record adds `c w^a q^{bw} t^e q^{ft} z^m` for every
//! `[a, b, e, f, re, im]` in `terms`; an `[[explicit]]` record adds
//! `c t^a q^{bt} z^m` to entry `(row, col)` for every `[a, b, re, im]`.
//!
//! ```toml
//! format = 1
//! kind = "universal"
//! reg = 1
//!
//! [[diagonal]]
//! d = -1
//! z = 0
//! terms = [[0, 0, 0, 0, 1.0, 0.0]]
//! ```
//!
//! A bracket input (`--l-file`) holds the coefficients of
//! `L = D^lambda + sum_k u_k D^{lambda-k}`, and optionally `lambda`, a skew
//! `delta` multiplier and raw `(a, b, c, d)` quadruples.
//!
//! ```toml
//! format = 1
//! u = [[[0, 0.3, 0.0]], [[-1, 0.1, 0.0], [1, 0.2, 0.0]]]
//! [delta]
//! 1 = [0.3, 0.0]
//! -1 = [-0.3, 0.0]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::a0::{A0Function, A0Function2, A0Laurent, A0Laurent2};
use crate::error::{Error, Result};
use crate::glq::{GlqMatrix, EXACT_DMAX};
use crate::laurent::{LaurentSeries, C64};
use crate::loopfin::LoopMatrix;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn check_format(f: i64) -> Result<()> {
    if f != 1 {
        return Err(Error::Parse(format!("unsupported input format {f}")));
    }
    Ok(())
}

fn cplx([a, b]: [f64; 2]) -> C64 {
    C64::new(a, b)
}

fn series(terms: &[(i64, f64, f64)]) -> LaurentSeries {
    LaurentSeries::poly(terms.iter().map(|(m, a, b)| (*m, C64::new(*a, *b))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    Finite,
    Universal,
    RandomFinite,
    RandomUniversal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    row: usize,
    col: usize,
    terms: Vec<(i64, f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagonalRecord {
    d: i64,
    z: i64,
    terms: Vec<(u32, i64, u32, i64, f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitRecord {
    row: usize,
    col: usize,
    z: i64,
    terms: Vec<(u32, i64, f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReduceInput {
    format: i64,
    kind: InputKind,
    n: Option<usize>,
    reg: Option<usize>,
    #[serde(default)]
    entry: Vec<EntryRecord>,
    #[serde(default)]
    diagonal: Vec<DiagonalRecord>,
    #[serde(default)]
    explicit: Vec<ExplicitRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReduceInput {
    Finite(LoopMatrix),
    /// Matrix with its `reg`; the shape is checked by `YqElement::new`.
    Universal(GlqMatrix),
    RandomFinite { n: usize },
    RandomUniversal { reg: usize },
}

impl ReduceInput {
    pub fn from_toml(text: &str, q: C64) -> Result<Self> {
        let raw: RawReduceInput = parse(text)?;
        check_format(raw.format)?;
        match raw.kind {
            InputKind::Finite => {
                let n = raw.n.ok_or_else(|| Error::Parse("finite input needs n".into()))?;
                if n == 0 {
                    return Err(Error::Shape("n must be positive".into()));
                }
                let mut m = LoopMatrix::zero(n);
                for e in &raw.entry {
                    if e.row >= n || e.col >= n {
                        return Err(Error::Shape(format!("entry ({}, {}) outside {n} x {n}", e.row, e.col)));
                    }
                    m.set(e.row, e.col, m.get(e.row, e.col).add(&series(&e.terms)));
                }
                Ok(Self::Finite(m))
            }
            InputKind::Universal => {
                let reg = raw.reg.ok_or_else(|| Error::Parse("universal input needs reg".into()))?;
                let mut diags: BTreeMap<i64, A0Laurent2> = BTreeMap::new();
                for r in &raw.diagonal {
                    let f = A0Function2::from_terms(
                        r.terms.iter().map(|(a, b, e, f, x, y)| ((*a, *b, *e, *f), C64::new(*x, *y))),
                    );
                    let cur = diags.remove(&r.d).unwrap_or_else(A0Laurent2::zero);
                    diags.insert(r.d, cur.add(&A0Laurent2::monomial(f, r.z)));
                }
                let mut m = GlqMatrix::from_interpolants(reg, diags, EXACT_DMAX, q);
                for r in &raw.explicit {
                    if r.row > reg {
                        return Err(Error::Shape(format!("explicit row {} exceeds reg {reg}", r.row)));
                    }
                    let f = A0Function::from_terms(r.terms.iter().map(|(a, b, x, y)| ((*a, *b), C64::new(*x, *y))));
                    let cur = m.entry(r.row, r.col, q)?;
                    m.set_exceptional(r.row, r.col, cur.add(&A0Laurent::monomial(f, r.z)))?;
                }
                Ok(Self::Universal(m))
            }
            InputKind::RandomFinite => Ok(Self::RandomFinite { n: raw.n.unwrap_or(3) }),
            InputKind::RandomUniversal => Ok(Self::RandomUniversal { reg: raw.reg.unwrap_or(1) }),
        }
    }

    pub fn load(path: &Path, q: C64) -> Result<Self> {
        Self::from_toml(&read(path)?, q)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuad {
    m: i64,
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    d: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    format: i64,
    u: Vec<Vec<(i64, f64, f64)>>,
    lambda: Option<[f64; 2]>,
    #[serde(default)]
    delta: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    raw: Vec<RawQuad>,
}

/// Point `L` and bracket parameters read from an L-file.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorInput {
    pub u: Vec<LaurentSeries>,
    pub lambda: Option<C64>,
    pub delta: BTreeMap<i64, C64>,
    pub raw: BTreeMap<i64, [C64; 4]>,
}

impl OperatorInput {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawOperator = parse(text)?;
        check_format(raw.format)?;
        if raw.u.is_empty() {
            return Err(Error::Shape("u must list at least one coefficient".into()));
        }
        let mut delta = BTreeMap::new();
        for (k, v) in raw.delta {
            let m: i64 = k.parse().map_err(|_| Error::Parse(format!("delta key {k:?} is not an integer")))?;
            delta.insert(m, cplx(v));
        }
        let mut quads = BTreeMap::new();
        for r in raw.raw {
            if quads.insert(r.m, [cplx(r.a), cplx(r.b), cplx(r.c), cplx(r.d)]).is_some() {
                return Err(Error::Parse(format!("raw multiplier for m = {} given twice", r.m)));
            }
        }
        Ok(Self { u: raw.u.iter().map(|t| series(t)).collect(), lambda: raw.lambda.map(cplx), delta, raw: quads })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }
}
