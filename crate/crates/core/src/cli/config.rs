//! Run configuration, read from TOML.
//!
//! ```toml
//! format = 1
//! q = [0.4, 0.0]
//! lambda = [2.3, -0.7]
//! z_window = [-1, 1]
//! d_max = 5
//! seed = 1
//! epsilon_generic = 1e-12
//!
//! [tolerances]
//! trace = 1e-9
//! ```
//!
//! Every key except `format` is optional. Complex numbers are `[re, im]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::laurent::{qpow, C64};

pub const FORMAT: i64 = 1;

/// Default tolerances by name. A tolerance is an upper bound unless the
/// check is a detection check, where it is a lower bound.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("trace", 1e-9),
    ("interpolation", 1e-10),
    ("ll13", 1e-12),
    ("tt13", 1e-10),
    ("finite_gauge", 1e-10),
    ("finite_identity", 1e-12),
    ("universal_gauge", 1e-10),
    ("consistency", 1e-9),
    ("shift", 1e-10),
    ("skew", 1e-10),
    ("perturbation", 1e-6),
    ("constraint", 1e-10),
    ("restriction", 1e-10),
    ("quotient", 1e-9),
    ("involutivity", 1e-9),
    ("factor", 1e-12),
    ("jacobi", 1e-4),
    ("reduce", 1e-10),
    ("bracket_skew", 1e-10),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    format: i64,
    q: Option<[f64; 2]>,
    lambda: Option<[f64; 2]>,
    z_window: Option<[i64; 2]>,
    d_max: Option<usize>,
    seed: Option<u64>,
    epsilon_generic: Option<f64>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub q: C64,
    pub lambda: C64,
    pub z_window: (i64, i64),
    pub d_max: usize,
    pub seed: u64,
    pub epsilon_generic: f64,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            q: C64::new(0.4, 0.0),
            lambda: C64::new(2.3, -0.7),
            z_window: (-1, 1),
            d_max: 5,
            seed: 1,
            epsilon_generic: 1e-12,
            tolerances: DEFAULT_TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.format != FORMAT {
            return Err(Error::Parse(format!("unsupported config format {}", raw.format)));
        }
        let mut c = Self::default();
        if let Some([a, b]) = raw.q {
            c.q = C64::new(a, b);
        }
        if let Some([a, b]) = raw.lambda {
            c.lambda = C64::new(a, b);
        }
        if let Some([lo, hi]) = raw.z_window {
            c.z_window = (lo, hi);
        }
        if let Some(d) = raw.d_max {
            c.d_max = d;
        }
        if let Some(s) = raw.seed {
            c.seed = s;
        }
        if let Some(e) = raw.epsilon_generic {
            c.epsilon_generic = e;
        }
        for (k, v) in raw.tolerances {
            c.set_tolerance(&k, v)?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn set_tolerance(&mut self, name: &str, v: f64) -> Result<()> {
        if !self.tolerances.contains_key(name) {
            return Err(Error::Parse(format!("unknown tolerance {name:?}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parse(format!("tolerance {name} must be positive, got {v}")));
        }
        self.tolerances.insert(name.to_string(), v);
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// `0 < |q| < 1`, a nonempty window, a nonzero `lambda` with
    /// `|1 - q^{lambda m}| > eps` on the window.
    pub fn validate(&self) -> Result<()> {
        let r = self.q.norm();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Parse(format!("|q| = {r} is not in (0, 1)")));
        }
        let (lo, hi) = self.z_window;
        if lo > hi {
            return Err(Error::EmptyWindow { lo, hi });
        }
        if self.d_max == 0 {
            return Err(Error::Parse("d_max must be positive".into()));
        }
        if !(self.epsilon_generic.is_finite() && self.epsilon_generic >= 0.0) {
            return Err(Error::Parse("epsilon_generic must be nonnegative".into()));
        }
        if self.lambda.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        for m in lo..=hi {
            if m == 0 {
                continue;
            }
            let d = (C64::new(1.0, 0.0) - qpow(self.q, self.lambda * m as f64)).norm();
            if d <= self.epsilon_generic {
                return Err(Error::NonGenericParameter(format!("|1 - q^(lambda {m})| = {d:e}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_partial_config() {
        let c = RunConfig::from_toml("format = 1\nseed = 7\nq = [0.3, 0.1]\n[tolerances]\ntrace = 1e-8\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.q, C64::new(0.3, 0.1));
        assert_eq!(c.tol("trace"), 1e-8);
        assert_eq!(c.tol("ll13"), 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_toml("seed = 1"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::from_toml("format = 2"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::from_toml("format = 1\nbogus = 3"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::from_toml("format = 1\n[tolerances]\nnope = 1.0"), Err(Error::Parse(_))));
        let c = RunConfig::from_toml("format = 1\nq = [1.5, 0.0]").unwrap();
        assert!(matches!(c.validate(), Err(Error::Parse(_))));
        let c = RunConfig::from_toml("format = 1\nq = [0.0, 0.0]").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn non_generic_lambda_is_rejected() {
        // q^{lambda} = 1 for lambda = 2 pi i / ln q
        let lq = 0.4f64.ln();
        let mut c = RunConfig::default();
        c.lambda = C64::new(0.0, 2.0 * std::f64::consts::PI / lq);
        assert!(matches!(c.validate(), Err(Error::NonGenericParameter(_))));
    }
}
