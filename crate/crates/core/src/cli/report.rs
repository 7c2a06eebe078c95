//! Deterministic TOML reports with one summary comment per check.

use std::fmt::Write;

use crate::laurent::{LaurentSeries, C64, EXACT_LO};

/// Floats always print with 17 significant digits so reports round-trip.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_c64(z: C64) -> String {
    format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im))
}

pub fn fmt_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// `{ lo = .., hi = .., terms = [[m, re, im], ...] }`; `lo` is omitted for
/// Laurent polynomials.
pub fn fmt_series(s: &LaurentSeries) -> String {
    let terms: Vec<String> =
        s.iter().map(|(m, c)| format!("[{m}, {}, {}]", fmt_f64(c.re), fmt_f64(c.im))).collect();
    if s.lo() == EXACT_LO {
        format!("{{ terms = [{}] }}", terms.join(", "))
    } else {
        format!("{{ lo = {}, hi = {}, terms = [{}] }}", s.lo(), s.hi(), terms.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// Passes when `value < tolerance`.
    Below,
    /// Passes when `value > tolerance`; used where a violation must be seen.
    Above,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, bound: Bound::Below }
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, bound: Bound::Above }
    }

    pub fn pass(&self) -> bool {
        match self.bound {
            Bound::Below => self.value < self.tolerance,
            Bound::Above => self.value > self.tolerance,
        }
    }

    pub fn summary(&self) -> String {
        let op = match self.bound {
            Bound::Below => "<",
            Bound::Above => ">",
        };
        format!(
            "{} {} value={} {op} {}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            fmt_f64(self.value),
            fmt_f64(self.tolerance)
        )
    }
}

/// Ordered key/value header, named tables and checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    header: Vec<(String, String)>,
    tables: Vec<(String, Vec<(String, String)>)>,
    checks: Vec<Check>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.set("format", "1".into());
        r.set("command", fmt_str(command));
        r
    }

    /// Adds a header entry; `value` is already TOML.
    pub fn set(&mut self, key: &str, value: String) {
        self.header.push((key.into(), value));
    }

    pub fn table(&mut self, name: &str, rows: Vec<(String, String)>) {
        self.tables.push((name.into(), rows));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.checks.iter().map(Check::summary).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(s, "{k} = {v}");
        }
        let failed = self.checks.iter().filter(|c| !c.pass()).count();
        let _ = writeln!(s, "checks = {}", self.checks.len());
        let _ = writeln!(s, "failed = {failed}");
        let _ = writeln!(s, "status = {}", fmt_str(if failed == 0 { "pass" } else { "fail" }));
        for (name, rows) in &self.tables {
            let _ = writeln!(s, "\n[{name}]");
            for (k, v) in rows {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "\n[[check]]");
            let _ = writeln!(s, "name = {}", fmt_str(&c.name));
            let _ = writeln!(s, "value = {}", fmt_f64(c.value));
            let _ = writeln!(s, "tolerance = {}", fmt_f64(c.tolerance));
            let b = match c.bound {
                Bound::Below => "below",
                Bound::Above => "above",
            };
            let _ = writeln!(s, "bound = {}", fmt_str(b));
            let _ = writeln!(s, "pass = {}", c.pass());
        }
        if !self.checks.is_empty() {
            s.push('\n');
        }
        for line in self.summary_lines() {
            let _ = writeln!(s, "# {line}");
        }
        s
    }
}
