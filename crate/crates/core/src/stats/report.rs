use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Greater,
    Less,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Greater => ">",
            Relation::Less => "<",
        }
    }

    fn holds(self, observed: f64, limit: f64) -> bool {
        match self {
            Relation::AtMost => observed <= limit,
            Relation::AtLeast => observed >= limit,
            Relation::Greater => observed > limit,
            Relation::Less => observed < limit,
        }
    }
}

/// Outcome a check is supposed to have. Negative controls expect failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    #[default]
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
    pub expect: Expectation,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, relation: Relation, limit: f64) -> Self {
        Check { name: name.into(), observed, relation, limit, passed: relation.holds(observed, limit), expect: Expectation::Pass }
    }

    pub fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self::new(name, observed, Relation::AtMost, limit)
    }

    pub fn at_least(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self::new(name, observed, Relation::AtLeast, limit)
    }

    pub fn greater(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self::new(name, observed, Relation::Greater, limit)
    }

    /// p-value test at the given significance level.
    pub fn p_value(name: impl Into<String>, p: f64, alpha: f64) -> Self {
        Self::greater(name, p, alpha)
    }

    /// Count of violations, which must be zero.
    pub fn none(name: impl Into<String>, violations: usize) -> Self {
        Self::at_most(name, violations as f64, 0.0)
    }

    pub fn expecting_failure(mut self) -> Self {
        self.expect = Expectation::Fail;
        self
    }

    /// Whether the check behaved as expected.
    pub fn ok(&self) -> bool {
        self.passed == (self.expect == Expectation::Pass)
    }
}

/// Optional raw per-trial samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
    pub stats: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampleTable>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        ExperimentReport { name: name.into(), seed, params: BTreeMap::new(), stats: BTreeMap::new(), checks: Vec::new(), samples: None }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    pub fn stat(&mut self, key: impl Into<String>, value: f64) {
        self.stats.insert(key.into(), value);
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Every check behaved as expected (negative controls failed).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    /// True if any check is a negative control.
    pub fn is_control(&self) -> bool {
        self.checks.iter().any(|c| c.expect == Expectation::Fail)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite-safe values")
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let verdict = match (self.passed(), self.is_control()) {
            (true, false) => "PASS",
            (true, true) => "PASS (expected-fail control)",
            (false, _) => "FAIL",
        };
        let _ = writeln!(out, "== {} [{verdict}] seed={}", self.name, self.seed);
        if !self.params.is_empty() {
            let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "   params: {}", params.join(" "));
        }
        let width = self.stats.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in &self.stats {
            let _ = writeln!(out, "   {k:<width$}  {}", fmt_num(*v));
        }
        let name_w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let obs: Vec<String> = self.checks.iter().map(|c| fmt_num(c.observed)).collect();
        let obs_w = obs.iter().map(String::len).max().unwrap_or(0);
        for (c, o) in self.checks.iter().zip(&obs) {
            let status = match (c.passed, c.expect) {
                (true, Expectation::Pass) => "ok",
                (false, Expectation::Fail) => "failed (expected)",
                (false, Expectation::Pass) => "FAILED",
                (true, Expectation::Fail) => "PASSED (expected failure)",
            };
            let _ = writeln!(out, "   {:<name_w$}  {o:>obs_w$} {:<2} {:<12} {status}", c.name, c.relation.symbol(), fmt_num(c.limit));
        }
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.0}")
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.4e}")
    } else {
        format!("{v:.6}")
    }
}
