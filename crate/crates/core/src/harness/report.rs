//! Inequality reports and their JSON / CSV encodings.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// How strongly a check is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckClass {
    /// Exact statement on every finite mm-space; any violation is a bug.
    #[serde(rename = "hard")]
    Hard,
    /// Continuum statement, enforced on refined model discretizations with slack.
    #[serde(rename = "tolerance")]
    Tolerance,
    /// Recorded only; never affects the exit status.
    #[serde(rename = "report-only")]
    ReportOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "report")]
    Report,
}

/// Where an input quantity came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "sweep")]
    Sweep,
    #[serde(rename = "heuristic")]
    Heuristic,
    /// proven lower and upper bounds
    #[serde(rename = "bracket")]
    Bracket,
}

impl fmt::Display for CheckClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckClass::Hard => "hard",
            CheckClass::Tolerance => "tolerance",
            CheckClass::ReportOnly => "report-only",
        })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Report => "report",
        })
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Exact => "exact",
            Provenance::Sweep => "sweep",
            Provenance::Heuristic => "heuristic",
            Provenance::Bracket => "bracket",
        })
    }
}

/// Direction of the inequality `lhs <= rhs` or `lhs >= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
}

/// Absolute slack applied to every comparison on top of the class slack.
pub const ABS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub id: String,
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` when undefined (`rhs == 0 < lhs`).
    pub ratio: Option<f64>,
    pub verdict: Verdict,
    pub class: CheckClass,
    pub params: BTreeMap<String, Value>,
    pub provenance: BTreeMap<String, Provenance>,
}

impl InequalityReport {
    /// Evaluates `lhs REL rhs` and assigns a verdict.
    ///
    /// Hard checks allow only [`ABS_EPS`] (scaled by the magnitudes involved);
    /// tolerance checks additionally allow a relative `slack` on `rhs`.
    pub fn evaluate(
        id: &str,
        anchor: &str,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        class: CheckClass,
        slack: f64,
    ) -> Self {
        let tol = if class == CheckClass::Tolerance { slack } else { 0.0 };
        let accepted = holds_with(lhs, rhs, relation, tol);
        let mut report = Self::with_acceptance(id, anchor, lhs, rhs, relation, class, accepted);
        if class == CheckClass::Tolerance {
            report.params.insert("slack".into(), Value::from(slack));
        }
        report
    }

    /// Builds a report whose acceptance was decided by the caller (for
    /// checks with a custom tolerance rule, such as pointwise inequalities).
    pub fn with_acceptance(
        id: &str,
        anchor: &str,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        class: CheckClass,
        accepted: bool,
    ) -> Self {
        let verdict = match class {
            CheckClass::ReportOnly => Verdict::Report,
            _ if accepted => Verdict::Pass,
            _ => Verdict::Fail,
        };
        let ratio = if rhs != 0.0 {
            Some(lhs / rhs)
        } else if lhs == 0.0 {
            Some(0.0)
        } else {
            None
        };
        let mut params = BTreeMap::new();
        params.insert("relation".into(), Value::from(if relation == Relation::Le { "<=" } else { ">=" }));
        params.insert("holds".into(), Value::from(holds_with(lhs, rhs, relation, 0.0)));
        Self {
            id: id.into(),
            anchor: anchor.into(),
            lhs,
            rhs,
            ratio,
            verdict,
            class,
            params,
            provenance: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn with_provenance(mut self, quantity: &str, p: Provenance) -> Self {
        self.provenance.insert(quantity.into(), p);
        self
    }

    pub fn is_hard_failure(&self) -> bool {
        self.class == CheckClass::Hard && self.verdict == Verdict::Fail
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

pub(crate) fn holds_with(lhs: f64, rhs: f64, relation: Relation, slack: f64) -> bool {
    let scale = ABS_EPS * (1.0 + lhs.abs().max(rhs.abs()));
    match relation {
        Relation::Le => lhs <= rhs + slack * rhs.abs() + scale,
        Relation::Ge => lhs >= rhs - slack * rhs.abs() - scale,
    }
}

/// Column order shared by the JSON objects and the CSV mirror.
pub const COLUMNS: [&str; 9] = [
    "id", "anchor", "lhs", "rhs", "ratio", "verdict", "class", "params", "provenance",
];

pub fn reports_to_json(reports: &[InequalityReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

pub fn reports_to_csv(reports: &[InequalityReport]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        let fields = [
            r.id.clone(),
            r.anchor.clone(),
            fmt_num(r.lhs),
            fmt_num(r.rhs),
            r.ratio.map(fmt_num).unwrap_or_default(),
            r.verdict.to_string(),
            r.class.to_string(),
            serde_json::to_string(&r.params).expect("params serialize"),
            serde_json::to_string(&r.provenance).expect("provenance serialize"),
        ];
        let escaped: Vec<String> = fields.iter().map(|f| csv_escape(f)).collect();
        out.push_str(&escaped.join(","));
        out.push('\n');
    }
    out
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
