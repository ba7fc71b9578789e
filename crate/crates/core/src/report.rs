//! Machine-readable JSON reports and their text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::kernel::ZeroStats;
use crate::verdict::{Check, Verdict};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub name: String,
    pub verdict: Verdict,
    pub stages: Vec<StageReport>,
    pub provenance: ProvenanceInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<BTreeMap<String, u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessOut>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub values: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessOut {
    pub condition: String,
    pub expr: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceInfo {
    pub seed: u64,
    pub sample_box: [f64; 2],
    pub sample_points: usize,
    pub exact_zero_tests: usize,
    pub probabilistic_zero_tests: usize,
}

impl ProvenanceInfo {
    pub fn new(stats: &ZeroStats, sample_box: [f64; 2]) -> Self {
        ProvenanceInfo {
            seed: stats.seed,
            sample_box,
            sample_points: stats.points,
            exact_zero_tests: stats.exact,
            probabilistic_zero_tests: stats.probabilistic,
        }
    }
}

impl StageReport {
    pub fn new(stage: &str, verdict: Verdict) -> Self {
        StageReport {
            stage: stage.into(),
            verdict,
            witness: None,
            warnings: Vec::new(),
            values: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub fn value(mut self, key: &str, v: impl Serialize) -> Self {
        self.values.insert(
            key.into(),
            serde_json::to_value(v).expect("report values serialize"),
        );
        self
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(
            key.into(),
            serde_json::to_value(v).expect("report values serialize"),
        );
    }
}

/// Process exit status for a finished report.
pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass | Verdict::Vacuous | Verdict::Skipped => 0,
        Verdict::Fail => 1,
        Verdict::BasisInsufficient => 3,
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.verdict)
    }

    /// One line per stage plus witnesses and warnings.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let title = if self.name.is_empty() {
            "-"
        } else {
            &self.name
        };
        let _ = writeln!(
            out,
            "{} {}: {}",
            self.command,
            title,
            verdict_word(self.verdict)
        );
        for s in &self.stages {
            let failed = s.checks.iter().filter(|c| !c.passed).count();
            let _ = writeln!(
                out,
                "  {:<10} {:<19} {} checks, {} failed",
                s.stage,
                verdict_word(s.verdict),
                s.checks.len(),
                failed
            );
            if let Some(w) = &s.witness {
                let _ = writeln!(out, "    witness [{}]: {}", w.condition, w.detail);
                let _ = writeln!(out, "      {}", w.expr);
            }
            for warn in &s.warnings {
                let _ = writeln!(out, "    warning: {warn}");
            }
        }
        let p = &self.provenance;
        let _ = writeln!(
            out,
            "  zero tests: {} exact, {} probabilistic (seed {}, {} points, box [{}, {}])",
            p.exact_zero_tests,
            p.probabilistic_zero_tests,
            p.seed,
            p.sample_points,
            p.sample_box[0],
            p.sample_box[1]
        );
        out
    }
}

pub fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Vacuous => "vacuous",
        Verdict::Skipped => "skipped",
        Verdict::BasisInsufficient => "basis-insufficient",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition() {
        assert_eq!(exit_code(Verdict::Pass), 0);
        assert_eq!(exit_code(Verdict::Vacuous), 0);
        assert_eq!(exit_code(Verdict::Fail), 1);
        assert_eq!(exit_code(Verdict::BasisInsufficient), 3);
    }

    #[test]
    fn json_round_trip_and_summary() {
        let stage = StageReport::new("hydro", Verdict::Pass).value("n", 2);
        let r = Report {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "check".into(),
            name: "x".into(),
            verdict: Verdict::Pass,
            stages: vec![stage],
            provenance: ProvenanceInfo::new(&ZeroStats::default(), [0.5, 3.0]),
            timing_ms: None,
        };
        let text = r.to_json();
        assert!(!text.contains("timing_ms"));
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(r.summary().contains("hydro"));
    }
}
