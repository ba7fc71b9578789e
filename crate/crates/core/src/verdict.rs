//! Verdicts and individual identity checks, shared by all analysis stages.

use serde::{Deserialize, Serialize};

use crate::kernel::{Expr, Provenance, ZeroTester};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
    Skipped,
    BasisInsufficient,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Pass and vacuous both count as success.
    pub fn is_ok(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Vacuous)
    }

    /// Conjunction, where failure dominates basis insufficiency, which
    /// dominates skipping.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (BasisInsufficient, _) | (_, BasisInsufficient) => BasisInsufficient,
            (Skipped, _) | (_, Skipped) => Skipped,
            (Pass, _) | (_, Pass) => Pass,
            (Vacuous, Vacuous) => Vacuous,
        }
    }
}

/// One identity `residual = 0`, with its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: String,
    pub provenance: Provenance,
}

impl Check {
    /// Zero-tests `residual`. A sampling failure counts as a failed check.
    pub fn zero(name: impl Into<String>, residual: &Expr, zero: &ZeroTester) -> Check {
        let (passed, provenance) = match zero.test(residual) {
            Ok(v) => (v.is_zero, v.provenance),
            Err(_) => (
                false,
                Provenance::Probabilistic {
                    seed: zero.workspace().sampling().seed,
                    points: 0,
                },
            ),
        };
        Check {
            name: name.into(),
            passed,
            residual: residual.to_string(),
            provenance,
        }
    }

    /// Requires `e` to be not identically zero.
    pub fn nonzero(name: impl Into<String>, e: &Expr, zero: &ZeroTester) -> Check {
        let (passed, provenance) = match zero.test(e) {
            Ok(v) => (!v.is_zero, v.provenance),
            Err(_) => (
                false,
                Provenance::Probabilistic {
                    seed: zero.workspace().sampling().seed,
                    points: 0,
                },
            ),
        };
        Check {
            name: name.into(),
            passed,
            residual: e.to_string(),
            provenance,
        }
    }

    pub fn fact(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            residual: detail.into(),
            provenance: Provenance::Exact,
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
