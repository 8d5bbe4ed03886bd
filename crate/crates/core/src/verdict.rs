//! Three-state inequality verdicts shared by every bound checker.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    HypothesisNotMet,
    Reported,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::HypothesisNotMet => "hypothesis-not-met",
            Verdict::Reported => "reported",
        }
    }

    /// Only an asserted inequality that is violated fails a run.
    pub fn is_failure(self) -> bool {
        self == Verdict::Fails
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side of the inequality must be larger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// lhs ≤ rhs
    AtMost,
    /// lhs ≥ rhs
    AtLeast,
}

/// One checked inequality. `anchor` names the theoretical statement being
/// checked, or is the literal `plumbing`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub check_id: String,
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    /// Positive when the inequality holds with room to spare.
    pub margin: f64,
    pub detail: String,
    /// Wall-clock seconds; never written to artifacts.
    #[serde(skip)]
    pub runtime_secs: Option<f64>,
}

impl VerdictRecord {
    /// Evaluates `lhs (≤|≥) rhs`. `lhs_error` widens the left side against the
    /// claim so that numerical error can never manufacture a pass.
    #[allow(clippy::too_many_arguments)]
    pub fn inequality(
        check_id: impl Into<String>,
        anchor: impl Into<String>,
        lhs: f64,
        lhs_error: f64,
        direction: Direction,
        rhs: f64,
        hypotheses_met: bool,
        detail: impl Into<String>,
    ) -> Self {
        let margin = match direction {
            Direction::AtMost => rhs - (lhs + lhs_error),
            Direction::AtLeast => (lhs - lhs_error) - rhs,
        };
        let verdict = if !hypotheses_met {
            Verdict::HypothesisNotMet
        } else if margin >= 0.0 {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        Self {
            check_id: check_id.into(),
            anchor: anchor.into(),
            lhs,
            rhs,
            verdict,
            margin,
            detail: detail.into(),
            runtime_secs: None,
        }
    }

    pub fn reported(check_id: impl Into<String>, anchor: impl Into<String>, lhs: f64, rhs: f64, detail: impl Into<String>) -> Self {
        Self {
            check_id: check_id.into(),
            anchor: anchor.into(),
            lhs,
            rhs,
            verdict: Verdict::Reported,
            margin: rhs - lhs,
            detail: detail.into(),
            runtime_secs: None,
        }
    }

    pub fn with_runtime(mut self, secs: f64) -> Self {
        self.runtime_secs = Some(secs);
        self
    }
}

pub fn any_failure(records: &[VerdictRecord]) -> bool {
    records.iter().any(|r| r.verdict.is_failure())
}
