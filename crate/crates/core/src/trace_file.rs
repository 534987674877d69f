//! On-disk trace and expectation files (JSON).
//!
//! Field order is fixed by the struct definitions, so two runs of the same
//! simulation serialize to identical bytes.

use serde::{Deserialize, Serialize};

use crate::engine::{Origin, StepKind, TokenStatus, Trace};
use crate::model::Model;
use crate::scenarios::{Outcome, OutcomeClass};
use crate::value::Payload;

pub const TRACE_FORMAT: &str = "tm-trace/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub format: String,
    pub step_limit_exceeded: bool,
    pub steps: Vec<StepRecord>,
    pub occurrences: Vec<OccurrenceRecord>,
    pub tokens: Vec<TokenRecord>,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub index: u64,
    pub token: u64,
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawned: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccurrenceRecord {
    pub event: String,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenRecord {
    pub token: u64,
    /// `injected` or `born`.
    pub origin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub born_at: Option<u64>,
    /// `pending`, `active`, `rested` or `dropped`.
    pub status: String,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub payload: Payload,
}

impl TraceFile {
    pub fn new(trace: &Trace, model: &Model, outcomes: Vec<Outcome>) -> Self {
        let path = |s: Option<crate::model::StageId>| s.map(|s| model.stage(s).path.clone());
        let steps = trace
            .steps
            .iter()
            .map(|s| StepRecord {
                index: s.index,
                token: s.token.0,
                kind: s.kind,
                from: path(s.from),
                to: path(s.to),
                branch: s.branch,
                spawned: s.spawned.map(|t| t.0),
                reason: s.reason.clone(),
            })
            .collect();
        let occurrences = trace
            .occurrences
            .iter()
            .map(|o| OccurrenceRecord {
                event: o.name.clone(),
                step: o.step,
            })
            .collect();
        let tokens = trace
            .tokens
            .iter()
            .map(|t| {
                let (origin, cause) = match &t.origin {
                    Origin::Injected { .. } => ("injected", None),
                    Origin::Born { cause, .. } => ("born", Some(cause.0)),
                };
                let (status, reason) = match &t.status {
                    TokenStatus::Pending => ("pending", None),
                    TokenStatus::Active => ("active", None),
                    TokenStatus::Rested => ("rested", None),
                    TokenStatus::Dropped { reason } => ("dropped", Some(reason.clone())),
                };
                TokenRecord {
                    token: t.token.0,
                    origin: origin.into(),
                    cause,
                    born_at: t.born_at,
                    status: status.into(),
                    stage: model.stage(t.stage).path.clone(),
                    reason,
                    payload: t.payload.clone(),
                }
            })
            .collect();
        TraceFile {
            format: TRACE_FORMAT.into(),
            step_limit_exceeded: trace.step_limit_exceeded,
            steps,
            occurrences,
            tokens,
            outcomes,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("trace serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn occurrence_names(&self) -> Vec<&str> {
        self.occurrences.iter().map(|o| o.event.as_str()).collect()
    }
}

/// What a bundled run must reproduce. Outcomes of class `Retained` are not
/// recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub occurrences: Vec<String>,
    pub outcomes: Vec<ExpectedOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedOutcome {
    pub class: OutcomeClass,
    pub location: String,
}

impl Expectation {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn of(trace: &TraceFile) -> Self {
        Expectation {
            occurrences: trace.occurrences.iter().map(|o| o.event.clone()).collect(),
            outcomes: settled(&trace.outcomes),
        }
    }

    /// First difference between this expectation and `trace`, if any.
    pub fn first_mismatch(&self, trace: &TraceFile) -> Option<String> {
        let found = trace.occurrence_names();
        for (i, want) in self.occurrences.iter().enumerate() {
            match found.get(i) {
                Some(got) if *got == want => {}
                Some(got) => {
                    return Some(format!("occurrence {}: expected `{want}`, found `{got}`", i + 1));
                }
                None => return Some(format!("occurrence {}: expected `{want}`, trace ended", i + 1)),
            }
        }
        if let Some(extra) = found.get(self.occurrences.len()) {
            return Some(format!(
                "occurrence {}: unexpected `{extra}` after the expected sequence",
                self.occurrences.len() + 1
            ));
        }
        let got = settled(&trace.outcomes);
        for (i, want) in self.outcomes.iter().enumerate() {
            match got.get(i) {
                Some(g) if g == want => {}
                Some(g) => {
                    return Some(format!(
                        "outcome {}: expected {} at {}, found {} at {}",
                        i + 1,
                        want.class,
                        want.location,
                        g.class,
                        g.location
                    ));
                }
                None => {
                    return Some(format!(
                        "outcome {}: expected {} at {}, none found",
                        i + 1,
                        want.class,
                        want.location
                    ));
                }
            }
        }
        got.get(self.outcomes.len()).map(|g| {
            format!(
                "outcome {}: unexpected {} at {}",
                self.outcomes.len() + 1,
                g.class,
                g.location
            )
        })
    }
}

fn settled(outcomes: &[Outcome]) -> Vec<ExpectedOutcome> {
    outcomes
        .iter()
        .filter(|o| o.class != OutcomeClass::Retained)
        .map(|o| ExpectedOutcome {
            class: o.class,
            location: o.location.clone(),
        })
        .collect()
}
