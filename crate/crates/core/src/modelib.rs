//! The bundled cases: an SMTP exchange and the email-security pipeline.
//!
//! Each case is a directory `cases/<name>/` holding `model.tm`,
//! `events.tme`, `scenarios/*.scn`, `expected/*.json` and an `EXCLUSIONS`
//! note listing step numbers that deliberately have no anchor. The copies
//! compiled into this crate can be swapped for an on-disk tree with
//! [`load_case_dir`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use thiserror::Error;

use crate::dsl::{self, ParseDiagnostic};
use crate::event::{Chronology, Event};
use crate::model::Model;
use crate::scenarios::{OutcomeClass, Scenario, ScenarioError};
use crate::trace_file::Expectation;

pub const CASE_NAMES: &[&str] = &["email-security", "smtp"];

/// The five email scenarios whose outcomes are fixed by the pipeline's
/// branch structure.
pub const CANONICAL_EMAIL_SCENARIOS: &[&str] = &[
    "local-delivered",
    "local-no-mailbox",
    "external-bad-source",
    "external-denied-gateway",
    "external-clean",
];

#[derive(Debug, Error)]
pub enum ModelibError {
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Parse {
        file: String,
        diagnostics: Vec<ParseDiagnostic>,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("expected/{name}.json: {source}")]
    Expectation {
        name: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundledCase {
    pub name: String,
    pub model_source: String,
    pub events_source: String,
    /// Scenario file text by scenario name (file stem).
    pub scenarios: BTreeMap<String, String>,
    /// Expectation file text by scenario name.
    pub expected: BTreeMap<String, String>,
    pub exclusions: String,
}

impl BundledCase {
    pub fn model(&self) -> Result<Model, ModelibError> {
        dsl::parse_named("model.tm", &self.model_source).map_err(|diagnostics| ModelibError::Parse {
            file: "model.tm".into(),
            diagnostics,
        })
    }

    pub fn events(&self, model: &Model) -> Result<(Vec<Event>, Chronology), ModelibError> {
        dsl::parse_events_named("events.tme", &self.events_source, model).map_err(|diagnostics| {
            ModelibError::Parse {
                file: "events.tme".into(),
                diagnostics,
            }
        })
    }

    pub fn scenario(&self, name: &str) -> Result<Scenario, ModelibError> {
        let text = self
            .scenarios
            .get(name)
            .ok_or_else(|| ModelibError::UnknownScenario(name.to_string()))?;
        Ok(Scenario::from_toml_str(text)?)
    }

    pub fn expectation(&self, name: &str) -> Result<Expectation, ModelibError> {
        let text = self
            .expected
            .get(name)
            .ok_or_else(|| ModelibError::UnknownScenario(name.to_string()))?;
        Expectation::from_json(text).map_err(|source| ModelibError::Expectation {
            name: name.to_string(),
            source,
        })
    }

    /// Step numbers the case's anchors must account for; empty for cases
    /// loaded from elsewhere.
    pub fn anchor_range(&self) -> RangeInclusive<u32> {
        match self.name.as_str() {
            "smtp" => 1..=15,
            "email-security" => 1..=81,
            _ => RangeInclusive::new(1, 0),
        }
    }

    pub fn audit_anchors(&self) -> Result<AnchorAudit, ModelibError> {
        Ok(audit_anchors(&self.model()?, self.anchor_range(), &self.exclusions))
    }
}

macro_rules! case_file {
    ($case:literal, $($part:expr),+) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/", $case, "/", $($part),+))
    };
}

macro_rules! entries {
    ($case:literal, $dir:literal, $ext:literal, [$($name:literal),* $(,)?]) => {
        [$(($name, case_file!($case, $dir, "/", $name, $ext))),*]
            .into_iter()
            .map(|(n, t)| (n.to_string(), t.to_string()))
            .collect()
    };
}

/// A case compiled into the crate.
pub fn builtin_case(name: &str) -> Result<BundledCase, ModelibError> {
    match name {
        "smtp" => Ok(BundledCase {
            name: name.into(),
            model_source: case_file!("smtp", "model.tm").into(),
            events_source: case_file!("smtp", "events.tme").into(),
            scenarios: entries!("smtp", "scenarios", ".scn", ["default"]),
            expected: entries!("smtp", "expected", ".json", ["default"]),
            exclusions: case_file!("smtp", "EXCLUSIONS").into(),
        }),
        "email-security" => Ok(BundledCase {
            name: name.into(),
            model_source: case_file!("email-security", "model.tm").into(),
            events_source: case_file!("email-security", "events.tme").into(),
            scenarios: entries!(
                "email-security",
                "scenarios",
                ".scn",
                [
                    "external-bad-source",
                    "external-clean",
                    "external-denied-external",
                    "external-denied-gateway",
                    "external-denied-internal",
                    "external-no-mx",
                    "external-no-nat",
                    "local-delivered",
                    "local-no-mailbox",
                ]
            ),
            expected: entries!(
                "email-security",
                "expected",
                ".json",
                [
                    "external-bad-source",
                    "external-clean",
                    "external-denied-external",
                    "external-denied-gateway",
                    "external-denied-internal",
                    "external-no-mx",
                    "external-no-nat",
                    "local-delivered",
                    "local-no-mailbox",
                ]
            ),
            exclusions: case_file!("email-security", "EXCLUSIONS").into(),
        }),
        other => Err(ModelibError::UnknownCase(other.to_string())),
    }
}

fn read(path: &Path) -> Result<String, ModelibError> {
    fs::read_to_string(path).map_err(|source| ModelibError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_dir_by_ext(dir: &Path, ext: &str) -> Result<BTreeMap<String, String>, ModelibError> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    let entries = fs::read_dir(dir).map_err(|source| ModelibError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|source| ModelibError::Io {
                path: dir.display().to_string(),
                source,
            })?
            .path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), read(&path)?);
            }
        }
    }
    Ok(out)
}

/// Loads a case from `dir` (a `cases/<name>` directory).
pub fn load_case_dir(dir: &Path) -> Result<BundledCase, ModelibError> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let exclusions_path = dir.join("EXCLUSIONS");
    Ok(BundledCase {
        name,
        model_source: read(&dir.join("model.tm"))?,
        events_source: read(&dir.join("events.tme"))?,
        scenarios: read_dir_by_ext(&dir.join("scenarios"), "scn")?,
        expected: read_dir_by_ext(&dir.join("expected"), "json")?,
        exclusions: if exclusions_path.exists() {
            read(&exclusions_path)?
        } else {
            String::new()
        },
    })
}

/// The SMTP events in protocol order.
pub fn expected_smtp_order() -> Vec<&'static str> {
    vec![
        "ehlo-sent",
        "ehlo-ack",
        "mail-from",
        "mail-from-ok",
        "rcpt-to",
        "rcpt-to-ok",
        "data-request",
        "data-ready",
        "data-line",
        "message-accepted",
        "quit",
        "connection-closed",
    ]
}

/// Outcome class of the one packet in a canonical email scenario, with the
/// machine where it is dropped.
pub fn expected_email_outcome(scenario: &str) -> Result<(OutcomeClass, Option<&'static str>), ModelibError> {
    Ok(match scenario {
        "local-delivered" => (OutcomeClass::DeliveredLocal, None),
        "local-no-mailbox" => (OutcomeClass::Dropped, Some("EmailSystem")),
        "external-bad-source" => (OutcomeClass::Dropped, Some("InternalFirewall")),
        "external-denied-gateway" => (OutcomeClass::Dropped, Some("Gateway")),
        "external-clean" => (OutcomeClass::DeliveredExternal, None),
        other => return Err(ModelibError::UnknownScenario(other.to_string())),
    })
}

/// Where each step number is anchored, and which numbers are unaccounted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorAudit {
    pub range: RangeInclusive<u32>,
    /// Anchor number to the stages (`path`) and flows (`from -> to`) carrying it.
    pub sites: BTreeMap<u32, Vec<String>>,
    pub excluded: BTreeSet<u32>,
    /// In range but neither anchored nor excluded.
    pub missing: Vec<u32>,
    /// Anchored on more than one element.
    pub duplicated: Vec<u32>,
    /// Both anchored and listed as excluded.
    pub contradicted: Vec<u32>,
    /// Anchored or excluded but outside the range.
    pub out_of_range: Vec<u32>,
}

impl AnchorAudit {
    pub fn accounted(&self) -> usize {
        self.range.clone().filter(|n| !self.missing.contains(n)).count()
    }

    pub fn total(&self) -> usize {
        self.range.clone().count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
            && self.duplicated.is_empty()
            && self.contradicted.is_empty()
            && self.out_of_range.is_empty()
    }
}

/// Numbers listed in an exclusions note: the leading integer of each line,
/// ignoring blank lines and `#` comments.
pub fn parse_exclusions(note: &str) -> BTreeSet<u32> {
    note.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let digits: String = l.chars().take_while(char::is_ascii_digit).collect();
            digits.parse().ok()
        })
        .collect()
}

pub fn audit_anchors(model: &Model, range: RangeInclusive<u32>, exclusions: &str) -> AnchorAudit {
    let mut sites: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for s in model.stages() {
        for a in &s.anchors {
            sites.entry(*a).or_default().push(s.path.clone());
        }
    }
    for f in model.flows() {
        for a in &f.anchors {
            sites
                .entry(*a)
                .or_default()
                .push(format!("{} -> {}", model.stage(f.from).path, model.stage(f.to).path));
        }
    }
    for t in model.triggers() {
        for a in &t.anchors {
            sites
                .entry(*a)
                .or_default()
                .push(format!("{} => {}", model.stage(t.from).path, model.stage(t.to).path));
        }
    }
    let excluded = parse_exclusions(exclusions);
    let missing = range
        .clone()
        .filter(|n| !sites.contains_key(n) && !excluded.contains(n))
        .collect();
    let duplicated = sites.iter().filter(|(_, v)| v.len() > 1).map(|(n, _)| *n).collect();
    let contradicted = excluded.iter().filter(|n| sites.contains_key(n)).copied().collect();
    let out_of_range = sites
        .keys()
        .chain(excluded.iter())
        .filter(|n| !range.contains(n))
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    AnchorAudit {
        range,
        sites,
        excluded,
        missing,
        duplicated,
        contradicted,
        out_of_range,
    }
}
