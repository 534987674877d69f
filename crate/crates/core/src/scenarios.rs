//! Simulation environments: configuration tables, the predicate and
//! payload-operation registry, and end-to-end outcome classification.
//!
//! # File format
//!
//! Scenario files are TOML:
//!
//! ```toml
//! current_domain = "corp.gov"
//! email_server_id = "mail-01"
//! mailboxes = ["alice@corp.gov"]
//!
//! [[internal_fw]]                 # first match wins
//! action = "deny"
//! match = { to_domain = "*.ru" }
//! [[internal_fw]]                 # a non-empty list must end with a default
//! action = "permit"
//!
//! [[dns]]
//! domain = "yahoo.com"
//! mx_host = "mx1.yahoo.com"
//! ip = "203.0.113.5"
//!
//! [[nat]]
//! private = "10.0.0.5"
//! public = "198.51.100.7"
//!
//! [[routes]]
//! prefix = "203.0.113."
//! next_hop = "isp-edge"
//!
//! [[inject]]
//! stage = "Workstation.Client.draft"
//! count = 1
//! payload = { from = "bob@corp.gov", to = "alice@yahoo.com" }
//!
//! [delivery]
//! local = "Workstation.Inbox.deliver"
//! external = "IspRouter.cloud"
//! ```
//!
//! An omitted policy list permits everything. Match patterns are
//! case-insensitive globs (`*`, `?`) over payload attributes plus the
//! derived `to_domain` and `from_domain`; a list attribute matches when any
//! element does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wildmatch::WildMatch;

use crate::engine::{EnvError, Environment, Injection, TokenStatus, Trace};
use crate::model::Model;
use crate::value::{Payload, Value};

/// Guard names understood by [`Scenario::eval_predicate`].
pub const PREDICATES: &[&str] = &[
    "same_domain",
    "mailbox_exists",
    "source_is_email_server",
    "internal_fw_permits",
    "gateway_permits",
    "external_fw_permits",
    "has_attachment",
    "address_stored",
    "more_lines",
];

/// Constructor and transform names understood by [`Scenario::apply_operation`].
pub const OPERATIONS: &[&str] = &[
    "copy",
    "header",
    "packet",
    "ehlo_ack",
    "mail_from",
    "ok",
    "rcpt_to",
    "data_request",
    "ready",
    "next_line",
    "accepted",
    "quit",
    "close",
    "assign_destination_ip",
    "nat_source",
    "route",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema violation at `{field}`: {message}")]
    SchemaViolation { field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::SchemaViolation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Field path of a schema violation.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::SchemaViolation { field, .. } => Some(field),
            ScenarioError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("NoMXRecord: no MX record for `{0}`")]
    NoMXRecord(String),
    #[error("NoNatMapping: no NAT mapping for `{0}`")]
    NoNatMapping(String),
    #[error("payload has no `{0}` attribute")]
    MissingAttribute(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Permit,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub action: Action,
    #[serde(rename = "match", default)]
    pub matches: BTreeMap<String, String>,
}

impl Policy {
    pub fn is_default(&self) -> bool {
        self.matches.is_empty()
    }

    fn applies(&self, payload: &Payload) -> bool {
        self.matches.iter().all(|(attr, pattern)| {
            let glob = WildMatch::new_case_insensitive(pattern);
            attribute(payload, attr)
                .map(|v| v.scalars().iter().any(|s| glob.matches(s)))
                .unwrap_or(false)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnsRecord {
    pub mx_host: String,
    pub ip: String,
}

/// Stages whose resting tokens count as delivered.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delivery {
    pub local: Option<String>,
    pub external: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub current_domain: String,
    pub email_server_id: Option<String>,
    pub mailboxes: BTreeSet<String>,
    pub internal_fw: Vec<Policy>,
    pub gateway: Vec<Policy>,
    pub external_fw: Vec<Policy>,
    pub dns: BTreeMap<String, DnsRecord>,
    pub nat: BTreeMap<String, String>,
    pub routes: BTreeMap<String, String>,
    pub injections: Vec<Injection>,
    pub delivery: Delivery,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    current_domain: String,
    #[serde(default)]
    email_server_id: Option<String>,
    #[serde(default)]
    mailboxes: Vec<String>,
    #[serde(default)]
    internal_fw: Vec<Policy>,
    #[serde(default)]
    gateway: Vec<Policy>,
    #[serde(default)]
    external_fw: Vec<Policy>,
    #[serde(default)]
    dns: Vec<RawDns>,
    #[serde(default)]
    nat: Vec<RawNat>,
    #[serde(default)]
    routes: Vec<RawRoute>,
    #[serde(default)]
    inject: Vec<RawInjection>,
    #[serde(default)]
    delivery: Delivery,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDns {
    domain: String,
    mx_host: String,
    ip: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNat {
    private: String,
    public: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoute {
    prefix: String,
    next_hop: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInjection {
    stage: String,
    #[serde(default = "one")]
    count: u32,
    #[serde(default)]
    payload: Payload,
}

fn one() -> u32 {
    1
}

fn non_empty(field: String, value: &str) -> Result<(), ScenarioError> {
    if value.trim().is_empty() {
        Err(ScenarioError::schema(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn check_policies(field: &str, list: &[Policy]) -> Result<(), ScenarioError> {
    match list.last() {
        Some(last) if !last.is_default() => Err(ScenarioError::schema(
            field,
            "policy list must end with a default entry (no `match`)",
        )),
        _ => Ok(()),
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    /// Parses and validates scenario text.
    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::schema("", e.message().to_string()))?;
        let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ScenarioError::schema(if field == "." { String::new() } else { field }, e.inner().message().to_string())
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Scenario, ScenarioError> {
        let mut mailboxes = BTreeSet::new();
        for (i, m) in raw.mailboxes.into_iter().enumerate() {
            non_empty(format!("mailboxes[{i}]"), &m)?;
            mailboxes.insert(m);
        }
        check_policies("internal_fw", &raw.internal_fw)?;
        check_policies("gateway", &raw.gateway)?;
        check_policies("external_fw", &raw.external_fw)?;

        let mut dns = BTreeMap::new();
        for (i, r) in raw.dns.into_iter().enumerate() {
            non_empty(format!("dns[{i}].domain"), &r.domain)?;
            non_empty(format!("dns[{i}].mx_host"), &r.mx_host)?;
            non_empty(format!("dns[{i}].ip"), &r.ip)?;
            let key = r.domain.to_ascii_lowercase();
            if dns.contains_key(&key) {
                return Err(ScenarioError::schema("dns", format!("domain `{}` listed twice", r.domain)));
            }
            dns.insert(key, DnsRecord { mx_host: r.mx_host, ip: r.ip });
        }
        let mut nat = BTreeMap::new();
        for (i, r) in raw.nat.into_iter().enumerate() {
            non_empty(format!("nat[{i}].private"), &r.private)?;
            non_empty(format!("nat[{i}].public"), &r.public)?;
            if nat.insert(r.private.clone(), r.public).is_some() {
                return Err(ScenarioError::schema("nat", format!("address `{}` mapped twice", r.private)));
            }
        }
        let mut routes = BTreeMap::new();
        for (i, r) in raw.routes.into_iter().enumerate() {
            non_empty(format!("routes[{i}].next_hop"), &r.next_hop)?;
            if routes.insert(r.prefix.clone(), r.next_hop).is_some() {
                return Err(ScenarioError::schema("routes", format!("prefix `{}` listed twice", r.prefix)));
            }
        }
        let mut injections = Vec::new();
        for (i, inj) in raw.inject.into_iter().enumerate() {
            non_empty(format!("inject[{i}].stage"), &inj.stage)?;
            if inj.count == 0 {
                return Err(ScenarioError::schema(format!("inject[{i}].count"), "count must be at least 1"));
            }
            injections.push(Injection {
                stage: inj.stage,
                payload: inj.payload,
                count: inj.count,
            });
        }
        Ok(Scenario {
            current_domain: raw.current_domain,
            email_server_id: raw.email_server_id,
            mailboxes,
            internal_fw: raw.internal_fw,
            gateway: raw.gateway,
            external_fw: raw.external_fw,
            dns,
            nat,
            routes,
            injections,
            delivery: raw.delivery,
        })
    }

    /// Evaluates a named guard predicate. Pure in `payload` and `self`.
    pub fn eval_predicate(&self, name: &str, payload: &Payload) -> Result<bool, EnvError> {
        let text = |key: &str| payload.get(key).and_then(Value::as_text);
        Ok(match name {
            "same_domain" => text("to").is_some_and(|to| {
                let suffix = format!("@{}", self.current_domain).to_ascii_lowercase();
                !self.current_domain.is_empty() && to.to_ascii_lowercase().ends_with(&suffix)
            }),
            "mailbox_exists" => text("to").is_some_and(|to| self.mailboxes.contains(to)),
            "source_is_email_server" => match (&self.email_server_id, text("source_id")) {
                (Some(id), Some(src)) => id == src,
                _ => false,
            },
            "internal_fw_permits" => permits(&self.internal_fw, payload),
            "gateway_permits" => permits(&self.gateway, payload),
            "external_fw_permits" => permits(&self.external_fw, payload),
            "has_attachment" => payload.get("has_attachment") == Some(&Value::Bool(true)),
            "address_stored" => payload.get("address_stored") == Some(&Value::Bool(true)),
            "more_lines" => pending_lines(payload).is_some_and(|l| !l.is_empty()),
            other => return Err(EnvError::GuardUnbound(other.to_string())),
        })
    }

    /// MX record for `domain` (case-insensitive).
    pub fn mx_lookup(&self, domain: &str) -> Result<(String, String), LookupError> {
        self.dns
            .get(&domain.to_ascii_lowercase())
            .map(|r| (r.mx_host.clone(), r.ip.clone()))
            .ok_or_else(|| LookupError::NoMXRecord(domain.to_string()))
    }

    /// Public image of a private address.
    pub fn nat_translate(&self, ip: &str) -> Result<String, LookupError> {
        self.nat
            .get(ip)
            .cloned()
            .ok_or_else(|| LookupError::NoNatMapping(ip.to_string()))
    }

    /// Next hop for `ip`: the longest matching route prefix, else `default`.
    pub fn next_hop(&self, ip: &str) -> String {
        self.routes
            .iter()
            .filter(|(prefix, _)| ip.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len())
            .map(|(_, hop)| hop.clone())
            .unwrap_or_else(|| "default".to_string())
    }

    /// Applies a named constructor or transform to a payload.
    pub fn apply_operation(&self, name: &str, payload: &Payload) -> Result<Payload, EnvError> {
        let mut p = payload.clone();
        let mut set = |key: &str, value: Value| {
            p.insert(key.to_string(), value);
        };
        let text = |key: &str| payload.get(key).map(Value::to_string).unwrap_or_default();
        match name {
            "copy" => {}
            "header" => set("part", "header".into()),
            "packet" => set("part", "packet".into()),
            "ehlo_ack" => set("command", "250 EHLO acknowledged".into()),
            "mail_from" => set("command", format!("MAIL FROM:<{}>", text("from")).into()),
            "ok" => set("command", "250 OK".into()),
            "rcpt_to" => set("command", format!("RCPT TO:<{}>", text("to")).into()),
            "data_request" => set("command", "DATA".into()),
            "ready" => set("command", "354 ready".into()),
            "next_line" => {
                let lines = pending_lines(payload).unwrap_or(&[]);
                let (line, rest) = match lines.split_first() {
                    Some((head, rest)) => (head.clone(), rest.to_vec()),
                    None => (Value::Text(String::new()), Vec::new()),
                };
                set("command", line.clone());
                set("line", line);
                set("remaining", Value::List(rest));
            }
            "accepted" => set("command", "250 message accepted".into()),
            "quit" => set("command", "QUIT".into()),
            "close" => set("command", "221 closing connection".into()),
            "assign_destination_ip" => {
                let domain = attribute(payload, "to_domain")
                    .and_then(|v| v.as_text().map(str::to_string))
                    .ok_or_else(|| lookup(LookupError::MissingAttribute("to".into())))?;
                let (host, ip) = self.mx_lookup(&domain).map_err(lookup)?;
                set("mx_host", host.into());
                set("dest_ip", ip.into());
            }
            "nat_source" => {
                let private = payload
                    .get("source_ip")
                    .and_then(Value::as_text)
                    .ok_or_else(|| lookup(LookupError::MissingAttribute("source_ip".into())))?;
                let public = self.nat_translate(private).map_err(lookup)?;
                set("private_ip", private.into());
                set("source_ip", public.into());
            }
            "route" => {
                let hop = self.next_hop(&text("dest_ip"));
                set("next_hop", hop.into());
            }
            other => return Err(EnvError::ConstructorUnbound(other.to_string())),
        }
        Ok(p)
    }

    /// Classifies every token of a finished trace.
    pub fn classify_outcomes(&self, trace: &Trace, model: &Model) -> Vec<Outcome> {
        let local = self.delivery.local.as_deref().and_then(|p| model.stage_by_path(p));
        let external = self.delivery.external.as_deref().and_then(|p| model.stage_by_path(p));
        trace
            .tokens
            .iter()
            .map(|t| {
                let location = model.stage(t.stage).path.clone();
                let (class, reason) = match &t.status {
                    TokenStatus::Dropped { reason } => (OutcomeClass::Dropped, Some(reason.clone())),
                    TokenStatus::Rested if Some(t.stage) == local => (OutcomeClass::DeliveredLocal, None),
                    TokenStatus::Rested if Some(t.stage) == external => (OutcomeClass::DeliveredExternal, None),
                    _ => (OutcomeClass::Retained, None),
                };
                Outcome {
                    token: t.token.0,
                    class,
                    location,
                    reason,
                }
            })
            .collect()
    }
}

fn lookup(err: LookupError) -> EnvError {
    EnvError::Lookup(err.to_string())
}

fn permits(list: &[Policy], payload: &Payload) -> bool {
    list.iter()
        .find(|p| p.applies(payload))
        .is_none_or(|p| p.action == Action::Permit)
}

/// Lines still to be sent: `remaining` once sending has started, else `lines`.
fn pending_lines(payload: &Payload) -> Option<&[Value]> {
    payload
        .get("remaining")
        .or_else(|| payload.get("lines"))
        .and_then(Value::as_list)
}

/// A payload attribute, including the derived `to_domain`/`from_domain`.
fn attribute(payload: &Payload, name: &str) -> Option<Value> {
    if let Some(v) = payload.get(name) {
        return Some(v.clone());
    }
    let address = match name {
        "to_domain" => payload.get("to")?,
        "from_domain" => payload.get("from")?,
        _ => return None,
    };
    let text = address.as_text()?;
    text.rsplit_once('@').map(|(_, d)| Value::Text(d.to_string()))
}

impl Environment for Scenario {
    fn injections(&self) -> &[Injection] {
        &self.injections
    }

    fn has_guard(&self, name: &str) -> bool {
        PREDICATES.contains(&name)
    }

    fn has_operation(&self, name: &str) -> bool {
        OPERATIONS.contains(&name)
    }

    fn eval_guard(&self, name: &str, payload: &Payload) -> Result<bool, EnvError> {
        self.eval_predicate(name, payload)
    }

    fn apply(&self, name: &str, payload: &Payload) -> Result<Payload, EnvError> {
        self.apply_operation(name, payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeClass {
    DeliveredLocal,
    DeliveredExternal,
    Dropped,
    /// Resting somewhere other than a delivery stage (an intermediate
    /// message, or a run cut short by the step limit).
    Retained,
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub token: u64,
    pub class: OutcomeClass,
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}
