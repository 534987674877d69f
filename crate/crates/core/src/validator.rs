//! Static checks over a model: stage adjacency, boundary crossings, guard
//! wiring, orphans, reachability, event regions and chronologies.
//!
//! Allowed flows inside one machine:
//!
//! | from     | to                 |
//! |----------|--------------------|
//! | create   | process, release   |
//! | receive  | process, release   |
//! | process  | release            |
//! | release  | transfer           |
//! | transfer | receive            |
//!
//! A flow between two different machines must go transfer to transfer.
//! Triggers are exempt from the table.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::event::{Chronology, Event, EventId};
use crate::model::{Flow, FlowId, Model, StageId, StageKind, TriggerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Code {
    #[serde(rename = "E_ADJ")]
    Adjacency,
    #[serde(rename = "E_XFER")]
    Boundary,
    #[serde(rename = "E_ORPHAN")]
    Orphan,
    #[serde(rename = "E_GUARD")]
    Guard,
    #[serde(rename = "E_REGION")]
    Region,
    #[serde(rename = "E_CHRONO")]
    Chronology,
    #[serde(rename = "W_UNREACHABLE")]
    Unreachable,
    #[serde(rename = "W_TRIGGER")]
    TriggerTarget,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Adjacency => "E_ADJ",
            Code::Boundary => "E_XFER",
            Code::Orphan => "E_ORPHAN",
            Code::Guard => "E_GUARD",
            Code::Region => "E_REGION",
            Code::Chronology => "E_CHRONO",
            Code::Unreachable => "W_UNREACHABLE",
            Code::TriggerTarget => "W_TRIGGER",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Code::Unreachable | Code::TriggerTarget => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// What a diagnostic is about. Ordering follows declaration order within
/// each element class: stages, then flows, triggers, events, chronology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subject {
    Stage(StageId),
    Flow(FlowId),
    Trigger(TriggerId),
    Event(EventId),
    ChronologyEdge(usize),
    Chronology,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: Code,
    pub subject: Subject,
    /// Human-readable path of the subject.
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        self.code.severity()
    }

    pub fn is_error(&self) -> bool {
        self.severity() == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    /// `CODE severity path message`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.code, self.severity(), self.path, self.message)
    }
}

/// Serializable form used in report files.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRecord {
    pub code: Code,
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl From<&Diagnostic> for DiagnosticRecord {
    fn from(d: &Diagnostic) -> Self {
        Self {
            code: d.code,
            severity: d.severity(),
            subject: d.path.clone(),
            message: d.message.clone(),
        }
    }
}

pub fn flow_path(model: &Model, flow: &Flow) -> String {
    format!("{}->{}", model.stage(flow.from).path, model.stage(flow.to).path)
}

/// Whether a flow between two stages of one machine is in the table.
pub fn intra_allowed(from: StageKind, to: StageKind) -> bool {
    use StageKind::*;
    matches!(
        (from, to),
        (Create, Process)
            | (Create, Release)
            | (Receive, Process)
            | (Receive, Release)
            | (Process, Release)
            | (Release, Transfer)
            | (Transfer, Receive)
    )
}

pub fn check_stage_adjacency(flow: &Flow, model: &Model) -> Option<Diagnostic> {
    let from = model.stage(flow.from);
    let to = model.stage(flow.to);
    let path = flow_path(model, flow);
    if from.owner == to.owner {
        (!intra_allowed(from.kind, to.kind)).then(|| Diagnostic {
            code: Code::Adjacency,
            subject: Subject::Flow(flow.id),
            path,
            message: format!("{} may not flow to {} within a machine", from.kind, to.kind),
        })
    } else {
        let legal = from.kind == StageKind::Transfer && to.kind == StageKind::Transfer;
        (!legal).then(|| Diagnostic {
            code: Code::Boundary,
            subject: Subject::Flow(flow.id),
            path,
            message: format!(
                "crossing from {} to {} must go transfer to transfer, found {} to {}",
                model.thimac(from.owner).path,
                model.thimac(to.owner).path,
                from.kind,
                to.kind
            ),
        })
    }
}

/// Stages every run may start from: all creates, plus receives with no
/// incoming edge (where a scenario can inject things from outside).
pub fn entry_stages(model: &Model) -> BTreeSet<StageId> {
    let mut has_incoming = vec![false; model.stages().len()];
    for f in model.flows() {
        has_incoming[f.to.index()] = true;
    }
    for t in model.triggers() {
        has_incoming[t.to.index()] = true;
    }
    model
        .stages()
        .iter()
        .filter(|s| {
            s.kind == StageKind::Create || (s.kind == StageKind::Receive && !has_incoming[s.id.index()])
        })
        .map(|s| s.id)
        .collect()
}

/// Checks the model itself. Empty result iff every check passes.
pub fn validate(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = model.stages().len();
    let mut degree = vec![0usize; n];
    for f in model.flows() {
        degree[f.from.index()] += 1;
        degree[f.to.index()] += 1;
    }
    for t in model.triggers() {
        degree[t.from.index()] += 1;
        degree[t.to.index()] += 1;
    }

    let reachable = model
        .reachable_stages(entry_stages(model))
        .expect("entry stages exist");

    for stage in model.stages() {
        if n > 1 && degree[stage.id.index()] == 0 {
            out.push(Diagnostic {
                code: Code::Orphan,
                subject: Subject::Stage(stage.id),
                path: stage.path.clone(),
                message: "stage has no flows or triggers".into(),
            });
        }
        if stage.guard.is_some() && stage.kind != StageKind::Process {
            out.push(Diagnostic {
                code: Code::Guard,
                subject: Subject::Stage(stage.id),
                path: stage.path.clone(),
                message: format!("guard on a {} stage; only process stages branch", stage.kind),
            });
        }
        if stage.transform.is_some() && stage.kind != StageKind::Process {
            out.push(Diagnostic {
                code: Code::Guard,
                subject: Subject::Stage(stage.id),
                path: stage.path.clone(),
                message: format!("apply on a {} stage; only process stages change things", stage.kind),
            });
        }
        if stage.guard.is_some() {
            let labels: BTreeSet<&str> = model
                .outgoing_flows(stage.id)
                .iter()
                .filter_map(|f| model.flow(*f).branch.as_deref())
                .collect();
            if labels.is_empty() && !model.outgoing_flows(stage.id).is_empty() {
                out.push(Diagnostic {
                    code: Code::Guard,
                    subject: Subject::Stage(stage.id),
                    path: stage.path.clone(),
                    message: "guarded stage has no labelled outgoing flow".into(),
                });
            }
        }
        if !reachable.contains(&stage.id) {
            out.push(Diagnostic {
                code: Code::Unreachable,
                subject: Subject::Stage(stage.id),
                path: stage.path.clone(),
                message: "not reachable from any create stage or entry receive stage".into(),
            });
        }
    }

    for flow in model.flows() {
        if let Some(d) = check_stage_adjacency(flow, model) {
            out.push(d);
        }
        let source = model.stage(flow.from);
        match (&flow.branch, &source.guard) {
            (Some(b), None) => out.push(Diagnostic {
                code: Code::Guard,
                subject: Subject::Flow(flow.id),
                path: flow_path(model, flow),
                message: format!("branch `{b}` on a flow from an unguarded stage"),
            }),
            (Some(b), Some(_)) if b != "true" && b != "false" => out.push(Diagnostic {
                code: Code::Guard,
                subject: Subject::Flow(flow.id),
                path: flow_path(model, flow),
                message: format!("branch label `{b}` is neither `true` nor `false`"),
            }),
            (None, Some(g)) => out.push(Diagnostic {
                code: Code::Guard,
                subject: Subject::Flow(flow.id),
                path: flow_path(model, flow),
                message: format!("unlabelled flow leaves a stage guarded by `{g}`"),
            }),
            _ => {}
        }
    }

    for trigger in model.triggers() {
        let target = model.stage(trigger.to);
        if !matches!(target.kind, StageKind::Create | StageKind::Process) {
            out.push(Diagnostic {
                code: Code::TriggerTarget,
                subject: Subject::Trigger(trigger.id),
                path: format!("{}=>{}", model.stage(trigger.from).path, target.path),
                message: format!("trigger targets a {} stage", target.kind),
            });
        }
        if trigger.constructor.is_some() && target.kind != StageKind::Create {
            out.push(Diagnostic {
                code: Code::Guard,
                subject: Subject::Trigger(trigger.id),
                path: format!("{}=>{}", model.stage(trigger.from).path, target.path),
                message: "constructor on a trigger that does not target a create stage".into(),
            });
        }
    }

    out.sort_by(|a, b| a.subject.cmp(&b.subject));
    out
}

pub fn check_event_region(event: &Event, model: &Model) -> Option<Diagnostic> {
    let region_diag = |message: String| Diagnostic {
        code: Code::Region,
        subject: Subject::Event(event.id),
        path: event.name.clone(),
        message,
    };
    if event.region.is_empty() {
        return Some(region_diag("region is empty".into()));
    }
    let region = match event.resolve(model) {
        Ok(r) => r,
        Err(missing) => return Some(region_diag(format!("region element `{missing}` does not exist"))),
    };
    let stages: Vec<StageId> = region.touched_stages(model).into_iter().collect();
    let index: HashMap<StageId, usize> = stages.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut dsu = DisjointSets::new(stages.len());

    let mut by_owner: HashMap<_, usize> = HashMap::new();
    for (i, s) in stages.iter().enumerate() {
        let owner = model.stage(*s).owner;
        match by_owner.get(&owner) {
            Some(j) => dsu.union(i, *j),
            None => {
                by_owner.insert(owner, i);
            }
        }
    }
    let edges = model
        .flows()
        .iter()
        .map(|f| (f.from, f.to))
        .chain(model.triggers().iter().map(|t| (t.from, t.to)));
    for (a, b) in edges {
        if let (Some(i), Some(j)) = (index.get(&a), index.get(&b)) {
            dsu.union(*i, *j);
        }
    }
    let root = dsu.find(0);
    let disconnected: Vec<&str> = (0..stages.len())
        .filter(|i| dsu.find(*i) != root)
        .map(|i| model.stage(stages[i]).path.as_str())
        .collect();
    if disconnected.is_empty() {
        None
    } else {
        Some(region_diag(format!(
            "region is not connected; detached: {}",
            disconnected.join(", ")
        )))
    }
}

/// Checks acyclicity and that every edge A -> B is backed by a flow or
/// trigger path from A's region to B's region.
pub fn check_chronology(chronology: &Chronology, model: &Model, events: &[Event]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let name = |id: EventId| {
        events
            .get(id.index())
            .map(|e| e.name.clone())
            .unwrap_or_else(|| format!("#{id}"))
    };
    if let Some(cycle) = chronology.find_cycle() {
        let names: Vec<String> = cycle.iter().map(|e| name(*e)).collect();
        out.push(Diagnostic {
            code: Code::Chronology,
            subject: Subject::Chronology,
            path: "chronology".into(),
            message: format!("cycle {}", names.join(" -> ")),
        });
    }
    for (i, (before, after)) in chronology.edges.iter().enumerate() {
        let path = format!("{}->{}", name(*before), name(*after));
        let edge_diag = |message: String| Diagnostic {
            code: Code::Chronology,
            subject: Subject::ChronologyEdge(i),
            path: path.clone(),
            message,
        };
        let (Some(a), Some(b)) = (events.get(before.index()), events.get(after.index())) else {
            out.push(edge_diag("edge references an undeclared event".into()));
            continue;
        };
        let (Ok(ra), Ok(rb)) = (a.resolve(model), b.resolve(model)) else {
            out.push(edge_diag("edge references an event with an unresolved region".into()));
            continue;
        };
        let from = ra.touched_stages(model);
        let to = rb.touched_stages(model);
        let reach = model.reachable_stages(from).expect("resolved stages exist");
        if reach.is_disjoint(&to) {
            out.push(edge_diag(format!(
                "no flow or trigger path from `{}` to `{}`",
                a.name, b.name
            )));
        }
    }
    out.sort_by(|a, b| a.subject.cmp(&b.subject));
    out
}

/// Region and chronology checks for a whole event file.
pub fn validate_events(model: &Model, events: &[Event], chronology: &Chronology) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = events
        .iter()
        .filter_map(|e| check_event_region(e, model))
        .collect();
    out.extend(check_chronology(chronology, model, events));
    out
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}
