//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::hash::{DefaultHasher, Hash, Hasher};

use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;

use thinging::engine::{EnvError, Environment, Injection};
use thinging::model::{Model, StageId, StageKind};
use thinging::value::{Payload, Value};

const STAGE_NAMES: &[&str] = &[
    "in", "out", "get", "send", "check", "flow", "machine", "create", "a-b", "x_1", "header", "when",
];
const MACHINE_NAMES: &[&str] = &["Server", "Email-System", "Fw", "M", "Trigger", "Node_2"];

#[derive(Debug, Clone)]
pub struct StageSpec {
    machine: usize,
    kind: usize,
    name: usize,
    guard: bool,
    apply: bool,
    sink: bool,
    anchors: Vec<u32>,
    label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EdgeSpec {
    from: usize,
    to: usize,
    trigger: bool,
    constructor: bool,
    anchors: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    parents: Vec<usize>,
    stages: Vec<StageSpec>,
    edges: Vec<EdgeSpec>,
    layout: u64,
}

fn stage_spec() -> impl Strategy<Value = StageSpec> {
    (
        any::<usize>(),
        0usize..5,
        any::<usize>(),
        any::<bool>(),
        any::<bool>(),
        prop::bool::weighted(0.15),
        vec(1u32..200, 0..3),
        option::weighted(0.3, "[a-z \"\\\\]{0,10}"),
    )
        .prop_map(|(machine, kind, name, guard, apply, sink, anchors, label)| StageSpec {
            machine,
            kind,
            name,
            guard,
            apply,
            sink,
            anchors,
            label,
        })
}

fn edge_spec() -> impl Strategy<Value = EdgeSpec> {
    (
        any::<usize>(),
        any::<usize>(),
        prop::bool::weighted(0.25),
        any::<bool>(),
        vec(1u32..200, 0..2),
    )
        .prop_map(|(from, to, trigger, constructor, anchors)| EdgeSpec {
            from,
            to,
            trigger,
            constructor,
            anchors,
        })
}

/// Random model specifications; render them with [`render`].
pub fn model_spec() -> impl Strategy<Value = ModelSpec> {
    (
        vec(any::<usize>(), 1..6),
        vec(stage_spec(), 1..14),
        vec(edge_spec(), 0..24),
        any::<u64>(),
    )
        .prop_map(|(parents, stages, edges, layout)| ModelSpec {
            parents,
            stages,
            edges,
            layout,
        })
}

/// Source text of random well-formed models.
pub fn model_text() -> impl Strategy<Value = String> {
    model_spec().prop_map(|s| render(&s))
}

struct Laid {
    machine_names: Vec<String>,
    machine_paths: Vec<String>,
    /// (machine, kind, name, attribute text)
    stages: Vec<(usize, StageKind, String, String)>,
}

fn lay_out(spec: &ModelSpec) -> Laid {
    let n = spec.parents.len();
    let mut machine_names = Vec::with_capacity(n);
    let mut machine_paths: Vec<String> = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("{}{i}", MACHINE_NAMES[spec.parents[i] % MACHINE_NAMES.len()]);
        let path = match parent_of(spec, i) {
            Some(p) => format!("{}.{name}", machine_paths[p]),
            None => name.clone(),
        };
        machine_names.push(name);
        machine_paths.push(path);
    }
    let mut used: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    let mut stages = Vec::new();
    for (i, s) in spec.stages.iter().enumerate() {
        let machine = s.machine % n;
        let kind = StageKind::ALL[s.kind];
        let mut name = STAGE_NAMES[s.name % STAGE_NAMES.len()].to_string();
        if !used[machine].insert(name.clone()) {
            name = format!("{name}-{i}");
            used[machine].insert(name.clone());
        }
        let mut attrs = String::new();
        if kind == StageKind::Process && s.guard {
            attrs.push_str(" guard g");
        }
        if kind == StageKind::Process && s.apply {
            attrs.push_str(" apply bump");
        }
        if s.sink {
            attrs.push_str(" sink");
        }
        if !s.anchors.is_empty() {
            let list: Vec<String> = s.anchors.iter().map(u32::to_string).collect();
            let _ = write!(attrs, " anchor {}", list.join(", "));
        }
        if let Some(l) = &s.label {
            let _ = write!(attrs, " label \"{}\"", l.replace('\\', "\\\\").replace('"', "\\\""));
        }
        stages.push((machine, kind, name, attrs));
    }
    Laid {
        machine_names,
        machine_paths,
        stages,
    }
}

/// Machine `i` nests in an earlier machine, or is a root.
fn parent_of(spec: &ModelSpec, i: usize) -> Option<usize> {
    let choice = spec.parents[i] % (i + 1);
    (choice < i).then_some(choice)
}

pub fn render(spec: &ModelSpec) -> String {
    let laid = lay_out(spec);
    let n = spec.parents.len();
    let sep = |k: u32| if spec.layout >> (k % 64) & 1 == 1 { "\n  " } else { " " };
    let mut out = String::new();
    if spec.layout & 1 == 1 {
        out.push_str("// generated\n");
    }

    fn emit(spec: &ModelSpec, laid: &Laid, m: usize, n: usize, out: &mut String, sep: &dyn Fn(u32) -> &'static str) {
        let _ = write!(out, "machine {} {{", laid.machine_names[m]);
        for (i, (owner, kind, name, attrs)) in laid.stages.iter().enumerate() {
            if *owner == m {
                let _ = write!(out, "{}{kind} {name}{attrs};", sep(i as u32));
            }
        }
        for child in 0..n {
            if parent_of(spec, child) == Some(m) {
                out.push_str(sep(child as u32 + 7));
                emit(spec, laid, child, n, out, sep);
            }
        }
        out.push_str(" }\n");
    }
    for m in 0..n {
        if parent_of(spec, m).is_none() {
            emit(spec, &laid, m, n, &mut out, &sep);
        }
    }

    let count = laid.stages.len();
    let path = |i: usize| {
        let (owner, _, name, _) = &laid.stages[i];
        format!("{}.{name}", laid.machine_paths[*owner])
    };
    let guarded = |i: usize| {
        let s = &spec.stages[i];
        StageKind::ALL[s.kind] == StageKind::Process && s.guard
    };
    let mut branch_toggle: BTreeMap<usize, bool> = BTreeMap::new();
    let mut seen_edges = BTreeSet::new();
    for e in &spec.edges {
        let (from, to) = (e.from % count, e.to % count);
        if from == to || !seen_edges.insert((from, to, e.trigger)) {
            continue;
        }
        let anchors = if e.anchors.is_empty() {
            String::new()
        } else {
            let list: Vec<String> = e.anchors.iter().map(u32::to_string).collect();
            format!(" anchor {}", list.join(","))
        };
        if e.trigger {
            let make = if e.constructor && laid.stages[to].1 == StageKind::Create {
                " make bump"
            } else {
                ""
            };
            let _ = writeln!(out, "trigger {} -> {}{make}{anchors};", path(from), path(to));
        } else {
            let when = if guarded(from) {
                let t = branch_toggle.entry(from).or_insert(false);
                *t = !*t;
                if *t { " when true" } else { " when false" }
            } else {
                ""
            };
            let _ = writeln!(out, "flow {} -> {}{when}{anchors};", path(from), path(to));
        }
    }
    out
}

/// A pure environment for arbitrary models: guard `g` depends on a hash of
/// the payload, `bump` counts hops.
pub struct HashEnv {
    pub injections: Vec<Injection>,
}

impl HashEnv {
    /// One token at every create stage.
    pub fn for_model(model: &Model) -> Self {
        let injections = model
            .stages()
            .iter()
            .filter(|s| s.kind == StageKind::Create)
            .map(|s| Injection {
                stage: s.path.clone(),
                payload: Payload::from([("seed".to_string(), Value::Int(s.id.0 as i64))]),
                count: 1,
            })
            .collect();
        Self { injections }
    }
}

impl Environment for HashEnv {
    fn injections(&self) -> &[Injection] {
        &self.injections
    }
    fn has_guard(&self, name: &str) -> bool {
        name == "g"
    }
    fn has_operation(&self, name: &str) -> bool {
        name == "bump"
    }
    fn eval_guard(&self, _: &str, payload: &Payload) -> Result<bool, EnvError> {
        let mut h = DefaultHasher::new();
        for (k, v) in payload {
            k.hash(&mut h);
            v.to_string().hash(&mut h);
        }
        Ok(h.finish().is_multiple_of(2))
    }
    fn apply(&self, _: &str, payload: &Payload) -> Result<Payload, EnvError> {
        let mut p = payload.clone();
        let hops = match p.get("hops") {
            Some(Value::Int(n)) => n + 1,
            _ => 1,
        };
        p.insert("hops".into(), Value::Int(hops));
        Ok(p)
    }
}

/// Brute-force closure: keep adding edge targets until nothing changes.
/// `follow` decides which flows may be taken; triggers are always followed.
pub fn closure(model: &Model, starts: &BTreeSet<StageId>, follow: &dyn Fn(&thinging::model::Flow) -> bool) -> BTreeSet<StageId> {
    let mut set = starts.clone();
    loop {
        let before = set.len();
        for f in model.flows() {
            if set.contains(&f.from) && follow(f) {
                set.insert(f.to);
            }
        }
        for t in model.triggers() {
            if set.contains(&t.from) {
                set.insert(t.to);
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

/// Create stages plus receive stages nothing flows or triggers into.
pub fn entry_points(model: &Model) -> BTreeSet<StageId> {
    let targeted: BTreeSet<StageId> = model
        .flows()
        .iter()
        .map(|f| f.to)
        .chain(model.triggers().iter().map(|t| t.to))
        .collect();
    model
        .stages()
        .iter()
        .filter(|s| s.kind == StageKind::Create || (s.kind == StageKind::Receive && !targeted.contains(&s.id)))
        .map(|s| s.id)
        .collect()
}
