//! In-memory thinging machine models.
//!
//! A [`Model`] is a forest of thimacs (machines that may nest), the stages each
//! machine owns, and two edge relations over stages: flows (the same thing
//! moves) and triggers (completion of one stage activates another). Every
//! element is addressed by a dotted path such as `BobServer.Ehlo.create`;
//! paths are resolved to dense integer ids when the model is built.
//!
//! Models are immutable once built and are shared freely between threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::span::SourceSpan;

/// The five generic stages. There is deliberately no sixth variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageKind {
    Create,
    Process,
    Release,
    Transfer,
    Receive,
}

impl StageKind {
    pub const ALL: [StageKind; 5] = [
        StageKind::Create,
        StageKind::Process,
        StageKind::Release,
        StageKind::Transfer,
        StageKind::Receive,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            StageKind::Create => "create",
            StageKind::Process => "process",
            StageKind::Release => "release",
            StageKind::Transfer => "transfer",
            StageKind::Receive => "receive",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == word)
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(ThimacId);
id_type!(StageId);
id_type!(FlowId);
id_type!(TriggerId);

/// A direct member of a machine, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Member {
    Stage(StageId),
    Machine(ThimacId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thimac {
    pub id: ThimacId,
    pub name: String,
    pub path: String,
    pub parent: Option<ThimacId>,
    pub members: Vec<Member>,
}

impl Thimac {
    pub fn stages(&self) -> impl Iterator<Item = StageId> + '_ {
        self.members.iter().filter_map(|m| match m {
            Member::Stage(s) => Some(*s),
            Member::Machine(_) => None,
        })
    }

    pub fn children(&self) -> impl Iterator<Item = ThimacId> + '_ {
        self.members.iter().filter_map(|m| match m {
            Member::Machine(t) => Some(*t),
            Member::Stage(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub id: StageId,
    pub kind: StageKind,
    pub owner: ThimacId,
    pub name: String,
    pub path: String,
    pub label: Option<String>,
    /// Predicate deciding which labelled outgoing flow a token takes.
    pub guard: Option<String>,
    /// Payload change applied when a token completes this stage.
    pub transform: Option<String>,
    pub sink: bool,
    /// Step numbers from the source diagram. Documentation only.
    pub anchors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: FlowId,
    pub from: StageId,
    pub to: StageId,
    pub branch: Option<String>,
    pub anchors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub id: TriggerId,
    pub from: StageId,
    pub to: StageId,
    pub constructor: Option<String>,
    pub anchors: Vec<u32>,
}

/// One declaration in source order. Paths are dotted text; edge paths are
/// resolved relative to `scope` first, then each enclosing machine, then
/// from the top level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Declaration {
    Machine {
        path: Vec<String>,
        span: Option<SourceSpan>,
    },
    Stage {
        machine: Vec<String>,
        name: String,
        kind: StageKind,
        guard: Option<String>,
        transform: Option<String>,
        sink: bool,
        anchors: Vec<u32>,
        label: Option<String>,
        span: Option<SourceSpan>,
    },
    Flow {
        scope: Vec<String>,
        from: String,
        to: String,
        branch: Option<String>,
        anchors: Vec<u32>,
        span: Option<SourceSpan>,
    },
    Trigger {
        scope: Vec<String>,
        from: String,
        to: String,
        constructor: Option<String>,
        anchors: Vec<u32>,
        span: Option<SourceSpan>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("duplicate identifier `{id}`{}", at(.span))]
    DuplicateId { id: String, span: Option<SourceSpan> },
    #[error("unresolved reference `{id}`{}", at(.span))]
    UnresolvedReference { id: String, span: Option<SourceSpan> },
    #[error("edge from `{id}` to itself{}", at(.span))]
    SelfEdge { id: String, span: Option<SourceSpan> },
}

impl BuildError {
    pub fn span(&self) -> Option<&SourceSpan> {
        match self {
            BuildError::DuplicateId { span, .. }
            | BuildError::UnresolvedReference { span, .. }
            | BuildError::SelfEdge { span, .. } => span.as_ref(),
        }
    }
}

fn at(span: &Option<SourceSpan>) -> String {
    span.as_ref().map(|s| format!(" at {s}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown stage {0}")]
    UnknownStage(String),
    #[error("unknown thimac {0}")]
    UnknownThimac(String),
}

/// The static model: thimac forest, stages, flows and triggers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    thimacs: Vec<Thimac>,
    stages: Vec<Stage>,
    flows: Vec<Flow>,
    triggers: Vec<Trigger>,
    roots: Vec<ThimacId>,
    stage_paths: BTreeMap<String, StageId>,
    thimac_paths: BTreeMap<String, ThimacId>,
    out_flows: Vec<Vec<FlowId>>,
    out_triggers: Vec<Vec<TriggerId>>,
}

/// Builds a model from declarations, resolving every path.
pub fn build_model(declarations: &[Declaration]) -> Result<Model, BuildError> {
    let mut thimacs: Vec<Thimac> = Vec::new();
    let mut stages: Vec<Stage> = Vec::new();
    let mut roots = Vec::new();
    let mut thimac_paths: BTreeMap<String, ThimacId> = BTreeMap::new();
    let mut stage_paths: BTreeMap<String, StageId> = BTreeMap::new();

    for decl in declarations {
        match decl {
            Declaration::Machine { path, span } => {
                let full = path.join(".");
                if thimac_paths.contains_key(&full) || stage_paths.contains_key(&full) {
                    return Err(BuildError::DuplicateId {
                        id: full,
                        span: span.clone(),
                    });
                }
                let (name, parent_path) = path.split_last().ok_or_else(|| {
                    BuildError::UnresolvedReference {
                        id: String::new(),
                        span: span.clone(),
                    }
                })?;
                let id = ThimacId(thimacs.len() as u32);
                let parent = if parent_path.is_empty() {
                    roots.push(id);
                    None
                } else {
                    let parent_full = parent_path.join(".");
                    let parent = *thimac_paths.get(&parent_full).ok_or_else(|| {
                        BuildError::UnresolvedReference {
                            id: parent_full.clone(),
                            span: span.clone(),
                        }
                    })?;
                    thimacs[parent.index()].members.push(Member::Machine(id));
                    Some(parent)
                };
                thimacs.push(Thimac {
                    id,
                    name: name.clone(),
                    path: full.clone(),
                    parent,
                    members: Vec::new(),
                });
                thimac_paths.insert(full, id);
            }
            Declaration::Stage {
                machine,
                name,
                kind,
                guard,
                transform,
                sink,
                anchors,
                label,
                span,
            } => {
                let owner_path = machine.join(".");
                let owner = *thimac_paths.get(&owner_path).ok_or_else(|| {
                    BuildError::UnresolvedReference {
                        id: owner_path.clone(),
                        span: span.clone(),
                    }
                })?;
                let full = format!("{owner_path}.{name}");
                if stage_paths.contains_key(&full) || thimac_paths.contains_key(&full) {
                    return Err(BuildError::DuplicateId {
                        id: full,
                        span: span.clone(),
                    });
                }
                let id = StageId(stages.len() as u32);
                thimacs[owner.index()].members.push(Member::Stage(id));
                stages.push(Stage {
                    id,
                    kind: *kind,
                    owner,
                    name: name.clone(),
                    path: full.clone(),
                    label: label.clone(),
                    guard: guard.clone(),
                    transform: transform.clone(),
                    sink: *sink,
                    anchors: anchors.clone(),
                });
                stage_paths.insert(full, id);
            }
            Declaration::Flow { .. } | Declaration::Trigger { .. } => {}
        }
    }

    let resolve = |scope: &[String], path: &str, span: &Option<SourceSpan>| {
        resolve_scoped(&stage_paths, scope, path).ok_or_else(|| BuildError::UnresolvedReference {
            id: path.to_string(),
            span: span.clone(),
        })
    };

    let mut flows = Vec::new();
    let mut triggers = Vec::new();
    for decl in declarations {
        match decl {
            Declaration::Flow {
                scope,
                from,
                to,
                branch,
                anchors,
                span,
            } => {
                let (from, to) = (resolve(scope, from, span)?, resolve(scope, to, span)?);
                if from == to {
                    return Err(BuildError::SelfEdge {
                        id: stages[from.index()].path.clone(),
                        span: span.clone(),
                    });
                }
                flows.push(Flow {
                    id: FlowId(flows.len() as u32),
                    from,
                    to,
                    branch: branch.clone(),
                    anchors: anchors.clone(),
                });
            }
            Declaration::Trigger {
                scope,
                from,
                to,
                constructor,
                anchors,
                span,
            } => {
                let (from, to) = (resolve(scope, from, span)?, resolve(scope, to, span)?);
                if from == to {
                    return Err(BuildError::SelfEdge {
                        id: stages[from.index()].path.clone(),
                        span: span.clone(),
                    });
                }
                triggers.push(Trigger {
                    id: TriggerId(triggers.len() as u32),
                    from,
                    to,
                    constructor: constructor.clone(),
                    anchors: anchors.clone(),
                });
            }
            _ => {}
        }
    }

    let mut out_flows = vec![Vec::new(); stages.len()];
    for f in &flows {
        out_flows[f.from.index()].push(f.id);
    }
    let mut out_triggers = vec![Vec::new(); stages.len()];
    for t in &triggers {
        out_triggers[t.from.index()].push(t.id);
    }

    Ok(Model {
        thimacs,
        stages,
        flows,
        triggers,
        roots,
        stage_paths,
        thimac_paths,
        out_flows,
        out_triggers,
    })
}

fn resolve_scoped(
    paths: &BTreeMap<String, StageId>,
    scope: &[String],
    path: &str,
) -> Option<StageId> {
    (0..=scope.len()).rev().find_map(|depth| {
        let candidate = if depth == 0 {
            path.to_string()
        } else {
            format!("{}.{path}", scope[..depth].join("."))
        };
        paths.get(&candidate).copied()
    })
}

/// The stages owned by a thimac and its descendants, plus the edges whose
/// endpoints both lie in that set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub root: ThimacId,
    pub thimacs: BTreeSet<ThimacId>,
    pub stages: BTreeSet<StageId>,
    pub flows: Vec<FlowId>,
    pub triggers: Vec<TriggerId>,
}

impl Fragment {
    pub fn contains_stage(&self, id: StageId) -> bool {
        self.stages.contains(&id)
    }
}

impl Model {
    pub fn thimacs(&self) -> &[Thimac] {
        &self.thimacs
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn triggers(&self) -> &[Trigger] {
        &self.triggers
    }

    /// Root thimacs in declaration order.
    pub fn roots(&self) -> &[ThimacId] {
        &self.roots
    }

    pub fn thimac(&self, id: ThimacId) -> &Thimac {
        &self.thimacs[id.index()]
    }

    pub fn stage(&self, id: StageId) -> &Stage {
        &self.stages[id.index()]
    }

    pub fn flow(&self, id: FlowId) -> &Flow {
        &self.flows[id.index()]
    }

    pub fn trigger(&self, id: TriggerId) -> &Trigger {
        &self.triggers[id.index()]
    }

    pub fn stage_by_path(&self, path: &str) -> Option<StageId> {
        self.stage_paths.get(path).copied()
    }

    pub fn thimac_by_path(&self, path: &str) -> Option<ThimacId> {
        self.thimac_paths.get(path).copied()
    }

    pub fn sinks(&self) -> BTreeSet<StageId> {
        self.stages.iter().filter(|s| s.sink).map(|s| s.id).collect()
    }

    pub fn outgoing_flows(&self, stage: StageId) -> &[FlowId] {
        &self.out_flows[stage.index()]
    }

    pub fn outgoing_triggers(&self, stage: StageId) -> &[TriggerId] {
        &self.out_triggers[stage.index()]
    }

    pub fn stage_kind(&self, stage: StageId) -> Result<StageKind, ModelError> {
        self.stages
            .get(stage.index())
            .map(|s| s.kind)
            .ok_or_else(|| ModelError::UnknownStage(stage.to_string()))
    }

    pub fn stage_kind_by_path(&self, path: &str) -> Result<StageKind, ModelError> {
        self.stage_by_path(path)
            .map(|id| self.stage(id).kind)
            .ok_or_else(|| ModelError::UnknownStage(path.to_string()))
    }

    /// Ancestors of `id`, nearest first, excluding `id` itself.
    pub fn ancestors(&self, id: ThimacId) -> impl Iterator<Item = ThimacId> + '_ {
        std::iter::successors(self.thimac(id).parent, |p| self.thimac(*p).parent)
    }

    /// `id` and every thimac nested beneath it, in declaration order.
    pub fn descendants(&self, id: ThimacId) -> Vec<ThimacId> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.thimac(out[i]).children());
            i += 1;
        }
        out
    }

    /// Stages reachable from `starts` over flow and trigger edges, including
    /// the starts themselves.
    pub fn reachable_stages<I>(&self, starts: I) -> Result<BTreeSet<StageId>, ModelError>
    where
        I: IntoIterator<Item = StageId>,
    {
        let mut seen = BTreeSet::new();
        let mut queue = std::collections::VecDeque::new();
        for s in starts {
            if s.index() >= self.stages.len() {
                return Err(ModelError::UnknownStage(s.to_string()));
            }
            if seen.insert(s) {
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            let next = self.out_flows[s.index()]
                .iter()
                .map(|f| self.flow(*f).to)
                .chain(self.out_triggers[s.index()].iter().map(|t| self.trigger(*t).to));
            for n in next {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        Ok(seen)
    }

    pub fn submachine_subgraph(&self, thimac: ThimacId) -> Result<Fragment, ModelError> {
        if thimac.index() >= self.thimacs.len() {
            return Err(ModelError::UnknownThimac(thimac.to_string()));
        }
        let thimacs: BTreeSet<ThimacId> = self.descendants(thimac).into_iter().collect();
        let stages: BTreeSet<StageId> = self
            .stages
            .iter()
            .filter(|s| thimacs.contains(&s.owner))
            .map(|s| s.id)
            .collect();
        let inside = |from: StageId, to: StageId| stages.contains(&from) && stages.contains(&to);
        let flows = self
            .flows
            .iter()
            .filter(|f| inside(f.from, f.to))
            .map(|f| f.id)
            .collect();
        let triggers = self
            .triggers
            .iter()
            .filter(|t| inside(t.from, t.to))
            .map(|t| t.id)
            .collect();
        Ok(Fragment {
            root: thimac,
            thimacs,
            stages,
            flows,
            triggers,
        })
    }

    pub fn submachine_subgraph_by_path(&self, path: &str) -> Result<Fragment, ModelError> {
        let id = self
            .thimac_by_path(path)
            .ok_or_else(|| ModelError::UnknownThimac(path.to_string()))?;
        self.submachine_subgraph(id)
    }

    /// Flattens the model back into absolute-path declarations, in an order
    /// that rebuilds an equal model.
    pub fn to_declarations(&self) -> Vec<Declaration> {
        let mut out = Vec::new();
        for root in &self.roots {
            self.push_machine_decls(*root, &mut out);
        }
        for f in &self.flows {
            out.push(Declaration::Flow {
                scope: Vec::new(),
                from: self.stage(f.from).path.clone(),
                to: self.stage(f.to).path.clone(),
                branch: f.branch.clone(),
                anchors: f.anchors.clone(),
                span: None,
            });
        }
        for t in &self.triggers {
            out.push(Declaration::Trigger {
                scope: Vec::new(),
                from: self.stage(t.from).path.clone(),
                to: self.stage(t.to).path.clone(),
                constructor: t.constructor.clone(),
                anchors: t.anchors.clone(),
                span: None,
            });
        }
        out
    }

    fn push_machine_decls(&self, id: ThimacId, out: &mut Vec<Declaration>) {
        let thimac = self.thimac(id);
        let path: Vec<String> = thimac.path.split('.').map(str::to_string).collect();
        out.push(Declaration::Machine {
            path: path.clone(),
            span: None,
        });
        for member in &thimac.members {
            match member {
                Member::Stage(s) => {
                    let s = self.stage(*s);
                    out.push(Declaration::Stage {
                        machine: path.clone(),
                        name: s.name.clone(),
                        kind: s.kind,
                        guard: s.guard.clone(),
                        transform: s.transform.clone(),
                        sink: s.sink,
                        anchors: s.anchors.clone(),
                        label: s.label.clone(),
                        span: None,
                    });
                }
                Member::Machine(child) => self.push_machine_decls(*child, out),
            }
        }
    }

    /// Multiset view used for structural comparison independent of ids.
    pub fn shape(&self) -> ModelShape {
        let mut stages: Vec<String> = self
            .stages
            .iter()
            .map(|s| {
                format!(
                    "{} {} guard={:?} apply={:?} sink={} anchors={:?} label={:?}",
                    s.kind, s.path, s.guard, s.transform, s.sink, s.anchors, s.label
                )
            })
            .collect();
        stages.sort();
        let mut thimacs: Vec<String> = self
            .thimacs
            .iter()
            .map(|t| {
                let parent = t.parent.map(|p| self.thimac(p).path.clone());
                format!("{} parent={parent:?}", t.path)
            })
            .collect();
        thimacs.sort();
        let mut edges: Vec<String> = self
            .flows
            .iter()
            .map(|f| {
                format!(
                    "flow {} -> {} when={:?} anchors={:?}",
                    self.stage(f.from).path,
                    self.stage(f.to).path,
                    f.branch,
                    f.anchors
                )
            })
            .chain(self.triggers.iter().map(|t| {
                format!(
                    "trigger {} -> {} make={:?} anchors={:?}",
                    self.stage(t.from).path,
                    self.stage(t.to).path,
                    t.constructor,
                    t.anchors
                )
            }))
            .collect();
        edges.sort();
        ModelShape {
            thimacs,
            stages,
            edges,
        }
    }

    /// Index of stages by owning thimac, used by exporters.
    pub fn stages_by_owner(&self) -> HashMap<ThimacId, Vec<StageId>> {
        let mut map: HashMap<ThimacId, Vec<StageId>> = HashMap::new();
        for s in &self.stages {
            map.entry(s.owner).or_default().push(s.id);
        }
        map
    }
}

/// Sorted multisets of thimacs, stages and edges, rendered as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub thimacs: Vec<String>,
    pub stages: Vec<String>,
    pub edges: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(path: &[&str]) -> Declaration {
        Declaration::Machine {
            path: path.iter().map(|s| s.to_string()).collect(),
            span: None,
        }
    }

    fn stage(machine: &[&str], name: &str, kind: StageKind) -> Declaration {
        Declaration::Stage {
            machine: machine.iter().map(|s| s.to_string()).collect(),
            name: name.into(),
            kind,
            guard: None,
            transform: None,
            sink: false,
            anchors: vec![],
            label: None,
            span: None,
        }
    }

    fn flow(scope: &[&str], from: &str, to: &str) -> Declaration {
        Declaration::Flow {
            scope: scope.iter().map(|s| s.to_string()).collect(),
            from: from.into(),
            to: to.into(),
            branch: None,
            anchors: vec![],
            span: None,
        }
    }

    fn minimal() -> Vec<Declaration> {
        vec![
            machine(&["M"]),
            stage(&["M"], "c", StageKind::Create),
            stage(&["M"], "r", StageKind::Release),
            stage(&["M"], "t", StageKind::Transfer),
            flow(&["M"], "c", "r"),
            flow(&["M"], "r", "t"),
        ]
    }

    #[test]
    fn minimal_machine_builds() {
        let m = build_model(&minimal()).unwrap();
        assert_eq!(m.thimacs().len(), 1);
        assert_eq!(m.stages().len(), 3);
        assert_eq!(m.flows().len(), 2);
        assert_eq!(m.stage_kind_by_path("M.c").unwrap(), StageKind::Create);
        assert_eq!(m.stage_kind_by_path("M.r").unwrap(), StageKind::Release);
    }

    #[test]
    fn unresolved_flow_endpoint() {
        let mut decls = minimal();
        decls.push(flow(&[], "X.process", "M.c"));
        let err = build_model(&decls).unwrap_err();
        assert_eq!(
            err,
            BuildError::UnresolvedReference {
                id: "X.process".into(),
                span: None
            }
        );
    }

    #[test]
    fn duplicate_stage_rejected() {
        let mut decls = minimal();
        decls.push(stage(&["M"], "c", StageKind::Process));
        assert!(matches!(
            build_model(&decls),
            Err(BuildError::DuplicateId { id, .. }) if id == "M.c"
        ));
    }

    #[test]
    fn self_edge_rejected() {
        let mut decls = minimal();
        decls.push(flow(&["M"], "r", "r"));
        assert!(matches!(build_model(&decls), Err(BuildError::SelfEdge { .. })));
    }

    #[test]
    fn unknown_stage_kind_query() {
        let m = build_model(&minimal()).unwrap();
        assert!(matches!(
            m.stage_kind(StageId(99)),
            Err(ModelError::UnknownStage(_))
        ));
        assert!(m.stage_kind_by_path("M.nope").is_err());
    }

    #[test]
    fn scoped_resolution_prefers_innermost() {
        let decls = vec![
            machine(&["A"]),
            stage(&["A"], "x", StageKind::Create),
            machine(&["A", "B"]),
            stage(&["A", "B"], "x", StageKind::Release),
            stage(&["A", "B"], "y", StageKind::Transfer),
            flow(&["A", "B"], "x", "y"),
            flow(&["A"], "x", "B.x"),
        ];
        let m = build_model(&decls).unwrap();
        let f0 = &m.flows()[0];
        assert_eq!(m.stage(f0.from).path, "A.B.x");
        let f1 = &m.flows()[1];
        assert_eq!(m.stage(f1.from).path, "A.x");
        assert_eq!(m.stage(f1.to).path, "A.B.x");
    }

    #[test]
    fn reachability_cases() {
        let m = build_model(&minimal()).unwrap();
        let c = m.stage_by_path("M.c").unwrap();
        assert_eq!(m.reachable_stages([c]).unwrap().len(), 3);
        assert!(m.reachable_stages(std::iter::empty()).unwrap().is_empty());
        let t = m.stage_by_path("M.t").unwrap();
        assert_eq!(m.reachable_stages([t]).unwrap(), BTreeSet::from([t]));
        assert!(m.reachable_stages([StageId(7)]).is_err());

        let lone = build_model(&[machine(&["L"]), stage(&["L"], "c", StageKind::Create)]).unwrap();
        let c = lone.stage_by_path("L.c").unwrap();
        assert_eq!(lone.reachable_stages([c]).unwrap(), BTreeSet::from([c]));
    }

    #[test]
    fn subgraph_of_leaf_and_root() {
        let decls = vec![
            machine(&["R"]),
            stage(&["R"], "c", StageKind::Create),
            stage(&["R"], "r", StageKind::Release),
            machine(&["R", "Leaf"]),
            stage(&["R", "Leaf"], "a", StageKind::Receive),
            stage(&["R", "Leaf"], "b", StageKind::Process),
            flow(&["R"], "c", "r"),
            flow(&["R", "Leaf"], "a", "b"),
        ];
        let m = build_model(&decls).unwrap();
        let leaf = m.submachine_subgraph_by_path("R.Leaf").unwrap();
        assert_eq!(leaf.stages.len(), 2);
        assert_eq!(leaf.flows.len(), 1);
        let root = m.submachine_subgraph_by_path("R").unwrap();
        assert_eq!(root.stages.len(), m.stages().len());
        assert_eq!(root.flows.len(), m.flows().len());
        assert!(m.submachine_subgraph(ThimacId(40)).is_err());
    }

    #[test]
    fn declarations_round_trip() {
        let m = build_model(&minimal()).unwrap();
        let again = build_model(&m.to_declarations()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn ancestors_terminate() {
        let decls = vec![
            machine(&["A"]),
            machine(&["A", "B"]),
            machine(&["A", "B", "C"]),
        ];
        let m = build_model(&decls).unwrap();
        let c = m.thimac_by_path("A.B.C").unwrap();
        let chain: Vec<_> = m.ancestors(c).map(|t| m.thimac(t).path.clone()).collect();
        assert_eq!(chain, ["A.B", "A"]);
    }
}
