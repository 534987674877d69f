//! Deterministic token-flow simulation.
//!
//! Time is a logical micro-step counter. Each call to [`Simulation::step`]
//! performs exactly one micro-step for the lowest-numbered token that has
//! something to do. A token's life at a stage is:
//!
//! 1. `create`: an injected or triggered token materialises at its stage;
//! 2. `stage-op`: the stage completes for the token (a process stage may
//!    apply a payload change); sink stages instead `drop` the token;
//! 3. `trigger-fire`: one step per outgoing trigger, in declaration order;
//! 4. `move`: along the earliest-declared flow whose branch label matches
//!    the stage guard. With no enabled flow the token rests.
//!
//! A trigger into a create stage gives birth to a new token. A trigger into
//! any other stage grants that stage one activation; stages targeted this
//! way hold arriving tokens until an activation is available.

mod occurrence;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventId, ResolvedRegion};
use crate::model::{FlowId, Model, StageId, StageKind, TriggerId};
use crate::value::Payload;

pub use occurrence::{conforms, detect_occurrences, Conformance, Occurrence, Violation};

pub const DEFAULT_MAX_STEPS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Things injected into a run from outside the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub stage: String,
    pub payload: Payload,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("guard `{0}` is not bound")]
    GuardUnbound(String),
    #[error("constructor `{0}` is not bound")]
    ConstructorUnbound(String),
    /// A table lookup failed; the token is dropped where this happened.
    #[error("{0}")]
    Lookup(String),
}

/// Everything a run needs from its surroundings: injections, guard
/// predicates and payload operations (constructors and transforms share one
/// namespace).
pub trait Environment {
    fn injections(&self) -> &[Injection];
    fn has_guard(&self, name: &str) -> bool;
    fn has_operation(&self, name: &str) -> bool;
    fn eval_guard(&self, name: &str, payload: &Payload) -> Result<bool, EnvError>;
    fn apply(&self, name: &str, payload: &Payload) -> Result<Payload, EnvError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("guard `{name}` on {stage} is not bound by the scenario")]
    GuardUnbound { name: String, stage: String },
    #[error("operation `{name}` used by {site} is not bound by the scenario")]
    ConstructorUnbound { name: String, site: String },
    #[error("injection stage `{0}` does not exist")]
    UnknownInjectionStage(String),
    #[error("injection stage `{0}` is neither a create nor a receive stage")]
    InvalidInjectionStage(String),
    #[error("event `{event}` names unknown region element `{element}`")]
    UnresolvedRegion { event: String, element: String },
    #[error("simulation is quiescent")]
    Quiescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Create,
    StageOp,
    TriggerFire,
    Move,
    Drop,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Create => "create",
            StepKind::StageOp => "stage-op",
            StepKind::TriggerFire => "trigger-fire",
            StepKind::Move => "move",
            StepKind::Drop => "drop",
        })
    }
}

/// One micro-step.
///
/// Stage fields by kind: `create` sets `to`; `stage-op` and `drop` set
/// `from`; `trigger-fire` and `move` set both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroStep {
    pub index: u64,
    pub token: TokenId,
    pub kind: StepKind,
    pub from: Option<StageId>,
    pub to: Option<StageId>,
    pub flow: Option<FlowId>,
    pub trigger: Option<TriggerId>,
    pub branch: Option<bool>,
    pub spawned: Option<TokenId>,
    pub reason: Option<String>,
}

impl MicroStep {
    fn new(index: u64, token: TokenId, kind: StepKind) -> Self {
        Self {
            index,
            token,
            kind,
            from: None,
            to: None,
            flow: None,
            trigger: None,
            branch: None,
            spawned: None,
            reason: None,
        }
    }

    /// The stage this step counts as visiting, for event detection.
    pub fn visited_stage(&self) -> Option<StageId> {
        match self.kind {
            StepKind::StageOp | StepKind::Drop => self.from,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Injected { injection: usize },
    Born { trigger: TriggerId, cause: TokenId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenStatus {
    /// Never materialised because the step limit was hit first.
    Pending,
    /// Still had work to do when the step limit was hit.
    Active,
    Rested,
    Dropped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSummary {
    pub token: TokenId,
    pub origin: Origin,
    pub born_at: Option<u64>,
    pub stage: StageId,
    pub status: TokenStatus,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<MicroStep>,
    pub occurrences: Vec<Occurrence>,
    pub tokens: Vec<TokenSummary>,
    pub step_limit_exceeded: bool,
}

impl Trace {
    /// Stages visited by any stage-op or drop step.
    pub fn visited_stages(&self) -> BTreeSet<StageId> {
        self.steps.iter().filter_map(MicroStep::visited_stage).collect()
    }

    pub fn occurrence_names(&self) -> Vec<&str> {
        self.occurrences.iter().map(|o| o.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Pending,
    Arrived,
    Completed { next_trigger: usize },
    Rested,
    Dropped,
}

#[derive(Debug, Clone)]
struct TokenState {
    id: TokenId,
    payload: Payload,
    location: StageId,
    born_at: Option<u64>,
    phase: Phase,
    origin: Origin,
    drop_reason: Option<String>,
}

enum Action {
    Create,
    Drop,
    StageOp,
    Fire(TriggerId),
    Move { flow: FlowId, branch: Option<bool> },
}

/// Mutable state of one run.
pub struct Simulation<'a, E: Environment + ?Sized> {
    model: &'a Model,
    env: &'a E,
    tokens: Vec<TokenState>,
    live: BTreeSet<TokenId>,
    steps: Vec<MicroStep>,
    gated: Vec<bool>,
    credits: Vec<u64>,
    regions: Vec<(EventId, String, ResolvedRegion)>,
}

impl<'a, E: Environment + ?Sized> Simulation<'a, E> {
    /// Binds `env` to `model`: checks every guard and operation name, then
    /// queues the injections as pending tokens.
    pub fn new(model: &'a Model, env: &'a E, events: &[Event]) -> Result<Self, SimError> {
        for stage in model.stages() {
            if let Some(g) = &stage.guard {
                if !env.has_guard(g) {
                    return Err(SimError::GuardUnbound {
                        name: g.clone(),
                        stage: stage.path.clone(),
                    });
                }
            }
            if let Some(t) = &stage.transform {
                if !env.has_operation(t) {
                    return Err(SimError::ConstructorUnbound {
                        name: t.clone(),
                        site: stage.path.clone(),
                    });
                }
            }
        }
        for trigger in model.triggers() {
            if let Some(c) = &trigger.constructor {
                if !env.has_operation(c) {
                    return Err(SimError::ConstructorUnbound {
                        name: c.clone(),
                        site: format!(
                            "trigger {} -> {}",
                            model.stage(trigger.from).path,
                            model.stage(trigger.to).path
                        ),
                    });
                }
            }
        }

        let mut regions = Vec::with_capacity(events.len());
        for e in events {
            let region = e.resolve(model).map_err(|el| SimError::UnresolvedRegion {
                event: e.name.clone(),
                element: el.to_string(),
            })?;
            regions.push((e.id, e.name.clone(), region));
        }

        let mut gated = vec![false; model.stages().len()];
        for t in model.triggers() {
            if model.stage(t.to).kind != StageKind::Create {
                gated[t.to.index()] = true;
            }
        }

        let mut sim = Self {
            model,
            env,
            tokens: Vec::new(),
            live: BTreeSet::new(),
            steps: Vec::new(),
            credits: vec![0; model.stages().len()],
            gated,
            regions,
        };
        for (i, inj) in env.injections().iter().enumerate() {
            let stage = model
                .stage_by_path(&inj.stage)
                .ok_or_else(|| SimError::UnknownInjectionStage(inj.stage.clone()))?;
            if !matches!(model.stage(stage).kind, StageKind::Create | StageKind::Receive) {
                return Err(SimError::InvalidInjectionStage(inj.stage.clone()));
            }
            for _ in 0..inj.count {
                sim.push_token(stage, inj.payload.clone(), Origin::Injected { injection: i });
            }
        }
        Ok(sim)
    }

    fn push_token(&mut self, stage: StageId, payload: Payload, origin: Origin) -> TokenId {
        let id = TokenId(self.tokens.len() as u64);
        self.tokens.push(TokenState {
            id,
            payload,
            location: stage,
            born_at: None,
            phase: Phase::Pending,
            origin,
            drop_reason: None,
        });
        self.live.insert(id);
        id
    }

    pub fn steps(&self) -> &[MicroStep] {
        &self.steps
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Current stage and payload of a token.
    pub fn token(&self, id: TokenId) -> Option<(StageId, &Payload)> {
        self.tokens
            .get(id.0 as usize)
            .map(|t| (t.location, &t.payload))
    }

    /// Next action for `token`, settling tokens that have nowhere to go.
    fn action_for(&mut self, id: TokenId) -> Option<Action> {
        let model = self.model;
        let t = &self.tokens[id.0 as usize];
        let stage = model.stage(t.location);
        match t.phase {
            Phase::Pending => Some(Action::Create),
            Phase::Arrived if stage.sink => Some(Action::Drop),
            Phase::Arrived if self.gated[stage.id.index()] && self.credits[stage.id.index()] == 0 => None,
            Phase::Arrived => Some(Action::StageOp),
            Phase::Completed { next_trigger } => {
                let triggers = model.outgoing_triggers(stage.id);
                if let Some(tr) = triggers.get(next_trigger) {
                    return Some(Action::Fire(*tr));
                }
                let branch = match &stage.guard {
                    Some(g) => Some(
                        self.env
                            .eval_guard(g, &t.payload)
                            .expect("guards are bound before the run starts"),
                    ),
                    None => None,
                };
                let chosen = model.outgoing_flows(stage.id).iter().copied().find(|f| {
                    match (&model.flow(*f).branch, branch) {
                        (None, _) => true,
                        (Some(label), Some(b)) => label == if b { "true" } else { "false" },
                        (Some(_), None) => false,
                    }
                });
                match chosen {
                    Some(flow) => Some(Action::Move { flow, branch }),
                    None => {
                        self.tokens[id.0 as usize].phase = Phase::Rested;
                        self.live.remove(&id);
                        None
                    }
                }
            }
            Phase::Rested | Phase::Dropped => None,
        }
    }

    fn next_enabled(&mut self) -> Option<(TokenId, Action)> {
        let candidates: Vec<TokenId> = self.live.iter().copied().collect();
        candidates
            .into_iter()
            .find_map(|id| self.action_for(id).map(|a| (id, a)))
    }

    pub fn is_quiescent(&mut self) -> bool {
        self.next_enabled().is_none()
    }

    /// Executes exactly one micro-step.
    pub fn step(&mut self) -> Result<&MicroStep, SimError> {
        let (id, action) = self.next_enabled().ok_or(SimError::Quiescent)?;
        let index = self.steps.len() as u64;
        let mut step = MicroStep::new(index, id, StepKind::Create);
        let model = self.model;
        let tok = &mut self.tokens[id.0 as usize];
        let here = tok.location;
        match action {
            Action::Create => {
                tok.born_at = Some(index);
                tok.phase = Phase::Arrived;
                step.to = Some(here);
                if let Origin::Born { trigger, .. } = tok.origin {
                    step.trigger = Some(trigger);
                }
            }
            Action::Drop => {
                step.kind = StepKind::Drop;
                step.from = Some(here);
                let reason = format!("dropped at sink {}", model.stage(here).path);
                step.reason = Some(reason.clone());
                tok.phase = Phase::Dropped;
                tok.drop_reason = Some(reason);
                self.live.remove(&id);
            }
            Action::StageOp => {
                let stage = model.stage(here);
                step.kind = StepKind::StageOp;
                step.from = Some(here);
                if self.gated[here.index()] {
                    self.credits[here.index()] -= 1;
                }
                let changed = match &stage.transform {
                    Some(op) => Some(self.env.apply(op, &tok.payload)),
                    None => None,
                };
                match changed {
                    Some(Err(err)) => {
                        // a failed lookup drops the token where it happened
                        step.kind = StepKind::Drop;
                        let reason = err.to_string();
                        step.reason = Some(reason.clone());
                        tok.phase = Phase::Dropped;
                        tok.drop_reason = Some(reason);
                        self.live.remove(&id);
                    }
                    Some(Ok(payload)) => {
                        tok.payload = payload;
                        tok.phase = Phase::Completed { next_trigger: 0 };
                    }
                    None => tok.phase = Phase::Completed { next_trigger: 0 },
                }
            }
            Action::Fire(trigger) => {
                if let Phase::Completed { next_trigger } = &mut tok.phase {
                    *next_trigger += 1;
                }
                self.fire_trigger(trigger, id, &mut step);
            }
            Action::Move { flow, branch } => {
                let f = model.flow(flow);
                step.kind = StepKind::Move;
                step.from = Some(f.from);
                step.to = Some(f.to);
                step.flow = Some(flow);
                step.branch = branch;
                tok.location = f.to;
                tok.phase = Phase::Arrived;
            }
        }
        self.steps.push(step);
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Fires `trigger` on behalf of the token `cause`, recording the result
    /// in `step`. A create target receives a newborn token whose payload is
    /// built by the trigger's constructor (a copy when none is named); any
    /// other target receives one activation.
    pub fn fire_trigger(&mut self, trigger: TriggerId, cause: TokenId, step: &mut MicroStep) {
        let model = self.model;
        let tr = model.trigger(trigger);
        step.kind = StepKind::TriggerFire;
        step.token = cause;
        step.from = Some(tr.from);
        step.to = Some(tr.to);
        step.trigger = Some(trigger);
        if model.stage(tr.to).kind != StageKind::Create {
            self.credits[tr.to.index()] += 1;
            return;
        }
        let source = &self.tokens[cause.0 as usize].payload;
        let payload = match &tr.constructor {
            Some(c) => self.env.apply(c, source),
            None => Ok(source.clone()),
        };
        match payload {
            Ok(payload) => {
                let born = self.push_token(tr.to, payload, Origin::Born { trigger, cause });
                step.spawned = Some(born);
            }
            Err(err) => step.reason = Some(format!("no birth: {err}")),
        }
    }

    /// Runs to quiescence or until `limits.max_steps` micro-steps.
    pub fn run(mut self, limits: Limits) -> Trace {
        let mut exceeded = false;
        loop {
            if self.steps.len() as u64 >= limits.max_steps {
                exceeded = !self.is_quiescent();
                break;
            }
            if self.step().is_err() {
                break;
            }
        }
        self.finish(exceeded)
    }

    fn finish(self, step_limit_exceeded: bool) -> Trace {
        let occurrences = detect_occurrences(&self.steps, &self.regions);
        let tokens = self
            .tokens
            .into_iter()
            .map(|t| TokenSummary {
                token: t.id,
                origin: t.origin,
                born_at: t.born_at,
                stage: t.location,
                status: match t.phase {
                    Phase::Pending => TokenStatus::Pending,
                    Phase::Rested => TokenStatus::Rested,
                    Phase::Dropped => TokenStatus::Dropped {
                        reason: t.drop_reason.unwrap_or_default(),
                    },
                    // a held token at quiescence is resting where it waits
                    Phase::Arrived if !step_limit_exceeded => TokenStatus::Rested,
                    Phase::Arrived | Phase::Completed { .. } => TokenStatus::Active,
                },
                payload: t.payload,
            })
            .collect();
        Trace {
            steps: self.steps,
            occurrences,
            tokens,
            step_limit_exceeded,
        }
    }
}

/// Runs one complete simulation.
pub fn simulate<E: Environment + ?Sized>(
    model: &Model,
    env: &E,
    events: &[Event],
    limits: Limits,
) -> Result<Trace, SimError> {
    Ok(Simulation::new(model, env, events)?.run(limits))
}
