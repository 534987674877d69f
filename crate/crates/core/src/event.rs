//! Events (named regions of the static model) and the chronology that
//! orders them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{FlowId, Model, StageId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u32);

impl EventId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One element of an event region, referenced by path so that a region can
/// be re-checked against an edited model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionElement {
    Stage(String),
    Flow { from: String, to: String },
}

impl fmt::Display for RegionElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionElement::Stage(p) => f.write_str(p),
            RegionElement::Flow { from, to } => write!(f, "{from} -> {to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub id: EventId,
    pub name: String,
    pub region: Vec<RegionElement>,
}

/// A region resolved against a particular model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolvedRegion {
    pub stages: BTreeSet<StageId>,
    pub flows: BTreeSet<FlowId>,
}

impl ResolvedRegion {
    /// Stages named directly plus the endpoints of named flows.
    pub fn touched_stages(&self, model: &Model) -> BTreeSet<StageId> {
        let mut out = self.stages.clone();
        for f in &self.flows {
            let flow = model.flow(*f);
            out.insert(flow.from);
            out.insert(flow.to);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty() && self.flows.is_empty()
    }
}

impl Event {
    /// Resolves every region element, or returns the first one that does
    /// not exist in `model`.
    pub fn resolve(&self, model: &Model) -> Result<ResolvedRegion, RegionElement> {
        let mut region = ResolvedRegion::default();
        for element in &self.region {
            match element {
                RegionElement::Stage(path) => {
                    let id = model.stage_by_path(path).ok_or_else(|| element.clone())?;
                    region.stages.insert(id);
                }
                RegionElement::Flow { from, to } => {
                    let (Some(from), Some(to)) = (model.stage_by_path(from), model.stage_by_path(to))
                    else {
                        return Err(element.clone());
                    };
                    let matching: Vec<FlowId> = model
                        .outgoing_flows(from)
                        .iter()
                        .copied()
                        .filter(|f| model.flow(*f).to == to)
                        .collect();
                    if matching.is_empty() {
                        return Err(element.clone());
                    }
                    region.flows.extend(matching);
                }
            }
        }
        Ok(region)
    }
}

/// Precedence edges over events: `(before, after)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chronology {
    pub events: BTreeSet<EventId>,
    pub edges: Vec<(EventId, EventId)>,
}

impl Chronology {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Returns one cycle as a closed walk `[a, b, ..., a]`, if any exists.
    pub fn find_cycle(&self) -> Option<Vec<EventId>> {
        let mut adjacency: BTreeMap<EventId, Vec<EventId>> = BTreeMap::new();
        for (a, b) in &self.edges {
            adjacency.entry(*a).or_default().push(*b);
            adjacency.entry(*b).or_default();
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: BTreeMap<EventId, u8> = adjacency.keys().map(|k| (*k, 0)).collect();
        let nodes: Vec<EventId> = adjacency.keys().copied().collect();
        for start in nodes {
            if state[&start] != 0 {
                continue;
            }
            let mut stack: Vec<(EventId, usize)> = vec![(start, 0)];
            state.insert(start, 1);
            while let Some((node, next)) = stack.last_mut() {
                let node = *node;
                let succ = &adjacency[&node];
                if *next < succ.len() {
                    let child = succ[*next];
                    *next += 1;
                    match state[&child] {
                        0 => {
                            state.insert(child, 1);
                            stack.push((child, 0));
                        }
                        1 => {
                            let pos = stack.iter().position(|(n, _)| *n == child).unwrap_or(0);
                            let mut cycle: Vec<EventId> =
                                stack[pos..].iter().map(|(n, _)| *n).collect();
                            cycle.push(child);
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    state.insert(node, 2);
                    stack.pop();
                }
            }
        }
        None
    }
}
