use std::collections::BTreeSet;
use std::fmt;

use super::{MicroStep, StepKind};
use crate::event::{Chronology, EventId, ResolvedRegion};
use crate::model::{FlowId, StageId};

/// An event happened: its whole region was visited, completing at `step`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub event: EventId,
    pub name: String,
    pub step: u64,
}

#[derive(Default, Clone)]
struct Remaining {
    stages: BTreeSet<StageId>,
    flows: BTreeSet<FlowId>,
}

impl Remaining {
    fn of(region: &ResolvedRegion) -> Self {
        Self {
            stages: region.stages.clone(),
            flows: region.flows.clone(),
        }
    }

    fn is_empty(&self) -> bool {
        self.stages.is_empty() && self.flows.is_empty()
    }
}

/// Scans `steps` for event occurrences. Each event keeps the set of region
/// elements not yet visited since its last occurrence; a stage is visited by
/// a stage-op or drop there, a flow by a move along it. When the set empties
/// the event occurs and the set is refilled. Output is ordered by step, then
/// by event declaration order.
pub fn detect_occurrences(steps: &[MicroStep], regions: &[(EventId, String, ResolvedRegion)]) -> Vec<Occurrence> {
    let mut remaining: Vec<Remaining> = regions.iter().map(|(_, _, r)| Remaining::of(r)).collect();
    let mut out = Vec::new();
    for step in steps {
        let stage = step.visited_stage();
        let flow = if step.kind == StepKind::Move { step.flow } else { None };
        if stage.is_none() && flow.is_none() {
            continue;
        }
        for (i, (id, name, region)) in regions.iter().enumerate() {
            if region.is_empty() {
                continue;
            }
            let rem = &mut remaining[i];
            let mut touched = false;
            if let Some(s) = stage {
                touched |= rem.stages.remove(&s);
            }
            if let Some(f) = flow {
                touched |= rem.flows.remove(&f);
            }
            if touched && rem.is_empty() {
                out.push(Occurrence {
                    event: *id,
                    name: name.clone(),
                    step: step.index,
                });
                *rem = Remaining::of(region);
            }
        }
    }
    out
}

/// A chronology edge `before -> after` not respected by a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub before: EventId,
    pub after: EventId,
    /// 1-based rank of the offending occurrence of `after`.
    pub rank: usize,
    pub step: u64,
    pub required: usize,
    pub found: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "occurrence {} of event {} at step {} is preceded by {} occurrence(s) of event {}, needs {}",
            self.rank, self.after, self.step, self.found, self.before, self.required
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Conformance {
    pub violations: Vec<Violation>,
}

impl Conformance {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks occurrences against `chronology`.
///
/// For an edge `A -> B`, the k-th occurrence of B must be preceded in the
/// occurrence sequence by at least `max(1, min(k, n))` occurrences of A,
/// where n is the total number of A occurrences. A single A therefore
/// licenses any number of later Bs, while matched repetitions must
/// interleave.
pub fn conforms(occurrences: &[Occurrence], chronology: &Chronology) -> Conformance {
    let mut violations = Vec::new();
    for &(a, b) in &chronology.edges {
        let total_a = occurrences.iter().filter(|o| o.event == a).count();
        let mut seen_a = 0;
        let mut rank = 0;
        for o in occurrences {
            if o.event == a {
                seen_a += 1;
            }
            if o.event == b {
                rank += 1;
                let required = rank.min(total_a).max(1);
                if seen_a < required {
                    violations.push(Violation {
                        before: a,
                        after: b,
                        rank,
                        step: o.step,
                        required,
                        found: seen_a,
                    });
                }
            }
        }
    }
    Conformance { violations }
}
