//! Many scenarios against one model.
//!
//! Runs share the model and events read-only and own everything else, so
//! with the `parallel` feature they are spread over a rayon pool. Results
//! come back sorted by scenario name either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::engine::{simulate, Limits, SimError, Trace};
use crate::event::Event;
use crate::model::Model;
use crate::scenarios::{Outcome, Scenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub trace: Trace,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchResult {
    pub name: String,
    pub result: Result<Run, SimError>,
}

fn run_one(model: &Model, events: &[Event], name: &str, scenario: &Scenario, limits: Limits) -> BatchResult {
    let result = simulate(model, scenario, events, limits).map(|trace| {
        let outcomes = scenario.classify_outcomes(&trace, model);
        Run { trace, outcomes }
    });
    BatchResult {
        name: name.to_string(),
        result,
    }
}

fn sorted(mut results: Vec<BatchResult>) -> Vec<BatchResult> {
    results.sort_by(|a, b| a.name.cmp(&b.name));
    results
}

/// Runs every scenario one after another.
pub fn simulate_batch_sequential(
    model: &Model,
    events: &[Event],
    scenarios: &[(String, Scenario)],
    limits: Limits,
) -> Vec<BatchResult> {
    sorted(
        scenarios
            .iter()
            .map(|(name, s)| run_one(model, events, name, s, limits))
            .collect(),
    )
}

/// Runs scenarios on the rayon pool.
#[cfg(feature = "parallel")]
pub fn simulate_batch_parallel(
    model: &Model,
    events: &[Event],
    scenarios: &[(String, Scenario)],
    limits: Limits,
) -> Vec<BatchResult> {
    sorted(
        scenarios
            .par_iter()
            .map(|(name, s)| run_one(model, events, name, s, limits))
            .collect(),
    )
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn simulate_batch(
    model: &Model,
    events: &[Event],
    scenarios: &[(String, Scenario)],
    limits: Limits,
) -> Vec<BatchResult> {
    #[cfg(feature = "parallel")]
    {
        simulate_batch_parallel(model, events, scenarios, limits)
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_batch_sequential(model, events, scenarios, limits)
    }
}
