mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use thinging::dsl::{parse, parse_named, print};
use thinging::engine::{simulate, Environment, Limits, Origin, StepKind, TokenId, TokenStatus};
use thinging::model::{Model, StageKind};

use common::{closure, entry_points, model_text, HashEnv};

const LIMITS: Limits = Limits { max_steps: 500 };

fn parsed(text: &str) -> Model {
    parse(text).unwrap_or_else(|d| panic!("generated model rejected: {d:?}\n{text}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_then_parse_is_identity(text in model_text()) {
        let model = parsed(&text);
        let printed = print(&model);
        let again = parse(&printed).unwrap_or_else(|d| panic!("{d:?}\n{printed}"));
        prop_assert_eq!(&again, &model);
        prop_assert_eq!(print(&again), printed);
    }

    #[test]
    fn parser_is_total(text in "\\PC{0,200}") {
        // any outcome is fine; it must simply return
        let _ = parse(&text);
    }

    #[test]
    fn parser_is_total_on_near_misses(text in model_text(), cut in any::<usize>(), junk in "[{};.>\"@ a-z-]{0,4}") {
        let mut at = cut % (text.len() + 1);
        while !text.is_char_boundary(at) {
            at -= 1;
        }
        let _ = parse(&format!("{}{junk}{}", &text[..at], &text[at..]));
    }

    #[test]
    fn diagnostics_point_at_the_damaged_line(text in model_text(), pick in any::<usize>()) {
        let mut lines: Vec<&str> = text.lines().collect();
        let at = pick % (lines.len() + 1);
        lines.insert(at, "  @");
        let broken = lines.join("\n");
        let diags = parse_named("m.tm", &broken).expect_err("stray character accepted");
        prop_assert_eq!(diags[0].span.line as usize, at + 1);
        prop_assert_eq!(diags[0].span.column, 3);
        prop_assert_eq!(diags[0].span.file.as_str(), "m.tm");
    }

    #[test]
    fn reachability_matches_brute_force(text in model_text(), pick in any::<u64>()) {
        let model = parsed(&text);
        let starts: BTreeSet<_> = model
            .stages()
            .iter()
            .filter(|s| (pick >> (s.id.0 % 64)) & 1 == 1)
            .map(|s| s.id)
            .collect();
        let fast = model.reachable_stages(starts.iter().copied()).unwrap();
        prop_assert_eq!(&fast, &closure(&model, &starts, &|_| true));

        // monotone: more starts never reach less
        let mut more = starts.clone();
        more.extend(model.stages().first().map(|s| s.id));
        let wider = model.reachable_stages(more).unwrap();
        prop_assert!(fast.is_subset(&wider));
    }

    #[test]
    fn simulation_is_deterministic(text in model_text()) {
        let model = parsed(&text);
        let env = HashEnv::for_model(&model);
        let a = simulate(&model, &env, &[], LIMITS).unwrap();
        let b = simulate(&model, &env, &[], LIMITS).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tokens_are_conserved(text in model_text()) {
        let model = parsed(&text);
        let env = HashEnv::for_model(&model);
        let trace = simulate(&model, &env, &[], LIMITS).unwrap();

        let injected: u32 = env.injections().iter().map(|i| i.count).sum();
        let spawned = trace.steps.iter().filter(|s| s.spawned.is_some()).count();
        prop_assert_eq!(trace.tokens.len(), injected as usize + spawned);
        for (i, t) in trace.tokens.iter().enumerate() {
            prop_assert_eq!(t.token, TokenId(i as u64));
        }

        let mut creates: BTreeMap<TokenId, usize> = BTreeMap::new();
        let mut drops: BTreeMap<TokenId, u64> = BTreeMap::new();
        for s in &trace.steps {
            match s.kind {
                StepKind::Create => *creates.entry(s.token).or_default() += 1,
                StepKind::Drop => {
                    prop_assert!(drops.insert(s.token, s.index).is_none(), "token dropped twice");
                }
                _ => {}
            }
            if let Some(&dropped_at) = drops.get(&s.token) {
                prop_assert!(s.index == dropped_at, "step after drop: {:?}", s);
            }
        }
        for t in &trace.tokens {
            let created = creates.get(&t.token).copied().unwrap_or(0);
            prop_assert!(created <= 1);
            match &t.status {
                TokenStatus::Pending => prop_assert_eq!(created, 0),
                TokenStatus::Dropped { .. } => prop_assert!(drops.contains_key(&t.token)),
                _ => {
                    prop_assert_eq!(created, 1);
                    prop_assert!(!drops.contains_key(&t.token));
                }
            }
            if let Origin::Born { trigger, cause } = t.origin {
                let tr = model.trigger(trigger);
                prop_assert_eq!(model.stage(tr.to).kind, StageKind::Create);
                prop_assert!(cause < t.token);
            }
        }
        prop_assert_eq!(trace.step_limit_exceeded, trace.steps.len() as u64 >= LIMITS.max_steps
            && trace.tokens.iter().any(|t| matches!(t.status, TokenStatus::Active | TokenStatus::Pending)));
    }

    #[test]
    fn tokens_only_travel_declared_edges(text in model_text()) {
        let model = parsed(&text);
        let env = HashEnv::for_model(&model);
        let trace = simulate(&model, &env, &[], LIMITS).unwrap();

        let mut at = BTreeMap::new();
        for s in &trace.steps {
            match s.kind {
                StepKind::Create => {
                    let to = s.to.unwrap();
                    prop_assert_eq!(model.stage(to).kind, StageKind::Create);
                    at.insert(s.token, to);
                }
                StepKind::StageOp | StepKind::Drop => {
                    prop_assert_eq!(Some(&s.from.unwrap()), at.get(&s.token));
                }
                StepKind::Move => {
                    let f = model.flow(s.flow.unwrap());
                    prop_assert_eq!((s.from, s.to), (Some(f.from), Some(f.to)));
                    prop_assert_eq!(Some(&f.from), at.get(&s.token));
                    prop_assert_eq!(f.branch.clone(), s.branch.map(|b| b.to_string()));
                    at.insert(s.token, f.to);
                }
                StepKind::TriggerFire => {
                    let t = model.trigger(s.trigger.unwrap());
                    prop_assert_eq!((s.from, s.to), (Some(t.from), Some(t.to)));
                    prop_assert_eq!(Some(&t.from), at.get(&s.token));
                }
            }
        }
        for t in &trace.tokens {
            if let Some(stage) = at.get(&t.token) {
                prop_assert_eq!(&t.stage, stage);
            }
        }
    }

    #[test]
    fn visited_stages_lie_in_the_static_closure(text in model_text()) {
        let model = parsed(&text);
        let env = HashEnv::for_model(&model);
        let trace = simulate(&model, &env, &[], LIMITS).unwrap();
        let reachable = closure(&model, &entry_points(&model), &|_| true);
        let visited = trace.visited_stages();
        prop_assert!(visited.is_subset(&reachable), "{:?} not within {:?}", visited, reachable);
    }
}
