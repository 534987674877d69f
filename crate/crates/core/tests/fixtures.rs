use std::path::Path;

use thinging::engine::{simulate, Limits};
use thinging::modelib::{builtin_case, load_case_dir, CASE_NAMES};
use thinging::trace_file::TraceFile;

#[test]
fn firewall_events_stay_inside_the_firewall() {
    let case = builtin_case("email-security").unwrap();
    let model = case.model().unwrap();
    let (events, _) = case.events(&model).unwrap();
    let fw = model.submachine_subgraph_by_path("InternalFirewall").unwrap();
    let fw_events: Vec<_> = events.iter().filter(|e| e.name.starts_with("fw-")).collect();
    assert_eq!(fw_events.len(), 5);
    for event in fw_events {
        let region = event.resolve(&model).unwrap();
        for s in &region.stages {
            assert!(fw.contains_stage(*s), "{}: {}", event.name, model.stage(*s).path);
        }
        for f in &region.flows {
            assert!(fw.flows.contains(f), "{}: flow outside the firewall", event.name);
        }
    }
}

#[test]
fn bundled_expectations_are_reproduced() {
    for name in CASE_NAMES {
        let case = builtin_case(name).unwrap();
        let model = case.model().unwrap();
        let (events, _) = case.events(&model).unwrap();
        assert_eq!(case.scenarios.keys().collect::<Vec<_>>(), case.expected.keys().collect::<Vec<_>>());
        for scenario_name in case.scenarios.keys() {
            let scenario = case.scenario(scenario_name).unwrap();
            let trace = simulate(&model, &scenario, &events, Limits::default()).unwrap();
            let file = TraceFile::new(&trace, &model, scenario.classify_outcomes(&trace, &model));
            let expected = case.expectation(scenario_name).unwrap();
            assert_eq!(expected.first_mismatch(&file), None, "{name}/{scenario_name}");

            // the trace file survives a write and read
            let back = TraceFile::from_json(&file.to_json()).unwrap();
            assert_eq!(back.to_json(), file.to_json());
        }
    }
}

#[test]
fn case_directories_match_compiled_copies() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases");
    for name in CASE_NAMES {
        let on_disk = load_case_dir(&root.join(name)).unwrap();
        let built_in = builtin_case(name).unwrap();
        assert_eq!(on_disk.model_source, built_in.model_source, "{name}");
        assert_eq!(on_disk.events_source, built_in.events_source, "{name}");
        assert_eq!(on_disk.scenarios, built_in.scenarios, "{name}");
        assert_eq!(on_disk.expected, built_in.expected, "{name}");
    }
}
