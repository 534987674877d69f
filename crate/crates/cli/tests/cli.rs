use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tm"))
        .args(args)
        .env_remove("TM_CASES_DIR")
        .output()
        .expect("tm runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn cases() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tm-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Lines declaring a node: `s<id> [...]`.
fn node_lines(dot: &str) -> usize {
    dot.lines()
        .map(str::trim_start)
        .filter(|l| {
            let rest = l.strip_prefix('s').unwrap_or("");
            let digits = rest.chars().take_while(char::is_ascii_digit).count();
            digits > 0 && rest[digits..].starts_with(" [")
        })
        .count()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_bundled_model_exits_zero() {
    let model = cases().join("smtp/model.tm");
    let out = tm(&["validate", path_str(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn illegal_flow_exits_one_with_adjacency_code() {
    let dir = scratch("adj");
    let model = dir.join("bad.tm");
    fs::write(&model, "machine M { create c; transfer t; flow c -> t; }\n").unwrap();
    let out = tm(&["validate", path_str(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("E_ADJ"), "{}", stdout(&out));
}

#[test]
fn missing_file_exits_two() {
    let out = tm(&["validate", "/no/such/model.tm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_error_exits_one_with_location() {
    let dir = scratch("parse");
    let model = dir.join("broken.tm");
    fs::write(&model, "machine M {\n  create c\n}\n").unwrap();
    let out = tm(&["validate", path_str(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("broken.tm:3:1"), "{}", stdout(&out));
}

#[test]
fn validate_report_is_json() {
    let dir = scratch("report");
    let report = dir.join("r.json");
    let out = tm(&["validate", "--case", "email-security", "--report", path_str(&report)]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["errors"], 0);
}

#[test]
fn smtp_summary_lists_events_in_protocol_order() {
    let out = tm(&["simulate", "--case", "smtp", "--scenario", "default"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut seen: Vec<String> = Vec::new();
    for line in text.lines().filter(|l| l.contains(" step ")) {
        let name = line.split_whitespace().last().unwrap().to_string();
        if seen.last() != Some(&name) {
            seen.push(name);
        }
    }
    assert_eq!(
        seen,
        [
            "ehlo-sent",
            "ehlo-ack",
            "mail-from",
            "mail-from-ok",
            "rcpt-to",
            "rcpt-to-ok",
            "data-request",
            "data-ready",
            "data-line",
            "message-accepted",
            "quit",
            "connection-closed"
        ]
    );
}

#[test]
fn email_external_clean_outcome_line() {
    let out = tm(&["simulate", "--case", "email-security", "--scenario", "external-clean"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out)
            .lines()
            .any(|l| l.contains("DeliveredExternal") && l.contains("IspRouter.cloud")),
        "{}",
        stdout(&out)
    );
}

#[test]
fn zero_step_limit_writes_empty_trace_and_warns() {
    let dir = scratch("zero");
    let trace = dir.join("t.json");
    let out = tm(&[
        "simulate",
        "--case",
        "smtp",
        "--scenario",
        "default",
        "--max-steps",
        "0",
        "--trace",
        path_str(&trace),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("warning"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(trace).unwrap()).unwrap();
    assert_eq!(json["steps"].as_array().unwrap().len(), 0);
    assert_eq!(json["step_limit_exceeded"], true);
}

#[test]
fn unbound_guard_exits_one() {
    let dir = scratch("guard");
    let model = dir.join("m.tm");
    let scenario = dir.join("s.scn");
    fs::write(
        &model,
        "machine M { receive r; process p guard mystery; release a; release b;\n\
         flow r -> p; flow p -> a when true; flow p -> b when false; }\n",
    )
    .unwrap();
    fs::write(&scenario, "[[inject]]\nstage = \"M.r\"\n").unwrap();
    let out = tm(&["simulate", path_str(&model), "--scenario", path_str(&scenario)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("mystery"));
}

#[test]
fn missing_scenario_file_exits_two() {
    let model = cases().join("smtp/model.tm");
    let out = tm(&["simulate", path_str(&model), "--scenario", "/no/such.scn"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dot_for_minimal_machine() {
    let dir = scratch("dot");
    let model = dir.join("m.tm");
    let dot = dir.join("m.dot");
    fs::write(&model, "machine M { create c; release r; transfer t; flow c -> r; flow r -> t; }\n").unwrap();
    let out = tm(&["export-dot", path_str(&model), "--out", path_str(&dot)]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dot).unwrap();
    assert_eq!(node_lines(&text), 3);
    assert_eq!(text.matches(" -> ").count(), 2);
    assert!(text.contains("subgraph cluster_"));
}

#[test]
fn dot_for_smtp_has_one_node_per_stage_and_dashed_triggers() {
    let source = fs::read_to_string(cases().join("smtp/model.tm")).unwrap();
    let stage_count = thinging::dsl::parse(&source).unwrap().stages().len();
    let out = tm(&["export-dot", "--case", "smtp", "--region", "data-line"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(node_lines(&text), stage_count);
    assert!(text.lines().any(|l| l.contains("->") && l.contains("style=dashed")));
    assert!(text.contains("color=red"));
}

#[test]
fn check_trace_matches_bundled_expectation() {
    let dir = scratch("check");
    let trace = dir.join("t.json");
    let out = tm(&["simulate", "--case", "smtp", "--scenario", "default", "--trace", path_str(&trace)]);
    assert_eq!(out.status.code(), Some(0));
    let expected = cases().join("smtp/expected/default.json");
    let out = tm(&["check-trace", path_str(&trace), path_str(&expected)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    // swap the first two occurrences
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    json["occurrences"].as_array_mut().unwrap().swap(0, 1);
    let swapped = dir.join("swapped.json");
    fs::write(&swapped, serde_json::to_string(&json).unwrap()).unwrap();
    let out = tm(&["check-trace", path_str(&swapped), path_str(&expected)]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("ehlo-sent") && text.contains("ehlo-ack"), "{text}");

    let full = fs::read_to_string(&trace).unwrap();
    let truncated = dir.join("truncated.json");
    fs::write(&truncated, &full[..full.len() / 2]).unwrap();
    let out = tm(&["check-trace", path_str(&truncated), path_str(&expected)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = scratch("determinism");
    let a = dir.join("a");
    let b = dir.join("b");
    let run = |d: &Path| tm(&["simulate", "--case", "email-security", "--all", "--trace-dir", path_str(d)]);
    let (oa, ob) = (run(&a), run(&b));
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(oa.stdout, ob.stdout);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap());
    }
}

#[test]
fn batch_output_sorted_by_scenario_name() {
    let out = tm(&["simulate", "--case", "email-security", "--all"]);
    let names: Vec<&str> = std::str::from_utf8(&out.stdout)
        .unwrap()
        .lines()
        .filter_map(|l| l.strip_prefix("scenario "))
        .map(str::trim)
        .collect::<Vec<_>>();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(names.len(), 9);
}

#[test]
fn cases_dir_override() {
    let root = scratch("cases");
    let case = root.join("tiny");
    fs::create_dir_all(case.join("scenarios")).unwrap();
    fs::write(case.join("model.tm"), "machine M { create c; release r; flow c -> r; }\n").unwrap();
    fs::write(case.join("events.tme"), "event done { region M.r }\n").unwrap();
    fs::write(case.join("scenarios/one.scn"), "[[inject]]\nstage = \"M.c\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tm"))
        .args(["simulate", "--case", "tiny", "--scenario", "one"])
        .env("TM_CASES_DIR", &root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("done"));

    let out = Command::new(env!("CARGO_BIN_EXE_tm"))
        .args(["validate", "--case", "smtp"])
        .env("TM_CASES_DIR", &root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_case_exits_two() {
    let out = tm(&["validate", "--case", "foo"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_reports_full_coverage() {
    let out = tm(&["audit-anchors"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("email-security: 81/81"));
    assert!(stdout(&out).contains("smtp: 15/15"));
}

#[test]
fn usage_error_exits_two() {
    assert_eq!(tm(&["simulate"]).status.code(), Some(2));
    assert_eq!(tm(&["frobnicate"]).status.code(), Some(2));
}
