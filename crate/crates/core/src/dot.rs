//! Graphviz DOT rendering of a model.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::event::ResolvedRegion;
use crate::model::{Member, Model, StageId, ThimacId};

/// Renders `model` as a DOT digraph: one node per stage labelled
/// `kind:path`, machines as nested clusters, flows solid, triggers dashed,
/// sinks double-bordered. Elements of `highlight` are drawn in red.
pub fn to_dot(model: &Model, highlight: Option<&ResolvedRegion>) -> String {
    let stages: BTreeSet<_> = highlight.map(|r| r.touched_stages(model)).unwrap_or_default();
    let flows = highlight.map(|r| r.flows.clone()).unwrap_or_default();
    let mut out = String::from("digraph tm {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    for root in model.roots() {
        cluster(model, *root, 1, &stages, &mut out);
    }
    for f in model.flows() {
        let mut attrs = Vec::new();
        if let Some(b) = &f.branch {
            attrs.push(format!("label=\"{b}\""));
        }
        if flows.contains(&f.id) {
            attrs.push("color=red, penwidth=2".to_string());
        }
        edge(&mut out, f.from.0, f.to.0, &attrs);
    }
    for t in model.triggers() {
        let mut attrs = vec!["style=dashed".to_string()];
        if let Some(c) = &t.constructor {
            attrs.push(format!("label=\"{}\"", quote(c)));
        }
        edge(&mut out, t.from.0, t.to.0, &attrs);
    }
    out.push_str("}\n");
    out
}

fn edge(out: &mut String, from: u32, to: u32, attrs: &[String]) {
    if attrs.is_empty() {
        let _ = writeln!(out, "  s{from} -> s{to};");
    } else {
        let _ = writeln!(out, "  s{from} -> s{to} [{}];", attrs.join(", "));
    }
}

fn cluster(model: &Model, id: ThimacId, depth: usize, highlight: &BTreeSet<StageId>, out: &mut String) {
    let pad = "  ".repeat(depth);
    let thimac = model.thimac(id);
    let _ = writeln!(out, "{pad}subgraph cluster_{} {{", id.0);
    let _ = writeln!(out, "{pad}  label=\"{}\";", quote(&thimac.name));
    for member in &thimac.members {
        match member {
            Member::Stage(s) => {
                let stage = model.stage(*s);
                let mut attrs = vec![format!("label=\"{}:{}\"", stage.kind, quote(&stage.path))];
                if stage.sink {
                    attrs.push("peripheries=2".into());
                }
                if highlight.contains(s) {
                    attrs.push("color=red, penwidth=2".into());
                }
                let _ = writeln!(out, "{pad}  s{} [{}];", s.0, attrs.join(", "));
            }
            Member::Machine(child) => cluster(model, *child, depth + 1, highlight, out),
        }
    }
    let _ = writeln!(out, "{pad}}}");
}

fn quote(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}
