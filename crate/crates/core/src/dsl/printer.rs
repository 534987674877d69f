use std::fmt::Write;

use crate::model::{Member, Model, ThimacId};

/// Renders `model` in canonical form: declaration order, two-space
/// indentation, edges at the top level with absolute paths, trailing newline.
pub fn print(model: &Model) -> String {
    let mut out = String::new();
    for root in model.roots() {
        print_machine(model, *root, 0, &mut out);
    }
    if !model.flows().is_empty() {
        out.push('\n');
        for f in model.flows() {
            let _ = write!(
                out,
                "flow {} -> {}",
                model.stage(f.from).path,
                model.stage(f.to).path
            );
            if let Some(b) = &f.branch {
                let _ = write!(out, " when {b}");
            }
            write_anchors(&f.anchors, &mut out);
            out.push_str(";\n");
        }
    }
    if !model.triggers().is_empty() {
        out.push('\n');
        for t in model.triggers() {
            let _ = write!(
                out,
                "trigger {} -> {}",
                model.stage(t.from).path,
                model.stage(t.to).path
            );
            if let Some(c) = &t.constructor {
                let _ = write!(out, " make {c}");
            }
            write_anchors(&t.anchors, &mut out);
            out.push_str(";\n");
        }
    }
    out
}

fn print_machine(model: &Model, id: ThimacId, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let thimac = model.thimac(id);
    let _ = writeln!(out, "{indent}machine {} {{", thimac.name);
    for member in &thimac.members {
        match member {
            Member::Stage(s) => {
                let s = model.stage(*s);
                let _ = write!(out, "{indent}  {} {}", s.kind, s.name);
                if let Some(g) = &s.guard {
                    let _ = write!(out, " guard {g}");
                }
                if let Some(t) = &s.transform {
                    let _ = write!(out, " apply {t}");
                }
                if s.sink {
                    out.push_str(" sink");
                }
                write_anchors(&s.anchors, out);
                if let Some(l) = &s.label {
                    let _ = write!(out, " label \"{}\"", escape(l));
                }
                out.push_str(";\n");
            }
            Member::Machine(child) => print_machine(model, *child, depth + 1, out),
        }
    }
    let _ = writeln!(out, "{indent}}}");
}

fn write_anchors(anchors: &[u32], out: &mut String) {
    if anchors.is_empty() {
        return;
    }
    let list: Vec<String> = anchors.iter().map(u32::to_string).collect();
    let _ = write!(out, " anchor {}", list.join(", "));
}

fn escape(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s
}
