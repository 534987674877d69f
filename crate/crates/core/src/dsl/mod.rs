//! Textual syntax for thinging machine models (`.tm`) and their events
//! (`.tme`).
//!
//! ```text
//! model      := decl*
//! decl       := machine | flow | trigger
//! machine    := "machine" NAME "{" (stage | decl)* "}"
//! stage      := KIND NAME attr* ";"
//! attr       := "guard" NAME | "apply" NAME | "sink"
//!             | "anchor" INT ("," INT)* | "label" STRING
//! flow       := "flow" PATH "->" PATH ("when" NAME)? ("anchor" INT ("," INT)*)? ";"
//! trigger    := "trigger" PATH "->" PATH ("make" NAME)? ("anchor" INT ("," INT)*)? ";"
//! KIND       := create | process | release | transfer | receive
//! PATH       := NAME ("." NAME)*
//! ```
//!
//! Event files:
//!
//! ```text
//! events     := (event | after)*
//! event      := "event" NAME "{" ("region" element ("," element)* ";"?)+ "}"
//! element    := PATH ("->" PATH)?
//! after      := "after" NAME "->" NAME ";"
//! ```
//!
//! `//` starts a comment that runs to the end of the line. Edge paths inside
//! a machine block resolve against that machine first, then outward.
//!
//! Diagnostic codes:
//!
//! | code | meaning |
//! |------|---------|
//! | P001 | unexpected token |
//! | P002 | invalid character |
//! | P003 | unterminated string literal |
//! | P004 | integer literal out of range |
//! | P005 | duplicate identifier |
//! | P006 | unresolved reference |
//! | P007 | edge from a stage to itself |
//! | P008 | attribute given twice |
//! | P010 | unresolved region element |
//! | P011 | unknown event in chronology |
//! | P012 | cyclic chronology |
//! | P013 | duplicate event name |

mod events;
mod lexer;
mod parser;
mod printer;

use std::fmt;

pub use events::{parse_events, parse_events_named};
pub use printer::print;

use crate::model::{build_model, BuildError, Declaration, Model};
pub use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticCode {
    UnexpectedToken,
    InvalidCharacter,
    UnterminatedString,
    IntegerRange,
    DuplicateId,
    UnresolvedReference,
    SelfEdge,
    DuplicateAttribute,
    UnresolvedRegionElement,
    UnknownEventInChronology,
    CyclicChronology,
    DuplicateEvent,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::UnexpectedToken => "P001",
            DiagnosticCode::InvalidCharacter => "P002",
            DiagnosticCode::UnterminatedString => "P003",
            DiagnosticCode::IntegerRange => "P004",
            DiagnosticCode::DuplicateId => "P005",
            DiagnosticCode::UnresolvedReference => "P006",
            DiagnosticCode::SelfEdge => "P007",
            DiagnosticCode::DuplicateAttribute => "P008",
            DiagnosticCode::UnresolvedRegionElement => "P010",
            DiagnosticCode::UnknownEventInChronology => "P011",
            DiagnosticCode::CyclicChronology => "P012",
            DiagnosticCode::DuplicateEvent => "P013",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    pub code: DiagnosticCode,
    pub message: String,
}

impl ParseDiagnostic {
    pub(crate) fn new(code: DiagnosticCode, span: SourceSpan, message: impl Into<String>) -> Self {
        Self {
            span,
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} {}", self.span, self.code, self.message)
    }
}

impl std::error::Error for ParseDiagnostic {}

fn build_diagnostic(err: BuildError, file: &str) -> ParseDiagnostic {
    let code = match err {
        BuildError::DuplicateId { .. } => DiagnosticCode::DuplicateId,
        BuildError::UnresolvedReference { .. } => DiagnosticCode::UnresolvedReference,
        BuildError::SelfEdge { .. } => DiagnosticCode::SelfEdge,
    };
    let span = err
        .span()
        .cloned()
        .unwrap_or_else(|| SourceSpan::new(file, 1, 1, 0));
    let message = match &err {
        BuildError::DuplicateId { id, .. } => format!("duplicate identifier `{id}`"),
        BuildError::UnresolvedReference { id, .. } => format!("unresolved reference `{id}`"),
        BuildError::SelfEdge { id, .. } => format!("edge from `{id}` to itself"),
    };
    ParseDiagnostic::new(code, span, message)
}

/// Parses model source into declarations without resolving references.
pub fn parse_declarations(file: &str, text: &str) -> Result<Vec<Declaration>, Vec<ParseDiagnostic>> {
    let (tokens, mut diags) = lexer::tokenize(file, text);
    let (decls, parse_diags) = parser::Parser::new(tokens).parse_model();
    diags.extend(parse_diags);
    if diags.is_empty() {
        Ok(decls)
    } else {
        Err(diags)
    }
}

/// Parses a model. `file` only labels diagnostic spans.
pub fn parse_named(file: &str, text: &str) -> Result<Model, Vec<ParseDiagnostic>> {
    let decls = parse_declarations(file, text)?;
    build_model(&decls).map_err(|e| vec![build_diagnostic(e, file)])
}

pub fn parse(text: &str) -> Result<Model, Vec<ParseDiagnostic>> {
    parse_named("", text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StageKind;

    #[test]
    fn minimal_machine() {
        let m = parse("machine M { create c; release r; transfer t; flow c -> r; flow r -> t; }")
            .unwrap();
        assert_eq!(m.thimacs().len(), 1);
        assert_eq!(m.stages().len(), 3);
        assert_eq!(m.flows().len(), 2);
    }

    #[test]
    fn unclosed_machine_header() {
        let diags = parse("machine {").unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::UnexpectedToken);
        assert_eq!(diags[0].code.as_str(), "P001");
        assert_eq!(diags[0].span.line, 1);
    }

    #[test]
    fn unresolved_reference_has_position() {
        let diags = parse("machine M {\n  create c;\n  flow c -> X.process;\n}").unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagnosticCode::UnresolvedReference);
        assert!(diags[0].message.contains("X.process"));
        assert_eq!(diags[0].span.line, 3);
    }

    #[test]
    fn attributes_parse() {
        let m = parse(
            r#"machine M {
                 receive r;
                 process p guard ok apply stamp anchor 4, 5 label "check \"it\"";
                 release bad sink anchor 6;
                 release good;
                 flow r -> p;
                 flow p -> good when true anchor 7;
                 flow p -> bad when false;
               }
               machine N { create n; }
               trigger M.p -> N.n make copy anchor 8;"#,
        )
        .unwrap();
        let p = m.stage(m.stage_by_path("M.p").unwrap());
        assert_eq!(p.kind, StageKind::Process);
        assert_eq!(p.guard.as_deref(), Some("ok"));
        assert_eq!(p.transform.as_deref(), Some("stamp"));
        assert_eq!(p.anchors, vec![4, 5]);
        assert_eq!(p.label.as_deref(), Some("check \"it\""));
        assert!(m.stage(m.stage_by_path("M.bad").unwrap()).sink);
        assert_eq!(m.flows()[1].branch.as_deref(), Some("true"));
        assert_eq!(m.flows()[1].anchors, vec![7]);
        assert_eq!(m.triggers()[0].constructor.as_deref(), Some("copy"));
    }

    #[test]
    fn duplicate_attribute() {
        let diags = parse("machine M { process p guard a guard b; }").unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::DuplicateAttribute);
    }

    #[test]
    fn recovery_reports_several_errors() {
        let diags = parse("machine M { create ; release r }; flow -> ;").unwrap_err();
        assert!(diags.len() >= 2, "{diags:?}");
    }

    #[test]
    fn keywords_usable_as_names() {
        let m = parse("machine Ehlo { create create; release release; flow create -> release; }")
            .unwrap();
        assert!(m.stage_by_path("Ehlo.create").is_some());
    }

    #[test]
    fn nested_machines_and_outward_resolution() {
        let m = parse(
            "machine A { create c; release r; transfer t; flow c -> r; flow r -> t;
               machine B { transfer t; receive x; flow t -> x; flow A.t -> t; } }",
        )
        .unwrap();
        let f = &m.flows()[3];
        assert_eq!(m.stage(f.from).path, "A.t");
        assert_eq!(m.stage(f.to).path, "A.B.t");
    }
}
