use std::collections::BTreeMap;

use super::lexer::{self, Tok};
use super::parser::Parser;
use super::{DiagnosticCode, ParseDiagnostic};
use crate::event::{Chronology, Event, EventId, RegionElement};
use crate::model::Model;
use crate::span::SourceSpan;

/// Parses an event file against `model`.
pub fn parse_events(text: &str, model: &Model) -> Result<(Vec<Event>, Chronology), Vec<ParseDiagnostic>> {
    parse_events_named("", text, model)
}

pub fn parse_events_named(
    file: &str,
    text: &str,
    model: &Model,
) -> Result<(Vec<Event>, Chronology), Vec<ParseDiagnostic>> {
    let (tokens, mut diags) = lexer::tokenize(file, text);
    let mut p = Parser::new(tokens);
    let mut events: Vec<(Event, SourceSpan, Vec<SourceSpan>)> = Vec::new();
    let mut afters: Vec<(String, SourceSpan, String, SourceSpan)> = Vec::new();

    while !p.at_eof() {
        let ok = if p.is_keyword("event") {
            event(&mut p, &mut events)
        } else if p.is_keyword("after") {
            after(&mut p, &mut afters)
        } else {
            p.error("`event` or `after`");
            if *p.peek() == Tok::RBrace {
                p.advance();
            }
            Err(())
        };
        if ok.is_err() {
            p.recover();
        }
    }
    diags.extend(p.take_diags());
    if !diags.is_empty() {
        return Err(diags);
    }

    let mut by_name: BTreeMap<String, EventId> = BTreeMap::new();
    for (e, span, element_spans) in &events {
        if by_name.insert(e.name.clone(), e.id).is_some() {
            diags.push(ParseDiagnostic::new(
                DiagnosticCode::DuplicateEvent,
                span.clone(),
                format!("event `{}` declared twice", e.name),
            ));
        }
        for (element, espan) in e.region.iter().zip(element_spans) {
            if e.resolve_element(model, element).is_err() {
                diags.push(ParseDiagnostic::new(
                    DiagnosticCode::UnresolvedRegionElement,
                    espan.clone(),
                    format!("region of `{}` names unknown element `{element}`", e.name),
                ));
            }
        }
    }

    let mut chronology = Chronology {
        events: events.iter().map(|(e, _, _)| e.id).collect(),
        edges: Vec::new(),
    };
    let mut edge_spans = Vec::new();
    for (before, bspan, after, aspan) in &afters {
        let b = by_name.get(before);
        let a = by_name.get(after);
        if b.is_none() {
            diags.push(ParseDiagnostic::new(
                DiagnosticCode::UnknownEventInChronology,
                bspan.clone(),
                format!("unknown event `{before}`"),
            ));
        }
        if a.is_none() {
            diags.push(ParseDiagnostic::new(
                DiagnosticCode::UnknownEventInChronology,
                aspan.clone(),
                format!("unknown event `{after}`"),
            ));
        }
        if let (Some(b), Some(a)) = (b, a) {
            chronology.edges.push((*b, *a));
            edge_spans.push(bspan.clone());
        }
    }
    if diags.is_empty() {
        if let Some(cycle) = chronology.find_cycle() {
            let names: Vec<&str> = cycle
                .iter()
                .map(|id| events[id.index()].0.name.as_str())
                .collect();
            let span = chronology
                .edges
                .iter()
                .position(|e| *e == (cycle[0], cycle[1]))
                .map(|i| edge_spans[i].clone())
                .unwrap_or_else(|| SourceSpan::new(file, 1, 1, 0));
            diags.push(ParseDiagnostic::new(
                DiagnosticCode::CyclicChronology,
                span,
                format!("chronology cycle {}", names.join(" -> ")),
            ));
        }
    }
    if diags.is_empty() {
        Ok((events.into_iter().map(|(e, _, _)| e).collect(), chronology))
    } else {
        Err(diags)
    }
}

impl Event {
    fn resolve_element(&self, model: &Model, element: &RegionElement) -> Result<(), ()> {
        let probe = Event {
            id: self.id,
            name: String::new(),
            region: vec![element.clone()],
        };
        probe.resolve(model).map(|_| ()).map_err(|_| ())
    }
}

fn event(p: &mut Parser, out: &mut Vec<(Event, SourceSpan, Vec<SourceSpan>)>) -> Result<(), ()> {
    p.advance();
    let (name, span) = p.name("event name")?;
    p.expect(Tok::LBrace, "`{`")?;
    let mut region = Vec::new();
    let mut spans = Vec::new();
    loop {
        if *p.peek() == Tok::RBrace {
            p.advance();
            break;
        }
        if !p.is_keyword("region") {
            p.error("`region` or `}`");
            return Err(());
        }
        p.advance();
        loop {
            let (from, espan) = p.path()?;
            let element = if *p.peek() == Tok::Arrow {
                p.advance();
                let (to, _) = p.path()?;
                RegionElement::Flow { from, to }
            } else {
                RegionElement::Stage(from)
            };
            region.push(element);
            spans.push(espan);
            if *p.peek() == Tok::Comma {
                p.advance();
            } else {
                break;
            }
        }
        if *p.peek() == Tok::Semi {
            p.advance();
        }
    }
    if region.is_empty() {
        p.push_diag(ParseDiagnostic::new(
            DiagnosticCode::UnexpectedToken,
            span.clone(),
            format!("event `{name}` has an empty region"),
        ));
    }
    let id = EventId(out.len() as u32);
    out.push((Event { id, name, region }, span, spans));
    Ok(())
}

fn after(p: &mut Parser, out: &mut Vec<(String, SourceSpan, String, SourceSpan)>) -> Result<(), ()> {
    p.advance();
    let (before, bspan) = p.name("event name")?;
    p.expect(Tok::Arrow, "`->`")?;
    let (after, aspan) = p.name("event name")?;
    p.expect(Tok::Semi, "`;`")?;
    out.push((before, bspan, after, aspan));
    Ok(())
}
