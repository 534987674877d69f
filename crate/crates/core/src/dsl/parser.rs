use super::lexer::{Tok, Token};
use super::{DiagnosticCode, ParseDiagnostic};
use crate::model::{Declaration, StageKind};
use crate::span::SourceSpan;

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
}

type PResult<T> = Result<T, ()>;

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        Self {
            tokens,
            pos: 0,
            diags: Vec::new(),
        }
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub(crate) fn peek_span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    pub(crate) fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn error(&mut self, expected: &str) {
        let span = self.peek_span();
        let found = self.peek().describe();
        self.diags.push(ParseDiagnostic::new(
            DiagnosticCode::UnexpectedToken,
            span,
            format!("unexpected token {found}, expected {expected}"),
        ));
    }

    pub(crate) fn push_diag(&mut self, diag: ParseDiagnostic) {
        self.diags.push(diag);
    }

    pub(crate) fn take_diags(&mut self) -> Vec<ParseDiagnostic> {
        std::mem::take(&mut self.diags)
    }

    pub(crate) fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    pub(crate) fn expect(&mut self, tok: Tok, expected: &str) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.advance().span)
        } else {
            self.error(expected);
            Err(())
        }
    }

    pub(crate) fn name(&mut self, expected: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(w) => {
                let span = self.advance().span;
                Ok((w, span))
            }
            _ => {
                self.error(expected);
                Err(())
            }
        }
    }

    pub(crate) fn path(&mut self) -> PResult<(String, SourceSpan)> {
        let (mut path, span) = self.name("a path")?;
        while *self.peek() == Tok::Dot {
            self.advance();
            let (part, _) = self.name("a name after `.`")?;
            path.push('.');
            path.push_str(&part);
        }
        Ok((path, span))
    }

    fn int_list(&mut self) -> PResult<Vec<u32>> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Tok::Int(n) => {
                    out.push(*n);
                    self.advance();
                }
                _ => {
                    self.error("an integer");
                    return Err(());
                }
            }
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                return Ok(out);
            }
        }
    }

    /// Skips to just past the next `;`, or to the next `}` / end of input.
    pub(crate) fn recover(&mut self) {
        loop {
            match self.peek() {
                Tok::Eof | Tok::RBrace => return,
                Tok::Semi => {
                    self.advance();
                    return;
                }
                _ => {
                    self.advance();
                }
            }
        }
    }

    pub(crate) fn parse_model(mut self) -> (Vec<Declaration>, Vec<ParseDiagnostic>) {
        let mut decls = Vec::new();
        while !self.at_eof() {
            if *self.peek() == Tok::RBrace {
                self.error("`machine`, `flow` or `trigger`");
                self.advance();
                continue;
            }
            if self.decl(&[], &mut decls).is_err() {
                self.recover();
            }
        }
        (decls, self.diags)
    }

    fn decl(&mut self, scope: &[String], out: &mut Vec<Declaration>) -> PResult<()> {
        if self.is_keyword("machine") {
            self.machine(scope, out)
        } else if self.is_keyword("flow") {
            self.flow(scope, out)
        } else if self.is_keyword("trigger") {
            self.trigger(scope, out)
        } else {
            self.error("`machine`, `flow` or `trigger`");
            Err(())
        }
    }

    fn machine(&mut self, scope: &[String], out: &mut Vec<Declaration>) -> PResult<()> {
        let start = self.advance().span;
        let (name, _) = self.name("machine name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut path = scope.to_vec();
        path.push(name);
        out.push(Declaration::Machine {
            path: path.clone(),
            span: Some(start),
        });
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.advance();
                    return Ok(());
                }
                Tok::Eof => {
                    self.error("`}`");
                    return Err(());
                }
                Tok::Ident(w) if StageKind::from_keyword(w).is_some() => {
                    if self.stage(&path, out).is_err() {
                        self.recover();
                    }
                }
                _ => {
                    if self.decl(&path, out).is_err() {
                        self.recover();
                    }
                }
            }
        }
    }

    fn stage(&mut self, machine: &[String], out: &mut Vec<Declaration>) -> PResult<()> {
        let Tok::Ident(kw) = self.peek().clone() else {
            unreachable!("caller checked for a stage keyword")
        };
        let kind = StageKind::from_keyword(&kw).expect("stage keyword");
        let start = self.advance().span;
        let (name, _) = self.name("stage name")?;
        let mut guard = None;
        let mut transform = None;
        let mut sink = false;
        let mut anchors: Option<Vec<u32>> = None;
        let mut label = None;
        loop {
            let attr_span = self.peek_span();
            let attr = match self.peek() {
                Tok::Semi => {
                    self.advance();
                    break;
                }
                Tok::Ident(w) => w.clone(),
                _ => {
                    self.error("a stage attribute or `;`");
                    return Err(());
                }
            };
            let duplicate = match attr.as_str() {
                "guard" => {
                    self.advance();
                    guard.replace(self.name("guard name")?.0).is_some()
                }
                "apply" => {
                    self.advance();
                    transform.replace(self.name("transform name")?.0).is_some()
                }
                "sink" => {
                    self.advance();
                    std::mem::replace(&mut sink, true)
                }
                "anchor" => {
                    self.advance();
                    anchors.replace(self.int_list()?).is_some()
                }
                "label" => {
                    self.advance();
                    match self.peek().clone() {
                        Tok::Str(s) => {
                            self.advance();
                            label.replace(s).is_some()
                        }
                        _ => {
                            self.error("a string literal");
                            return Err(());
                        }
                    }
                }
                _ => {
                    self.error("a stage attribute or `;`");
                    return Err(());
                }
            };
            if duplicate {
                self.diags.push(ParseDiagnostic::new(
                    DiagnosticCode::DuplicateAttribute,
                    attr_span,
                    format!("attribute `{attr}` given twice"),
                ));
            }
        }
        out.push(Declaration::Stage {
            machine: machine.to_vec(),
            name,
            kind,
            guard,
            transform,
            sink,
            anchors: anchors.unwrap_or_default(),
            label,
            span: Some(start),
        });
        Ok(())
    }

    fn edge_ends(&mut self) -> PResult<(String, String)> {
        let (from, _) = self.path()?;
        self.expect(Tok::Arrow, "`->`")?;
        let (to, _) = self.path()?;
        Ok((from, to))
    }

    fn optional_anchor(&mut self) -> PResult<Vec<u32>> {
        if self.is_keyword("anchor") {
            self.advance();
            self.int_list()
        } else {
            Ok(Vec::new())
        }
    }

    fn flow(&mut self, scope: &[String], out: &mut Vec<Declaration>) -> PResult<()> {
        let start = self.advance().span;
        let (from, to) = self.edge_ends()?;
        let branch = if self.is_keyword("when") {
            self.advance();
            Some(self.name("branch label")?.0)
        } else {
            None
        };
        let anchors = self.optional_anchor()?;
        self.expect(Tok::Semi, "`;`")?;
        out.push(Declaration::Flow {
            scope: scope.to_vec(),
            from,
            to,
            branch,
            anchors,
            span: Some(start),
        });
        Ok(())
    }

    fn trigger(&mut self, scope: &[String], out: &mut Vec<Declaration>) -> PResult<()> {
        let start = self.advance().span;
        let (from, to) = self.edge_ends()?;
        let constructor = if self.is_keyword("make") {
            self.advance();
            Some(self.name("constructor name")?.0)
        } else {
            None
        };
        let anchors = self.optional_anchor()?;
        self.expect(Tok::Semi, "`;`")?;
        out.push(Declaration::Trigger {
            scope: scope.to_vec(),
            from,
            to,
            constructor,
            anchors,
            span: Some(start),
        });
        Ok(())
    }
}
