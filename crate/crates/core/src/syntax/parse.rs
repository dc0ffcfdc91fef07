use std::collections::HashMap;

use super::{ActivityDiagram, Diagnostic, Guard, Location, Node, NodeKind, Pin, PinType, Transition};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Dot,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn loc(self) -> Location {
        Location::Source { line: self.line, column: self.column }
    }
}

fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<(Tok, Pos)> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    diags.push(Diagnostic::error("syntax", pos.loc(), "unexpected `/`"));
                }
            }
            '{' | '}' | ';' | ',' | ':' | '.' => {
                bump!();
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    _ => Tok::Dot,
                };
                out.push((tok, pos));
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    out.push((Tok::Arrow, pos));
                } else {
                    diags.push(Diagnostic::error("syntax", pos.loc(), "expected `->`"));
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                let mut closed = false;
                while let Some(c) = bump!() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match bump!() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(c @ ('"' | '\\')) => s.push(c),
                            Some(c) => {
                                diags.push(Diagnostic::error(
                                    "syntax",
                                    Location::Source { line, column: column.saturating_sub(1) },
                                    format!("unknown escape `\\{c}`"),
                                ));
                            }
                            None => break,
                        },
                        '\n' => {
                            break;
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    diags.push(Diagnostic::error("syntax", pos.loc(), "unterminated string"));
                }
                out.push((Tok::Str(s), pos));
            }
            '⊤' | '⊥' => {
                bump!();
                out.push((Tok::Ident(if c == '⊤' { "top" } else { "control" }.into()), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), pos));
            }
            other => {
                bump!();
                diags.push(Diagnostic::error("syntax", pos.loc(), format!("unexpected character `{other}`")));
            }
        }
    }
    out.push((Tok::Eof, Pos { line, column }));
    out
}

struct EdgeDecl {
    src: String,
    out_pin: Option<String>,
    dst: String,
    in_pin: Option<String>,
    pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, ()>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&mut self, expected: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.diags.push(Diagnostic::error(
            "syntax",
            self.pos().loc(),
            format!("expected {expected}, found {found}"),
        ));
        Err(())
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    /// Skips to just past the next `;`, or to a `}` / end of input.
    fn recover(&mut self) {
        loop {
            match self.peek() {
                Tok::Semi => {
                    self.advance();
                    return;
                }
                Tok::RBrace | Tok::Eof => return,
                _ => {
                    self.advance();
                }
            }
        }
    }

    fn pin_type(&mut self) -> PResult<PinType> {
        let name = self.ident("a pin type")?;
        Ok(match name.as_str() {
            "top" => PinType::Top,
            "control" => PinType::Control,
            _ => PinType::Data(name),
        })
    }

    fn pins(&mut self, outputs: bool) -> PResult<Vec<Pin>> {
        let mut pins = Vec::new();
        loop {
            let name = self.ident("a pin name")?;
            let ty = if *self.peek() == Tok::Colon {
                self.advance();
                self.pin_type()?
            } else {
                PinType::Control
            };
            let guard_pos = self.pos();
            let guard = if self.keyword("guard") {
                if !outputs {
                    self.diags.push(Diagnostic::error(
                        "syntax",
                        guard_pos.loc(),
                        "guards are only allowed on output pins",
                    ));
                    return Err(());
                }
                Some(Guard(self.string("a guard string")?))
            } else {
                None
            };
            pins.push(if outputs {
                Pin::output(name, ty, guard.unwrap_or_else(Guard::always))
            } else {
                Pin::input(name, ty)
            });
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                return Ok(pins);
            }
        }
    }

    fn node_decl(&mut self, kind: NodeKind) -> PResult<Node> {
        let name = self.ident("a node name")?;
        let mut node = Node::new(kind, name);
        if self.keyword("role") {
            node.role = self.ident("a role name")?;
        }
        if self.keyword("in") {
            node.in_pins = self.pins(false)?;
        }
        if self.keyword("out") {
            node.out_pins = self.pins(true)?;
        }
        if self.keyword("effect") {
            node.effect = self.string("an effect string")?;
        }
        self.expect(Tok::Semi, "`;` after node declaration")?;
        Ok(node)
    }

    fn edge_decl(&mut self) -> PResult<EdgeDecl> {
        let pos = self.pos();
        let src = self.ident("a node name")?;
        if *self.peek() == Tok::Dot {
            self.advance();
            let out_pin = self.ident("an output pin name")?;
            self.expect(Tok::Arrow, "`->`")?;
            let dst = self.ident("a node name")?;
            self.expect(Tok::Dot, "`.` and an input pin name")?;
            let in_pin = self.ident("an input pin name")?;
            self.expect(Tok::Semi, "`;` after transition")?;
            Ok(EdgeDecl { src, out_pin: Some(out_pin), dst, in_pin: Some(in_pin), pos })
        } else {
            self.expect(Tok::Arrow, "`->` or `.`")?;
            let dst = self.ident("a node name")?;
            self.expect(Tok::Semi, "`;` after transition")?;
            Ok(EdgeDecl { src, out_pin: None, dst, in_pin: None, pos })
        }
    }
}

/// Parses `.ad` source text into a pin-complete diagram.
///
/// Transition endpoints naming an undeclared pin get that pin synthesized as
/// a control pin; pin-elided transitions (`a -> b;`) get fresh control pins
/// named `_o<k>` / `_i<k>`. On failure every diagnostic carries a
/// line/column location.
pub fn parse(text: &str) -> Result<ActivityDiagram, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let toks = lex(text, &mut diags);
    let mut p = Parser { toks, at: 0, diags };

    let header = (|| -> PResult<String> {
        if !p.keyword("activity") {
            return p.fail("`activity`");
        }
        let name = p.ident("an activity name")?;
        p.expect(Tok::LBrace, "`{`")?;
        Ok(name)
    })();
    let Ok(name) = header else {
        return Err(p.diags);
    };

    let mut nodes: Vec<(Node, Pos)> = Vec::new();
    let mut edges: Vec<EdgeDecl> = Vec::new();
    loop {
        match p.peek().clone() {
            Tok::RBrace => {
                p.advance();
                break;
            }
            Tok::Eof => {
                let _ = p.fail::<()>("`}`");
                break;
            }
            Tok::Ident(word) => {
                let kind = NodeKind::from_keyword(&word);
                let starts_node = kind.is_some() && matches!(p.peek_at(1), Tok::Ident(_));
                let pos = p.pos();
                let res = if starts_node {
                    p.advance();
                    p.node_decl(kind.unwrap()).map(|n| nodes.push((n, pos)))
                } else {
                    p.edge_decl().map(|e| edges.push(e))
                };
                if res.is_err() {
                    p.recover();
                }
            }
            _ => {
                let _ = p.fail::<()>("a node declaration or transition");
                p.advance();
                p.recover();
            }
        }
    }
    if *p.peek() != Tok::Eof {
        let _ = p.fail::<()>("end of input");
    }
    let mut diags = p.diags;

    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, (node, pos)) in nodes.iter().enumerate() {
        if index.contains_key(&node.name) {
            diags.push(Diagnostic::error(
                "duplicate-node",
                pos.loc(),
                format!("node `{}` is declared more than once", node.name),
            ));
        } else {
            index.insert(node.name.clone(), i);
        }
        let mut seen = std::collections::HashSet::new();
        for pin in node.in_pins.iter().chain(&node.out_pins) {
            if !seen.insert(&pin.name) {
                diags.push(Diagnostic::error(
                    "duplicate-pin",
                    pos.loc(),
                    format!("pin `{}` is declared more than once on `{}`", pin.name, node.name),
                ));
            }
        }
        if node.kind == NodeKind::Initial && !node.in_pins.is_empty() {
            diags.push(Diagnostic::error("initial-with-input", pos.loc(), "initial nodes cannot have input pins"));
        }
        if node.kind == NodeKind::Final && !node.out_pins.is_empty() {
            diags.push(Diagnostic::error("final-with-output", pos.loc(), "final nodes cannot have output pins"));
        }
    }

    let mut transitions = Vec::new();
    for e in edges {
        let (Some(&s), Some(&d)) = (index.get(&e.src), index.get(&e.dst)) else {
            for missing in [&e.src, &e.dst] {
                if !index.contains_key(missing) {
                    diags.push(Diagnostic::error(
                        "unknown-node",
                        e.pos.loc(),
                        format!("transition references unknown node `{missing}`"),
                    ));
                }
            }
            continue;
        };
        let out_pin = match e.out_pin {
            Some(pin) => {
                let src = &mut nodes[s].0;
                if src.in_pin(&pin).is_some() {
                    diags.push(Diagnostic::error(
                        "pin-direction",
                        e.pos.loc(),
                        format!("`{}.{pin}` is an input pin", src.name),
                    ));
                    continue;
                }
                if src.out_pin(&pin).is_none() {
                    src.out_pins.push(Pin::output(pin.clone(), PinType::Control, Guard::always()));
                }
                pin
            }
            None => {
                let src = &mut nodes[s].0;
                let pin = fresh_pin_name(src, "_o");
                src.out_pins.push(Pin::output(pin.clone(), PinType::Control, Guard::always()));
                pin
            }
        };
        let in_pin = match e.in_pin {
            Some(pin) => {
                let dst = &mut nodes[d].0;
                if dst.out_pin(&pin).is_some() {
                    diags.push(Diagnostic::error(
                        "pin-direction",
                        e.pos.loc(),
                        format!("`{}.{pin}` is an output pin", dst.name),
                    ));
                    continue;
                }
                if dst.in_pin(&pin).is_none() {
                    dst.in_pins.push(Pin::input(pin.clone(), PinType::Control));
                }
                pin
            }
            None => {
                let dst = &mut nodes[d].0;
                let pin = fresh_pin_name(dst, "_i");
                dst.in_pins.push(Pin::input(pin.clone(), PinType::Control));
                pin
            }
        };
        for (node, is_in) in [(s, false), (d, true)] {
            let n = &nodes[node].0;
            if is_in && n.kind == NodeKind::Initial {
                diags.push(Diagnostic::error("initial-with-input", e.pos.loc(), format!("transition enters initial node `{}`", n.name)));
            }
            if !is_in && n.kind == NodeKind::Final {
                diags.push(Diagnostic::error("final-with-output", e.pos.loc(), format!("transition leaves final node `{}`", n.name)));
            }
        }
        let t = Transition::new(e.src, out_pin, e.dst, in_pin);
        if transitions.contains(&t) {
            diags.push(Diagnostic::error("duplicate-transition", e.pos.loc(), format!("transition {t} is declared more than once")));
            continue;
        }
        transitions.push(t);
    }

    if !diags.is_empty() {
        return Err(diags);
    }
    let nodes = nodes.into_iter().map(|(n, _)| n).collect();
    ActivityDiagram::new(name, nodes, transitions).map_err(|ds| {
        // Structural checks already ran above with source positions; anything
        // left is reported at the diagram header.
        ds.into_iter()
            .map(|mut d| {
                d.location = Location::Source { line: 1, column: 1 };
                d
            })
            .collect()
    })
}

fn fresh_pin_name(node: &Node, prefix: &str) -> String {
    (0..)
        .map(|k| format!("{prefix}{k}"))
        .find(|name| !node.has_pin(name))
        .expect("unbounded")
}
