use std::fmt::Write;

use super::{ActivityDiagram, Pin, PinType, DEFAULT_ROLE, TRUE_GUARD};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn pin(p: &Pin) -> String {
    let mut s = p.name.clone();
    match &p.ty {
        PinType::Control => {}
        ty => {
            let _ = write!(s, ": {ty}");
        }
    }
    if let Some(g) = &p.guard {
        if g.text() != TRUE_GUARD {
            let _ = write!(s, " guard {}", quote(g.text()));
        }
    }
    s
}

/// Canonical `.ad` text. Every pin is declared and every transition names
/// both pins, so parsing the output reproduces the diagram exactly.
pub fn print(ad: &ActivityDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "activity {} {{", ad.name());
    for n in ad.nodes() {
        let mut line = format!("  {} {}", n.kind, n.name);
        if n.role != DEFAULT_ROLE {
            let _ = write!(line, " role {}", n.role);
        }
        if !n.in_pins.is_empty() {
            let pins: Vec<_> = n.in_pins.iter().map(pin).collect();
            let _ = write!(line, " in {}", pins.join(", "));
        }
        if !n.out_pins.is_empty() {
            let pins: Vec<_> = n.out_pins.iter().map(pin).collect();
            let _ = write!(line, " out {}", pins.join(", "));
        }
        if !n.effect.is_empty() {
            let _ = write!(line, " effect {}", quote(&n.effect));
        }
        line.push(';');
        let _ = writeln!(out, "{line}");
    }
    for t in ad.transitions() {
        let _ = writeln!(out, "  {}.{} -> {}.{};", t.src, t.out_pin, t.dst, t.in_pin);
    }
    out.push_str("}\n");
    out
}
