//! Bundled example diagrams.

use crate::syntax::{parse, ActivityDiagram};

pub const GRADE_THESIS: &str = include_str!("../corpus/grade_thesis.ad");
pub const FAC: &str = include_str!("../corpus/fac.ad");
pub const MINIMAL: &str = include_str!("../corpus/minimal.ad");
pub const STARVED_JOIN: &str = include_str!("../corpus/starved_join.ad");
pub const CHOICE: &str = include_str!("../corpus/choice.ad");

pub const ALL: [(&str, &str); 5] = [
    ("grade_thesis", GRADE_THESIS),
    ("fac", FAC),
    ("minimal", MINIMAL),
    ("starved_join", STARVED_JOIN),
    ("choice", CHOICE),
];

fn load(name: &str, text: &str) -> ActivityDiagram {
    parse(text).unwrap_or_else(|diags| panic!("bundled diagram {name} does not parse: {diags:?}"))
}

pub fn grade_thesis() -> ActivityDiagram {
    load("grade_thesis", GRADE_THESIS)
}

pub fn fac() -> ActivityDiagram {
    load("fac", FAC)
}

pub fn minimal() -> ActivityDiagram {
    load("minimal", MINIMAL)
}

pub fn starved_join() -> ActivityDiagram {
    load("starved_join", STARVED_JOIN)
}

pub fn choice() -> ActivityDiagram {
    load("choice", CHOICE)
}

/// A fork into `width` independent actions followed by a join. Used to
/// produce state spaces of adjustable size.
pub fn wide_fork(width: usize) -> ActivityDiagram {
    let mut text = String::from("activity Wide {\n  initial i;\n  forkjoin Fork;\n  forkjoin Join;\n  final f;\n");
    for k in 0..width {
        text.push_str(&format!("  action A{k};\n"));
    }
    text.push_str("  i -> Fork;\n  Join -> f;\n");
    for k in 0..width {
        text.push_str(&format!("  Fork.o{k} -> A{k}.x;\n  A{k}.y -> Join.i{k};\n"));
    }
    text.push_str("}\n");
    load("wide_fork", &text)
}
