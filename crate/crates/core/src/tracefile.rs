//! JSON-lines trace files. The first line is a header
//! `{"diagram", "variant", "params", "truncated"}`; every further line is one
//! element: `{"state": ...}` for system-state traces, or
//! `{"config": ..., "step": [...]}` for token-game runs, where `step` lists
//! the choices that led into the configuration and is absent on the first
//! line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::syntax::ActivityDiagram;
use crate::system::{SystemState, Trace};
use crate::token_game::{Configuration, Run, StepChoice};

#[derive(Debug, thiserror::Error)]
pub enum TraceFileError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("empty trace file")]
    Empty,
    #[error("trace is for variant `{found}`, expected `{expected}`")]
    WrongVariant { expected: Variant, found: Variant },
}

fn at(line: usize, e: impl fmt::Display) -> TraceFileError {
    TraceFileError::Line { line, message: e.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Atomic actions in one method.
    V1,
    /// Actions as methods.
    V2,
    /// Token-game configurations.
    Token,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::Token => "token",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            "token" => Ok(Variant::Token),
            other => Err(format!("unknown variant `{other}` (expected v1, v2 or token)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub diagram: String,
    pub variant: Variant,
    #[serde(default)]
    pub params: Json,
    #[serde(default)]
    pub truncated: bool,
}

impl Header {
    pub fn new(diagram: &str, variant: Variant, params: Json, truncated: bool) -> Self {
        Header { diagram: diagram.to_string(), variant, params, truncated }
    }
}

fn header_line(h: &Header) -> String {
    serde_json::to_string(h).expect("headers serialize")
}

pub fn write_states(header: &Header, trace: &Trace) -> String {
    let mut out = header_line(header);
    out.push('\n');
    for s in &trace.states {
        out.push_str(&json!({ "state": s }).to_string());
        out.push('\n');
    }
    out
}

pub fn write_run(header: &Header, ad: &ActivityDiagram, run: &Run) -> String {
    let mut out = header_line(header);
    out.push('\n');
    for (k, c) in run.configs.iter().enumerate() {
        let mut line = json!({ "config": c.to_json(ad) });
        if k > 0 {
            line["step"] = serde_json::to_value(&run.steps[k - 1]).expect("choices serialize");
        }
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// The parsed header and the remaining lines with their 1-based numbers.
/// Blank lines are skipped.
type Body<'a> = Vec<(usize, &'a str)>;

fn split(text: &str) -> Result<(Header, Body<'_>), TraceFileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l));
    let (i, first) = lines.next().ok_or(TraceFileError::Empty)?;
    let header: Header = serde_json::from_str(first).map_err(|e| at(i, format!("header: {e}")))?;
    Ok((header, lines.collect()))
}

fn line_json(line: usize, text: &str) -> Result<Json, TraceFileError> {
    serde_json::from_str(text).map_err(|e| at(line, e))
}

pub fn read_header(text: &str) -> Result<Header, TraceFileError> {
    split(text).map(|(h, _)| h)
}

pub fn read_states(text: &str) -> Result<(Header, Trace), TraceFileError> {
    let (header, body) = split(text)?;
    let mut states = Vec::with_capacity(body.len());
    for (line, text) in body {
        let v = line_json(line, text)?;
        let s = v.get("state").ok_or_else(|| at(line, "missing `state`"))?;
        states.push(SystemState::deserialize(s).map_err(|e| at(line, e))?);
    }
    let truncated = header.truncated;
    Ok((header, Trace { states, truncated }))
}

pub fn read_run(text: &str, ad: &ActivityDiagram) -> Result<(Header, Run), TraceFileError> {
    let (header, body) = split(text)?;
    if header.variant != Variant::Token {
        return Err(TraceFileError::WrongVariant { expected: Variant::Token, found: header.variant });
    }
    let mut configs = Vec::with_capacity(body.len());
    let mut steps = Vec::new();
    for (k, (line, text)) in body.into_iter().enumerate() {
        let v = line_json(line, text)?;
        let c = v.get("config").ok_or_else(|| at(line, "missing `config`"))?;
        configs.push(Configuration::from_json(ad, c).map_err(|e| at(line, e))?);
        if k > 0 {
            let step = match v.get("step") {
                Some(st) => Vec::<StepChoice>::deserialize(st).map_err(|e| at(line, e))?,
                None => Vec::new(),
            };
            steps.push(step);
        }
    }
    if configs.is_empty() {
        return Err(TraceFileError::Empty);
    }
    let truncated = header.truncated;
    Ok((header, Run { configs, steps, truncated }))
}
