//! Abstract syntax of activity diagrams, plus the textual `.ad` format,
//! validation and DOT rendering.
//!
//! A diagram is immutable once built. [`ActivityDiagram::new`] checks the
//! structural invariants (unique names, transitions referencing declared
//! pins, no inputs on initial nodes, no outputs on final nodes) and
//! precomputes the incoming/outgoing transition index used by the semantics.

mod dot;
mod parse;
mod print;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dot::export_dot;
pub use parse::parse;
pub use print::print;
pub use validate::{validate, Profile};

/// Role given to nodes that carry no role annotation.
pub const DEFAULT_ROLE: &str = "unassigned";

/// Literal guard that always holds.
pub const TRUE_GUARD: &str = "true";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Action,
    Initial,
    Final,
    ForkJoin,
    DecisionMerge,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Action => "action",
            NodeKind::Initial => "initial",
            NodeKind::Final => "final",
            NodeKind::ForkJoin => "forkjoin",
            NodeKind::DecisionMerge => "decisionmerge",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "action" => NodeKind::Action,
            "initial" => NodeKind::Initial,
            "final" => NodeKind::Final,
            "forkjoin" => NodeKind::ForkJoin,
            "decisionmerge" => NodeKind::DecisionMerge,
            _ => return None,
        })
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Type of a pin: `Control` is the pseudo type of pure control pins,
/// `Top` admits any token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinType {
    Control,
    Top,
    Data(String),
}

impl PinType {
    /// Nominal compatibility: `Top` is compatible with everything, `Control`
    /// only with `Control` and `Top`, data types only with themselves.
    pub fn compatible(&self, other: &PinType) -> bool {
        match (self, other) {
            (PinType::Top, _) | (_, PinType::Top) => true,
            (PinType::Control, PinType::Control) => true,
            (PinType::Data(a), PinType::Data(b)) => a == b,
            _ => false,
        }
    }

    /// The data type carried by a transition between pins of these types, or
    /// `None` when the transition carries the control token.
    pub fn carrier(out: &PinType, inp: &PinType) -> Option<String> {
        match (out, inp) {
            (PinType::Data(t), _) | (_, PinType::Data(t)) => Some(t.clone()),
            _ => None,
        }
    }
}

impl fmt::Display for PinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PinType::Control => f.write_str("control"),
            PinType::Top => f.write_str("top"),
            PinType::Data(t) => f.write_str(t),
        }
    }
}

/// Guard expression attached to an output pin. The text is opaque here; the
/// variant bindings give it meaning.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Guard(pub String);

impl Guard {
    pub fn always() -> Self {
        Guard(TRUE_GUARD.to_string())
    }

    pub fn is_true_literal(&self) -> bool {
        self.0.trim() == TRUE_GUARD
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A pin declaration. Output pins always carry a guard (default `true`),
/// input pins never do.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pin {
    pub name: String,
    pub ty: PinType,
    pub guard: Option<Guard>,
}

impl Pin {
    pub fn input(name: impl Into<String>, ty: PinType) -> Self {
        Pin { name: name.into(), ty, guard: None }
    }

    pub fn output(name: impl Into<String>, ty: PinType, guard: Guard) -> Self {
        Pin { name: name.into(), ty, guard: Some(guard) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub name: String,
    pub role: String,
    pub in_pins: Vec<Pin>,
    pub out_pins: Vec<Pin>,
    /// Opaque effect text; empty when the node has no effect.
    pub effect: String,
}

impl Node {
    pub fn new(kind: NodeKind, name: impl Into<String>) -> Self {
        Node {
            kind,
            name: name.into(),
            role: DEFAULT_ROLE.to_string(),
            in_pins: Vec::new(),
            out_pins: Vec::new(),
            effect: String::new(),
        }
    }

    pub fn in_pin(&self, name: &str) -> Option<&Pin> {
        self.in_pins.iter().find(|p| p.name == name)
    }

    pub fn out_pin(&self, name: &str) -> Option<&Pin> {
        self.out_pins.iter().find(|p| p.name == name)
    }

    fn has_pin(&self, name: &str) -> bool {
        self.in_pin(name).is_some() || self.out_pin(name).is_some()
    }
}

/// `src.out_pin -> dst.in_pin`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub src: String,
    pub out_pin: String,
    pub dst: String,
    pub in_pin: String,
}

impl Transition {
    pub fn new(
        src: impl Into<String>,
        out_pin: impl Into<String>,
        dst: impl Into<String>,
        in_pin: impl Into<String>,
    ) -> Self {
        Transition {
            src: src.into(),
            out_pin: out_pin.into(),
            dst: dst.into(),
            in_pin: in_pin.into(),
        }
    }

    /// Stable textual key, used in JSON files and data-store encodings.
    pub fn key(&self) -> String {
        format!("{}.{}->{}.{}", self.src, self.out_pin, self.dst, self.in_pin)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} -> {}.{}", self.src, self.out_pin, self.dst, self.in_pin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Location {
    Source { line: usize, column: usize },
    Diagram,
    Node { node: String },
    Pin { node: String, pin: String },
    Transition { transition: String },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Source { line, column } => write!(f, "{line}:{column}"),
            Location::Diagram => f.write_str("diagram"),
            Location::Node { node } => write!(f, "node {node}"),
            Location::Pin { node, pin } => write!(f, "pin {node}.{pin}"),
            Location::Transition { transition } => write!(f, "transition {transition}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Stable kebab-case identifier, e.g. `unknown-node`.
    pub code: String,
    pub location: Location,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &str, location: Location, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code: code.to_string(),
            location,
            message: message.into(),
        }
    }

    pub fn warning(code: &str, location: Location, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code: code.to_string(),
            location,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// An activity diagram: name, nodes (with their roles, pins and effects)
/// and pin-to-pin transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityDiagram {
    name: String,
    nodes: Vec<Node>,
    transitions: Vec<Transition>,
    by_name: HashMap<String, NodeId>,
    incoming: Vec<Vec<TransitionId>>,
    outgoing: Vec<Vec<TransitionId>>,
}

impl ActivityDiagram {
    /// Builds a diagram, checking the structural invariants. Transitions must
    /// reference pins that are declared on their nodes (no pin completion
    /// happens here; the parser does that).
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<Node>,
        transitions: Vec<Transition>,
    ) -> Result<Self, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut by_name = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if by_name.insert(node.name.clone(), NodeId(i)).is_some() {
                diags.push(Diagnostic::error(
                    "duplicate-node",
                    Location::Node { node: node.name.clone() },
                    format!("node `{}` is declared more than once", node.name),
                ));
            }
            let mut seen = std::collections::HashSet::new();
            for pin in node.in_pins.iter().chain(&node.out_pins) {
                if !seen.insert(pin.name.as_str()) {
                    diags.push(Diagnostic::error(
                        "duplicate-pin",
                        Location::Pin { node: node.name.clone(), pin: pin.name.clone() },
                        format!("pin `{}` is declared more than once on `{}`", pin.name, node.name),
                    ));
                }
            }
            for pin in &node.in_pins {
                if pin.guard.is_some() {
                    diags.push(Diagnostic::error(
                        "guard-on-input",
                        Location::Pin { node: node.name.clone(), pin: pin.name.clone() },
                        "guards are only allowed on output pins",
                    ));
                }
            }
            if node.kind == NodeKind::Initial && !node.in_pins.is_empty() {
                diags.push(Diagnostic::error(
                    "initial-with-input",
                    Location::Node { node: node.name.clone() },
                    format!("initial node `{}` must not have input pins", node.name),
                ));
            }
            if node.kind == NodeKind::Final && !node.out_pins.is_empty() {
                diags.push(Diagnostic::error(
                    "final-with-output",
                    Location::Node { node: node.name.clone() },
                    format!("final node `{}` must not have output pins", node.name),
                ));
            }
        }

        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut seen_t = std::collections::HashSet::new();
        for (i, t) in transitions.iter().enumerate() {
            let loc = || Location::Transition { transition: t.key() };
            if !seen_t.insert(t) {
                diags.push(Diagnostic::error("duplicate-transition", loc(), format!("transition {t} is declared more than once")));
                continue;
            }
            let src = by_name.get(&t.src).copied();
            let dst = by_name.get(&t.dst).copied();
            match src {
                None => diags.push(Diagnostic::error("unknown-node", loc(), format!("unknown source node `{}`", t.src))),
                Some(s) => {
                    if nodes[s.0].out_pin(&t.out_pin).is_none() {
                        diags.push(Diagnostic::error(
                            "unknown-pin",
                            loc(),
                            format!("`{}` has no output pin `{}`", t.src, t.out_pin),
                        ));
                    } else {
                        outgoing[s.0].push(TransitionId(i));
                    }
                }
            }
            match dst {
                None => diags.push(Diagnostic::error("unknown-node", loc(), format!("unknown target node `{}`", t.dst))),
                Some(d) => {
                    if nodes[d.0].in_pin(&t.in_pin).is_none() {
                        diags.push(Diagnostic::error(
                            "unknown-pin",
                            loc(),
                            format!("`{}` has no input pin `{}`", t.dst, t.in_pin),
                        ));
                    } else {
                        incoming[d.0].push(TransitionId(i));
                    }
                }
            }
        }

        if diags.is_empty() {
            Ok(ActivityDiagram { name: name.into(), nodes, transitions, by_name, incoming, outgoing })
        } else {
            Err(diags)
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> + '_ {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn transition(&self, id: TransitionId) -> &Transition {
        &self.transitions[id.0]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn node_named(&self, name: &str) -> Option<&Node> {
        self.node_id(name).map(|id| self.node(id))
    }

    pub fn transition_id(&self, key: &str) -> Option<TransitionId> {
        self.transitions.iter().position(|t| t.key() == key).map(TransitionId)
    }

    /// Incoming transitions of a node, in declaration order.
    pub fn incoming(&self, id: NodeId) -> &[TransitionId] {
        &self.incoming[id.0]
    }

    /// Outgoing transitions of a node, in declaration order.
    pub fn outgoing(&self, id: NodeId) -> &[TransitionId] {
        &self.outgoing[id.0]
    }

    /// All transitions whose target is the named node.
    pub fn in_t(&self, node: &str) -> Result<Vec<&Transition>, SyntaxError> {
        let id = self.node_id(node).ok_or_else(|| SyntaxError::UnknownNode(node.to_string()))?;
        Ok(self.incoming(id).iter().map(|&t| self.transition(t)).collect())
    }

    /// All transitions whose source is the named node.
    pub fn out_t(&self, node: &str) -> Result<Vec<&Transition>, SyntaxError> {
        let id = self.node_id(node).ok_or_else(|| SyntaxError::UnknownNode(node.to_string()))?;
        Ok(self.outgoing(id).iter().map(|&t| self.transition(t)).collect())
    }

    pub fn role_of(&self, id: NodeId) -> &str {
        &self.node(id).role
    }

    pub fn src_id(&self, t: TransitionId) -> NodeId {
        self.by_name[&self.transition(t).src]
    }

    pub fn dst_id(&self, t: TransitionId) -> NodeId {
        self.by_name[&self.transition(t).dst]
    }

    /// Type of the output pin a transition leaves from.
    pub fn out_type(&self, t: TransitionId) -> &PinType {
        let tr = self.transition(t);
        &self.node(self.src_id(t)).out_pin(&tr.out_pin).expect("checked at construction").ty
    }

    /// Type of the input pin a transition enters.
    pub fn in_type(&self, t: TransitionId) -> &PinType {
        let tr = self.transition(t);
        &self.node(self.dst_id(t)).in_pin(&tr.in_pin).expect("checked at construction").ty
    }

    /// Guard of the output pin a transition leaves from.
    pub fn guard(&self, t: TransitionId) -> &Guard {
        static TRUE: std::sync::OnceLock<Guard> = std::sync::OnceLock::new();
        let tr = self.transition(t);
        self.node(self.src_id(t))
            .out_pin(&tr.out_pin)
            .and_then(|p| p.guard.as_ref())
            .unwrap_or_else(|| TRUE.get_or_init(Guard::always))
    }

    /// Data type carried on a transition, `None` for control.
    pub fn carrier(&self, t: TransitionId) -> Option<String> {
        PinType::carrier(self.out_type(t), self.in_type(t))
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(move |&n| self.node(n).kind == kind)
    }
}
