use serde::{Deserialize, Serialize};

use super::{ActivityDiagram, Diagnostic, Location, NodeKind, PinType, DEFAULT_ROLE};

/// Which set of context conditions to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    General,
    /// Single-method diagrams made of atomic actions: no fork/join, no
    /// roles, control pins only, one output pin per non-decision node.
    Variant1,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Profile::General),
            "variant1" | "v1" => Ok(Profile::Variant1),
            other => Err(format!("unknown profile `{other}`")),
        }
    }
}

/// Checks the context conditions of a pin-complete diagram. The result is
/// ordered by node declaration order, then transition order.
pub fn validate(ad: &ActivityDiagram, profile: Profile) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    if ad.nodes_of_kind(NodeKind::Initial).next().is_none() {
        diags.push(Diagnostic::error("missing-initial", Location::Diagram, "diagram has no initial node"));
    }

    for id in ad.node_ids() {
        let n = ad.node(id);
        if n.kind != NodeKind::DecisionMerge {
            for p in &n.out_pins {
                if p.guard.as_ref().is_some_and(|g| !g.is_true_literal()) {
                    diags.push(Diagnostic::warning(
                        "guard-ignored",
                        Location::Pin { node: n.name.clone(), pin: p.name.clone() },
                        format!("guard on `{}.{}` is only consulted at decision/merge nodes", n.name, p.name),
                    ));
                }
            }
        }
        for p in n.in_pins.iter() {
            if !ad.incoming(id).iter().any(|&t| ad.transition(t).in_pin == p.name) {
                diags.push(Diagnostic::warning(
                    "unconnected-pin",
                    Location::Pin { node: n.name.clone(), pin: p.name.clone() },
                    format!("input pin `{}.{}` has no incoming transition", n.name, p.name),
                ));
            }
        }
        for p in n.out_pins.iter() {
            if !ad.outgoing(id).iter().any(|&t| ad.transition(t).out_pin == p.name) {
                diags.push(Diagnostic::warning(
                    "unconnected-pin",
                    Location::Pin { node: n.name.clone(), pin: p.name.clone() },
                    format!("output pin `{}.{}` has no outgoing transition", n.name, p.name),
                ));
            }
        }

        if profile == Profile::Variant1 {
            let loc = || Location::Node { node: n.name.clone() };
            if n.kind == NodeKind::ForkJoin {
                diags.push(Diagnostic::error(
                    "v1-forkjoin",
                    loc(),
                    format!("fork/join node `{}` is not allowed: a method runs on a single thread", n.name),
                ));
            }
            if n.role != DEFAULT_ROLE {
                diags.push(Diagnostic::error(
                    "v1-role",
                    loc(),
                    format!("node `{}` has role `{}`; roles are not allowed", n.name, n.role),
                ));
            }
            for p in n.in_pins.iter().chain(&n.out_pins) {
                if p.ty != PinType::Control {
                    diags.push(Diagnostic::error(
                        "v1-data-pin",
                        Location::Pin { node: n.name.clone(), pin: p.name.clone() },
                        format!("pin `{}.{}` has type `{}`; only control pins are allowed", n.name, p.name, p.ty),
                    ));
                }
            }
            if n.kind != NodeKind::DecisionMerge && n.out_pins.len() > 1 {
                diags.push(Diagnostic::error(
                    "v1-multiple-outputs",
                    loc(),
                    format!("node `{}` has {} output pins; at most one is allowed", n.name, n.out_pins.len()),
                ));
            }
        }
    }

    for tid in ad.transition_ids() {
        let (out, inp) = (ad.out_type(tid), ad.in_type(tid));
        if !out.compatible(inp) {
            diags.push(Diagnostic::error(
                "incompatible-pin-types",
                Location::Transition { transition: ad.transition(tid).key() },
                format!("`{out}` and `{inp}` admit no common token"),
            ));
        }
    }

    diags
}
