use std::fmt::Write;

use super::{ActivityDiagram, NodeId, NodeKind, DEFAULT_ROLE};

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn node_line(ad: &ActivityDiagram, id: NodeId) -> String {
    let n = ad.node(id);
    let attrs = match n.kind {
        NodeKind::Initial => "shape=circle, style=filled, fillcolor=black, label=\"\", width=0.25".to_string(),
        NodeKind::Final => "shape=doublecircle, style=filled, fillcolor=black, label=\"\", width=0.2".to_string(),
        NodeKind::ForkJoin => {
            "shape=box, style=filled, fillcolor=black, label=\"\", height=0.08, width=1.2".to_string()
        }
        NodeKind::DecisionMerge => "shape=diamond, label=\"\"".to_string(),
        NodeKind::Action => {
            if n.effect.is_empty() {
                format!("shape=box, style=rounded, label=\"{}\"", escape(&n.name))
            } else {
                format!("shape=box, style=rounded, label=\"{}\\n{}\"", escape(&n.name), escape(&n.effect))
            }
        }
    };
    format!("\"{}\" [{attrs}, tooltip=\"{}\"];", escape(&n.name), escape(&n.name))
}

/// Renders the diagram as a DOT digraph: one `cluster_*` subgraph per
/// assigned role, node shapes by kind, guard labels on guarded edges.
pub fn export_dot(ad: &ActivityDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(ad.name()));
    let _ = writeln!(out, "  rankdir=TB;");

    let mut roles: Vec<&str> = Vec::new();
    for n in ad.nodes() {
        if n.role != DEFAULT_ROLE && !roles.contains(&n.role.as_str()) {
            roles.push(&n.role);
        }
    }
    for (i, role) in roles.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{i} {{");
        let _ = writeln!(out, "    label=\"{}\";", escape(role));
        for id in ad.node_ids().filter(|&id| ad.role_of(id) == *role) {
            let _ = writeln!(out, "    {}", node_line(ad, id));
        }
        let _ = writeln!(out, "  }}");
    }
    for id in ad.node_ids().filter(|&id| ad.role_of(id) == DEFAULT_ROLE) {
        let _ = writeln!(out, "  {}", node_line(ad, id));
    }

    for tid in ad.transition_ids() {
        let t = ad.transition(tid);
        let guard = ad.guard(tid);
        let label = if guard.is_true_literal() {
            String::new()
        } else {
            format!(", label=\"[{}]\"", escape(guard.text()))
        };
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [taillabel=\"{}\", headlabel=\"{}\"{label}];",
            escape(&t.src),
            escape(&t.dst),
            escape(&t.out_pin),
            escape(&t.in_pin)
        );
    }
    out.push_str("}\n");
    out
}
