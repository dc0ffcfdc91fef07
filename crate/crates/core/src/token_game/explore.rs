use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::Serialize;

use crate::semantics::Token;
use crate::syntax::{ActivityDiagram, NodeId, NodeKind, TransitionId};
use crate::Exec;

use super::{
    initial_config, representative, ActionMode, ChoiceKind, Configuration, GameError, GuardOracle, StepChoice,
    StepMode,
};

pub const DEFAULT_BOUND: usize = 100_000;

/// A single node's non-stutter move.
#[derive(Clone, Debug)]
struct Move {
    choice: StepChoice,
    node: NodeId,
    consumed: Vec<TransitionId>,
    produced: Vec<(TransitionId, Token)>,
    flag: Option<bool>,
}

fn pass_or_fresh(ad: &ActivityDiagram, tok: Option<&Token>, t: TransitionId) -> Token {
    match tok {
        Some(tok) if tok.inhabits(ad.out_type(t)) && tok.inhabits(ad.in_type(t)) => tok.clone(),
        _ => representative(ad, t),
    }
}

fn moves_of(
    ad: &ActivityDiagram,
    c: &Configuration,
    n: NodeId,
    guards: &dyn GuardOracle,
    actions: ActionMode,
) -> Vec<Move> {
    let node = ad.node(n);
    let (ins, outs) = (ad.incoming(n), ad.outgoing(n));
    let all_fed = !ins.is_empty() && ins.iter().all(|&t| !c.buffers[t.0].is_empty());
    let choice = |kind| StepChoice { node: node.name.clone(), kind };
    let fresh = |outs: &[TransitionId]| outs.iter().map(|&t| (t, representative(ad, t))).collect::<Vec<_>>();
    match node.kind {
        NodeKind::Initial | NodeKind::Final => vec![],
        NodeKind::Action => match actions {
            ActionMode::Instant if all_fed && !c.exec[n.0] => vec![Move {
                choice: choice(ChoiceKind::Instant),
                node: n,
                consumed: ins.to_vec(),
                produced: fresh(outs),
                flag: None,
            }],
            ActionMode::TwoPhase if c.exec[n.0] => vec![Move {
                choice: choice(ChoiceKind::Finish),
                node: n,
                consumed: vec![],
                produced: fresh(outs),
                flag: Some(false),
            }],
            ActionMode::TwoPhase if all_fed => vec![Move {
                choice: choice(ChoiceKind::Start),
                node: n,
                consumed: ins.to_vec(),
                produced: vec![],
                flag: Some(true),
            }],
            _ => vec![],
        },
        NodeKind::ForkJoin if all_fed => {
            let produced = outs
                .iter()
                .enumerate()
                .map(|(k, &t)| (t, pass_or_fresh(ad, ins.get(k).map(|&i| &c.buffers[i.0][0]), t)))
                .collect();
            vec![Move { choice: choice(ChoiceKind::ForkJoin), node: n, consumed: ins.to_vec(), produced, flag: None }]
        }
        NodeKind::ForkJoin => vec![],
        NodeKind::DecisionMerge => {
            let mut moves = Vec::new();
            for &i in ins.iter().filter(|&&i| !c.buffers[i.0].is_empty()) {
                for &o in outs {
                    if !guards.decide(ad.guard(o), c).permits() {
                        continue;
                    }
                    moves.push(Move {
                        choice: choice(ChoiceKind::Decision {
                            input: ad.transition(i).key(),
                            output: ad.transition(o).key(),
                        }),
                        node: n,
                        consumed: vec![i],
                        produced: vec![(o, pass_or_fresh(ad, Some(&c.buffers[i.0][0]), o))],
                        flag: None,
                    });
                }
            }
            moves
        }
    }
}

fn apply(c: &Configuration, moves: &[&Move]) -> Configuration {
    let mut next = c.clone();
    for m in moves {
        for &t in &m.consumed {
            next.buffers[t.0].remove(0);
        }
    }
    for m in moves {
        for (t, tok) in &m.produced {
            next.buffers[t.0].push(tok.clone());
        }
        if let Some(f) = m.flag {
            next.exec[m.node.0] = f;
        }
    }
    next
}

/// All configurations reachable in one step, with the non-stutter choices
/// that lead there. Interleaving moves one node; concurrent mode moves any
/// nonempty set of nodes, each taking one of its moves.
pub fn successors(
    ad: &ActivityDiagram,
    c: &Configuration,
    mode: StepMode,
    guards: &dyn GuardOracle,
    actions: ActionMode,
) -> Vec<(Vec<StepChoice>, Configuration)> {
    let per_node: Vec<Vec<Move>> =
        ad.node_ids().map(|n| moves_of(ad, c, n, guards, actions)).filter(|m| !m.is_empty()).collect();
    match mode {
        StepMode::Interleaving => {
            per_node.iter().flatten().map(|m| (vec![m.choice.clone()], apply(c, &[m]))).collect()
        }
        StepMode::Concurrent => {
            // Odometer over (stutter | move_1 | ... | move_k) per movable node.
            let mut out = Vec::new();
            let mut digits = vec![0usize; per_node.len()];
            loop {
                let mut k = 0;
                while k < digits.len() {
                    digits[k] += 1;
                    if digits[k] <= per_node[k].len() {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
                if k == digits.len() {
                    break;
                }
                let chosen: Vec<&Move> =
                    digits.iter().zip(&per_node).filter(|(d, _)| **d > 0).map(|(d, ms)| &ms[*d - 1]).collect();
                out.push((chosen.iter().map(|m| m.choice.clone()).collect(), apply(c, &chosen)));
            }
            out
        }
    }
}

/// Reachability graph from the initial configuration.
#[derive(Clone, Debug)]
pub struct Reach {
    pub configs: Vec<Configuration>,
    /// `(from, choices, to)` indices into `configs`.
    pub edges: Vec<(usize, Vec<StepChoice>, usize)>,
    /// Configurations `0..expanded` had their successors computed.
    pub expanded: usize,
    pub truncated: bool,
}

impl Reach {
    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.configs.iter().position(|x| x == c)
    }

    pub fn out_degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.configs.len()];
        for (from, _, _) in &self.edges {
            deg[*from] += 1;
        }
        deg
    }
}

/// Breadth-first closure, level by level. Each level's successor sets may be
/// computed in parallel; merging is sequential so the result does not depend
/// on `exec`. Stops at `bound` configurations.
pub fn reachable(
    ad: &ActivityDiagram,
    mode: StepMode,
    guards: &dyn GuardOracle,
    actions: ActionMode,
    bound: usize,
    exec: Exec,
) -> Result<Reach, GameError> {
    assert!(bound >= 1, "bound must be at least 1");
    let init = initial_config(ad)?;
    let mut index: HashMap<Configuration, usize> = HashMap::from([(init.clone(), 0)]);
    let mut reach = Reach { configs: vec![init], edges: Vec::new(), expanded: 0, truncated: false };
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let level: Vec<&Configuration> = frontier.iter().map(|&i| &reach.configs[i]).collect();
        let succ = exec.map(&level, |c| successors(ad, c, mode, guards, actions));
        let mut next = Vec::new();
        for (&from, list) in frontier.iter().zip(succ) {
            if reach.truncated {
                break;
            }
            for (choices, c) in list {
                let to = match index.get(&c) {
                    Some(&to) => to,
                    None if reach.configs.len() < bound => {
                        let to = reach.configs.len();
                        index.insert(c.clone(), to);
                        reach.configs.push(c);
                        next.push(to);
                        to
                    }
                    None => {
                        reach.truncated = true;
                        continue;
                    }
                };
                reach.edges.push((from, choices, to));
            }
            reach.expanded += 1;
        }
        if reach.truncated {
            break;
        }
        frontier = next;
    }
    Ok(reach)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub configurations: usize,
    pub edges: usize,
    pub truncated: bool,
    /// Maximal configurations that are not final.
    pub deadlocks: Vec<usize>,
    /// Maximal configurations that are final.
    pub final_maximal: Vec<usize>,
    pub all_maximal_final: bool,
    /// Per transition into a final node: does some reachable configuration
    /// hold a token there?
    pub final_reachability: BTreeMap<String, bool>,
    /// Per decision/merge node and output pin: was the branch ever taken?
    pub branch_coverage: BTreeMap<String, BTreeMap<String, bool>>,
    /// Non-passive nodes that never move.
    pub never_fired: Vec<String>,
}

pub fn analyze(ad: &ActivityDiagram, reach: &Reach) -> Report {
    let deg = reach.out_degree();
    let maximal: Vec<usize> = (0..reach.expanded).filter(|&i| deg[i] == 0).collect();
    let (final_maximal, deadlocks): (Vec<usize>, Vec<usize>) =
        maximal.iter().partition(|&&i| reach.configs[i].is_final(ad));

    let mut final_reachability = BTreeMap::new();
    for n in ad.nodes_of_kind(NodeKind::Final) {
        for &t in ad.incoming(n) {
            let hit = reach.configs.iter().any(|c| !c.buffers[t.0].is_empty());
            final_reachability.insert(ad.transition(t).key(), hit);
        }
    }

    let mut fired: BTreeMap<&str, bool> = BTreeMap::new();
    let mut taken: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for n in ad.nodes_of_kind(NodeKind::DecisionMerge) {
        let pins = ad.node(n).out_pins.iter().map(|p| (p.name.clone(), false)).collect();
        taken.insert(ad.node(n).name.clone(), pins);
    }
    for (_, choices, _) in &reach.edges {
        for ch in choices {
            fired.insert(&ch.node, true);
            if let ChoiceKind::Decision { output, .. } = &ch.kind {
                if let Some(t) = ad.transition_id(output) {
                    let pin = &ad.transition(t).out_pin;
                    if let Some(b) = taken.get_mut(&ch.node).and_then(|m| m.get_mut(pin)) {
                        *b = true;
                    }
                }
            }
        }
    }
    let never_fired = ad
        .nodes()
        .iter()
        .filter(|n| !matches!(n.kind, NodeKind::Initial | NodeKind::Final))
        .filter(|n| !fired.contains_key(n.name.as_str()))
        .map(|n| n.name.clone())
        .collect();

    Report {
        configurations: reach.configs.len(),
        edges: reach.edges.len(),
        truncated: reach.truncated,
        all_maximal_final: deadlocks.is_empty(),
        deadlocks,
        final_maximal,
        final_reachability,
        branch_coverage: taken,
        never_fired,
    }
}

/// DOT rendering of a reachability graph: configurations as nodes, choices
/// as edge labels.
pub fn reachability_dot(ad: &ActivityDiagram, reach: &Reach) -> String {
    let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
    let mut out = format!("digraph \"{}_reach\" {{\n  node [shape=box, fontsize=10];\n", esc(ad.name()));
    for (i, c) in reach.configs.iter().enumerate() {
        let style = if c.is_final(ad) {
            ", peripheries=2"
        } else if i == 0 {
            ", style=bold"
        } else {
            ""
        };
        let _ = writeln!(out, "  c{i} [label=\"{i}: {}\"{style}];", esc(&c.describe(ad)));
    }
    for (from, choices, to) in &reach.edges {
        let label: Vec<String> = choices.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "  c{from} -> c{to} [label=\"{}\"];", esc(&label.join(" | ")));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::token_game::{Decision, FixedGuards, Underspecified};

    fn fire(ad: &ActivityDiagram, c: &Configuration, node: &str) -> Configuration {
        let succ = successors(ad, c, StepMode::Interleaving, &Underspecified, ActionMode::Instant);
        succ.into_iter().find(|(ch, _)| ch[0].node == node).map(|(_, c)| c).expect("node enabled")
    }

    #[test]
    fn grade_thesis_first_steps() {
        let ad = corpus::grade_thesis();
        let c0 = initial_config(&ad).unwrap();
        let s0 = successors(&ad, &c0, StepMode::Interleaving, &Underspecified, ActionMode::Instant);
        assert_eq!(s0.len(), 1);
        assert_eq!(s0[0].0[0].node, "FileThesis");
        let c2 = fire(&ad, &fire(&ad, &c0, "FileThesis"), "F1");
        let s2 = successors(&ad, &c2, StepMode::Interleaving, &Underspecified, ActionMode::Instant);
        let names: Vec<&str> = s2.iter().map(|(ch, _)| ch[0].node.as_str()).collect();
        assert_eq!(names, ["ReviewThesis1", "ReviewThesis2"]);
        let both = successors(&ad, &c2, StepMode::Concurrent, &Underspecified, ActionMode::Instant);
        assert_eq!(both.len(), 3);
    }

    #[test]
    fn decision_branches_follow_oracle() {
        let ad = corpus::grade_thesis();
        let mut c = initial_config(&ad).unwrap();
        for n in ["FileThesis", "F1", "ReviewThesis1", "ReviewThesis2", "J1", "Evaluate"] {
            c = fire(&ad, &c, n);
        }
        let either = successors(&ad, &c, StepMode::Interleaving, &Underspecified, ActionMode::Instant);
        assert_eq!(either.len(), 2);
        let only_passed = FixedGuards([("failed".to_string(), Decision::False)].into_iter().collect());
        let one = successors(&ad, &c, StepMode::Interleaving, &only_passed, ActionMode::Instant);
        assert_eq!(one.len(), 1);
        assert!(matches!(&one[0].0[0].kind, ChoiceKind::Decision { output, .. } if output.contains("passed")));
    }

    #[test]
    fn fork_passes_tokens_through() {
        let ad = corpus::grade_thesis();
        let c1 = fire(&ad, &initial_config(&ad).unwrap(), "FileThesis");
        let thesis = c1.buffers[ad.transition_id("FileThesis.t->F1.t").unwrap().0][0].clone();
        let c2 = fire(&ad, &c1, "F1");
        let t1 = ad.transition_id("F1.t1->ReviewThesis1.t").unwrap();
        assert_eq!(c2.buffers[t1.0], vec![thesis]);
    }

    #[test]
    fn minimal_has_one_configuration() {
        let ad = corpus::minimal();
        let r = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::Instant, 10, Exec::Sequential)
            .unwrap();
        assert_eq!((r.configs.len(), r.edges.len(), r.truncated), (1, 0, false));
    }

    #[test]
    fn grade_thesis_reachability_and_report() {
        let ad = corpus::grade_thesis();
        let r = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::Instant, 10_000, Exec::Sequential)
            .unwrap();
        assert!(!r.truncated);
        let rep = analyze(&ad, &r);
        assert!(rep.deadlocks.is_empty());
        assert!(rep.all_maximal_final);
        assert_eq!(rep.final_maximal.len(), 2);
        assert!(rep.branch_coverage["D1"].values().all(|&b| b));
        assert!(rep.never_fired.is_empty());
        let two = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::TwoPhase, 10_000, Exec::Sequential)
            .unwrap();
        assert!(two.configs.len() > r.configs.len());
    }

    #[test]
    fn starved_join_deadlocks() {
        let ad = corpus::starved_join();
        let r = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::Instant, 100, Exec::Sequential)
            .unwrap();
        let rep = analyze(&ad, &r);
        assert_eq!(rep.deadlocks.len(), 1);
        assert!(rep.never_fired.contains(&"B".to_string()));
        assert!(rep.final_reachability.values().all(|&b| !b));
    }

    #[test]
    fn bound_truncates() {
        let ad = corpus::grade_thesis();
        let r = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::Instant, 3, Exec::Sequential)
            .unwrap();
        assert!(r.truncated);
        assert_eq!(r.configs.len(), 3);
    }

    #[test]
    fn parallel_exploration_matches() {
        let ad = corpus::wide_fork(5);
        let a = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::TwoPhase, DEFAULT_BOUND, Exec::Sequential)
            .unwrap();
        let b = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::TwoPhase, DEFAULT_BOUND, Exec::Parallel)
            .unwrap();
        assert_eq!(a.configs, b.configs);
        assert_eq!(a.edges, b.edges);
    }

    #[test]
    fn dot_lists_every_configuration() {
        let ad = corpus::grade_thesis();
        let r = reachable(&ad, StepMode::Interleaving, &Underspecified, ActionMode::Instant, 100, Exec::Sequential)
            .unwrap();
        let dot = reachability_dot(&ad, &r);
        assert_eq!(dot.matches(" [label=\"").count(), r.configs.len() + r.edges.len());
    }
}
