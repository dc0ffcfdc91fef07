//! Helpers shared by the integration tests: an exhaustive successor oracle,
//! run mutators and hand-built states.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use adsem::semantics::{exec_var, mailbox, StepFacts, StepView};
use adsem::syntax::{ActivityDiagram, NodeId, NodeKind, TransitionId};
use adsem::system::{Oid, SystemState, Value};
use adsem::token_game::{
    representative, successors, ActionMode, ChoiceKind, Configuration, GuardOracle, Run, StepMode, INSTANCE,
};

/// What a step does, stripped of payloads: per-transition consumed and
/// produced counts and the executing flags afterwards.
pub type Signature = (Vec<usize>, Vec<usize>, Vec<bool>);

/// Every configuration with at most `bound` tokens per transition (tokens
/// are representatives), executing flags all false or, with `flags`, in
/// every combination over action nodes.
pub fn all_configs(ad: &ActivityDiagram, bound: usize, flags: bool) -> Vec<Configuration> {
    let nt = ad.transitions().len();
    let actions: Vec<NodeId> = ad.nodes_of_kind(NodeKind::Action).collect();
    let flag_sets = if flags { 1usize << actions.len() } else { 1 };
    let mut out = Vec::new();
    let mut counts = vec![0usize; nt];
    loop {
        for mask in 0..flag_sets {
            let mut c = Configuration::empty(ad);
            for t in ad.transition_ids() {
                c.buffers[t.0] = vec![representative(ad, t); counts[t.0]];
            }
            for (k, n) in actions.iter().enumerate() {
                c.exec[n.0] = mask & (1 << k) != 0;
            }
            out.push(c);
        }
        let mut i = 0;
        loop {
            if i == nt {
                return out;
            }
            counts[i] += 1;
            if counts[i] <= bound {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}

/// Candidate steps from `c` filtered by the step predicates: each transition
/// loses at most one token (only if it has one) and gains at most one, and
/// action flags change only in two-phase mode. Kept are the candidates in
/// which every node takes an allowed step and some node does not stutter;
/// interleaving additionally requires exactly one non-stuttering node, and
/// two-phase mode rules out instantaneous action steps.
pub fn brute_force(ad: &ActivityDiagram, c: &Configuration, mode: StepMode, actions: ActionMode) -> BTreeSet<Signature> {
    let nt = ad.transitions().len();
    let nn = ad.nodes().len();
    // Node n can be judged once all its adjacent transitions are assigned.
    let mut ready_at = vec![Vec::new(); nt + 1];
    for n in ad.node_ids() {
        let last = ad.incoming(n).iter().chain(ad.outgoing(n)).map(|t| t.0 + 1).max().unwrap_or(0);
        ready_at[last].push(n);
    }
    let action_ids: Vec<NodeId> = ad.nodes_of_kind(NodeKind::Action).collect();
    let flag_sets = match actions {
        ActionMode::TwoPhase => 1usize << action_ids.len(),
        ActionMode::Instant => 1,
    };
    let mut found = BTreeSet::new();
    for mask in 0..flag_sets {
        let mut exec_post = c.exec.clone();
        if actions == ActionMode::TwoPhase {
            for (k, n) in action_ids.iter().enumerate() {
                exec_post[n.0] = mask & (1 << k) != 0;
            }
        }
        let mut facts = StepFacts { exec_pre: c.exec.clone(), exec_post, cons: vec![0; nt], prod: vec![0; nt] };
        search(ad, c, mode, actions, &ready_at, 0, &mut facts, &mut found, nn);
    }
    found
}

#[allow(clippy::too_many_arguments)]
fn search(
    ad: &ActivityDiagram,
    c: &Configuration,
    mode: StepMode,
    actions: ActionMode,
    ready_at: &[Vec<NodeId>],
    i: usize,
    facts: &mut StepFacts,
    found: &mut BTreeSet<Signature>,
    nn: usize,
) {
    {
        let view = StepView { ad, facts: &*facts, guard_post: |_| Ok(true) };
        for &n in &ready_at[i] {
            if view.step(n).unwrap().is_some() {
                return;
            }
            if actions == ActionMode::TwoPhase
                && ad.node(n).kind == NodeKind::Action
                && !view.stutter(n)
                && !view.start_act(n)
                && !view.finish_act(n)
            {
                return;
            }
        }
    }
    if i == ad.transitions().len() {
        let view = StepView { ad, facts: &*facts, guard_post: |_| Ok(true) };
        let moving = (0..nn).filter(|&k| !view.stutter(NodeId(k))).count();
        let ok = match mode {
            StepMode::Interleaving => moving == 1,
            StepMode::Concurrent => moving >= 1,
        };
        if ok {
            found.insert((facts.cons.clone(), facts.prod.clone(), facts.exec_post.clone()));
        }
        return;
    }
    let max_cons = usize::from(!c.buffers[i].is_empty());
    for cons in 0..=max_cons {
        for prod in 0..=1 {
            facts.cons[i] = cons;
            facts.prod[i] = prod;
            search(ad, c, mode, actions, ready_at, i + 1, facts, found, nn);
        }
    }
    facts.cons[i] = 0;
    facts.prod[i] = 0;
}

/// The signatures of the generator's successors, checked against the
/// configurations they lead to.
pub fn generated(
    ad: &ActivityDiagram,
    c: &Configuration,
    mode: StepMode,
    guards: &dyn GuardOracle,
    actions: ActionMode,
) -> BTreeSet<Signature> {
    let nt = ad.transitions().len();
    let mut out = BTreeSet::new();
    for (choices, next) in successors(ad, c, mode, guards, actions) {
        let (mut cons, mut prod) = (vec![0; nt], vec![0; nt]);
        for ch in &choices {
            let (cs, ps) = ch.transfers(ad).unwrap();
            for t in cs {
                cons[t.0] += 1;
            }
            for t in ps {
                prod[t.0] += 1;
            }
        }
        for t in 0..nt {
            assert_eq!(next.buffers[t].len() + cons[t], c.buffers[t].len() + prod[t], "token count law");
        }
        out.insert((cons, prod, next.exec.clone()));
    }
    out
}

/// Kinds of corruption applied to a valid run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    TokenDeletion,
    TokenDuplication,
    FlagFlip,
    FinalEscape,
    DoubleBranch,
}

pub const MUTATIONS: [Mutation; 5] = [
    Mutation::TokenDeletion,
    Mutation::TokenDuplication,
    Mutation::FlagFlip,
    Mutation::FinalEscape,
    Mutation::DoubleBranch,
];

fn nonempty(c: &Configuration) -> Vec<usize> {
    (0..c.buffers.len()).filter(|&t| !c.buffers[t].is_empty()).collect()
}

fn stutters(ad: &ActivityDiagram, run: &Run, step: usize, n: NodeId) -> bool {
    run.steps[step].iter().all(|ch| ch.node != ad.node(n).name || ch.kind == ChoiceKind::Stutter)
}

/// Applies one mutation, or `None` if the run offers no place for it.
/// Configurations change; the recorded steps stay as they were.
pub fn mutate<R: Rng>(ad: &ActivityDiagram, run: &Run, m: Mutation, rng: &mut R) -> Option<Run> {
    let mut out = run.clone();
    let len = run.configs.len();
    match m {
        Mutation::TokenDeletion => {
            let spots: Vec<(usize, usize)> =
                (1..len).flat_map(|k| nonempty(&run.configs[k]).into_iter().map(move |t| (k, t))).collect();
            let &(k, t) = spots.choose(rng)?;
            let b = &mut out.configs[k].buffers[t];
            let at = rng.gen_range(0..b.len());
            b.remove(at);
        }
        Mutation::TokenDuplication => {
            let spots: Vec<(usize, usize)> =
                (1..len).flat_map(|k| nonempty(&run.configs[k]).into_iter().map(move |t| (k, t))).collect();
            let &(k, t) = spots.choose(rng)?;
            let b = &mut out.configs[k].buffers[t];
            let tok = b[rng.gen_range(0..b.len())].clone();
            b.push(tok);
        }
        Mutation::FlagFlip => {
            let spots: Vec<(usize, NodeId)> = (1..len.saturating_sub(1))
                .flat_map(|k| {
                    ad.nodes_of_kind(NodeKind::Action)
                        .filter(move |&n| stutters(ad, run, k - 1, n) && stutters(ad, run, k, n))
                        .map(move |n| (k, n))
                })
                .collect();
            let &(k, n) = spots.choose(rng)?;
            out.configs[k].exec[n.0] = !out.configs[k].exec[n.0];
        }
        Mutation::FinalEscape => {
            let last = run.configs.last()?;
            if !last.is_final(ad) {
                return None;
            }
            let mut escaped = last.clone();
            for f in ad.nodes_of_kind(NodeKind::Final) {
                for &t in ad.incoming(f) {
                    escaped.buffers[t.0].clear();
                }
            }
            out.configs.push(escaped);
            out.steps.push(vec![]);
        }
        Mutation::DoubleBranch => {
            let spots: Vec<(usize, TransitionId)> = (0..run.steps.len())
                .flat_map(|k| {
                    run.steps[k].iter().filter_map(move |ch| match &ch.kind {
                        ChoiceKind::Decision { output, .. } => {
                            let taken = ad.transition_id(output).unwrap();
                            let d = ad.src_id(taken);
                            let other = ad.outgoing(d).iter().copied().find(|&t| t != taken)?;
                            Some((k, other))
                        }
                        _ => None,
                    })
                })
                .collect();
            let &(k, other) = spots.choose(rng)?;
            out.configs.truncate(k + 2);
            out.steps.truncate(k + 1);
            out.truncated = true;
            out.configs[k + 1].buffers[other.0].push(representative(ad, other));
        }
    }
    Some(out)
}

/// Hand-built lifted states over the mailbox layout the token game uses.
pub struct States<'a> {
    pub ad: &'a ActivityDiagram,
}

impl States<'_> {
    pub fn t(&self, src: &str, dst: &str) -> TransitionId {
        self.ad
            .transition_ids()
            .find(|&t| self.ad.transition(t).src == src && self.ad.transition(t).dst == dst)
            .unwrap_or_else(|| panic!("no transition {src} -> {dst}"))
    }

    pub fn n(&self, name: &str) -> NodeId {
        self.ad.node_id(name).unwrap()
    }

    /// Tokens per `(src, dst)` pair (all parallel transitions filled) and
    /// the listed actions executing. No counters are written.
    pub fn state(&self, tokens: &[(&str, &str, usize)], executing: &[&str]) -> SystemState {
        let oid = Oid::from(INSTANCE);
        let mut s = SystemState::new();
        for t in self.ad.transition_ids() {
            mailbox::write(&mut s, &oid, &self.ad.transition(t).key(), &[]);
        }
        for &(src, dst, k) in tokens {
            self.t(src, dst);
            for t in self.ad.transition_ids() {
                let tr = self.ad.transition(t);
                if tr.src == src && tr.dst == dst {
                    mailbox::write(&mut s, &oid, &tr.key(), &vec![representative(self.ad, t); k]);
                }
            }
        }
        for n in self.ad.nodes_of_kind(NodeKind::Action) {
            let name = &self.ad.node(n).name;
            s.set_attr(&oid, &exec_var(name), Value::Bool(executing.contains(&name.as_str())));
        }
        s
    }

    /// Appends one token to the transition with the given key.
    pub fn with_token(&self, mut s: SystemState, key: &str) -> SystemState {
        let oid = Oid::from(INSTANCE);
        let t = self.ad.transition_id(key).unwrap_or_else(|| panic!("no transition {key}"));
        let mut buf = mailbox::read(&s, &oid, key).unwrap();
        buf.push(representative(self.ad, t));
        mailbox::write(&mut s, &oid, key, &buf);
        s
    }
}
