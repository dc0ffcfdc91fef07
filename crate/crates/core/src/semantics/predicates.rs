use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{NodeId, NodeKind, TransitionId};
use crate::system::SystemState;

use super::{BindingError, VariationBinding};

/// Everything the step predicates look at for one pair of states: executing
/// flags before and after, and how many tokens each transition lost at the
/// front and gained at the back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFacts {
    pub exec_pre: Vec<bool>,
    pub exec_post: Vec<bool>,
    pub cons: Vec<usize>,
    pub prod: Vec<usize>,
}

impl StepFacts {
    pub fn compute<B: VariationBinding + ?Sized>(
        b: &B,
        s: &SystemState,
        s2: &SystemState,
    ) -> Result<StepFacts, BindingError> {
        let ad = b.diagram();
        let mut facts = StepFacts {
            exec_pre: Vec::with_capacity(ad.nodes().len()),
            exec_post: Vec::with_capacity(ad.nodes().len()),
            cons: Vec::with_capacity(ad.transitions().len()),
            prod: Vec::with_capacity(ad.transitions().len()),
        };
        for n in ad.node_ids() {
            facts.exec_pre.push(b.executing(n, s)?);
            facts.exec_post.push(b.executing(n, s2)?);
        }
        for t in ad.transition_ids() {
            let tr = b.transfer(t, s, s2)?;
            facts.cons.push(tr.cons.len());
            facts.prod.push(tr.prod.len());
        }
        Ok(facts)
    }
}

/// Read-only view used by the predicates; `guard_post` answers
/// `eval(guard(t), s')` and is only consulted for decision/merge outputs.
pub struct StepView<'a, G> {
    pub ad: &'a crate::syntax::ActivityDiagram,
    pub facts: &'a StepFacts,
    pub guard_post: G,
}

impl<G> StepView<'_, G>
where
    G: Fn(TransitionId) -> Result<bool, BindingError>,
{
    fn cons(&self, t: TransitionId) -> usize {
        self.facts.cons[t.0]
    }

    fn prod(&self, t: TransitionId) -> usize {
        self.facts.prod[t.0]
    }

    fn ins(&self, n: NodeId) -> &[TransitionId] {
        self.ad.incoming(n)
    }

    fn outs(&self, n: NodeId) -> &[TransitionId] {
        self.ad.outgoing(n)
    }

    pub fn stutter(&self, n: NodeId) -> bool {
        self.facts.exec_pre[n.0] == self.facts.exec_post[n.0]
            && self.ins(n).iter().all(|&t| self.cons(t) == 0)
            && self.outs(n).iter().all(|&t| self.prod(t) == 0)
    }

    pub fn start_act(&self, n: NodeId) -> bool {
        !self.facts.exec_pre[n.0]
            && self.facts.exec_post[n.0]
            && self.ins(n).iter().all(|&t| self.cons(t) == 1)
            && self.outs(n).iter().all(|&t| self.prod(t) == 0)
    }

    pub fn finish_act(&self, n: NodeId) -> bool {
        self.facts.exec_pre[n.0]
            && !self.facts.exec_post[n.0]
            && self.outs(n).iter().all(|&t| self.prod(t) == 1)
            && self.ins(n).iter().all(|&t| self.cons(t) == 0)
    }

    /// Shared by instant action steps and fork/join steps, whose definitions
    /// coincide.
    pub fn step_inst(&self, n: NodeId) -> bool {
        self.ins(n).iter().all(|&t| self.cons(t) == 1) && self.outs(n).iter().all(|&t| self.prod(t) == 1)
    }

    pub fn step_fork_join(&self, n: NodeId) -> bool {
        self.step_inst(n)
    }

    pub fn step_decision_merge(&self, n: NodeId) -> Result<bool, BindingError> {
        let exactly_one = |ts: &[TransitionId], count: &dyn Fn(TransitionId) -> usize| -> Option<TransitionId> {
            let moved: Vec<_> = ts.iter().copied().filter(|&t| count(t) != 0).collect();
            match moved.as_slice() {
                [t] if count(*t) == 1 => Some(*t),
                _ => None,
            }
        };
        if exactly_one(self.ins(n), &|t| self.cons(t)).is_none() {
            return Ok(false);
        }
        match exactly_one(self.outs(n), &|t| self.prod(t)) {
            Some(t) => (self.guard_post)(t),
            None => Ok(false),
        }
    }

    /// `Ok(None)` when the node behaves, otherwise the predicate it broke.
    pub fn step(&self, n: NodeId) -> Result<Option<Predicate>, BindingError> {
        if self.stutter(n) {
            return Ok(None);
        }
        let kind = self.ad.node(n).kind;
        let ok = match kind {
            NodeKind::Initial | NodeKind::Final => false,
            NodeKind::Action => self.start_act(n) || self.finish_act(n) || self.step_inst(n),
            NodeKind::ForkJoin => self.step_fork_join(n),
            NodeKind::DecisionMerge => self.step_decision_merge(n)?,
        };
        Ok(if ok { None } else { Some(Predicate::for_kind(kind)) })
    }
}

/// The predicate a node failed in a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    /// Initial and final nodes may only stutter.
    StutterOnly,
    /// Neither stutter nor startAct, finishAct or stepInst.
    ActionStep,
    ForkJoinStep,
    DecisionMergeStep,
    /// A final configuration was left.
    FinalPersistence,
}

impl Predicate {
    pub fn for_kind(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Initial | NodeKind::Final => Predicate::StutterOnly,
            NodeKind::Action => Predicate::ActionStep,
            NodeKind::ForkJoin => Predicate::ForkJoinStep,
            NodeKind::DecisionMerge => Predicate::DecisionMergeStep,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::StutterOnly => "stutter-only",
            Predicate::ActionStep => "action-step",
            Predicate::ForkJoinStep => "fork-join-step",
            Predicate::DecisionMergeStep => "decision-merge-step",
            Predicate::FinalPersistence => "final-persistence",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn with_view<B, R>(
    b: &B,
    s: &SystemState,
    s2: &SystemState,
    f: impl FnOnce(&StepView<'_, &dyn Fn(TransitionId) -> Result<bool, BindingError>>) -> Result<R, BindingError>,
) -> Result<R, BindingError>
where
    B: VariationBinding + ?Sized,
{
    let facts = StepFacts::compute(b, s, s2)?;
    let ad = b.diagram();
    let guard_post = |t: TransitionId| b.eval(ad.guard(t), s2);
    let view = StepView { ad, facts: &facts, guard_post: &guard_post as &dyn Fn(TransitionId) -> Result<bool, BindingError> };
    f(&view)
}

pub fn buf_empty<B: VariationBinding + ?Sized>(b: &B, t: TransitionId, s: &SystemState) -> Result<bool, BindingError> {
    Ok(b.buf_state(t, s)?.is_empty())
}

pub fn buf_non_empty<B: VariationBinding + ?Sized>(
    b: &B,
    t: TransitionId,
    s: &SystemState,
) -> Result<bool, BindingError> {
    Ok(!buf_empty(b, t, s)?)
}

/// Some initial node has tokens on all its outgoing transitions, and no
/// other node has outgoing tokens or is executing.
pub fn is_initial<B: VariationBinding + ?Sized>(b: &B, s: &SystemState) -> Result<bool, BindingError> {
    Ok(initial_witness(b, s)?.is_some())
}

pub(crate) fn initial_witness<B: VariationBinding + ?Sized>(
    b: &B,
    s: &SystemState,
) -> Result<Option<NodeId>, BindingError> {
    let ad = b.diagram();
    let mut witness = None;
    for n in ad.node_ids() {
        if ad.node(n).kind == NodeKind::Initial {
            if witness.is_none() && all_nonempty(b, ad.outgoing(n), s)? {
                witness = Some(n);
            }
        } else if !all_empty(b, ad.outgoing(n), s)? || b.executing(n, s)? {
            return Ok(None);
        }
    }
    Ok(witness)
}

/// Some final node has a token on one of its incoming transitions, and no
/// other node has incoming tokens or is executing.
pub fn is_final<B: VariationBinding + ?Sized>(b: &B, s: &SystemState) -> Result<bool, BindingError> {
    Ok(final_witness(b, s)?.is_some())
}

pub(crate) fn final_witness<B: VariationBinding + ?Sized>(
    b: &B,
    s: &SystemState,
) -> Result<Option<NodeId>, BindingError> {
    let ad = b.diagram();
    let mut witness = None;
    for n in ad.node_ids() {
        if ad.node(n).kind == NodeKind::Final {
            if witness.is_none() && !all_empty(b, ad.incoming(n), s)? {
                witness = Some(n);
            }
        } else if !all_empty(b, ad.incoming(n), s)? || b.executing(n, s)? {
            return Ok(None);
        }
    }
    Ok(witness)
}

fn all_empty<B: VariationBinding + ?Sized>(b: &B, ts: &[TransitionId], s: &SystemState) -> Result<bool, BindingError> {
    for &t in ts {
        if buf_non_empty(b, t, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn all_nonempty<B: VariationBinding + ?Sized>(
    b: &B,
    ts: &[TransitionId],
    s: &SystemState,
) -> Result<bool, BindingError> {
    for &t in ts {
        if buf_empty(b, t, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

macro_rules! pair_predicate {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        pub fn $name<B: VariationBinding + ?Sized>(
            b: &B,
            n: NodeId,
            s: &SystemState,
            s2: &SystemState,
        ) -> Result<bool, BindingError> {
            with_view(b, s, s2, |v| Ok(v.$name(n)))
        }
    };
}

pair_predicate!(
    /// Executing flag unchanged, nothing consumed or produced.
    stutter
);
pair_predicate!(
    /// Execution starts; one token consumed per incoming transition, nothing produced.
    start_act
);
pair_predicate!(
    /// Execution stops; one token produced per outgoing transition, nothing consumed.
    finish_act
);
pair_predicate!(
    /// One token consumed per incoming and one produced per outgoing transition.
    step_inst
);
pair_predicate!(
    /// Same formula as `step_inst`.
    step_fork_join
);

/// One incoming transition loses exactly one token, one outgoing transition
/// gains exactly one, and that transition's guard holds in `s2`.
pub fn step_decision_merge<B: VariationBinding + ?Sized>(
    b: &B,
    n: NodeId,
    s: &SystemState,
    s2: &SystemState,
) -> Result<bool, BindingError> {
    with_view(b, s, s2, |v| v.step_decision_merge(n))
}

/// Stutter, or the step allowed by the node's kind. Initial and final nodes
/// may only stutter.
pub fn step<B: VariationBinding + ?Sized>(
    b: &B,
    n: NodeId,
    s: &SystemState,
    s2: &SystemState,
) -> Result<bool, BindingError> {
    with_view(b, s, s2, |v| Ok(v.step(n)?.is_none()))
}
