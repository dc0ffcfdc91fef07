//! Inner semantics: the variation points a variant must supply, the step
//! predicates over pairs of system states and the satisfaction relation
//! between traces and diagram instances.

mod binding;
mod check;
mod predicates;
mod token;

pub use binding::{
    buffer_law_holds, check_buffer_law, check_buffer_types, fifo_decompose, mailbox, BindingError, Transfer,
    VariationBinding,
};
pub use check::{check_batch, satisfies, Verdict};
pub use predicates::{
    buf_empty, buf_non_empty, finish_act, is_final, is_initial, start_act, step, step_decision_merge,
    step_fork_join, step_inst, stutter, Predicate, StepFacts, StepView,
};
pub use token::{Token, CONTROL_TEXT};

use crate::syntax::{ActivityDiagram, Guard, NodeId, NodeKind, TransitionId};
use crate::system::{Oid, SystemState, Value};

/// Attribute holding an action node's executing flag in a mailbox state.
pub fn exec_var(node: &str) -> String {
    format!("exec:{node}")
}

/// A binding that reads everything from the attributes of one object:
/// buffers and counters as in [`mailbox`], executing flags from
/// `exec:<node>` (absent means false). Guards are decided by `eval`.
pub struct MailboxBinding<'a, E> {
    ad: &'a ActivityDiagram,
    oid: Oid,
    eval: E,
}

impl<'a, E> MailboxBinding<'a, E>
where
    E: Fn(&Guard, &SystemState) -> Result<bool, BindingError>,
{
    pub fn new(ad: &'a ActivityDiagram, oid: impl Into<Oid>, eval: E) -> Self {
        MailboxBinding { ad, oid: oid.into(), eval }
    }

    pub fn oid(&self) -> &Oid {
        &self.oid
    }
}

impl<E> VariationBinding for MailboxBinding<'_, E>
where
    E: Fn(&Guard, &SystemState) -> Result<bool, BindingError>,
{
    fn diagram(&self) -> &ActivityDiagram {
        self.ad
    }

    fn executing(&self, n: NodeId, s: &SystemState) -> Result<bool, BindingError> {
        let node = self.ad.node(n);
        if node.kind != NodeKind::Action {
            return Ok(false);
        }
        match s.attr(&self.oid, &exec_var(&node.name)) {
            None => Ok(false),
            Some(Value::Bool(b)) => Ok(*b),
            Some(other) => Err(BindingError::Other(format!("flag of `{}` is `{other}`, not a boolean", node.name))),
        }
    }

    fn buf_state(&self, t: TransitionId, s: &SystemState) -> Result<Vec<crate::semantics::Token>, BindingError> {
        if t.0 >= self.ad.transitions().len() {
            return Err(BindingError::UnknownTransition(t.0));
        }
        mailbox::read(s, &self.oid, &self.ad.transition(t).key())
    }

    fn transfer_hint(&self, t: TransitionId, s: &SystemState, s2: &SystemState) -> Option<(usize, usize)> {
        mailbox::hint(s, s2, &self.oid, &self.ad.transition(t).key())
    }

    fn eval(&self, g: &Guard, s: &SystemState) -> Result<bool, BindingError> {
        (self.eval)(g, s)
    }
}
