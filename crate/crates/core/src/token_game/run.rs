use rand::seq::SliceRandom;
use rand::Rng;

use crate::semantics::{exec_var, mailbox, BindingError, MailboxBinding};
use crate::syntax::{ActivityDiagram, Guard, NodeKind};
use crate::system::{Oid, SystemState, Trace, Value};

use super::{successors, ActionMode, Configuration, GameError, GuardOracle, StepChoice, StepMode};

/// Object that carries the buffers of a lifted run.
pub const INSTANCE: &str = "inst";

/// A sequence of configurations with the choices made between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub configs: Vec<Configuration>,
    /// `steps[k]` leads from `configs[k]` to `configs[k + 1]`.
    pub steps: Vec<Vec<StepChoice>>,
    pub truncated: bool,
}

impl Run {
    pub fn single(c: Configuration) -> Self {
        Run { configs: vec![c], steps: vec![], truncated: true }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn last(&self) -> &Configuration {
        self.configs.last().expect("runs are nonempty")
    }
}

/// Encodes a run as a trace over a single object [`INSTANCE`]: one state per
/// configuration, buffers and cumulative transfer counters as mailbox
/// attributes, executing flags as `exec:<node>`. Steps without recorded
/// choices leave the counters unchanged.
pub fn lift(ad: &ActivityDiagram, run: &Run) -> Result<Trace, GameError> {
    let oid = Oid::from(INSTANCE);
    let keys: Vec<String> = ad.transition_ids().map(|t| ad.transition(t).key()).collect();
    let mut counts = vec![(0i64, 0i64); keys.len()];
    let mut states = Vec::with_capacity(run.configs.len());
    for (k, c) in run.configs.iter().enumerate() {
        if k > 0 {
            for choice in run.steps.get(k - 1).into_iter().flatten() {
                let (cons, prod) = choice.transfers(ad)?;
                for t in cons {
                    counts[t.0].0 += 1;
                }
                for t in prod {
                    counts[t.0].1 += 1;
                }
            }
        }
        let mut s = SystemState::new();
        for (t, key) in keys.iter().enumerate() {
            mailbox::write(&mut s, &oid, key, &c.buffers[t]);
            s.set_attr(&oid, &mailbox::cons_var(key), Value::Int(counts[t].0));
            s.set_attr(&oid, &mailbox::prod_var(key), Value::Int(counts[t].1));
        }
        for n in ad.nodes_of_kind(NodeKind::Action) {
            s.set_attr(&oid, &exec_var(&ad.node(n).name), Value::Bool(c.exec[n.0]));
        }
        states.push(s);
    }
    Ok(Trace { states, truncated: run.truncated })
}

/// Reads a configuration back from a lifted state.
pub fn lower(ad: &ActivityDiagram, s: &SystemState) -> Result<Configuration, BindingError> {
    let oid = Oid::from(INSTANCE);
    let mut c = Configuration::empty(ad);
    for t in ad.transition_ids() {
        c.buffers[t.0] = mailbox::read(s, &oid, &ad.transition(t).key())?;
    }
    for n in ad.nodes_of_kind(NodeKind::Action) {
        c.exec[n.0] = s.attr(&oid, &exec_var(&ad.node(n).name)) == Some(&Value::Bool(true));
    }
    Ok(c)
}

/// Binding over lifted states. A guard holds unless the oracle rules it out
/// in the configuration the state encodes.
pub fn token_binding<'a>(
    ad: &'a ActivityDiagram,
    guards: &'a dyn GuardOracle,
) -> MailboxBinding<'a, impl Fn(&Guard, &SystemState) -> Result<bool, BindingError> + Sync + 'a> {
    MailboxBinding::new(ad, INSTANCE, move |g: &Guard, s: &SystemState| {
        let c = lower(ad, s)?;
        Ok(guards.decide(g, &c).permits())
    })
}

/// The binding and the lifted trace of a run, ready for `satisfies`.
#[allow(clippy::type_complexity)]
pub fn as_binding<'a>(
    ad: &'a ActivityDiagram,
    guards: &'a dyn GuardOracle,
    run: &Run,
) -> Result<
    (MailboxBinding<'a, impl Fn(&Guard, &SystemState) -> Result<bool, BindingError> + Sync + 'a>, Trace),
    GameError,
> {
    Ok((token_binding(ad, guards), lift(ad, run)?))
}

/// Depth-first enumeration of runs from `start`. A run ends when no step is
/// enabled, or after `max_steps` steps (then it is marked truncated). At most
/// `max_runs` runs are returned.
pub fn enumerate_runs(
    ad: &ActivityDiagram,
    start: Configuration,
    mode: StepMode,
    guards: &dyn GuardOracle,
    actions: ActionMode,
    max_steps: usize,
    max_runs: usize,
) -> Vec<Run> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        ad: &ActivityDiagram,
        run: &mut Run,
        mode: StepMode,
        guards: &dyn GuardOracle,
        actions: ActionMode,
        max_steps: usize,
        max_runs: usize,
        out: &mut Vec<Run>,
    ) {
        if out.len() >= max_runs {
            return;
        }
        let next = successors(ad, run.last(), mode, guards, actions);
        if next.is_empty() || run.steps.len() == max_steps {
            let mut done = run.clone();
            done.truncated = !next.is_empty();
            out.push(done);
            return;
        }
        for (choices, c) in next {
            run.configs.push(c);
            run.steps.push(choices);
            go(ad, run, mode, guards, actions, max_steps, max_runs, out);
            run.configs.pop();
            run.steps.pop();
        }
    }
    let mut out = Vec::new();
    let mut run = Run { configs: vec![start], steps: vec![], truncated: false };
    go(ad, &mut run, mode, guards, actions, max_steps, max_runs, &mut out);
    out
}

/// A run that picks uniformly among the enabled steps.
pub fn random_run<R: Rng>(
    ad: &ActivityDiagram,
    start: Configuration,
    mode: StepMode,
    guards: &dyn GuardOracle,
    actions: ActionMode,
    max_steps: usize,
    rng: &mut R,
) -> Run {
    let mut run = Run { configs: vec![start], steps: vec![], truncated: false };
    loop {
        let next = successors(ad, run.last(), mode, guards, actions);
        if next.is_empty() {
            return run;
        }
        if run.steps.len() == max_steps {
            run.truncated = true;
            return run;
        }
        let (choices, c) = next.choose(rng).expect("nonempty").clone();
        run.configs.push(c);
        run.steps.push(choices);
    }
}
