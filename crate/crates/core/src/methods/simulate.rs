use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{call_token, payload, CallerMode, MethodsBinding, MethodsError, MethodsInstance, PinController, BUFFERS, RESULT};
use crate::semantics::{is_final, mailbox, Token};
use crate::syntax::{ActivityDiagram, NodeId, NodeKind, TransitionId};
use crate::system::{inc_pc, Frame, Oid, Pc, SystemState, ThreadId, Trace, Value};

/// Longest a method may run, in system steps between its start and finish.
pub const MAX_DURATION: usize = 8;
const DEFAULT_DURATIONS: std::ops::RangeInclusive<usize> = 1..=3;

/// Inputs of a simulation. Decisions and durations not listed are drawn
/// from the seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    /// Decision node → output pin to take.
    pub decisions: BTreeMap<String, String>,
    /// Action node → number of steps its method runs.
    pub durations: BTreeMap<String, usize>,
    pub sub_variant: bool,
    pub caller: CallerMode,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            decisions: BTreeMap::new(),
            durations: BTreeMap::new(),
            sub_variant: true,
            caller: CallerMode::Role,
        }
    }
}

impl Scenario {
    pub fn seeded(seed: u64) -> Self {
        Scenario { seed, ..Scenario::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, MethodsError> {
        serde_json::from_str(text).map_err(|e| MethodsError::Scenario(e.to_string()))
    }

    pub fn instance(&self, ad: &ActivityDiagram) -> MethodsInstance {
        MethodsInstance::new(ad, self.sub_variant, self.caller)
    }

    pub fn check(&self, ad: &ActivityDiagram) -> Result<(), MethodsError> {
        let bad = |msg: String| Err(MethodsError::Scenario(msg));
        for (node, pin) in &self.decisions {
            match ad.node_named(node) {
                Some(n) if n.kind == NodeKind::DecisionMerge => {
                    if n.out_pin(pin).is_none() {
                        return bad(format!("`{node}` has no output pin `{pin}`"));
                    }
                }
                _ => return bad(format!("`{node}` is not a decision node")),
            }
        }
        for (node, &d) in &self.durations {
            if ad.node_named(node).is_none_or(|n| n.kind != NodeKind::Action) {
                return bad(format!("`{node}` is not an action node"));
            }
            if !(1..=MAX_DURATION).contains(&d) {
                return bad(format!("duration of `{node}` must be within 1..={MAX_DURATION}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Nothing can move and a final node holds a token.
    Final,
    /// Nothing can move and no final node holds a token.
    Stuck,
    /// The step limit was reached.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    Deliver { pin: String },
    Start { thread: ThreadId },
    Work,
    Finish,
    ForkJoin,
    Decision { input: String, output: String },
}

/// What happened between states `step` and `step + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    pub node: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub trace: Trace,
    pub events: Vec<Event>,
    pub outcome: Outcome,
}

impl Simulation {
    /// Index of the first event of `kind` at `node`.
    pub fn first(&self, node: &str, pred: impl Fn(&EventKind) -> bool) -> Option<usize> {
        self.events.iter().position(|e| e.node == node && pred(&e.kind))
    }
}

#[derive(Clone, Copy, Debug)]
enum Choice {
    Deliver(NodeId, usize),
    Work(NodeId),
    Finish(NodeId),
    Instant(NodeId),
}

struct Running {
    thread: ThreadId,
    remaining: usize,
}

struct Sim<'a> {
    ad: &'a ActivityDiagram,
    inst: &'a MethodsInstance,
    scenario: &'a Scenario,
    rng: ChaCha8Rng,
    s: SystemState,
    running: BTreeMap<NodeId, Running>,
    /// Input pins with incoming transitions, per node.
    pins: Vec<Vec<String>>,
    buffers: Oid,
}

impl Sim<'_> {
    fn buf(&self, t: TransitionId) -> Vec<Token> {
        mailbox::read(&self.s, &self.buffers, &self.ad.transition(t).key()).expect("simulator writes well-formed buffers")
    }

    fn take(&mut self, t: TransitionId) -> Token {
        let mut b = self.buf(t);
        let tok = b.remove(0);
        let key = self.ad.transition(t).key();
        mailbox::write(&mut self.s, &self.buffers, &key, &b);
        mailbox::bump(&mut self.s, &self.buffers, &key, 1, 0);
        tok
    }

    fn put(&mut self, t: TransitionId, tok: Token) {
        let mut b = self.buf(t);
        b.push(tok);
        let key = self.ad.transition(t).key();
        mailbox::write(&mut self.s, &self.buffers, &key, &b);
        mailbox::bump(&mut self.s, &self.buffers, &key, 0, 1);
    }

    fn feeding(&self, n: NodeId, pin: &str) -> Vec<TransitionId> {
        self.ad.incoming(n).iter().copied().filter(|&t| self.ad.transition(t).in_pin == pin).collect()
    }

    fn controller(&self, n: NodeId) -> (Oid, PinController) {
        let oid = MethodsInstance::controller_oid(&self.ad.node(n).name);
        let c = PinController::load(&self.s, &oid, &self.pins[n.0]);
        (oid, c)
    }

    fn options(&self) -> Vec<Choice> {
        let mut out = Vec::new();
        for n in self.ad.node_ids() {
            let fed = |t: &TransitionId| !self.buf(*t).is_empty();
            let ins = self.ad.incoming(n);
            match self.ad.node(n).kind {
                NodeKind::Action => match self.running.get(&n) {
                    Some(r) if r.remaining > 0 => out.push(Choice::Work(n)),
                    Some(_) => out.push(Choice::Finish(n)),
                    None => {
                        let (_, c) = self.controller(n);
                        for (k, pin) in self.pins[n.0].iter().enumerate() {
                            if !c.is_set(pin) && self.feeding(n, pin).iter().all(fed) {
                                out.push(Choice::Deliver(n, k));
                            }
                        }
                    }
                },
                NodeKind::ForkJoin if !ins.is_empty() && ins.iter().all(fed) => out.push(Choice::Instant(n)),
                NodeKind::DecisionMerge if ins.iter().any(fed) => out.push(Choice::Instant(n)),
                _ => {}
            }
        }
        out
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> T {
        items[self.rng.gen_range(0..items.len())].clone()
    }

    /// Output pins of a decision node, in declaration order.
    fn branch_pins(&self, d: NodeId) -> Vec<String> {
        let node = self.ad.node(d);
        node.out_pins
            .iter()
            .filter(|p| self.ad.outgoing(d).iter().any(|&t| self.ad.transition(t).out_pin == p.name))
            .map(|p| p.name.clone())
            .collect()
    }

    fn guard_text(&self, d: NodeId, pin: &str) -> String {
        let node = self.ad.node(d);
        node.out_pin(pin).and_then(|p| p.guard.clone()).map(|g| g.0).unwrap_or_else(|| "true".into())
    }

    fn choose_branch(&mut self, d: NodeId) -> String {
        match self.scenario.decisions.get(&self.ad.node(d).name) {
            Some(pin) => pin.clone(),
            None => {
                let pins = self.branch_pins(d);
                self.pick(&pins)
            }
        }
    }

    fn apply(&mut self, choice: Choice) -> Result<(NodeId, EventKind), MethodsError> {
        match choice {
            Choice::Deliver(n, k) => {
                let pin = self.pins[n.0][k].clone();
                let head = self.buf(self.feeding(n, &pin)[0])[0].clone();
                let (oid, mut c) = self.controller(n);
                let fired = c.deliver(&pin, payload(&head))?;
                c.store(&mut self.s, &oid);
                match fired {
                    None => Ok((n, EventKind::Deliver { pin })),
                    Some(args) => self.start(n, args).map(|th| (n, EventKind::Start { thread: th })),
                }
            }
            Choice::Work(n) => {
                let name = &self.ad.node(n).name;
                let r = self.running.get_mut(&n).expect("running");
                r.remaining -= 1;
                let oid = &self.inst.oid[name];
                let stack = self.s.stack(oid, &r.thread).expect("frame pushed at start");
                let next = inc_pc(stack, &MethodsInstance::pcs(&self.inst.meth[name]))?;
                *self.s.stack_mut(oid, &r.thread) = next;
                Ok((n, EventKind::Work))
            }
            Choice::Finish(n) => {
                self.finish(n)?;
                Ok((n, EventKind::Finish))
            }
            Choice::Instant(n) if self.ad.node(n).kind == NodeKind::ForkJoin => {
                let ins = self.ad.incoming(n).to_vec();
                let taken: Vec<Token> = ins.iter().map(|&t| self.take(t)).collect();
                for (k, &t) in self.ad.outgoing(n).to_vec().iter().enumerate() {
                    let value = match taken.get(k) {
                        Some(tok) => payload(tok),
                        None => Value::Str(format!("{}.{}", self.ad.node(n).name, self.ad.transition(t).out_pin)),
                    };
                    self.put(t, call_token(self.ad, t, value));
                }
                Ok((n, EventKind::ForkJoin))
            }
            Choice::Instant(d) => {
                let fed: Vec<TransitionId> =
                    self.ad.incoming(d).iter().copied().filter(|&t| !self.buf(t).is_empty()).collect();
                let input = self.pick(&fed);
                let outs = self.ad.outgoing(d).to_vec();
                let holds: Vec<TransitionId> =
                    outs.iter().copied().filter(|&t| super::eval_v2(self.ad.guard(t), &self.s)).collect();
                let preferred = self.scenario.decisions.get(&self.ad.node(d).name);
                let output = match preferred.and_then(|p| holds.iter().find(|&&t| &self.ad.transition(t).out_pin == p)) {
                    Some(&t) => t,
                    None if !holds.is_empty() => self.pick(&holds),
                    None => {
                        let pin = self.choose_branch(d);
                        let text = self.guard_text(d, &pin);
                        let name = format!("choice:{}", self.ad.node(d).name);
                        self.s.set_attr(&self.buffers, &name, Value::Str(text));
                        *outs.iter().find(|&&t| self.ad.transition(t).out_pin == pin).expect("branch pins have transitions")
                    }
                };
                let tok = self.take(input);
                self.put(output, call_token(self.ad, output, payload(&tok)));
                Ok((
                    d,
                    EventKind::Decision { input: self.ad.transition(input).key(), output: self.ad.transition(output).key() },
                ))
            }
        }
    }

    fn start(&mut self, n: NodeId, args: BTreeMap<String, Value>) -> Result<ThreadId, MethodsError> {
        for t in self.ad.incoming(n).to_vec() {
            self.take(t);
        }
        let busy: Vec<&ThreadId> = self.running.values().map(|r| &r.thread).collect();
        let free: Vec<ThreadId> = self.inst.threads.iter().filter(|t| !busy.contains(t)).cloned().collect();
        let thread = self.pick(&free);
        let name = &self.ad.node(n).name;
        let remaining = match self.scenario.durations.get(name) {
            Some(&d) => d,
            None => self.rng.gen_range(DEFAULT_DURATIONS),
        };
        let meth = self.inst.meth[name].clone();
        let callee = self.inst.oid[name].clone();
        self.s.stack_mut(&callee, &thread).push(Frame {
            callee: callee.clone(),
            pc: Pc(format!("{meth}@0")),
            mname: meth,
            vars: args,
            caller: self.inst.caller_of(self.ad, n),
        });
        self.running.insert(n, Running { thread: thread.clone(), remaining });
        Ok(thread)
    }

    fn finish(&mut self, n: NodeId) -> Result<(), MethodsError> {
        let r = self.running.remove(&n).expect("running");
        let name = self.ad.node(n).name.clone();
        let oid = self.inst.oid[&name].clone();
        self.s.stack_mut(&oid, &r.thread).pop();
        if let Some(stacks) = self.s.control.get_mut(&oid) {
            stacks.retain(|_, st| !st.is_empty());
            if stacks.is_empty() {
                self.s.control.remove(&oid);
            }
        }
        let mut result = None;
        for &t in self.ad.outgoing(n) {
            let d = self.ad.dst_id(t);
            let guarded = self.ad.outgoing(d).iter().any(|&o| !self.ad.guard(o).is_true_literal());
            if self.ad.node(d).kind == NodeKind::DecisionMerge && guarded {
                let pin = self.choose_branch(d);
                result = Some(self.guard_text(d, &pin));
            }
        }
        if let Some(text) = &result {
            self.s.set_attr(&oid, RESULT, Value::Str(text.clone()));
        }
        for t in self.ad.outgoing(n).to_vec() {
            let value = match &result {
                Some(text) => Value::Str(text.clone()),
                None => Value::Str(format!("{name}.{}", self.ad.transition(t).out_pin)),
            };
            self.put(t, call_token(self.ad, t, value));
        }
        Ok(())
    }
}

/// Runs the object system for one scenario. Each system step performs one
/// of: delivering an argument to an idle action (the last delivery starts
/// the method), advancing a running method, finishing it (its calls appear
/// on the outgoing transitions), or firing a fork/join or decision/merge.
/// The step is drawn uniformly from the seed.
pub fn simulate(
    ad: &ActivityDiagram,
    inst: &MethodsInstance,
    scenario: &Scenario,
    max_steps: usize,
) -> Result<Simulation, MethodsError> {
    scenario.check(ad)?;
    let buffers = Oid::from(BUFFERS);
    let pins = ad
        .node_ids()
        .map(|n| {
            let node = ad.node(n);
            node.in_pins
                .iter()
                .filter(|p| ad.incoming(n).iter().any(|&t| ad.transition(t).in_pin == p.name))
                .map(|p| p.name.clone())
                .collect()
        })
        .collect();
    let mut sim = Sim {
        ad,
        inst,
        scenario,
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        s: SystemState::new(),
        running: BTreeMap::new(),
        pins,
        buffers: buffers.clone(),
    };
    for t in ad.transition_ids() {
        let key = ad.transition(t).key();
        mailbox::write(&mut sim.s, &buffers, &key, &[]);
        mailbox::bump(&mut sim.s, &buffers, &key, 0, 0);
    }
    for n in ad.nodes_of_kind(NodeKind::Initial) {
        for &t in ad.outgoing(n) {
            let value = Value::Str(format!("{}.{}", ad.node(n).name, ad.transition(t).out_pin));
            let key = ad.transition(t).key();
            mailbox::write(&mut sim.s, &buffers, &key, &[call_token(ad, t, value)]);
        }
    }
    let mut states = vec![sim.s.clone()];
    let mut events = Vec::new();
    let binding = MethodsBinding { ad, inst };
    loop {
        let options = sim.options();
        if options.is_empty() {
            let outcome = if is_final(&binding, &sim.s)? { Outcome::Final } else { Outcome::Stuck };
            return Ok(Simulation { trace: Trace::complete(states), events, outcome });
        }
        if events.len() == max_steps {
            return Ok(Simulation { trace: Trace::prefix(states), events, outcome: Outcome::Truncated });
        }
        let choice = sim.pick(&options);
        let (n, kind) = sim.apply(choice)?;
        events.push(Event { step: events.len(), node: ad.node(n).name.clone(), kind });
        states.push(sim.s.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::methods::{check_role_frames, check_two_phase};
    use crate::semantics::{check_buffer_law, satisfies, Verdict};

    fn run(seed: u64) -> (ActivityDiagram, MethodsInstance, Simulation) {
        let ad = corpus::grade_thesis();
        let sc = Scenario::seeded(seed);
        let inst = sc.instance(&ad);
        let sim = simulate(&ad, &inst, &sc, 500).unwrap();
        (ad, inst, sim)
    }

    #[test]
    fn grade_thesis_runs_conform() {
        for seed in 0..20 {
            let (ad, inst, sim) = run(seed);
            assert_eq!(sim.outcome, Outcome::Final, "seed {seed}");
            let b = MethodsBinding { ad: &ad, inst: &inst };
            assert_eq!(satisfies(&sim.trace, &b).unwrap(), Verdict::Satisfied { initial: 0 }, "seed {seed}");
            assert_eq!(check_two_phase(&b, &sim.trace).unwrap(), None);
            check_role_frames(&ad, &inst, &inst.universe(&ad), &sim.trace).unwrap();
            for w in sim.trace.states.windows(2) {
                for t in ad.transition_ids() {
                    assert!(check_buffer_law(&b, t, &w[0], &w[1]).unwrap());
                }
            }
        }
    }

    #[test]
    fn scenario_decides_the_branch() {
        let ad = corpus::grade_thesis();
        for (pin, node) in [("passed", "CreateCert"), ("failed", "DetainFailure")] {
            let sc = Scenario { decisions: BTreeMap::from([("D1".into(), pin.into())]), ..Scenario::seeded(3) };
            let inst = sc.instance(&ad);
            let sim = simulate(&ad, &inst, &sc, 500).unwrap();
            assert!(sim.first(node, |k| matches!(k, EventKind::Start { .. })).is_some());
            assert!(sim.first(node, |k| *k == EventKind::Finish).is_some());
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let (_, _, a) = run(11);
        let (_, _, b) = run(11);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn durations_and_callers() {
        let ad = corpus::grade_thesis();
        let sc = Scenario {
            durations: BTreeMap::from([("Evaluate".into(), 4)]),
            caller: CallerMode::Command,
            sub_variant: false,
            ..Scenario::seeded(5)
        };
        let inst = sc.instance(&ad);
        let sim = simulate(&ad, &inst, &sc, 500).unwrap();
        let works = sim.events.iter().filter(|e| e.node == "Evaluate" && e.kind == EventKind::Work).count();
        assert_eq!(works, 4);
        let caller = sim
            .trace
            .states
            .iter()
            .flat_map(|s| s.control.values().flat_map(|m| m.values()).flat_map(|st| st.frames().to_vec()))
            .find(|f| f.mname == "Evaluate")
            .unwrap()
            .caller;
        assert_eq!(caller.as_str(), "cmd:Evaluate");
        let b = MethodsBinding { ad: &ad, inst: &inst };
        assert!(satisfies(&sim.trace, &b).unwrap().accepted());
    }

    #[test]
    fn bad_scenarios() {
        let ad = corpus::grade_thesis();
        for sc in [
            Scenario { decisions: BTreeMap::from([("Evaluate".into(), "x".into())]), ..Scenario::default() },
            Scenario { decisions: BTreeMap::from([("D1".into(), "maybe".into())]), ..Scenario::default() },
            Scenario { durations: BTreeMap::from([("Evaluate".into(), 0)]), ..Scenario::default() },
            Scenario { durations: BTreeMap::from([("D1".into(), 1)]), ..Scenario::default() },
        ] {
            assert!(simulate(&ad, &sc.instance(&ad), &sc, 10).is_err());
        }
        assert!(Scenario::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
        let sc = Scenario::from_json(r#"{"seed": 4, "caller": "command"}"#).unwrap();
        assert_eq!((sc.seed, sc.caller, sc.sub_variant), (4, CallerMode::Command, true));
    }

    #[test]
    fn truncation_and_starvation() {
        let (ad, inst, _) = run(0);
        let sim = simulate(&ad, &inst, &Scenario::seeded(0), 3).unwrap();
        assert_eq!(sim.outcome, Outcome::Truncated);
        assert_eq!(sim.trace.len(), 4);
        let starved = corpus::starved_join();
        let sc = Scenario::seeded(0);
        let sim = simulate(&starved, &sc.instance(&starved), &sc, 100).unwrap();
        assert_eq!(sim.outcome, Outcome::Stuck);
    }
}
