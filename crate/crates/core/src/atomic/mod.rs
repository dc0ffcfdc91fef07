//! A diagram as the body of a single method. Nodes are atomic actions
//! located by program counters; a transition holds the (single) control
//! token exactly when the top frame's program counter points at its target
//! and the frame records that transition as the way it got there.

pub mod lang;

use std::collections::BTreeMap;

use crate::semantics::{self, BindingError, Token, VariationBinding};
use crate::syntax::{ActivityDiagram, Diagnostic, Guard, Location, NodeId, NodeKind, PinType, TransitionId};
use crate::system::{
    inc_pc, Attributes, Frame, ModelError, Oid, Pc, Stack, SystemState, ThreadId, Trace, TransitionRelation, Universe,
    Value,
};

use lang::{eval_expr, eval_guard, parse_guard, parse_stmt, GuardExpr, LangError, Stmt};

/// Frame local naming the transition the current node was entered by.
pub const VIA: &str = "@via";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AtomicError {
    #[error("node `{node}`: {error}")]
    Lang { node: String, error: LangError },
    #[error("no frame for the method on `{0}`")]
    NoFrame(Oid),
    #[error("program counter `{0}` does not belong to any node")]
    UnknownPc(Pc),
    #[error("stuck-decision: no guard of `{0}` holds")]
    StuckDecision(String),
    #[error("node `{0}` has no outgoing transition")]
    NoSuccessor(String),
    #[error("the diagram needs exactly one initial node with one outgoing transition")]
    BadEntry,
    #[error("missing argument for parameter `{0}`")]
    MissingArgument(String),
    #[error("`{0}` is not a parameter of the method")]
    UnexpectedArgument(String),
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("the diagram does not satisfy the atomic-action profile:\n{0}")]
    Profile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Binding(#[from] BindingError),
}

/// One execution of the method a diagram describes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicInstance {
    /// Stored but not interpreted by any rule.
    pub caller: Oid,
    pub meth: String,
    pub params: Vec<String>,
    pub callee: Oid,
    pub pc_map: BTreeMap<String, Pc>,
    pub thread: ThreadId,
}

pub const CALLEE_CLASS: &str = "Owner";
pub const CALLER_CLASS: &str = "Client";

impl AtomicInstance {
    /// Method named after the diagram, called on `self` by `caller` in
    /// thread `main`; each node's program counter is `<method>@<node>`.
    pub fn new(ad: &ActivityDiagram) -> Self {
        let meth = ad.name().to_string();
        let pc_map = ad.nodes().iter().map(|n| (n.name.clone(), Pc(format!("{meth}@{}", n.name)))).collect();
        AtomicInstance {
            caller: "caller".into(),
            meth,
            params: Vec::new(),
            callee: "self".into(),
            pc_map,
            thread: "main".into(),
        }
    }

    pub fn with_params(mut self, params: Vec<String>) -> Self {
        self.params = params;
        self
    }

    pub fn pc(&self, node: &str) -> Option<&Pc> {
        self.pc_map.get(node)
    }

    pub fn node_at(&self, ad: &ActivityDiagram, pc: &Pc) -> Option<NodeId> {
        self.pc_map.iter().find(|(_, p)| *p == pc).and_then(|(n, _)| ad.node_id(n))
    }

    /// Program counters in node declaration order.
    pub fn pc_order(&self, ad: &ActivityDiagram) -> Vec<Pc> {
        ad.nodes().iter().filter_map(|n| self.pc_map.get(&n.name).cloned()).collect()
    }

    pub fn universe(&self, ad: &ActivityDiagram) -> Universe {
        let mut u = Universe::new();
        u.add_object(self.callee.clone(), CALLEE_CLASS)
            .add_object(self.caller.clone(), CALLER_CLASS)
            .add_thread(self.thread.clone())
            .add_method(self.meth.clone(), CALLEE_CLASS, self.pc_order(ad));
        u
    }

    /// The callee's class defines the method, every node has a program
    /// counter of the method and no two nodes share one.
    pub fn check(&self, ad: &ActivityDiagram, u: &Universe) -> Result<(), AtomicError> {
        if u.class_of(&self.callee)? != u.defined_in(&self.meth)? {
            return Err(AtomicError::Instance(format!("`{}` does not define `{}`", self.callee, self.meth)));
        }
        let pcs = u.pc_of(&self.meth)?;
        let mut seen = std::collections::BTreeSet::new();
        for n in ad.nodes() {
            let pc = self.pc_map.get(&n.name).ok_or_else(|| AtomicError::Instance(format!("no pc for `{}`", n.name)))?;
            if !pcs.contains(pc) {
                return Err(AtomicError::Instance(format!("pc `{pc}` is not a pc of `{}`", self.meth)));
            }
            if !seen.insert(pc) {
                return Err(AtomicError::Instance(format!("pc `{pc}` is used twice")));
            }
        }
        Ok(())
    }
}

/// Parsed effects and guards of a diagram.
#[derive(Clone, Debug)]
pub struct Program {
    effects: Vec<Stmt>,
    guards: Vec<GuardExpr>,
}

impl Program {
    pub fn effect(&self, n: NodeId) -> &Stmt {
        &self.effects[n.0]
    }

    pub fn guard(&self, t: TransitionId) -> &GuardExpr {
        &self.guards[t.0]
    }
}

/// Checks that effects and guards parse and that control can always move
/// on: initial nodes and actions need exactly one outgoing transition,
/// decision/merge nodes at least one.
pub fn validate_program(ad: &ActivityDiagram) -> Vec<Diagnostic> {
    compile(ad).err().unwrap_or_default()
}

pub fn compile(ad: &ActivityDiagram) -> Result<Program, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut effects = Vec::new();
    for id in ad.node_ids() {
        let n = ad.node(id);
        let stmt = if n.kind == NodeKind::Action {
            parse_stmt(&n.effect).unwrap_or_else(|e| {
                diags.push(Diagnostic::error(
                    "v1-effect-syntax",
                    Location::Node { node: n.name.clone() },
                    format!("effect of `{}`: {e}", n.name),
                ));
                Stmt::Skip
            })
        } else {
            if !n.effect.is_empty() {
                diags.push(Diagnostic::warning(
                    "v1-effect-ignored",
                    Location::Node { node: n.name.clone() },
                    format!("effect of {} node `{}` is never executed", n.kind, n.name),
                ));
            }
            Stmt::Skip
        };
        effects.push(stmt);
        let outs = ad.outgoing(id).len();
        let needs_one = matches!(n.kind, NodeKind::Action | NodeKind::Initial);
        if (needs_one && outs != 1) || (n.kind == NodeKind::DecisionMerge && outs == 0) {
            diags.push(Diagnostic::error(
                "v1-successor",
                Location::Node { node: n.name.clone() },
                format!("`{}` has {outs} outgoing transitions", n.name),
            ));
        }
    }
    let mut guards = Vec::new();
    for t in ad.transition_ids() {
        let g = if ad.node(ad.src_id(t)).kind == NodeKind::DecisionMerge {
            parse_guard(ad.guard(t).text()).unwrap_or_else(|e| {
                let tr = ad.transition(t);
                diags.push(Diagnostic::error(
                    "v1-guard-syntax",
                    Location::Pin { node: tr.src.clone(), pin: tr.out_pin.clone() },
                    format!("guard `{}`: {e}", ad.guard(t)),
                ));
                GuardExpr::Const(false)
            })
        } else {
            GuardExpr::Const(true)
        };
        guards.push(g);
    }
    if diags.iter().any(Diagnostic::is_error) {
        Err(diags)
    } else {
        Ok(Program { effects, guards })
    }
}

/// Where the program counter goes after a statement.
#[derive(Clone, Debug)]
pub enum Advance<'a> {
    /// Successor in a linear order (`incPC`).
    Inc(&'a [Pc]),
    /// Straight to a node, recording the transition taken.
    Jump { pc: Pc, via: String },
}

impl Advance<'_> {
    fn apply(&self, stack: &Stack) -> Result<Stack, ModelError> {
        match self {
            Advance::Inc(order) => inc_pc(stack, order),
            Advance::Jump { pc, via } => {
                let mut next = stack.clone();
                let top = next.top_mut().ok_or(ModelError::EmptyStack)?;
                top.pc = pc.clone();
                top.vars.insert(VIA.to_string(), Value::Str(via.clone()));
                Ok(next)
            }
        }
    }
}

/// Locals of the top frame first, then attributes of `oid`.
fn lookup(s: &SystemState, oid: &Oid, th: &ThreadId, name: &str) -> Result<i64, LangError> {
    let local = s.top_frame(oid, th).and_then(|f| f.vars.get(name));
    let v = local.or_else(|| s.attr(oid, name)).ok_or_else(|| LangError::Unknown(name.to_string()))?;
    v.as_int().ok_or_else(|| LangError::NotInteger(name.to_string()))
}

/// The data effect of a statement, leaving the program counter alone.
pub fn exec_stmt(stmt: &Stmt, oid: &Oid, th: &ThreadId, s: &SystemState) -> Result<SystemState, AtomicError> {
    if s.top_frame(oid, th).is_none() {
        return Err(AtomicError::NoFrame(oid.clone()));
    }
    let env = |name: &str| lookup(s, oid, th, name);
    let wrap = |error| AtomicError::Lang { node: String::new(), error };
    let mut next = s.clone();
    match stmt {
        Stmt::Skip => {}
        Stmt::SetAttr(x, e) => next.set_attr(oid, x, Value::Int(eval_expr(e, &env).map_err(wrap)?)),
        Stmt::SetLocal(x, e) => {
            let v = eval_expr(e, &env).map_err(wrap)?;
            let top = next.stack_mut(oid, th).top_mut().expect("checked above");
            top.vars.insert(x.clone(), Value::Int(v));
        }
    }
    Ok(next)
}

/// `s2` is `s` with the statement's effect applied and the program counter
/// advanced; nothing else changes.
pub fn sem_stmt(
    stmt: &Stmt,
    oid: &Oid,
    th: &ThreadId,
    s: &SystemState,
    s2: &SystemState,
    adv: &Advance<'_>,
) -> Result<bool, AtomicError> {
    let mut expected = exec_stmt(stmt, oid, th, s)?;
    let stack = adv.apply(expected.stack(oid, th).expect("frame exists"))?;
    *expected.stack_mut(oid, th) = stack;
    Ok(expected == *s2)
}

/// The guard holds in `s` and `s2` is `s` with only the program counter
/// advanced.
pub fn sem_guard(
    g: &GuardExpr,
    oid: &Oid,
    th: &ThreadId,
    s: &SystemState,
    s2: &SystemState,
    adv: &Advance<'_>,
) -> Result<bool, AtomicError> {
    let env = |name: &str| lookup(s, oid, th, name);
    let holds = eval_guard(g, &env).map_err(|error| AtomicError::Lang { node: String::new(), error })?;
    if !holds {
        return Ok(false);
    }
    sem_stmt(&Stmt::Skip, oid, th, s, s2, adv)
}

/// What the method does next from a state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Move {
    /// The node at the program counter fired and control left along `out`.
    Fire { node: NodeId, out: TransitionId, next: SystemState },
    /// The program counter is at a final node; the frame is popped.
    Return(SystemState),
}

/// The single-threaded method semantics of a diagram.
pub struct AtomicSystem<'a> {
    pub ad: &'a ActivityDiagram,
    pub inst: &'a AtomicInstance,
    pub program: Program,
}

impl<'a> AtomicSystem<'a> {
    pub fn new(ad: &'a ActivityDiagram, inst: &'a AtomicInstance) -> Result<Self, AtomicError> {
        let program = compile(ad).map_err(|diags| {
            AtomicError::Profile(diags.iter().map(|d| d.message.clone()).collect::<Vec<_>>().join("\n"))
        })?;
        Ok(AtomicSystem { ad, inst, program })
    }

    fn frame<'s>(&self, s: &'s SystemState) -> Option<&'s Frame> {
        s.top_frame(&self.inst.callee, &self.inst.thread)
    }

    fn jump(&self, t: TransitionId) -> Advance<'static> {
        let tr = self.ad.transition(t);
        Advance::Jump { pc: self.inst.pc_map[&tr.dst].clone(), via: tr.key() }
    }

    /// Outgoing transitions of a node in output-pin order.
    fn outs_in_pin_order(&self, n: NodeId) -> Vec<TransitionId> {
        let node = self.ad.node(n);
        let mut outs = self.ad.outgoing(n).to_vec();
        outs.sort_by_key(|&t| node.out_pins.iter().position(|p| p.name == self.ad.transition(t).out_pin));
        outs
    }

    /// Entry state: attributes of the callee, a fresh frame whose locals are
    /// the arguments, positioned after the initial node.
    pub fn initial_state(&self, store: &Attributes, args: &Attributes) -> Result<SystemState, AtomicError> {
        for p in &self.inst.params {
            if !args.contains_key(p) {
                return Err(AtomicError::MissingArgument(p.clone()));
            }
        }
        if let Some(extra) = args.keys().find(|k| !self.inst.params.contains(k)) {
            return Err(AtomicError::UnexpectedArgument(extra.clone()));
        }
        let mut initials = self.ad.nodes_of_kind(NodeKind::Initial);
        let (Some(init), None) = (initials.next(), initials.next()) else {
            return Err(AtomicError::BadEntry);
        };
        let [first] = self.ad.outgoing(init) else {
            return Err(AtomicError::BadEntry);
        };
        let mut s = SystemState::new();
        s.data.insert(self.inst.callee.clone(), store.clone());
        let Advance::Jump { pc, via } = self.jump(*first) else { unreachable!() };
        let mut vars = args.clone();
        vars.insert(VIA.to_string(), Value::Str(via));
        s.stack_mut(&self.inst.callee, &self.inst.thread).push(Frame {
            callee: self.inst.callee.clone(),
            mname: self.inst.meth.clone(),
            vars,
            pc,
            caller: self.inst.caller.clone(),
        });
        Ok(s)
    }

    /// The node the program counter points at, if there is a frame.
    pub fn current(&self, s: &SystemState) -> Result<Option<NodeId>, AtomicError> {
        match self.frame(s) {
            None => Ok(None),
            Some(f) => self.inst.node_at(self.ad, &f.pc).map(Some).ok_or_else(|| AtomicError::UnknownPc(f.pc.clone())),
        }
    }

    pub fn next_move(&self, s: &SystemState) -> Result<Option<Move>, AtomicError> {
        let Some(n) = self.current(s)? else {
            return Ok(None);
        };
        let node = self.ad.node(n);
        let (oid, th) = (&self.inst.callee, &self.inst.thread);
        let lang_err = |error| AtomicError::Lang { node: node.name.clone(), error };
        match node.kind {
            NodeKind::Final => {
                let mut popped = s.clone();
                popped.stack_mut(oid, th).pop();
                Ok(Some(Move::Return(popped)))
            }
            NodeKind::DecisionMerge => {
                let env = |name: &str| lookup(s, oid, th, name);
                for t in self.outs_in_pin_order(n) {
                    if eval_guard(self.program.guard(t), &env).map_err(lang_err)? {
                        let mut next = s.clone();
                        *next.stack_mut(oid, th) = self.jump(t).apply(s.stack(oid, th).expect("frame"))?;
                        return Ok(Some(Move::Fire { node: n, out: t, next }));
                    }
                }
                Err(AtomicError::StuckDecision(node.name.clone()))
            }
            NodeKind::Action | NodeKind::Initial | NodeKind::ForkJoin => {
                let [out] = self.ad.outgoing(n) else {
                    return Err(AtomicError::NoSuccessor(node.name.clone()));
                };
                let mut next = exec_stmt(self.program.effect(n), oid, th, s).map_err(|e| match e {
                    AtomicError::Lang { error, .. } => lang_err(error),
                    other => other,
                })?;
                let stack = self.jump(*out).apply(next.stack(oid, th).expect("frame"))?;
                *next.stack_mut(oid, th) = stack;
                Ok(Some(Move::Fire { node: n, out: *out, next }))
            }
        }
    }

    /// Runs until the final node is reached or `max_steps` nodes fired. The
    /// trace ends in the state whose program counter is at the final node;
    /// the state after returning is reported separately.
    pub fn run(&self, store: &Attributes, args: &Attributes, max_steps: usize) -> Result<MethodRun, AtomicError> {
        let mut states = vec![self.initial_state(store, args)?];
        let mut fired = Vec::new();
        loop {
            let last = states.last().expect("nonempty");
            match self.next_move(last)? {
                Some(Move::Return(popped)) => {
                    return Ok(MethodRun { trace: Trace::complete(states), fired, returned: Some(popped) });
                }
                None => return Ok(MethodRun { trace: Trace::complete(states), fired, returned: None }),
                Some(Move::Fire { .. }) if fired.len() == max_steps => {
                    return Ok(MethodRun { trace: Trace::prefix(states), fired, returned: None });
                }
                Some(Move::Fire { node, next, .. }) => {
                    fired.push(self.ad.node(node).name.clone());
                    states.push(next);
                }
            }
        }
    }

    /// Checks that executing a node corresponds to its effect, in both
    /// directions, for every action and decision/merge node and every step
    /// of the trace. Decision steps must take the first branch (in pin
    /// order) whose guard holds. Returns the first mismatch.
    pub fn check_effect_constraint(&self, trace: &Trace) -> Result<Option<EffectMismatch>, AtomicError> {
        let b = self.binding();
        let (oid, th) = (&self.inst.callee, &self.inst.thread);
        for (j, w) in trace.states.windows(2).enumerate() {
            let (s, s2) = (&w[0], &w[1]);
            let at = self.current(s)?;
            for n in self.ad.node_ids() {
                let node = self.ad.node(n);
                let (stepped, effect) = match node.kind {
                    NodeKind::Action => {
                        let stepped = semantics::step_inst(&b, n, s, s2)?;
                        let effect = match (at == Some(n), self.ad.outgoing(n)) {
                            (true, [out]) => sem_stmt(self.program.effect(n), oid, th, s, s2, &self.jump(*out))?,
                            _ => false,
                        };
                        (stepped, effect)
                    }
                    NodeKind::DecisionMerge => {
                        let stepped = semantics::step_decision_merge(&b, n, s, s2)?;
                        let mut effect = false;
                        if at == Some(n) {
                            let env = |name: &str| lookup(s, oid, th, name);
                            for t in self.outs_in_pin_order(n) {
                                let g = self.program.guard(t);
                                if eval_guard(g, &env).map_err(|error| AtomicError::Lang {
                                    node: node.name.clone(),
                                    error,
                                })? {
                                    effect = sem_guard(g, oid, th, s, s2, &self.jump(t))?;
                                    break;
                                }
                            }
                        }
                        (stepped, effect)
                    }
                    _ => continue,
                };
                if stepped != effect {
                    return Ok(Some(EffectMismatch { index: j, node: node.name.clone(), stepped, effect }));
                }
            }
        }
        Ok(None)
    }

    pub fn binding(&self) -> AtomicBinding<'a> {
        AtomicBinding { ad: self.ad, inst: self.inst }
    }
}

impl TransitionRelation for AtomicSystem<'_> {
    fn successors(&self, s: &SystemState) -> Vec<SystemState> {
        match self.next_move(s) {
            Ok(Some(Move::Fire { next, .. })) => vec![next],
            Ok(Some(Move::Return(popped))) => vec![popped],
            _ => vec![],
        }
    }
}

/// A step where the inner semantics and the node's effect disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectMismatch {
    pub index: usize,
    pub node: String,
    /// Whether the inner semantics saw the node step.
    pub stepped: bool,
    /// Whether the state change matches the node's effect.
    pub effect: bool,
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub trace: Trace,
    /// Names of the nodes fired, in order.
    pub fired: Vec<String>,
    /// State after the frame was popped, if the method returned.
    pub returned: Option<SystemState>,
}

impl MethodRun {
    /// Attributes of `callee` after the run.
    pub fn final_store(&self, callee: &Oid) -> Attributes {
        let s = self.returned.as_ref().unwrap_or_else(|| self.trace.states.last().expect("nonempty"));
        s.attrs(callee).cloned().unwrap_or_default()
    }
}

/// Validates the diagram for the atomic-action profile and runs it.
pub fn run_method(
    ad: &ActivityDiagram,
    inst: &AtomicInstance,
    store: &Attributes,
    args: &Attributes,
    max_steps: usize,
) -> Result<MethodRun, AtomicError> {
    let profile: Vec<Diagnostic> =
        crate::syntax::validate(ad, crate::syntax::Profile::Variant1).into_iter().filter(Diagnostic::is_error).collect();
    if !profile.is_empty() {
        return Err(AtomicError::Profile(profile.iter().map(|d| d.message.clone()).collect::<Vec<_>>().join("\n")));
    }
    AtomicSystem::new(ad, inst)?.run(store, args, max_steps)
}

/// Bindings of the variation points for one method execution: nothing is
/// ever executing, the only token is the thread's control, and guards are
/// taken to hold (the branch decision is part of the effect).
pub struct AtomicBinding<'a> {
    pub ad: &'a ActivityDiagram,
    pub inst: &'a AtomicInstance,
}

impl VariationBinding for AtomicBinding<'_> {
    fn diagram(&self) -> &ActivityDiagram {
        self.ad
    }

    fn executing(&self, _n: NodeId, _s: &SystemState) -> Result<bool, BindingError> {
        Ok(false)
    }

    fn elems(&self, ty: &PinType, token: &Token) -> Result<bool, BindingError> {
        match ty {
            PinType::Control => Ok(*token == Token::Control),
            other => Err(BindingError::UnsupportedType(other.clone())),
        }
    }

    /// `[⊥]` iff the top frame's program counter is at the target node and
    /// the frame entered it through this transition. Frames that do not
    /// record their entry mark every incoming transition of the node.
    fn buf_state(&self, t: TransitionId, s: &SystemState) -> Result<Vec<Token>, BindingError> {
        if t.0 >= self.ad.transitions().len() {
            return Err(BindingError::UnknownTransition(t.0));
        }
        let Some(f) = s.top_frame(&self.inst.callee, &self.inst.thread) else {
            return Ok(vec![]);
        };
        let tr = self.ad.transition(t);
        let at_dst = self.inst.pc(&tr.dst) == Some(&f.pc);
        let via_ok = match f.vars.get(VIA) {
            Some(Value::Str(key)) => *key == tr.key(),
            Some(other) => return Err(BindingError::Other(format!("`{VIA}` holds `{other}`"))),
            None => true,
        };
        Ok(if at_dst && via_ok { vec![Token::Control] } else { vec![] })
    }

    fn eval(&self, _g: &Guard, _s: &SystemState) -> Result<bool, BindingError> {
        Ok(true)
    }
}

/// Parses `key=value` pairs; values are integers.
pub fn parse_assignments<'s>(pairs: impl IntoIterator<Item = &'s str>) -> Result<Attributes, String> {
    let mut out = Attributes::new();
    for pair in pairs {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, found `{pair}`"))?;
        let v: i64 = v.trim().parse().map_err(|_| format!("value of `{k}` is not an integer: `{v}`"))?;
        out.insert(k.trim().to_string(), Value::Int(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::semantics::{satisfies, Verdict};

    fn store(pairs: &[(&str, i64)]) -> Attributes {
        pairs.iter().map(|(k, v)| (k.to_string(), Value::Int(*v))).collect()
    }

    fn fac_run(n: i64) -> (ActivityDiagram, AtomicInstance, MethodRun) {
        let ad = corpus::fac();
        let inst = AtomicInstance::new(&ad);
        let run = run_method(&ad, &inst, &store(&[("n", n)]), &Attributes::new(), 1000).unwrap();
        (ad, inst, run)
    }

    #[test]
    fn factorial_values() {
        for (n, expect) in [(0, 1), (1, 1), (3, 6), (5, 120)] {
            let (_, inst, run) = fac_run(n);
            assert_eq!(run.final_store(&inst.callee)["res"], Value::Int(expect), "n = {n}");
            assert!(!run.trace.truncated);
        }
    }

    #[test]
    fn trace_length_counts_firings() {
        let (_, _, run) = fac_run(3);
        assert_eq!(run.fired, ["Init", "Loop", "Mult", "Dec", "Loop", "Mult", "Dec", "Loop"]);
        assert_eq!(run.trace.len(), run.fired.len() + 1);
    }

    #[test]
    fn one_token_at_a_time_and_satisfied() {
        let (ad, inst, run) = fac_run(4);
        let b = AtomicBinding { ad: &ad, inst: &inst };
        for s in &run.trace.states {
            let total: usize = ad.transition_ids().map(|t| b.buf_state(t, s).unwrap().len()).sum();
            assert_eq!(total, 1);
        }
        let popped = run.returned.as_ref().unwrap();
        assert!(ad.transition_ids().all(|t| b.buf_state(t, popped).unwrap().is_empty()));
        assert_eq!(satisfies(&run.trace, &b).unwrap(), Verdict::Satisfied { initial: 0 });
        let sys = AtomicSystem::new(&ad, &inst).unwrap();
        assert_eq!(sys.check_effect_constraint(&run.trace).unwrap(), None);
        assert!(run.trace.follows(&sys));
    }

    #[test]
    fn corrupted_effect_passes_inner_semantics_only() {
        let (ad, inst, mut run) = fac_run(3);
        let k = 3;
        run.trace.states[k].set_attr(&inst.callee, "res", Value::Int(999));
        let b = AtomicBinding { ad: &ad, inst: &inst };
        assert!(satisfies(&run.trace, &b).unwrap().accepted());
        let sys = AtomicSystem::new(&ad, &inst).unwrap();
        let m = sys.check_effect_constraint(&run.trace).unwrap().unwrap();
        assert_eq!(m.index, k - 1);
        assert!(m.stepped && !m.effect);
    }

    #[test]
    fn skipping_a_node_is_violated() {
        let (ad, inst, mut run) = fac_run(3);
        run.trace.states.remove(3);
        let b = AtomicBinding { ad: &ad, inst: &inst };
        assert!(matches!(satisfies(&run.trace, &b).unwrap(), Verdict::Violated { index: 2, .. }));
    }

    #[test]
    fn sem_stmt_with_linear_pcs() {
        let (oid, th) = (Oid::from("o"), ThreadId::from("t"));
        let order: Vec<Pc> = ["p1", "p2"].into_iter().map(Pc::from).collect();
        let mut s = SystemState::new().with_attr(&oid, "res", Value::Int(6));
        s.stack_mut(&oid, &th).push(Frame {
            callee: oid.clone(),
            mname: "m".into(),
            vars: [("i".to_string(), Value::Int(4))].into_iter().collect(),
            pc: "p1".into(),
            caller: oid.clone(),
        });
        let mut s2 = s.with_attr(&oid, "res", Value::Int(24));
        s2.stack_mut(&oid, &th).top_mut().unwrap().pc = "p2".into();
        let stmt = parse_stmt("res := res * i").unwrap();
        assert!(sem_stmt(&stmt, &oid, &th, &s, &s2, &Advance::Inc(&order)).unwrap());
        let mut moved = s.clone();
        moved.stack_mut(&oid, &th).top_mut().unwrap().pc = "p2".into();
        assert!(sem_stmt(&Stmt::Skip, &oid, &th, &s, &moved, &Advance::Inc(&order)).unwrap());
        let noisy = s2.with_attr(&oid, "other", Value::Int(1));
        assert!(!sem_stmt(&stmt, &oid, &th, &s, &noisy, &Advance::Inc(&order)).unwrap());
    }

    #[test]
    fn buffers_follow_the_program_counter() {
        let ad = corpus::fac();
        let inst = AtomicInstance::new(&ad);
        let sys = AtomicSystem::new(&ad, &inst).unwrap();
        let b = sys.binding();
        let s0 = sys.initial_state(&store(&[("n", 2)]), &Attributes::new()).unwrap();
        let full: Vec<String> =
            ad.transition_ids().filter(|&t| !b.buf_state(t, &s0).unwrap().is_empty()).map(|t| ad.transition(t).key()).collect();
        assert_eq!(full.len(), 1);
        assert!(full[0].starts_with("start."));
        assert_eq!(b.elems(&PinType::Control, &Token::Control), Ok(true));
        assert!(b.elems(&PinType::Data("Int".into()), &Token::Control).is_err());
    }

    #[test]
    fn truncation_and_errors() {
        let ad = corpus::fac();
        let inst = AtomicInstance::new(&ad);
        let run = run_method(&ad, &inst, &store(&[("n", 10)]), &Attributes::new(), 5).unwrap();
        assert!(run.trace.truncated);
        assert_eq!(run.trace.len(), 6);
        let missing = run_method(&ad, &inst, &Attributes::new(), &Attributes::new(), 100);
        assert!(matches!(missing, Err(AtomicError::Lang { .. })));
        let grade = corpus::grade_thesis();
        let gi = AtomicInstance::new(&grade);
        assert!(matches!(run_method(&grade, &gi, &Attributes::new(), &Attributes::new(), 10), Err(AtomicError::Profile(_))));
    }

    #[test]
    fn params_become_locals() {
        let ad = crate::syntax::parse(
            "activity Add { initial i; action A effect \"sum := a + b\"; final f; i -> A; A -> f; }",
        )
        .unwrap();
        let inst = AtomicInstance::new(&ad).with_params(vec!["a".into(), "b".into()]);
        let args = store(&[("a", 2), ("b", 40)]);
        let run = run_method(&ad, &inst, &Attributes::new(), &args, 10).unwrap();
        assert_eq!(run.final_store(&inst.callee)["sum"], Value::Int(42));
        assert!(matches!(
            run_method(&ad, &inst, &Attributes::new(), &store(&[("a", 1)]), 10),
            Err(AtomicError::MissingArgument(_))
        ));
    }

    #[test]
    fn stuck_decision() {
        let ad = crate::syntax::parse(
            "activity S { initial i; decisionmerge d out a guard \"x > 0\"; final f; i -> d; d.a -> f.x; }",
        )
        .unwrap();
        let inst = AtomicInstance::new(&ad);
        let r = run_method(&ad, &inst, &store(&[("x", 0)]), &Attributes::new(), 10);
        assert_eq!(r.unwrap_err(), AtomicError::StuckDecision("d".into()));
    }

    #[test]
    fn instance_checks() {
        let ad = corpus::fac();
        let inst = AtomicInstance::new(&ad);
        let u = inst.universe(&ad);
        u.check().unwrap();
        inst.check(&ad, &u).unwrap();
        let mut dup = inst.clone();
        dup.pc_map.insert("Mult".into(), inst.pc("Dec").unwrap().clone());
        assert!(dup.check(&ad, &u).is_err());
    }

    #[test]
    fn assignments() {
        let a = parse_assignments(["n=5", " res = -1"]).unwrap();
        assert_eq!(a["n"], Value::Int(5));
        assert_eq!(a["res"], Value::Int(-1));
        assert!(parse_assignments(["n"]).is_err());
        assert!(parse_assignments(["n=x"]).is_err());
    }
}
