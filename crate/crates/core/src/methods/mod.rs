//! Actions as methods of objects. A call to an action's method is started
//! once all of its arguments have arrived and runs for a while on some
//! thread; tokens are calls carrying their arguments; buffers live in the
//! data store of a bookkeeping object.

mod controller;
mod simulate;

pub use controller::{ControllerError, PinController};
pub use simulate::{simulate, Event, EventKind, Outcome, Scenario, Simulation, MAX_DURATION};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::semantics::{self, mailbox, BindingError, Token, VariationBinding};
use crate::syntax::{ActivityDiagram, Guard, NodeId, NodeKind, TransitionId};
use crate::system::{ModelError, Oid, Pc, SystemState, ThreadId, Trace, Universe, Value};

/// Object whose attributes hold the transition buffers.
pub const BUFFERS: &str = "$buffers";
/// Attribute of an action's object recording the outcome a downstream
/// decision reads.
pub const RESULT: &str = "result";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MethodsError {
    #[error("no object for node `{0}`")]
    UnknownOid(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Binding(#[from] BindingError),
}

/// Who appears as the caller of an action's method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallerMode {
    /// The object representing the node's role.
    #[default]
    Role,
    /// A per-node command object `cmd:<node>`.
    Command,
}

/// One instance of a diagram whose actions are methods.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodsInstance {
    pub meth: BTreeMap<String, String>,
    pub threads: Vec<ThreadId>,
    pub oid: BTreeMap<String, Oid>,
    pub rrep: BTreeMap<String, Oid>,
    /// Actions run on the object of their role.
    pub sub_variant: bool,
    pub caller_mode: CallerMode,
}

fn role_name(ad: &ActivityDiagram, n: NodeId) -> &str {
    ad.role_of(n)
}

fn action_class(node: &str) -> String {
    format!("{node}Impl")
}

impl MethodsInstance {
    /// Every action node `n` gets method `n`; roles are represented by
    /// `role:<R>` of class `R`. Under the sub-variant an action runs on its
    /// role's object, otherwise on `obj:<n>`. One thread per action node.
    pub fn new(ad: &ActivityDiagram, sub_variant: bool, caller_mode: CallerMode) -> Self {
        let mut inst = MethodsInstance {
            meth: BTreeMap::new(),
            threads: Vec::new(),
            oid: BTreeMap::new(),
            rrep: BTreeMap::new(),
            sub_variant,
            caller_mode,
        };
        for n in ad.node_ids() {
            let role = role_name(ad, n).to_string();
            inst.rrep.entry(role.clone()).or_insert_with(|| Oid(format!("role:{role}")));
        }
        for n in ad.nodes_of_kind(NodeKind::Action) {
            let name = ad.node(n).name.clone();
            let oid = if sub_variant { inst.rrep[role_name(ad, n)].clone() } else { Oid(format!("obj:{name}")) };
            inst.threads.push(ThreadId(format!("t{}", inst.threads.len())));
            inst.meth.insert(name.clone(), name.clone());
            inst.oid.insert(name, oid);
        }
        if inst.threads.is_empty() {
            inst.threads.push("t0".into());
        }
        inst
    }

    pub fn oid_of(&self, node: &str) -> Result<&Oid, MethodsError> {
        self.oid.get(node).ok_or_else(|| MethodsError::UnknownOid(node.to_string()))
    }

    pub fn caller_of(&self, ad: &ActivityDiagram, n: NodeId) -> Oid {
        match self.caller_mode {
            CallerMode::Role => self.rrep[role_name(ad, n)].clone(),
            CallerMode::Command => Oid(format!("cmd:{}", ad.node(n).name)),
        }
    }

    pub fn controller_oid(node: &str) -> Oid {
        Oid(format!("ctl:{node}"))
    }

    pub fn pcs(meth: &str) -> Vec<Pc> {
        (0..=MAX_DURATION).map(|k| Pc(format!("{meth}@{k}"))).collect()
    }

    pub fn universe(&self, ad: &ActivityDiagram) -> Universe {
        let mut u = Universe::new();
        u.add_object(BUFFERS, "Buffers");
        for (role, oid) in &self.rrep {
            u.add_object(oid.clone(), role.clone());
        }
        for th in &self.threads {
            u.add_thread(th.clone());
        }
        for n in ad.nodes_of_kind(NodeKind::Action) {
            let name = &ad.node(n).name;
            let oid = &self.oid[name];
            if !self.sub_variant {
                u.add_object(oid.clone(), action_class(name));
            }
            let class = u.class_of(oid).expect("added above").to_string();
            u.add_method(self.meth[name].clone(), class, Self::pcs(&self.meth[name]));
            u.add_object(Self::controller_oid(name), "Controller");
            if self.caller_mode == CallerMode::Command {
                u.add_object(Oid(format!("cmd:{name}")), "Command");
            }
        }
        u
    }

    /// `definedIn(meth(n)) = classOf(rrep(roleOf(n))) = classOf(oid(n))`
    /// for every action node.
    pub fn check_roles(&self, ad: &ActivityDiagram, u: &Universe) -> Result<(), RoleViolation> {
        for n in ad.nodes_of_kind(NodeKind::Action) {
            let name = &ad.node(n).name;
            let defined = u.defined_in(&self.meth[name]).map_err(|e| RoleViolation::new(None, name, e.to_string()))?;
            let role_class = u
                .class_of(&self.rrep[role_name(ad, n)])
                .map_err(|e| RoleViolation::new(None, name, e.to_string()))?;
            let own = u.class_of(&self.oid[name]).map_err(|e| RoleViolation::new(None, name, e.to_string()))?;
            if defined != role_class || own != role_class {
                return Err(RoleViolation::new(
                    None,
                    name,
                    format!("method defined in `{defined}`, role class `{role_class}`, object class `{own}`"),
                ));
            }
        }
        Ok(())
    }

    fn action_of_method(&self, mname: &str) -> Option<&str> {
        self.meth.iter().find(|(_, m)| *m == mname).map(|(n, _)| n.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoleViolation {
    /// State index, or `None` for the instance itself.
    pub index: Option<usize>,
    pub node: String,
    pub detail: String,
}

impl RoleViolation {
    fn new(index: Option<usize>, node: &str, detail: String) -> Self {
        RoleViolation { index, node: node.to_string(), detail }
    }
}

/// Checks every action frame in every state: its object has the class
/// that defines the method, and under the sub-variant that class is the
/// role's.
pub fn check_role_frames(
    ad: &ActivityDiagram,
    inst: &MethodsInstance,
    u: &Universe,
    trace: &Trace,
) -> Result<(), RoleViolation> {
    for (k, s) in trace.states.iter().enumerate() {
        for stacks in s.control.values() {
            for stack in stacks.values() {
                for f in stack.frames() {
                    let Some(node) = inst.action_of_method(&f.mname) else { continue };
                    let n = ad.node_id(node).expect("instance nodes exist");
                    let bad = |detail: String| RoleViolation::new(Some(k), node, detail);
                    let defined = u.defined_in(&f.mname).map_err(|e| bad(e.to_string()))?;
                    let class = u.class_of(&f.callee).map_err(|e| bad(e.to_string()))?;
                    if class != defined {
                        return Err(bad(format!("frame on `{}` of class `{class}`, method of `{defined}`", f.callee)));
                    }
                    if inst.sub_variant {
                        let role_class = u.class_of(&inst.rrep[role_name(ad, n)]).map_err(|e| bad(e.to_string()))?;
                        if role_class != defined {
                            return Err(bad(format!("role class `{role_class}`, method of `{defined}`")));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Some thread of the instance has a frame of `meth(n)` on `oid(n)`
/// somewhere in its stack. Non-action nodes never execute.
pub fn executing_v2(ad: &ActivityDiagram, inst: &MethodsInstance, n: NodeId, s: &SystemState) -> Result<bool, MethodsError> {
    let node = ad.node(n);
    if node.kind != NodeKind::Action {
        return Ok(false);
    }
    let oid = inst.oid_of(&node.name)?;
    let meth = &inst.meth[&node.name];
    let Some(stacks) = s.control.get(oid) else { return Ok(false) };
    Ok(inst.threads.iter().any(|th| {
        stacks
            .get(th)
            .is_some_and(|st| st.frames().iter().any(|f| &f.callee == oid && &f.mname == meth))
    }))
}

/// A guard holds if it is `true` or some object recorded it as its result.
pub fn eval_v2(g: &Guard, s: &SystemState) -> bool {
    if g.is_true_literal() {
        return true;
    }
    let text = g.text().trim();
    s.data.iter().any(|(oid, attrs)| {
        attrs.iter().any(|(k, v)| {
            let slot = k == RESULT || (oid.as_str() == BUFFERS && k.starts_with("choice:"));
            slot && v.as_str() == Some(text)
        })
    })
}

pub struct MethodsBinding<'a> {
    pub ad: &'a ActivityDiagram,
    pub inst: &'a MethodsInstance,
}

impl VariationBinding for MethodsBinding<'_> {
    fn diagram(&self) -> &ActivityDiagram {
        self.ad
    }

    fn executing(&self, n: NodeId, s: &SystemState) -> Result<bool, BindingError> {
        executing_v2(self.ad, self.inst, n, s).map_err(|e| BindingError::Other(e.to_string()))
    }

    fn buf_state(&self, t: TransitionId, s: &SystemState) -> Result<Vec<Token>, BindingError> {
        if t.0 >= self.ad.transitions().len() {
            return Err(BindingError::UnknownTransition(t.0));
        }
        mailbox::read(s, &BUFFERS.into(), &self.ad.transition(t).key())
    }

    fn transfer_hint(&self, t: TransitionId, s: &SystemState, s2: &SystemState) -> Option<(usize, usize)> {
        mailbox::hint(s, s2, &BUFFERS.into(), &self.ad.transition(t).key())
    }

    fn eval(&self, g: &Guard, s: &SystemState) -> Result<bool, BindingError> {
        Ok(eval_v2(g, s))
    }
}

/// A non-stutter step of an action that is not part of a start/finish
/// alternation, or a state whose executing flag disagrees with it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlternationViolation {
    pub index: usize,
    pub node: String,
    pub detail: String,
}

/// Every action alternates starting and finishing steps, beginning with a
/// start, never steps instantaneously, and executes exactly between a start
/// and the next finish.
pub fn check_two_phase<B: VariationBinding + ?Sized>(
    b: &B,
    trace: &Trace,
) -> Result<Option<AlternationViolation>, BindingError> {
    let ad = b.diagram();
    for n in ad.nodes_of_kind(NodeKind::Action) {
        let name = &ad.node(n).name;
        let bad = |index: usize, detail: &str| {
            Some(AlternationViolation { index, node: name.clone(), detail: detail.to_string() })
        };
        let mut running = false;
        for (j, s) in trace.states.iter().enumerate() {
            if b.executing(n, s)? != running {
                return Ok(bad(j, if running { "not executing while running" } else { "executing while idle" }));
            }
            let Some(s2) = trace.states.get(j + 1) else { break };
            if semantics::stutter(b, n, s, s2)? {
                continue;
            }
            if semantics::step_inst(b, n, s, s2)? {
                return Ok(bad(j, "instantaneous step"));
            }
            if !running && semantics::start_act(b, n, s, s2)? {
                running = true;
            } else if running && semantics::finish_act(b, n, s, s2)? {
                running = false;
            } else {
                return Ok(bad(j, "step out of order"));
            }
        }
    }
    Ok(None)
}

/// Payload of a call token: the single argument it carries.
pub fn payload(tok: &Token) -> Value {
    match tok {
        Token::Control => Value::Str(semantics::CONTROL_TEXT.to_string()),
        Token::Data { value: Value::Record(r), .. } if r.len() == 1 => r.values().next().expect("one entry").clone(),
        Token::Data { value, .. } => value.clone(),
    }
}

/// The call token for transition `t` carrying `value` as the argument of
/// the target pin. Control transitions carry the control token.
pub fn call_token(ad: &ActivityDiagram, t: TransitionId, value: Value) -> Token {
    match ad.carrier(t) {
        Some(ty) => Token::data(ty, Value::Record(BTreeMap::from([(ad.transition(t).in_pin.clone(), value)]))),
        None => Token::Control,
    }
}
