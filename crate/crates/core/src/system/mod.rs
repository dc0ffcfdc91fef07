//! The semantic domain: global system states and their traces.
//!
//! A [`SystemState`] has a data store (attribute values per object), a
//! control store (a stack of [`Frame`]s per object and thread) and an event
//! store (pending messages per object). The event store is carried along but
//! nothing in this crate produces or consumes messages.
//!
//! Behaviour is a nondeterministic [`TransitionRelation`]; a [`Trace`] is a
//! finite run of it, flagged as truncated when it is only a prefix of a
//! longer behaviour.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Exec;

macro_rules! name_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

name_type!(
    /// Object identifier.
    Oid
);
name_type!(
    /// Thread identifier.
    ThreadId
);
name_type!(
    /// Program counter.
    Pc
);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    #[serde(rename = "$ref")]
    pub oid: Oid,
}

/// Attribute and variable values. JSON: booleans, integers and strings map
/// directly, references are `{"$ref": oid}`, sequences are arrays and
/// records are objects.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
    // Before `Ref`: serde would otherwise read a one-element array as a
    // reference struct.
    Seq(Vec<Value>),
    Ref(Reference),
    Record(BTreeMap<String, Value>),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn reference(oid: impl Into<Oid>) -> Self {
        Value::Ref(Reference { oid: oid.into() })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Ref(r) => write!(f, "@{}", r.oid),
            other => f.write_str(&serde_json::to_string(other).map_err(|_| fmt::Error)?),
        }
    }
}

/// Activation record of a method.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frame {
    pub callee: Oid,
    #[serde(rename = "m")]
    pub mname: String,
    pub vars: BTreeMap<String, Value>,
    pub pc: Pc,
    pub caller: Oid,
}

/// A stack of frames; the top is the first element.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stack(Vec<Frame>);

impl Stack {
    pub fn new() -> Self {
        Stack(Vec::new())
    }

    pub fn top(&self) -> Option<&Frame> {
        self.0.first()
    }

    pub fn top_mut(&mut self) -> Option<&mut Frame> {
        self.0.first_mut()
    }

    pub fn push(&mut self, frame: Frame) {
        self.0.insert(0, frame);
    }

    pub fn pop(&mut self) -> Option<Frame> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.remove(0))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Frames from top to bottom.
    pub fn frames(&self) -> &[Frame] {
        &self.0
    }
}

impl FromIterator<Frame> for Stack {
    /// Frames are given top first.
    fn from_iter<I: IntoIterator<Item = Frame>>(iter: I) -> Self {
        Stack(iter.into_iter().collect())
    }
}

pub type Attributes = BTreeMap<String, Value>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemState {
    #[serde(rename = "ds", default)]
    pub data: BTreeMap<Oid, Attributes>,
    #[serde(rename = "cs", default)]
    pub control: BTreeMap<Oid, BTreeMap<ThreadId, Stack>>,
    #[serde(rename = "es", default)]
    pub events: BTreeMap<Oid, Vec<Value>>,
}

impl SystemState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attr(&self, oid: &Oid, var: &str) -> Option<&Value> {
        self.data.get(oid).and_then(|a| a.get(var))
    }

    pub fn attrs(&self, oid: &Oid) -> Option<&Attributes> {
        self.data.get(oid)
    }

    /// Functional override `ds ⊕ [oid.var ↦ value]`; everything else is
    /// unchanged.
    pub fn with_attr(&self, oid: &Oid, var: &str, value: Value) -> SystemState {
        let mut s = self.clone();
        s.set_attr(oid, var, value);
        s
    }

    pub fn set_attr(&mut self, oid: &Oid, var: &str, value: Value) {
        self.data.entry(oid.clone()).or_default().insert(var.to_string(), value);
    }

    pub fn stack(&self, oid: &Oid, thread: &ThreadId) -> Option<&Stack> {
        self.control.get(oid).and_then(|m| m.get(thread))
    }

    pub fn stack_mut(&mut self, oid: &Oid, thread: &ThreadId) -> &mut Stack {
        self.control.entry(oid.clone()).or_default().entry(thread.clone()).or_default()
    }

    /// Top frame of the stack of `oid` on `thread`, if any.
    pub fn top_frame(&self, oid: &Oid, thread: &ThreadId) -> Option<&Frame> {
        self.stack(oid, thread).and_then(Stack::top)
    }

    /// Stable serialization; the basis of the canonical state order.
    pub fn canonical_key(&self) -> String {
        serde_json::to_string(self).expect("states always serialize")
    }

    pub fn to_json(&self) -> String {
        self.canonical_key()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown object `{0}`")]
    UnknownObject(Oid),
    #[error("unknown thread `{0}`")]
    UnknownThread(ThreadId),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("object `{0}` has no class")]
    MissingClass(Oid),
    #[error("method `{0}` is not defined in any class")]
    MissingDefinition(String),
    #[error("method `{0}` has no program counters")]
    NoProgramCounters(String),
    #[error("stack is empty")]
    EmptyStack,
    #[error("program counter `{0}` is terminal")]
    TerminalPc(Pc),
    #[error("program counter `{0}` is not part of the given order")]
    PcNotInOrder(Pc),
    #[error("frame for `{mname}` on `{callee}` has program counter `{pc}` outside the method")]
    ForeignPc { callee: Oid, mname: String, pc: Pc },
    #[error("class of `{callee}` does not define `{mname}`")]
    MethodNotInClass { callee: Oid, mname: String },
}

/// The static part of a system: objects, classes, methods, threads and
/// program counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Universe {
    pub oids: BTreeSet<Oid>,
    pub classes: BTreeSet<String>,
    pub methods: BTreeSet<String>,
    pub threads: BTreeSet<ThreadId>,
    pub class_of: BTreeMap<Oid, String>,
    pub defined_in: BTreeMap<String, String>,
    pub pc_of: BTreeMap<String, Vec<Pc>>,
}

impl Universe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_object(&mut self, oid: impl Into<Oid>, class: impl Into<String>) -> &mut Self {
        let (oid, class) = (oid.into(), class.into());
        self.classes.insert(class.clone());
        self.oids.insert(oid.clone());
        self.class_of.insert(oid, class);
        self
    }

    /// Declares a method with its program counters in execution order.
    pub fn add_method(&mut self, name: impl Into<String>, class: impl Into<String>, pcs: Vec<Pc>) -> &mut Self {
        let (name, class) = (name.into(), class.into());
        self.classes.insert(class.clone());
        self.methods.insert(name.clone());
        self.defined_in.insert(name.clone(), class);
        self.pc_of.insert(name, pcs);
        self
    }

    pub fn add_thread(&mut self, thread: impl Into<ThreadId>) -> &mut Self {
        self.threads.insert(thread.into());
        self
    }

    pub fn class_of(&self, oid: &Oid) -> Result<&str, ModelError> {
        self.class_of.get(oid).map(String::as_str).ok_or_else(|| ModelError::UnknownObject(oid.clone()))
    }

    pub fn defined_in(&self, method: &str) -> Result<&str, ModelError> {
        self.defined_in
            .get(method)
            .map(String::as_str)
            .ok_or_else(|| ModelError::UnknownMethod(method.to_string()))
    }

    pub fn pc_of(&self, method: &str) -> Result<&[Pc], ModelError> {
        self.pc_of
            .get(method)
            .map(Vec::as_slice)
            .ok_or_else(|| ModelError::UnknownMethod(method.to_string()))
    }

    /// Totality of `class_of` and `defined_in`, nonempty `pc_of`.
    pub fn check(&self) -> Result<(), ModelError> {
        for oid in &self.oids {
            if !self.class_of.contains_key(oid) {
                return Err(ModelError::MissingClass(oid.clone()));
            }
        }
        for m in &self.methods {
            if !self.defined_in.contains_key(m) {
                return Err(ModelError::MissingDefinition(m.clone()));
            }
            if self.pc_of.get(m).is_none_or(|pcs| pcs.is_empty()) {
                return Err(ModelError::NoProgramCounters(m.clone()));
            }
        }
        Ok(())
    }

    pub fn top_frame<'s>(
        &self,
        s: &'s SystemState,
        oid: &Oid,
        thread: &ThreadId,
    ) -> Result<Option<&'s Frame>, ModelError> {
        if !self.oids.contains(oid) {
            return Err(ModelError::UnknownObject(oid.clone()));
        }
        if !self.threads.contains(thread) {
            return Err(ModelError::UnknownThread(thread.clone()));
        }
        Ok(s.top_frame(oid, thread))
    }

    /// Checks that a state only mentions known objects and threads and that
    /// every frame is well formed.
    pub fn check_state(&self, s: &SystemState) -> Result<(), ModelError> {
        let known = |oid: &Oid| {
            if self.oids.contains(oid) {
                Ok(())
            } else {
                Err(ModelError::UnknownObject(oid.clone()))
            }
        };
        for oid in s.data.keys().chain(s.events.keys()) {
            known(oid)?;
        }
        for (oid, threads) in &s.control {
            known(oid)?;
            for (th, stack) in threads {
                if !self.threads.contains(th) {
                    return Err(ModelError::UnknownThread(th.clone()));
                }
                for f in stack.frames() {
                    known(&f.callee)?;
                    known(&f.caller)?;
                    self.check_frame(f)?;
                }
            }
        }
        Ok(())
    }

    pub fn check_frame(&self, f: &Frame) -> Result<(), ModelError> {
        if !self.pc_of(&f.mname)?.contains(&f.pc) {
            return Err(ModelError::ForeignPc { callee: f.callee.clone(), mname: f.mname.clone(), pc: f.pc.clone() });
        }
        if self.class_of(&f.callee)? != self.defined_in(&f.mname)? {
            return Err(ModelError::MethodNotInClass { callee: f.callee.clone(), mname: f.mname.clone() });
        }
        Ok(())
    }
}

/// Replaces the top frame's program counter by its successor in `order`.
pub fn inc_pc(stack: &Stack, order: &[Pc]) -> Result<Stack, ModelError> {
    let mut next = stack.clone();
    let top = next.top_mut().ok_or(ModelError::EmptyStack)?;
    let at = order.iter().position(|p| *p == top.pc).ok_or_else(|| ModelError::PcNotInOrder(top.pc.clone()))?;
    let succ = order.get(at + 1).ok_or_else(|| ModelError::TerminalPc(top.pc.clone()))?;
    top.pc = succ.clone();
    Ok(next)
}

/// A finite run. `truncated` marks a prefix of a longer (possibly infinite)
/// behaviour.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub states: Vec<SystemState>,
    pub truncated: bool,
}

impl Trace {
    pub fn complete(states: Vec<SystemState>) -> Self {
        assert!(!states.is_empty(), "a trace has at least one state");
        Trace { states, truncated: false }
    }

    pub fn prefix(states: Vec<SystemState>) -> Self {
        assert!(!states.is_empty(), "a trace has at least one state");
        Trace { states, truncated: true }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Every consecutive pair is related by `delta`.
    pub fn follows<R: TransitionRelation + ?Sized>(&self, delta: &R) -> bool {
        self.states.windows(2).all(|w| delta.successors(&w[0]).contains(&w[1]))
    }
}

/// A nondeterministic transition function `STATE → ℘(STATE)` with finite
/// successor sets.
pub trait TransitionRelation {
    fn successors(&self, s: &SystemState) -> Vec<SystemState>;
}

impl<F> TransitionRelation for F
where
    F: Fn(&SystemState) -> Vec<SystemState>,
{
    fn successors(&self, s: &SystemState) -> Vec<SystemState> {
        self(s)
    }
}

/// Successors in canonical order (sorted by stable serialization, duplicates
/// removed).
pub fn canonical_successors<R: TransitionRelation + ?Sized>(delta: &R, s: &SystemState) -> Vec<SystemState> {
    let mut keyed: Vec<(String, SystemState)> =
        delta.successors(s).into_iter().map(|s| (s.canonical_key(), s)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    keyed.into_iter().map(|(_, s)| s).collect()
}

/// All traces from `s0` with at most `depth` steps, following at most
/// `fanout` canonical successors per state. Traces that stop early end in a
/// state without successors; traces cut at `depth` are marked truncated.
pub fn generate_traces<R>(delta: &R, s0: SystemState, depth: usize, fanout: usize, exec: Exec) -> Vec<Trace>
where
    R: TransitionRelation + Sync + ?Sized,
{
    fn extend<R: TransitionRelation + Sync + ?Sized>(
        delta: &R,
        path: Vec<SystemState>,
        remaining: usize,
        fanout: usize,
        exec: Exec,
    ) -> Vec<Trace> {
        let last = path.last().expect("nonempty path");
        let mut next = canonical_successors(delta, last);
        if next.is_empty() {
            return vec![Trace::complete(path)];
        }
        if remaining == 0 {
            return vec![Trace::prefix(path)];
        }
        next.truncate(fanout);
        exec.map(&next, |s| {
            let mut p = path.clone();
            p.push(s.clone());
            extend(delta, p, remaining - 1, fanout, exec)
        })
        .into_iter()
        .flatten()
        .collect()
    }
    if fanout == 0 {
        let truncated = !delta.successors(&s0).is_empty();
        return vec![Trace { states: vec![s0], truncated }];
    }
    extend(delta, vec![s0], depth, fanout, exec)
}
