//! Configuration-level token game: buffers per transition and executing
//! flags per action, with every successor the step predicates allow. It is
//! independent of the system model and serves as the oracle the other
//! layers are checked against.

mod explore;
mod run;

pub use explore::{analyze, reachable, reachability_dot, successors, Reach, Report, DEFAULT_BOUND};
pub use run::{as_binding, enumerate_runs, lift, lower, random_run, token_binding, Run, INSTANCE};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::semantics::Token;
use crate::syntax::{ActivityDiagram, Guard, NodeId, NodeKind, TransitionId};
use crate::system::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("diagram has no initial node")]
    NoInitialNode,
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("malformed configuration: {0}")]
    Malformed(String),
}

/// Token buffers indexed by transition and executing flags indexed by node.
/// Only action nodes ever have their flag set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub buffers: Vec<Vec<Token>>,
    pub exec: Vec<bool>,
}

impl Configuration {
    pub fn empty(ad: &ActivityDiagram) -> Self {
        Configuration { buffers: vec![Vec::new(); ad.transitions().len()], exec: vec![false; ad.nodes().len()] }
    }

    pub fn buffer(&self, t: TransitionId) -> &[Token] {
        &self.buffers[t.0]
    }

    pub fn executing(&self, n: NodeId) -> bool {
        self.exec[n.0]
    }

    pub fn token_count(&self) -> usize {
        self.buffers.iter().map(Vec::len).sum()
    }

    /// Some initial node has tokens on all its outgoing transitions; no other
    /// node has outgoing tokens or is executing.
    pub fn is_initial(&self, ad: &ActivityDiagram) -> bool {
        let mut found = false;
        for n in ad.node_ids() {
            let outs = ad.outgoing(n);
            if ad.node(n).kind == NodeKind::Initial {
                found |= outs.iter().all(|&t| !self.buffers[t.0].is_empty());
            } else if self.exec[n.0] || outs.iter().any(|&t| !self.buffers[t.0].is_empty()) {
                return false;
            }
        }
        found
    }

    /// Some final node has a token on an incoming transition; no other node
    /// has incoming tokens or is executing.
    pub fn is_final(&self, ad: &ActivityDiagram) -> bool {
        let mut found = false;
        for n in ad.node_ids() {
            let ins = ad.incoming(n);
            if ad.node(n).kind == NodeKind::Final {
                found |= ins.iter().any(|&t| !self.buffers[t.0].is_empty());
            } else if self.exec[n.0] || ins.iter().any(|&t| !self.buffers[t.0].is_empty()) {
                return false;
            }
        }
        found
    }

    /// `{"buffers": {key: [token...]}, "exec": {action: bool}}`.
    pub fn to_json(&self, ad: &ActivityDiagram) -> serde_json::Value {
        let buffers: serde_json::Map<String, serde_json::Value> = ad
            .transition_ids()
            .map(|t| (ad.transition(t).key(), serde_json::to_value(&self.buffers[t.0]).expect("tokens serialize")))
            .collect();
        let exec: serde_json::Map<String, serde_json::Value> = ad
            .nodes_of_kind(NodeKind::Action)
            .map(|n| (ad.node(n).name.clone(), serde_json::Value::Bool(self.exec[n.0])))
            .collect();
        serde_json::json!({ "buffers": buffers, "exec": exec })
    }

    /// Inverse of [`Configuration::to_json`]. Missing buffers and flags
    /// default to empty and false; unknown keys are errors.
    pub fn from_json(ad: &ActivityDiagram, v: &serde_json::Value) -> Result<Self, GameError> {
        let mut c = Configuration::empty(ad);
        let obj = v.as_object().ok_or_else(|| GameError::Malformed("expected an object".into()))?;
        if let Some(buffers) = obj.get("buffers") {
            let map = buffers.as_object().ok_or_else(|| GameError::Malformed("`buffers` must be an object".into()))?;
            for (key, toks) in map {
                let t = ad.transition_id(key).ok_or_else(|| GameError::UnknownTransition(key.clone()))?;
                c.buffers[t.0] = serde_json::from_value(toks.clone())
                    .map_err(|e| GameError::Malformed(format!("buffer `{key}`: {e}")))?;
            }
        }
        if let Some(exec) = obj.get("exec") {
            let map = exec.as_object().ok_or_else(|| GameError::Malformed("`exec` must be an object".into()))?;
            for (name, flag) in map {
                let n = ad.node_id(name).ok_or_else(|| GameError::UnknownNode(name.clone()))?;
                c.exec[n.0] =
                    flag.as_bool().ok_or_else(|| GameError::Malformed(format!("flag of `{name}` is not a boolean")))?;
            }
        }
        Ok(c)
    }

    /// Short human-readable form listing nonempty buffers and running actions.
    pub fn describe(&self, ad: &ActivityDiagram) -> String {
        let mut parts: Vec<String> = ad
            .transition_ids()
            .filter(|&t| !self.buffers[t.0].is_empty())
            .map(|t| {
                let toks: Vec<String> = self.buffers[t.0].iter().map(ToString::to_string).collect();
                format!("{}:[{}]", ad.transition(t).key(), toks.join(","))
            })
            .collect();
        parts.extend(ad.node_ids().filter(|&n| self.exec[n.0]).map(|n| format!("{}*", ad.node(n).name)));
        parts.join(" ")
    }
}

/// Token put on a transition when there is nothing to pass through: the
/// control token, or a data token whose payload is the transition index.
pub fn representative(ad: &ActivityDiagram, t: TransitionId) -> Token {
    match ad.carrier(t) {
        Some(ty) => Token::data(ty, Value::Int(t.0 as i64)),
        None => Token::Control,
    }
}

/// One token on every outgoing transition of every initial node. `seed`
/// supplies the payload of data tokens.
pub fn initial_config_with(
    ad: &ActivityDiagram,
    seed: &dyn Fn(TransitionId, &str) -> Value,
) -> Result<Configuration, GameError> {
    let mut c = Configuration::empty(ad);
    let mut any = false;
    for n in ad.nodes_of_kind(NodeKind::Initial) {
        any = true;
        for &t in ad.outgoing(n) {
            c.buffers[t.0] = vec![match ad.carrier(t) {
                Some(ty) => {
                    let value = seed(t, &ty);
                    Token::data(ty, value)
                }
                None => Token::Control,
            }];
        }
    }
    if any {
        Ok(c)
    } else {
        Err(GameError::NoInitialNode)
    }
}

pub fn initial_config(ad: &ActivityDiagram) -> Result<Configuration, GameError> {
    initial_config_with(ad, &|t, _| Value::Int(t.0 as i64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// Exactly one node moves per step.
    #[default]
    Interleaving,
    /// Any nonempty set of nodes moves at once.
    Concurrent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ActionMode {
    /// Actions consume and produce in one step.
    #[default]
    Instant,
    /// Actions start (consume) and later finish (produce).
    TwoPhase,
}

impl std::str::FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interleaving" => Ok(StepMode::Interleaving),
            "concurrent" => Ok(StepMode::Concurrent),
            other => Err(format!("unknown step mode `{other}`")),
        }
    }
}

impl std::str::FromStr for ActionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instant" => Ok(ActionMode::Instant),
            "twoPhase" | "two-phase" | "twophase" => Ok(ActionMode::TwoPhase),
            other => Err(format!("unknown action mode `{other}`")),
        }
    }
}

/// Three-valued guard decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    True,
    False,
    Either,
}

impl Decision {
    pub fn permits(self) -> bool {
        self != Decision::False
    }
}

/// Decides guards at the configuration level.
pub trait GuardOracle: Sync {
    fn decide(&self, guard: &Guard, c: &Configuration) -> Decision;
}

/// `true` holds, every other guard may go either way.
#[derive(Clone, Copy, Debug, Default)]
pub struct Underspecified;

impl GuardOracle for Underspecified {
    fn decide(&self, guard: &Guard, _c: &Configuration) -> Decision {
        if guard.is_true_literal() {
            Decision::True
        } else {
            Decision::Either
        }
    }
}

impl<F> GuardOracle for F
where
    F: Fn(&Guard, &Configuration) -> Decision + Sync,
{
    fn decide(&self, guard: &Guard, c: &Configuration) -> Decision {
        self(guard, c)
    }
}

/// Fixed decisions per guard text; unlisted guards are underspecified.
#[derive(Clone, Debug, Default)]
pub struct FixedGuards(pub BTreeMap<String, Decision>);

impl GuardOracle for FixedGuards {
    fn decide(&self, guard: &Guard, c: &Configuration) -> Decision {
        self.0.get(guard.text()).copied().unwrap_or_else(|| Underspecified.decide(guard, c))
    }
}

/// Which behaviour a node took in a step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChoiceKind {
    Stutter,
    Start,
    Finish,
    Instant,
    ForkJoin,
    Decision { input: String, output: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StepChoice {
    pub node: String,
    #[serde(flatten)]
    pub kind: ChoiceKind,
}

impl StepChoice {
    /// Transitions this choice consumes from and produces on.
    pub fn transfers(&self, ad: &ActivityDiagram) -> Result<(Vec<TransitionId>, Vec<TransitionId>), GameError> {
        let n = ad.node_id(&self.node).ok_or_else(|| GameError::UnknownNode(self.node.clone()))?;
        let (ins, outs) = (ad.incoming(n).to_vec(), ad.outgoing(n).to_vec());
        let lookup = |key: &str| ad.transition_id(key).ok_or_else(|| GameError::UnknownTransition(key.to_string()));
        Ok(match &self.kind {
            ChoiceKind::Stutter => (vec![], vec![]),
            ChoiceKind::Start => (ins, vec![]),
            ChoiceKind::Finish => (vec![], outs),
            ChoiceKind::Instant | ChoiceKind::ForkJoin => (ins, outs),
            ChoiceKind::Decision { input, output } => (vec![lookup(input)?], vec![lookup(output)?]),
        })
    }
}

impl fmt::Display for StepChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ChoiceKind::Stutter => write!(f, "{}:stutter", self.node),
            ChoiceKind::Start => write!(f, "{}:start", self.node),
            ChoiceKind::Finish => write!(f, "{}:finish", self.node),
            ChoiceKind::Instant => write!(f, "{}", self.node),
            ChoiceKind::ForkJoin => write!(f, "{}:forkjoin", self.node),
            ChoiceKind::Decision { input, output } => write!(f, "{}:{}=>{}", self.node, input, output),
        }
    }
}
