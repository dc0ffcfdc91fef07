use serde::{Deserialize, Serialize};

use crate::syntax::TransitionId;
use crate::system::Trace;
use crate::Exec;

use super::predicates::{final_witness, initial_witness, Predicate, StepFacts, StepView};
use super::{check_buffer_types, BindingError, VariationBinding};

/// Outcome of checking a trace against an instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Satisfied { initial: usize },
    /// The trace is a truncated prefix and nothing went wrong so far.
    SatisfiedSoFar { initial: usize },
    NoInitialFound,
    /// The step from state `index` to `index + 1` broke `predicate` at `node`.
    Violated { index: usize, node: String, predicate: Predicate },
}

impl Verdict {
    /// Satisfied or satisfied so far.
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Satisfied { .. } | Verdict::SatisfiedSoFar { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdicts always serialize")
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Satisfied { initial } => write!(f, "satisfied (initial state {initial})"),
            Verdict::SatisfiedSoFar { initial } => write!(f, "satisfied so far (initial state {initial}, trace truncated)"),
            Verdict::NoInitialFound => f.write_str("no initial state found"),
            Verdict::Violated { index, node, predicate } => {
                write!(f, "violated at step {index} -> {}: node {node} fails {predicate}", index + 1)
            }
        }
    }
}

/// Checks a trace: find the first initial state, then every later step must
/// be allowed for every node, and a final configuration must stay final.
/// Persistence of finality is checked before the node steps of each pair.
pub fn satisfies<B: VariationBinding + ?Sized>(trace: &Trace, b: &B) -> Result<Verdict, BindingError> {
    let ad = b.diagram();
    let states = &trace.states;
    let mut start = None;
    for (i, s) in states.iter().enumerate() {
        if initial_witness(b, s)?.is_some() {
            start = Some(i);
            break;
        }
    }
    let Some(i) = start else {
        return Ok(Verdict::NoInitialFound);
    };
    check_buffer_types(b, &states[i])?;
    for j in i..states.len().saturating_sub(1) {
        let (s, s2) = (&states[j], &states[j + 1]);
        check_buffer_types(b, s2)?;
        if let Some(f) = final_witness(b, s)? {
            if final_witness(b, s2)?.is_none() {
                return Ok(Verdict::Violated {
                    index: j,
                    node: ad.node(f).name.clone(),
                    predicate: Predicate::FinalPersistence,
                });
            }
        }
        let facts = StepFacts::compute(b, s, s2)?;
        let guard_post = |t: TransitionId| b.eval(ad.guard(t), s2);
        let view = StepView { ad, facts: &facts, guard_post };
        for n in ad.node_ids() {
            if let Some(predicate) = view.step(n)? {
                return Ok(Verdict::Violated { index: j, node: ad.node(n).name.clone(), predicate });
            }
        }
    }
    Ok(if trace.truncated { Verdict::SatisfiedSoFar { initial: i } } else { Verdict::Satisfied { initial: i } })
}

/// Checks independent traces, possibly in parallel. Results keep the input
/// order.
pub fn check_batch<B>(traces: &[Trace], b: &B, exec: Exec) -> Vec<Result<Verdict, BindingError>>
where
    B: VariationBinding + Sync + ?Sized,
{
    exec.map(traces, |t| satisfies(t, b))
}
