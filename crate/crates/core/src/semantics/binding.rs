use crate::syntax::{ActivityDiagram, Guard, NodeId, PinType, TransitionId};
use crate::system::{ModelError, Oid, SystemState, Value};

use super::Token;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindingError {
    #[error("unknown transition #{0}")]
    UnknownTransition(usize),
    #[error("buffer `{key}` holds a malformed entry: {detail}")]
    MalformedBuffer { key: String, detail: String },
    #[error("token {token} on `{key}` does not match the pin types of the transition")]
    IllTypedToken { key: String, token: Token },
    #[error("pin type `{0}` has no tokens in this binding")]
    UnsupportedType(PinType),
    #[error("cannot evaluate guard `{guard}`: {detail}")]
    Guard { guard: String, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Other(String),
}

/// Tokens consumed from and produced on one transition in one step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transfer {
    pub cons: Vec<Token>,
    pub prod: Vec<Token>,
}

/// Splits a buffer change into consumed prefix and produced suffix so that
/// `before = cons ++ rest` and `after = rest ++ prod`. With a hint
/// `(consumed, produced)` that is consistent with the buffers the hinted
/// split is used; otherwise the split with the fewest consumed tokens.
pub fn fifo_decompose(before: &[Token], after: &[Token], hint: Option<(usize, usize)>) -> Transfer {
    let fits = |k: usize| {
        let rest = &before[k..];
        after.len() >= rest.len() && after[..rest.len()] == *rest
    };
    let k = match hint {
        Some((c, p)) if c <= before.len() && fits(c) && after.len() - (before.len() - c) == p => c,
        _ => (0..=before.len()).find(|&k| fits(k)).expect("consuming everything always fits"),
    };
    let rest_len = before.len() - k;
    Transfer { cons: before[..k].to_vec(), prod: after[rest_len..].to_vec() }
}

/// True iff `before = cons ++ rest` and `after = rest ++ prod` for some `rest`.
pub fn buffer_law_holds(before: &[Token], after: &[Token], t: &Transfer) -> bool {
    if !before.starts_with(&t.cons) || !after.ends_with(&t.prod) {
        return false;
    }
    let rest = &before[t.cons.len()..];
    after.len() == rest.len() + t.prod.len() && after[..rest.len()] == *rest
}

/// The variation points a variant supplies. A binding value stands for one
/// diagram instance, so the instance argument of the paper's signatures is
/// implicit.
pub trait VariationBinding {
    fn diagram(&self) -> &ActivityDiagram;

    fn executing(&self, n: NodeId, s: &SystemState) -> Result<bool, BindingError>;

    /// Membership in `elems(ty)`.
    fn elems(&self, ty: &PinType, token: &Token) -> Result<bool, BindingError> {
        Ok(token.inhabits(ty))
    }

    fn buf_state(&self, t: TransitionId, s: &SystemState) -> Result<Vec<Token>, BindingError>;

    /// Cumulative (consumed, produced) counts recorded in the states, if the
    /// binding keeps them. Used to resolve ambiguous buffer changes.
    fn transfer_hint(&self, _t: TransitionId, _s: &SystemState, _s2: &SystemState) -> Option<(usize, usize)> {
        None
    }

    fn transfer(&self, t: TransitionId, s: &SystemState, s2: &SystemState) -> Result<Transfer, BindingError> {
        let before = self.buf_state(t, s)?;
        let after = self.buf_state(t, s2)?;
        Ok(fifo_decompose(&before, &after, self.transfer_hint(t, s, s2)))
    }

    fn cons(&self, t: TransitionId, s: &SystemState, s2: &SystemState) -> Result<Vec<Token>, BindingError> {
        Ok(self.transfer(t, s, s2)?.cons)
    }

    fn prod(&self, t: TransitionId, s: &SystemState, s2: &SystemState) -> Result<Vec<Token>, BindingError> {
        Ok(self.transfer(t, s, s2)?.prod)
    }

    fn eval(&self, g: &Guard, s: &SystemState) -> Result<bool, BindingError>;
}

/// Checks the pin-type constraint on every buffered token of `s`.
pub fn check_buffer_types<B: VariationBinding + ?Sized>(b: &B, s: &SystemState) -> Result<(), BindingError> {
    let ad = b.diagram();
    for t in ad.transition_ids() {
        for tok in b.buf_state(t, s)? {
            if !(b.elems(ad.in_type(t), &tok)? && b.elems(ad.out_type(t), &tok)?) {
                return Err(BindingError::IllTypedToken { key: ad.transition(t).key(), token: tok });
            }
        }
    }
    Ok(())
}

/// FIFO law for one transition across one step, with cons/prod taken from
/// the binding.
pub fn check_buffer_law<B: VariationBinding + ?Sized>(
    b: &B,
    t: TransitionId,
    s: &SystemState,
    s2: &SystemState,
) -> Result<bool, BindingError> {
    let before = b.buf_state(t, s)?;
    let after = b.buf_state(t, s2)?;
    Ok(buffer_law_holds(&before, &after, &b.transfer(t, s, s2)?))
}

/// Per-transition token buffers stored as attributes of one bookkeeping
/// object: `buf:<key>` holds the tokens, `cons:<key>`/`prod:<key>` the
/// cumulative consumed and produced counts.
pub mod mailbox {
    use super::*;

    pub fn buf_var(key: &str) -> String {
        format!("buf:{key}")
    }

    pub fn cons_var(key: &str) -> String {
        format!("cons:{key}")
    }

    pub fn prod_var(key: &str) -> String {
        format!("prod:{key}")
    }

    pub fn write(s: &mut SystemState, oid: &Oid, key: &str, tokens: &[Token]) {
        s.set_attr(oid, &buf_var(key), Value::Seq(tokens.iter().map(Token::to_value).collect()));
    }

    /// Buffer contents; an absent attribute is the empty buffer.
    pub fn read(s: &SystemState, oid: &Oid, key: &str) -> Result<Vec<Token>, BindingError> {
        match s.attr(oid, &buf_var(key)) {
            None => Ok(Vec::new()),
            Some(Value::Seq(items)) => items
                .iter()
                .map(|v| {
                    Token::from_value(v).ok_or_else(|| BindingError::MalformedBuffer {
                        key: key.to_string(),
                        detail: format!("`{v}` is not a token"),
                    })
                })
                .collect(),
            Some(other) => Err(BindingError::MalformedBuffer {
                key: key.to_string(),
                detail: format!("expected a sequence, found `{other}`"),
            }),
        }
    }

    pub fn counters(s: &SystemState, oid: &Oid, key: &str) -> Option<(i64, i64)> {
        let c = s.attr(oid, &cons_var(key))?.as_int()?;
        let p = s.attr(oid, &prod_var(key))?.as_int()?;
        Some((c, p))
    }

    pub fn bump(s: &mut SystemState, oid: &Oid, key: &str, consumed: i64, produced: i64) {
        let (c, p) = counters(s, oid, key).unwrap_or((0, 0));
        s.set_attr(oid, &cons_var(key), Value::Int(c + consumed));
        s.set_attr(oid, &prod_var(key), Value::Int(p + produced));
    }

    /// Counter deltas between two states, when both carry counters and the
    /// deltas are nonnegative.
    pub fn hint(s: &SystemState, s2: &SystemState, oid: &Oid, key: &str) -> Option<(usize, usize)> {
        let (c1, p1) = counters(s, oid, key)?;
        let (c2, p2) = counters(s2, oid, key)?;
        Some((usize::try_from(c2 - c1).ok()?, usize::try_from(p2 - p1).ok()?))
    }
}
