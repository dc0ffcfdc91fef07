use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::syntax::PinType;
use crate::system::Value;

/// Text used for the control token in JSON.
pub const CONTROL_TEXT: &str = "⊥";

/// A control token or a data token of a named type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Control,
    Data { ty: String, value: Value },
}

impl Token {
    pub fn data(ty: impl Into<String>, value: Value) -> Self {
        Token::Data { ty: ty.into(), value }
    }

    /// Membership in `elems(ty)`.
    pub fn inhabits(&self, ty: &PinType) -> bool {
        match (ty, self) {
            (PinType::Top, _) => true,
            (PinType::Control, Token::Control) => true,
            (PinType::Data(name), Token::Data { ty, .. }) => name == ty,
            _ => false,
        }
    }

    /// `⊥` for control, `{"type": T, "value": v}` for data.
    pub fn to_value(&self) -> Value {
        match self {
            Token::Control => Value::Str(CONTROL_TEXT.to_string()),
            Token::Data { ty, value } => Value::Record(BTreeMap::from([
                ("type".to_string(), Value::Str(ty.clone())),
                ("value".to_string(), value.clone()),
            ])),
        }
    }

    pub fn from_value(v: &Value) -> Option<Token> {
        match v {
            Value::Str(s) if s == CONTROL_TEXT => Some(Token::Control),
            Value::Record(r) if r.len() == 2 => match (r.get("type"), r.get("value")) {
                (Some(Value::Str(ty)), Some(value)) => Some(Token::data(ty.clone(), value.clone())),
                _ => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Control => f.write_str(CONTROL_TEXT),
            Token::Data { ty, value } => write!(f, "{ty}({value})"),
        }
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Token::from_value(&v).ok_or_else(|| serde::de::Error::custom(format!("not a token: {v}")))
    }
}
