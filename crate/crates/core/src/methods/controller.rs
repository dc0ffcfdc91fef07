use std::collections::BTreeMap;

use crate::system::{Oid, SystemState, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ControllerError {
    #[error("double-delivery on pin `{0}`")]
    DoubleDelivery(String),
    #[error("`{0}` is not an input pin of the node")]
    UnknownPin(String),
}

/// Collects the arguments of one call. Each input pin is set at most once;
/// the delivery that sets the last pin fires and hands back the arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PinController {
    pins: Vec<String>,
    stash: BTreeMap<String, Value>,
}

impl PinController {
    pub fn new<S: Into<String>>(pins: impl IntoIterator<Item = S>) -> Self {
        PinController { pins: pins.into_iter().map(Into::into).collect(), stash: BTreeMap::new() }
    }

    pub fn pins(&self) -> &[String] {
        &self.pins
    }

    pub fn is_set(&self, pin: &str) -> bool {
        self.stash.contains_key(pin)
    }

    pub fn deliver(&mut self, pin: &str, value: Value) -> Result<Option<BTreeMap<String, Value>>, ControllerError> {
        if !self.pins.iter().any(|p| p == pin) {
            return Err(ControllerError::UnknownPin(pin.to_string()));
        }
        if self.stash.contains_key(pin) {
            return Err(ControllerError::DoubleDelivery(pin.to_string()));
        }
        self.stash.insert(pin.to_string(), value);
        if self.stash.len() == self.pins.len() {
            Ok(Some(std::mem::take(&mut self.stash)))
        } else {
            Ok(None)
        }
    }

    /// Reads the flags (`set:<pin>`) and stashed values (`val:<pin>`) of
    /// `oid`.
    pub fn load(s: &SystemState, oid: &Oid, pins: &[String]) -> Self {
        let mut c = PinController::new(pins.iter().cloned());
        for p in pins {
            if s.attr(oid, &set_var(p)) == Some(&Value::Bool(true)) {
                let v = s.attr(oid, &val_var(p)).cloned().unwrap_or(Value::Bool(true));
                c.stash.insert(p.clone(), v);
            }
        }
        c
    }

    /// Writes the controller back; unset pins leave no attributes.
    pub fn store(&self, s: &mut SystemState, oid: &Oid) {
        for p in &self.pins {
            match self.stash.get(p) {
                Some(v) => {
                    s.set_attr(oid, &set_var(p), Value::Bool(true));
                    s.set_attr(oid, &val_var(p), v.clone());
                }
                None => {
                    if let Some(attrs) = s.data.get_mut(oid) {
                        attrs.remove(&set_var(p));
                        attrs.remove(&val_var(p));
                    }
                }
            }
        }
        if s.data.get(oid).is_some_and(|a| a.is_empty()) {
            s.data.remove(oid);
        }
    }
}

fn set_var(pin: &str) -> String {
    format!("set:{pin}")
}

fn val_var(pin: &str) -> String {
    format!("val:{pin}")
}
