//! Path-tracking access to parsed YAML values.

use serde_yaml::{Mapping, Value};

use super::FormatError;
use crate::geo::FRAME_NOTE;

pub(crate) fn load(text: &str) -> Result<Value, FormatError> {
    serde_yaml::from_str::<Value>(text).map_err(|e| {
        let at = match e.location() {
            Some(loc) => format!("line {}:{}", loc.line(), loc.column()),
            None => "document".to_string(),
        };
        FormatError::malformed(at, e.to_string())
    })
}

pub(crate) fn dump(value: &Value, title: &str) -> String {
    let body = serde_yaml::to_string(value).expect("yaml values always serialize");
    format!("# {title}\n# {FRAME_NOTE}\n{body}")
}

/// A borrowed value plus its path within the document.
pub(crate) struct At<'a> {
    pub value: &'a Value,
    pub path: String,
}

impl<'a> At<'a> {
    pub fn root(value: &'a Value) -> Self {
        At { value, path: String::new() }
    }

    pub fn path(&self) -> &str {
        if self.path.is_empty() {
            "document"
        } else {
            &self.path
        }
    }

    fn child_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.path, key)
        }
    }

    pub fn mapping(&self) -> Result<&'a Mapping, FormatError> {
        self.value
            .as_mapping()
            .ok_or_else(|| FormatError::malformed(self.path(), "expected a mapping"))
    }

    pub fn get(&self, key: &str) -> Result<Option<At<'a>>, FormatError> {
        let m = self.mapping()?;
        Ok(m.get(key).map(|v| At { value: v, path: self.child_path(key) }))
    }

    /// Like `get`, but a YAML null counts as absent.
    pub fn get_present(&self, key: &str) -> Result<Option<At<'a>>, FormatError> {
        Ok(self.get(key)?.filter(|a| !a.value.is_null()))
    }

    pub fn req(&self, key: &str) -> Result<At<'a>, FormatError> {
        self.get_present(key)?.ok_or_else(|| FormatError::missing(self.path(), key))
    }

    pub fn seq(&self) -> Result<Vec<At<'a>>, FormatError> {
        let s = self
            .value
            .as_sequence()
            .ok_or_else(|| FormatError::malformed(self.path(), "expected a list"))?;
        Ok(s.iter()
            .enumerate()
            .map(|(i, v)| At { value: v, path: format!("{}[{}]", self.path(), i) })
            .collect())
    }

    pub fn f64(&self) -> Result<f64, FormatError> {
        let v = match self.value {
            Value::Number(n) => n.as_f64(),
            _ => None,
        };
        v.filter(|f| f.is_finite())
            .ok_or_else(|| FormatError::malformed(self.path(), "expected a finite number"))
    }

    pub fn usize(&self) -> Result<usize, FormatError> {
        match self.value {
            Value::Number(n) => n.as_u64().map(|u| u as usize),
            _ => None,
        }
        .ok_or_else(|| FormatError::malformed(self.path(), "expected a non-negative integer"))
    }

    /// Any scalar rendered as text.
    pub fn text(&self) -> Result<String, FormatError> {
        scalar_text(self.value)
            .ok_or_else(|| FormatError::malformed(self.path(), "expected a scalar"))
    }

    /// Booleans, or the integers 0/1 used by ROS map files.
    pub fn flag(&self) -> Result<bool, FormatError> {
        match self.value {
            Value::Bool(b) => Ok(*b),
            Value::Number(n) if n.as_i64() == Some(0) => Ok(false),
            Value::Number(n) if n.as_i64() == Some(1) => Ok(true),
            _ => Err(FormatError::malformed(self.path(), "expected a boolean or 0/1")),
        }
    }

    /// Entries of the mapping whose keys are not listed in `known`.
    pub fn extras(&self, known: &[&str]) -> Result<Mapping, FormatError> {
        let m = self.mapping()?;
        Ok(m.iter()
            .filter(|(k, _)| !k.as_str().is_some_and(|k| known.contains(&k)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect())
    }
}

pub(crate) fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(if *b { "True" } else { "False" }.to_string()),
        Value::Null => Some(String::new()),
        _ => None,
    }
}

pub(crate) fn key(k: &str) -> Value {
    Value::String(k.to_string())
}

pub(crate) fn num(v: f64) -> Value {
    Value::Number(v.into())
}

pub(crate) fn string(s: &str) -> Value {
    Value::String(s.to_string())
}

/// Builds a mapping from key/value pairs, then appends `extras`.
pub(crate) fn mapping<const N: usize>(pairs: [(&str, Value); N], extras: &Mapping) -> Value {
    let mut m = Mapping::new();
    for (k, v) in pairs {
        m.insert(key(k), v);
    }
    for (k, v) in extras {
        m.insert(k.clone(), v.clone());
    }
    Value::Mapping(m)
}
