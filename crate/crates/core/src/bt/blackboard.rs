use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BtError;

/// A typed blackboard entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum BoardValue {
    Bool(bool),
    Number(f64),
    Vector(Vec<f64>),
    ObjectRef(String),
    ObjectRefs(Vec<String>),
    Text(String),
}

impl BoardValue {
    fn type_name(&self) -> &'static str {
        match self {
            BoardValue::Bool(_) => "bool",
            BoardValue::Number(_) => "number",
            BoardValue::Vector(_) => "vector",
            BoardValue::ObjectRef(_) => "object_ref",
            BoardValue::ObjectRefs(_) => "object_refs",
            BoardValue::Text(_) => "text",
        }
    }
}

/// Shared key/value store read by conditions and written by actions, plus the
/// chooser flag array (one flag per registered base skill).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Blackboard {
    entries: BTreeMap<String, BoardValue>,
    chooser_flags: Vec<bool>,
}

macro_rules! typed_getter {
    ($name:ident, $variant:ident, $ret:ty, $expected:literal) => {
        pub fn $name(&self, key: &str) -> Result<$ret, BtError> {
            match self.get(key)? {
                BoardValue::$variant(v) => Ok(v.clone()),
                other => Err(BtError::TypeMismatch {
                    key: key.to_owned(),
                    expected: $expected,
                    found: other.type_name(),
                }),
            }
        }
    };
}

impl Blackboard {
    pub fn new(flag_count: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            chooser_flags: vec![false; flag_count],
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: BoardValue) {
        self.entries.insert(key.into(), value);
    }

    pub fn remove(&mut self, key: &str) -> Option<BoardValue> {
        self.entries.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Missing keys are an error, never an implicit default.
    pub fn get(&self, key: &str) -> Result<&BoardValue, BtError> {
        self.entries
            .get(key)
            .ok_or_else(|| BtError::MissingKey(key.to_owned()))
    }

    typed_getter!(get_bool, Bool, bool, "bool");
    typed_getter!(get_number, Number, f64, "number");
    typed_getter!(get_vector, Vector, Vec<f64>, "vector");
    typed_getter!(get_object_ref, ObjectRef, String, "object_ref");
    typed_getter!(get_object_refs, ObjectRefs, Vec<String>, "object_refs");
    typed_getter!(get_text, Text, String, "text");

    pub fn entries(&self) -> impl Iterator<Item = (&str, &BoardValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn chooser_flags(&self) -> &[bool] {
        &self.chooser_flags
    }

    /// Sets flag `index` and clears every other flag.
    pub fn raise_flag(&mut self, index: usize) -> Result<(), BtError> {
        let len = self.chooser_flags.len();
        if index >= len {
            return Err(BtError::FlagIndex { index, len });
        }
        for (i, flag) in self.chooser_flags.iter_mut().enumerate() {
            *flag = i == index;
        }
        Ok(())
    }

    pub fn clear_flag(&mut self, index: usize) -> Result<(), BtError> {
        let len = self.chooser_flags.len();
        match self.chooser_flags.get_mut(index) {
            Some(flag) => {
                *flag = false;
                Ok(())
            }
            None => Err(BtError::FlagIndex { index, len }),
        }
    }

    pub fn clear_chooser_flags(&mut self) {
        self.chooser_flags.iter_mut().for_each(|f| *f = false);
    }

    /// Overwrites the flag array wholesale; the length must not change.
    pub fn set_chooser_flags(&mut self, flags: &[bool]) -> Result<(), BtError> {
        if flags.len() != self.chooser_flags.len() {
            return Err(BtError::Structural(format!(
                "flag array length {} does not match {} registered skills",
                flags.len(),
                self.chooser_flags.len()
            )));
        }
        self.chooser_flags.copy_from_slice(flags);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_key_is_an_error() {
        let board = Blackboard::new(3);
        assert_eq!(
            board.get("nope"),
            Err(BtError::MissingKey("nope".to_owned()))
        );
    }

    #[test]
    fn typed_read_reports_mismatch() {
        let mut board = Blackboard::new(1);
        board.set("x", BoardValue::Number(1.0));
        assert!(matches!(
            board.get_bool("x"),
            Err(BtError::TypeMismatch { expected: "bool", found: "number", .. })
        ));
        assert_eq!(board.get_number("x"), Ok(1.0));
    }

    #[test]
    fn raise_flag_is_exclusive() {
        let mut board = Blackboard::new(3);
        board.raise_flag(0).unwrap();
        board.raise_flag(2).unwrap();
        assert_eq!(board.chooser_flags(), &[false, false, true]);
        assert!(board.raise_flag(3).is_err());
        board.clear_chooser_flags();
        assert_eq!(board.chooser_flags(), &[false; 3]);
    }

    #[test]
    fn flag_array_length_is_fixed() {
        let mut board = Blackboard::new(2);
        assert!(board.set_chooser_flags(&[true, false, false]).is_err());
        board.set_chooser_flags(&[false, true]).unwrap();
        assert_eq!(board.chooser_flags(), &[false, true]);
    }
}
