//! TOML config files: one optional section per subcommand, keys named
//! after the long flags. Flags always win over config values.
//!
//! ```toml
//! [generate-labels]
//! top-n = 20
//! min-support = 2
//!
//! [finetune]
//! epsilon = 0.01
//! threshold = "auto"
//! ```
//!
//! The whole file is validated eagerly — unknown sections or keys are
//! errors so typos cannot silently fall back to defaults.

use std::fmt;
use std::path::Path;

use crate::failure::Failure;

/// Keys accepted per section; paths stay on the command line so a config
/// file can be shared across runs on different inputs.
const SECTIONS: &[(&str, &[&str])] = &[
    (
        "generate-labels",
        &["top-n", "min-support", "cap", "format", "lowercase"],
    ),
    (
        "finetune",
        &[
            "lr",
            "epsilon",
            "preset",
            "stop-mode",
            "max-epochs",
            "threshold",
            "sample",
            "seed",
            "rank-cap",
            "update-rule",
            "order",
            "sweep",
            "format",
            "lowercase",
        ],
    ),
    ("evaluate", &["format", "lowercase"]),
    ("neighbors", &["k", "format", "lowercase"]),
    ("threshold", &["sample", "seed"]),
];

/// The config values for one subcommand (empty when no file was given or
/// the file has no section for it).
#[derive(Debug, Default)]
pub struct Section {
    table: Option<toml::Table>,
    source: String,
}

/// Loads and validates a config file, returning the section for `command`.
pub fn load(path: Option<&Path>, command: &str) -> Result<Section, Failure> {
    let Some(path) = path else {
        return Ok(Section::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    for (section, value) in &table {
        let Some((_, keys)) = SECTIONS.iter().find(|(name, _)| name == section) else {
            return Err(Failure::Input(format!(
                "{}: unknown section `{section}`",
                path.display()
            )));
        };
        let toml::Value::Table(body) = value else {
            return Err(Failure::Input(format!(
                "{}: section `{section}` must be a table",
                path.display()
            )));
        };
        for key in body.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(Failure::Input(format!(
                    "{}: unknown key `{key}` in section `{section}`",
                    path.display()
                )));
            }
        }
    }
    let section = table.get(command).and_then(|v| v.as_table()).cloned();
    Ok(Section {
        table: section,
        source: path.display().to_string(),
    })
}

impl Section {
    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.table.as_ref().and_then(|t| t.get(key))
    }

    fn type_error(&self, key: &str, expected: &str, got: impl fmt::Debug) -> Failure {
        Failure::Input(format!(
            "{}: key `{key}` expects {expected}, got {got:?}",
            self.source
        ))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(self.type_error(key, "a number", other)),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(self.type_error(key, "a non-negative integer", other)),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(self.type_error(key, "a non-negative integer", other)),
        }
    }

    pub fn u32(&self, key: &str) -> Result<Option<u32>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 && *i <= u32::MAX as i64 => {
                Ok(Some(*i as u32))
            }
            Some(other) => Err(self.type_error(key, "a non-negative integer", other)),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(self.type_error(key, "a boolean", other)),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(self.type_error(key, "a string", other)),
        }
    }

    /// `threshold` accepts either the string "auto" or a number; returns
    /// the raw text for the shared parser in commands.
    pub fn threshold_text(&self) -> Result<Option<String>, Failure> {
        match self.get("threshold") {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(toml::Value::Float(f)) => Ok(Some(f.to_string())),
            Some(toml::Value::Integer(i)) => Ok(Some(i.to_string())),
            Some(other) => Err(self.type_error("threshold", "\"auto\" or a number", other)),
        }
    }
}
