//! Run configuration: flags override the config file, which overrides
//! defaults. A resolved configuration is itself a valid config file.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Top level of a config file. Each subcommand reads its own section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_approx: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sanov: Option<Value>,
}

impl RunConfig {
    pub fn section(&self, command: &str) -> Option<&Value> {
        match command {
            "entropy_approx" => self.entropy_approx.as_ref(),
            "project" => self.project.as_ref(),
            "fit" => self.fit.as_ref(),
            "diagnose" => self.diagnose.as_ref(),
            "sanov" => self.sanov.as_ref(),
            _ => None,
        }
    }

    pub fn set_section(&mut self, command: &str, value: Value) {
        let slot = match command {
            "entropy_approx" => &mut self.entropy_approx,
            "project" => &mut self.project,
            "fit" => &mut self.fit,
            "diagnose" => &mut self.diagnose,
            "sanov" => &mut self.sanov,
            _ => return,
        };
        *slot = Some(value);
    }
}

/// Non-null fields of `flags` replace those of `file`.
pub fn overlay<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: Option<&Value>,
) -> Result<T, CliError> {
    let mut merged: Map<String, Value> = match file {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::input("config section must be a JSON object")),
    };
    if let Value::Object(f) = serde_json::to_value(flags).expect("arguments serialize") {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::input(format!("config: {e}")))
}
