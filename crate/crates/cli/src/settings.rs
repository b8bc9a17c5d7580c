//! Run configuration assembled from a TOML file, flags and JSON fragments.
//! Every source funnels through [`Settings::apply`], so a key means the same
//! thing wherever it comes from.

use std::path::PathBuf;

use panel_outliers::{Format, RunConfig};

use crate::Failure;

#[derive(Debug, Clone, Default)]
pub struct Output {
    /// `None` lets each subcommand pick its natural format.
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub run: RunConfig,
    pub output: Output,
}

impl Settings {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        match key {
            "format" => self.output.format = Some(value.parse()?),
            "out" => self.output.out = Some(PathBuf::from(value)),
            "plot_dir" => self.output.plot_dir = Some(PathBuf::from(value)),
            _ => self.run.set(key, value)?,
        }
        Ok(())
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<(), Failure> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Failure::config(format!("config file: {e}")))?;
        for (key, value) in &table {
            let text = toml_text(value)
                .ok_or_else(|| Failure::config(format!("config key `{key}`: unsupported value {value}")))?;
            self.apply(key, &text)?;
        }
        Ok(())
    }

    /// Applies a JSON object of settings, as sent to the explore API.
    pub fn apply_json(&mut self, fragment: &serde_json::Value) -> Result<(), Failure> {
        let obj = fragment
            .as_object()
            .ok_or_else(|| Failure::config("request body must be a JSON object"))?;
        for (key, value) in obj {
            let text = json_text(value)
                .ok_or_else(|| Failure::config(format!("key `{key}`: unsupported value {value}")))?;
            self.apply(key, &text)?;
        }
        Ok(())
    }
}

fn toml_text(v: &toml::Value) -> Option<String> {
    Some(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items.iter().map(toml_text).collect::<Option<Vec<_>>>()?.join(","),
        _ => return None,
    })
}

fn json_text(v: &serde_json::Value) -> Option<String> {
    use serde_json::Value;
    Some(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items.iter().map(json_text).collect::<Option<Vec<_>>>()?.join(","),
        _ => return None,
    })
}
