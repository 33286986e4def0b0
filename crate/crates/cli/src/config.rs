//! `--config` support: a JSON object whose entries override flags.
//!
//! Top-level `seed` and `threads` set the global options. An object stored
//! under a subcommand's name applies to that subcommand only; any other
//! top-level key must name a field of the running subcommand.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const GLOBAL_KEYS: [&str; 2] = ["seed", "threads"];

pub fn read_config(path: &Path) -> CliResult<Map<String, Value>> {
    match pcx_core::io::read_json::<Value>(path)? {
        Value::Object(map) => Ok(map),
        _ => Err(CliError::input(format!("{}: config must be a JSON object", path.display()))),
    }
}

fn canonical(key: &str) -> String {
    key.replace('-', "_")
}

/// Returns `args` with the entries of `config` meant for `command` applied.
pub fn apply<T: Serialize + DeserializeOwned>(
    args: &T,
    command: &str,
    config: &Map<String, Value>,
    subcommands: &[&str],
) -> CliResult<T> {
    let mut value = serde_json::to_value(args).map_err(|e| CliError::input(e.to_string()))?;
    let fields = value
        .as_object_mut()
        .ok_or_else(|| CliError::input("arguments are not an object"))?;
    let mut set = |key: &str, v: &Value| -> CliResult<()> {
        let key = canonical(key);
        match fields.get_mut(&key) {
            Some(slot) => {
                *slot = v.clone();
                Ok(())
            }
            None => Err(CliError::input(format!("config key '{key}' is not an option of '{command}'"))),
        }
    };
    for (key, v) in config {
        if GLOBAL_KEYS.contains(&key.as_str()) || (subcommands.contains(&key.as_str()) && key != command) {
            continue;
        }
        if key == command {
            let section = v
                .as_object()
                .ok_or_else(|| CliError::input(format!("config section '{key}' must be an object")))?;
            for (k, sv) in section {
                set(k, sv)?;
            }
        } else {
            set(key, v)?;
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::input(format!("config for '{command}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Fit {
        k: usize,
        reg: f64,
        out: Option<String>,
    }

    fn cfg(text: &str) -> Map<String, Value> {
        serde_json::from_str(text).unwrap()
    }

    const SUBS: [&str; 2] = ["fit", "eval"];

    #[test]
    fn top_level_and_section_overrides() {
        let args = Fit { k: 8, reg: 1e-6, out: None };
        let got = apply(&args, "fit", &cfg(r#"{"seed": 3, "k": 2, "fit": {"out": "x"}, "eval": {"metric": "y"}}"#), &SUBS).unwrap();
        assert_eq!(got, Fit { k: 2, reg: 1e-6, out: Some("x".into()) });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let args = Fit { k: 8, reg: 1e-6, out: None };
        let err = apply(&args, "fit", &cfg(r#"{"kk": 2}"#), &SUBS).unwrap_err();
        assert!(err.to_string().contains("'kk'"));
        assert!(apply(&args, "fit", &cfg(r#"{"k": "two"}"#), &SUBS).is_err());
    }

    #[test]
    fn kebab_keys_match_fields() {
        #[derive(Debug, Serialize, Deserialize, PartialEq)]
        struct A {
            top_n: usize,
        }
        let got = apply(&A { top_n: 5 }, "validate", &cfg(r#"{"top-n": 3}"#), &SUBS).unwrap();
        assert_eq!(got.top_n, 3);
    }
}
