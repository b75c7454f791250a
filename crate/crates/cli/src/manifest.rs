//! Run manifests: the fully resolved options of a command as `key = value`
//! lines, enough to replay it with `--manifest`.
//!
//! Keys are the command's long flag names. Boolean flags are stored as
//! `true`/`false`. Output locations are not recorded, so a manifest can be
//! replayed into a different directory.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("manifest line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("manifest has no `command` entry")]
    NoCommand,
    #[error("manifest line {line}: duplicate key {key}")]
    Duplicate { line: usize, key: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub command: String,
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# emberline run manifest\n");
        let _ = writeln!(s, "command = {}", self.command);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut command = None;
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ManifestError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ManifestError::Syntax { line: i + 1 });
            }
            if k == "command" {
                command = Some(v.to_string());
                continue;
            }
            if entries.iter().any(|(e, _)| e == k) {
                return Err(ManifestError::Duplicate {
                    line: i + 1,
                    key: k.to_string(),
                });
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self {
            command: command.ok_or(ManifestError::NoCommand)?,
            entries,
        })
    }

    /// Command-line arguments equivalent to this manifest, skipping any key in
    /// `except`.
    pub fn to_args(&self, except: &[String]) -> Vec<String> {
        let mut args = Vec::new();
        for (k, v) in &self.entries {
            if except.iter().any(|e| e == k) {
                continue;
            }
            match v.as_str() {
                "true" => args.push(format!("--{k}")),
                "false" => {}
                _ => {
                    args.push(format!("--{k}"));
                    args.push(v.clone());
                }
            }
        }
        args
    }
}
