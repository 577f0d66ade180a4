//! Line-oriented `key=value` run manifest.
//!
//! Every value needed to rerun a command is recorded here, including the
//! resolved seed and the contents of any built-in preset. No wall-clock data
//! is written, so two identical runs produce identical manifests.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("tool", env!("CARGO_PKG_NAME"));
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        // keep one record per line whatever the value contains
        let value = value.to_string().replace(['\n', '\r'], " ");
        self.entries.push((key.into(), value));
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.txt");
        fs::write(&path, self.render()).map_err(CliError::io(path))
    }
}
