//! Run-directory layout: `config.resolved`, `checkpoints/`, `reports/`,
//! `logs/`. Inputs are never written to; everything lands here.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Resolved;
use crate::error::CliError;

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, resolved: &Resolved) -> Result<Self, CliError> {
        for sub in ["checkpoints", "reports", "logs"] {
            fs::create_dir_all(root.join(sub))?;
        }
        resolved.write_resolved(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn log_line(&self, file: &str, line: &str) -> Result<(), CliError> {
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("logs").join(file))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}
