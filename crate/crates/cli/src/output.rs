// SPDX-License-Identifier: Apache-2.0
//! Output files. Each one carries the tool version, the resolved config and
//! the seed, and is written to a temporary file then renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

pub const TOOL: &str = "nandvmm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    result: &'a T,
}

pub struct Writer<'a> {
    pub dir: PathBuf,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &Path, command: &'a str, config: &'a RunConfig) -> nandvmm::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_owned(),
            command,
            config,
            written: Vec::new(),
        })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> nandvmm::Result<()> {
        let env = Envelope {
            tool: TOOL,
            version: VERSION,
            command: self.command,
            seed: self.config.seed,
            config: self.config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write(&format!("{name}.json"), text.as_bytes())
    }

    /// A CSV table preceded by `#` lines holding the version, seed and config.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> nandvmm::Result<()> {
        let mut out = format!(
            "# tool={TOOL} version={VERSION} command={} seed={}\n# config={}\n",
            self.command,
            self.config.seed,
            serde_json::to_string(self.config)?
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header).map_err(csv_err)?;
            for r in rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush()?;
        }
        self.write(&format!("{name}.csv"), &out)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> nandvmm::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut tmp = tempfile::NamedTempFile::new_in(path.parent().unwrap_or(&self.dir))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        self.written.push(path);
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> nandvmm::Error {
    nandvmm::Error::Io(std::io::Error::other(e))
}

/// Shortest round-trip representation, so CSV and JSON agree digit for digit.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
