// SPDX-License-Identifier: Apache-2.0
//! Run configuration: defaults, then a JSON file, then command-line flags.

use std::path::Path;

use nandvmm::arch::ArchConfig;
use nandvmm::device::DeviceConfig;
use nandvmm::mapper::{PackOptions, ReshapeMode};
use nandvmm::mc::{NoiseFreeErrorTable, SimFlags, TABLE_SIZES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    /// `(T_int, I_max)` pairs in seconds and amperes.
    pub columns: Vec<(f64, f64)>,
    pub sizes: Vec<usize>,
    /// Required precision for the optimal-point query.
    pub target_bits: u32,
    /// Inline noise-free error table; the shipped one when absent.
    pub noise_free: Option<NoiseFreeErrorTable>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            columns: NoiseFreeErrorTable::shipped().columns(),
            sizes: TABLE_SIZES.to_vec(),
            target_bits: 4,
            noise_free: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub rows: usize,
    pub cols: usize,
    pub t_int: f64,
    pub i_max: f64,
    /// Word-line layer holding the weights; 0 is the top layer.
    pub layer: usize,
    pub trials: usize,
    pub enable_noise: bool,
    pub enable_coupling: bool,
    pub enable_dibl: bool,
    pub enable_variation: bool,
    pub device: DeviceConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let dev = DeviceConfig::default();
        let f = SimFlags::default();
        SimulateConfig {
            rows: 100,
            cols: 8,
            t_int: 16e-9,
            i_max: 300e-9,
            layer: dev.string.layers - 1,
            trials: f.trials,
            enable_noise: f.enable_noise,
            enable_coupling: f.enable_coupling,
            enable_dibl: f.enable_dibl,
            enable_variation: f.enable_variation,
            device: dev,
        }
    }
}

impl SimulateConfig {
    pub fn flags(&self, seed: u64) -> SimFlags {
        SimFlags {
            enable_noise: self.enable_noise,
            enable_coupling: self.enable_coupling,
            enable_dibl: self.enable_dibl,
            enable_variation: self.enable_variation,
            trials: self.trials,
            seed,
        }
    }

    /// Applies a comma list of `noise`, `coupling`, `dibl`, `variation`,
    /// or one of `all` and `none`.
    pub fn set_flags(&mut self, list: &str) -> Result<(), String> {
        let (mut n, mut c, mut d, mut v) = (false, false, false, false);
        for f in list.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match f {
                "noise" => n = true,
                "coupling" => c = true,
                "dibl" => d = true,
                "variation" => v = true,
                "all" => (n, c, d, v) = (true, true, true, true),
                "none" => {}
                other => return Err(format!("unknown simulation flag {other:?}")),
            }
        }
        (self.enable_noise, self.enable_coupling, self.enable_dibl, self.enable_variation) = (n, c, d, v);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub explore: ExploreConfig,
    pub simulate: SimulateConfig,
    /// Shipped benchmark name or path to a graph JSON file.
    pub graph: String,
    pub arch: ArchConfig,
    pub pack: PackOptions,
    pub mode: ReshapeMode,
    /// Cost catalog path; the shipped calibrated catalog when absent.
    pub catalog: Option<String>,
    /// Reference rows compared against by `estimate` and `compare`.
    pub reference: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            format: Format::Json,
            explore: ExploreConfig::default(),
            simulate: SimulateConfig::default(),
            graph: "toy-chain".into(),
            arch: ArchConfig::default(),
            pack: PackOptions::default(),
            mode: ReshapeMode::RowFirst,
            catalog: None,
            reference: None,
        }
    }
}

impl RunConfig {
    /// Reads a config file. The output files of earlier runs are accepted too:
    /// their embedded `config` object is used.
    pub fn load(path: &Path) -> nandvmm::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let text = if path.extension().is_some_and(|e| e == "csv") {
            embedded_csv_config(&text)
                .ok_or_else(|| nandvmm::Error::Format(format!("{}: no embedded config", path.display())))?
        } else {
            text
        };
        let mut v: serde_json::Value = serde_json::from_str(&text)?;
        if v.get("tool").is_some() {
            if let Some(inner) = v.get_mut("config").map(serde_json::Value::take) {
                v = inner;
            }
        }
        serde_json::from_value(v).map_err(|e| nandvmm::Error::Format(format!("{}: {e}", path.display())))
    }
}

fn embedded_csv_config(text: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix("# config="))
        .map(str::to_owned)
}
