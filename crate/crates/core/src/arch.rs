// SPDX-License-Identifier: Apache-2.0
//! Structural model of the processor: a grid of `M x 2N` processing elements,
//! each a `K x 2K`-cell, `L`-layer NAND block with its own load capacitors and
//! word-line / bit-select level shifters, fed by `M K` input converters and
//! read by `N K` integrate-digitize units.
//!
//! One PE stores a `K x K` tile of signed weights per layer (two cells per
//! weight). A single VMM step drives at most `M K` inputs into `N K` outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vmm::VmmDesignPoint;

pub const T_LS_MIN: f64 = 20e-9;
pub const T_LS_MAX: f64 = 30e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Words per bus; also the PE tile edge.
    pub k: usize,
    /// PE rows.
    pub m: usize,
    /// Half the PE columns.
    pub n: usize,
    /// NAND layers per block.
    pub layers: usize,
    /// NAND blocks sharing one set of load capacitors.
    pub cap_sharing: usize,
    pub clock_hz: f64,
    pub input_bits: u32,
    pub tdc_bits: u32,
    /// Weight magnitude bits; a stored weight also carries a sign.
    pub weight_bits: u32,
    pub mm_bytes: usize,
    pub im_bytes: usize,
    /// Word-line layer-selection latency, seconds.
    pub t_ls: f64,
    pub dp: VmmDesignPoint,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            k: 64,
            m: 32,
            n: 8,
            layers: 64,
            cap_sharing: 1,
            clock_hz: 1e9,
            input_bits: 4,
            tdc_bits: 6,
            weight_bits: 4,
            mm_bytes: 1 << 20,
            im_bytes: 4 << 10,
            t_ls: 25e-9,
            dp: VmmDesignPoint::optimal(),
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k", self.k),
            ("m", self.m),
            ("n", self.n),
            ("layers", self.layers),
            ("cap_sharing", self.cap_sharing),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be >= 1")));
            }
        }
        // T_LS = 0 is accepted for latency what-ifs; otherwise it must sit in
        // the driver-sized window.
        if self.t_ls != 0.0 && !(T_LS_MIN..=T_LS_MAX).contains(&self.t_ls) {
            return Err(Error::config(format!(
                "t_ls must be 0 or within [20 ns, 30 ns], got {:e} s",
                self.t_ls
            )));
        }
        if self.tdc_bits < self.input_bits + 2 {
            return Err(Error::config(format!(
                "tdc_bits ({}) must be >= input_bits + 2 ({})",
                self.tdc_bits,
                self.input_bits + 2
            )));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::config("clock_hz must be > 0"));
        }
        self.dp.validate()
    }

    pub fn clock_period(&self) -> f64 {
        1.0 / self.clock_hz
    }
}

/// Processor built from a validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Processor {
    pub cfg: ArchConfig,
}

pub fn build_processor(cfg: ArchConfig) -> Result<Processor> {
    cfg.validate()?;
    Ok(Processor { cfg })
}

impl Processor {
    pub fn pe_rows(&self) -> usize {
        self.cfg.m
    }

    pub fn pe_cols(&self) -> usize {
        2 * self.cfg.n
    }

    pub fn pe_count(&self) -> usize {
        self.pe_rows() * self.pe_cols()
    }

    /// Largest one-step VMM: (inputs, signed outputs).
    pub fn max_vmm(&self) -> (usize, usize) {
        (self.cfg.m * self.cfg.k, self.cfg.n * self.cfg.k)
    }

    /// Largest one-step VMM in tiles: (row tiles, column tiles).
    pub fn max_piece_tiles(&self) -> (usize, usize) {
        (self.cfg.m, self.cfg.n)
    }

    /// Weight-tile grid of one memory layer: (row tiles, column tiles).
    pub fn layer_tiles(&self) -> (usize, usize) {
        (self.pe_rows(), self.pe_cols())
    }

    /// Addressable memory layers; shared-capacitor blocks stack behind each PE.
    pub fn mapping_layers(&self) -> usize {
        self.cfg.layers * self.cfg.cap_sharing
    }

    pub fn cells_per_block(&self) -> usize {
        self.cfg.k * 2 * self.cfg.k * self.cfg.layers
    }

    pub fn total_cells(&self) -> usize {
        self.pe_count() * self.cfg.cap_sharing * self.cells_per_block()
    }

    /// Signed weights stored at two cells each.
    pub fn weight_capacity(&self) -> usize {
        self.total_cells() / 2
    }

    /// Bytes of weight storage: magnitude bits plus a sign bit per weight.
    pub fn weight_storage_bytes(&self) -> f64 {
        self.weight_capacity() as f64 * f64::from(self.cfg.weight_bits + 1) / 8.0
    }
}

/// Core VMM step delay: two layer selections, integration and sweep windows.
pub fn step_latency(cfg: &ArchConfig) -> f64 {
    2.0 * cfg.t_ls + cfg.dp.t_int + cfg.dp.t_out()
}

/// Ops per second for a `rows x cols` signed VMM repeated back to back.
pub fn throughput(cfg: &ArchConfig, rows: usize, cols: usize) -> f64 {
    2.0 * rows as f64 * cols as f64 / step_latency(cfg)
}

/// Throughput with every output of the largest one-step VMM in use.
pub fn peak_throughput(cfg: &ArchConfig) -> f64 {
    throughput(cfg, cfg.m * cfg.k, cfg.n * cfg.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Enable,
    LoadSelect,
    Integrate,
    SweepSelect,
    Digitize,
    ActivateStore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub latency: f64,
}

/// One VMM step on one memory layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmmStepPlan {
    /// Enabled PEs as (row, column) grid coordinates.
    pub enabled_pes: Vec<(usize, usize)>,
    pub layer: usize,
    pub rows: usize,
    pub cols: usize,
    pub input_tiles: usize,
    pub output_tiles: usize,
    pub phases: [Phase; 6],
}

impl VmmStepPlan {
    pub fn latency(&self) -> f64 {
        self.phases.iter().map(|p| p.latency).sum()
    }
}

/// Plans a `rows x cols` step whose tiles start at PE `(0, 0)`.
pub fn plan_vmm_step(proc: &Processor, rows: usize, cols: usize, layer: usize) -> Result<VmmStepPlan> {
    plan_vmm_step_at(proc, rows, cols, layer, (0, 0))
}

/// Plans a `rows x cols` step whose top-left tile sits at PE `origin`.
/// Load, activation and store phases take one clock each here; the
/// schedule estimator replaces them with memory-traffic latencies.
pub fn plan_vmm_step_at(
    proc: &Processor,
    rows: usize,
    cols: usize,
    layer: usize,
    origin: (usize, usize),
) -> Result<VmmStepPlan> {
    let cfg = &proc.cfg;
    let (max_r, max_c) = proc.max_vmm();
    if rows == 0 || cols == 0 {
        return Err(Error::contract(format!("empty VMM request {rows}x{cols}")));
    }
    if rows > max_r || cols > max_c {
        return Err(Error::contract(format!(
            "VMM request {rows}x{cols} exceeds one-step maximum {max_r}x{max_c}; split it first"
        )));
    }
    if layer >= proc.mapping_layers() {
        return Err(Error::contract(format!(
            "layer {layer} outside {} memory layers",
            proc.mapping_layers()
        )));
    }
    let rt = rows.div_ceil(cfg.k);
    let ct = cols.div_ceil(cfg.k);
    if origin.0 + rt > proc.pe_rows() || origin.1 + ct > proc.pe_cols() {
        return Err(Error::contract(format!(
            "{rt}x{ct} tiles at {origin:?} leave the {}x{} PE grid",
            proc.pe_rows(),
            proc.pe_cols()
        )));
    }
    let enabled_pes = (0..rt)
        .flat_map(|r| (0..ct).map(move |c| (origin.0 + r, origin.1 + c)))
        .collect();
    let clk = cfg.clock_period();
    let phases = [
        Phase { kind: PhaseKind::Enable, latency: clk },
        Phase { kind: PhaseKind::LoadSelect, latency: cfg.t_ls.max(clk) },
        Phase { kind: PhaseKind::Integrate, latency: cfg.dp.t_int },
        Phase { kind: PhaseKind::SweepSelect, latency: cfg.t_ls },
        Phase { kind: PhaseKind::Digitize, latency: cfg.dp.t_out() },
        Phase { kind: PhaseKind::ActivateStore, latency: clk },
    ];
    Ok(VmmStepPlan {
        enabled_pes,
        layer,
        rows,
        cols,
        input_tiles: rt,
        output_tiles: ct,
        phases,
    })
}

/// Shares each capacitor set among `share` times as many NAND blocks.
pub fn cap_sharing_transform(cfg: &ArchConfig, share: usize) -> Result<ArchConfig> {
    if share == 0 {
        return Err(Error::config("share must be >= 1"));
    }
    Ok(ArchConfig {
        cap_sharing: cfg.cap_sharing * share,
        ..*cfg
    })
}

/// Hardware blocks priced by the cost catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Dtc,
    Tdc,
    Nb,
    Wl,
    Bsl,
    Cap,
    Fm,
    Buffer,
    Bus,
    Mm,
    Im,
    Aux,
    Controller,
    CapShare,
}

impl Component {
    pub const ALL: [Component; 14] = [
        Component::Dtc,
        Component::Tdc,
        Component::Nb,
        Component::Wl,
        Component::Bsl,
        Component::Cap,
        Component::Fm,
        Component::Buffer,
        Component::Bus,
        Component::Mm,
        Component::Im,
        Component::Aux,
        Component::Controller,
        Component::CapShare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Dtc => "dtc",
            Component::Tdc => "tdc",
            Component::Nb => "nb",
            Component::Wl => "wl",
            Component::Bsl => "bsl",
            Component::Cap => "cap",
            Component::Fm => "fm",
            Component::Buffer => "buffer",
            Component::Bus => "bus",
            Component::Mm => "mm",
            Component::Im => "im",
            Component::Aux => "aux",
            Component::Controller => "controller",
            Component::CapShare => "cap_share",
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Price of one component. Units: J per event, um^2 per instance, s per
/// event, W static.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostEntry {
    pub energy_j: f64,
    pub area_um2: f64,
    pub latency_s: f64,
    pub static_w: f64,
}

/// Per-component energy, area and latency constants.
///
/// Events and instances per component:
///
/// | component    | energy event                  | area instance                 | latency              |
/// |--------------|-------------------------------|-------------------------------|----------------------|
/// | `dtc`        | input converted               | input line                    |                      |
/// | `tdc`        | output digitized              | output                        |                      |
/// | `nb`         | output fired                  | output                        |                      |
/// | `wl`         | cell on a selected plate      | cell per layer driver         |                      |
/// | `bsl`        | cell driven by an input       | input line per PE             |                      |
/// | `cap`        | fF charged                    | fF                            |                      |
/// | `fm`         | cell integrating              | string                        |                      |
/// | `buffer`     | word written or read          | buffer word                   |                      |
/// | `bus`        | word transferred              | (none)                        |                      |
/// | `mm`         | word accessed                 | byte                          | per K-word access    |
/// | `im`         | instruction fetched           | byte                          |                      |
/// | `aux`        | element operation             | unit                          | per K-wide operation |
/// | `controller` | step issued                   | unit                          | per step issued      |
/// | `cap_share`  | PE step through shared caps   | block mux per PE              | per step             |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCatalog {
    #[serde(default)]
    pub label: String,
    pub entries: BTreeMap<Component, CostEntry>,
}

impl CostCatalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let cat: CostCatalog = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("cost catalog: {e}")))?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn validate(&self) -> Result<()> {
        let missing: Vec<&str> = Component::ALL
            .iter()
            .filter(|c| !self.entries.contains_key(c))
            .map(|c| c.name())
            .collect();
        if !missing.is_empty() {
            return Err(Error::config(format!(
                "cost catalog lacks entries: {}",
                missing.join(", ")
            )));
        }
        for (c, e) in &self.entries {
            for (field, v) in [
                ("energy_j", e.energy_j),
                ("area_um2", e.area_um2),
                ("latency_s", e.latency_s),
                ("static_w", e.static_w),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(format!("{c}.{field} must be finite and >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, c: Component) -> Result<&CostEntry> {
        self.entries
            .get(&c)
            .ok_or_else(|| Error::config(format!("cost catalog lacks entry {c}")))
    }

    /// Copy with every energy multiplied by `factor`.
    pub fn scale_energy(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in out.entries.values_mut() {
            e.energy_j *= factor;
        }
        out
    }
}

/// Event counts for one piece of work; energy is linear in these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EventCounts {
    pub inputs: f64,
    pub outputs: f64,
    pub wl_cells: f64,
    pub bsl_cells: f64,
    pub cap_ff: f64,
    pub fm_cells: f64,
    pub buffer_words: f64,
    pub bus_words: f64,
    pub mm_words: f64,
    pub im_fetches: f64,
    pub aux_ops: f64,
    pub steps: f64,
    pub shared_pe_steps: f64,
}

impl EventCounts {
    pub fn add(&mut self, o: &EventCounts) {
        self.inputs += o.inputs;
        self.outputs += o.outputs;
        self.wl_cells += o.wl_cells;
        self.bsl_cells += o.bsl_cells;
        self.cap_ff += o.cap_ff;
        self.fm_cells += o.fm_cells;
        self.buffer_words += o.buffer_words;
        self.bus_words += o.bus_words;
        self.mm_words += o.mm_words;
        self.im_fetches += o.im_fetches;
        self.aux_ops += o.aux_ops;
        self.steps += o.steps;
        self.shared_pe_steps += o.shared_pe_steps;
    }

    fn per_component(&self) -> [(Component, f64); 14] {
        [
            (Component::Dtc, self.inputs),
            (Component::Tdc, self.outputs),
            (Component::Nb, self.outputs),
            (Component::Wl, self.wl_cells),
            (Component::Bsl, self.bsl_cells),
            (Component::Cap, self.cap_ff),
            (Component::Fm, self.fm_cells),
            (Component::Buffer, self.buffer_words),
            (Component::Bus, self.bus_words),
            (Component::Mm, self.mm_words),
            (Component::Im, self.im_fetches),
            (Component::Aux, self.aux_ops),
            (Component::Controller, self.steps),
            (Component::CapShare, self.shared_pe_steps),
        ]
    }

    /// Dynamic energy per component, joules.
    pub fn energy(&self, cat: &CostCatalog) -> Result<BTreeMap<Component, f64>> {
        self.per_component()
            .into_iter()
            .map(|(c, n)| Ok((c, n * cat.get(c)?.energy_j)))
            .collect()
    }
}

/// Dynamic events of one VMM step on `rows x cols` signed weights using
/// `pes` enabled PEs.
pub fn vmm_step_events(cfg: &ArchConfig, rows: usize, cols: usize, pes: usize) -> EventCounts {
    let k = cfg.k as f64;
    let pes = pes as f64;
    let cells = pes * k * 2.0 * k;
    EventCounts {
        inputs: rows as f64,
        outputs: cols as f64,
        // Compute layer and sweep layer are selected once each.
        wl_cells: 2.0 * cells,
        bsl_cells: cells,
        // Each enabled bit line carries K C_0 of load capacitance.
        cap_ff: pes * 2.0 * k * k * cfg.dp.c0() * 1e15,
        fm_cells: cells,
        steps: 1.0,
        shared_pe_steps: if cfg.cap_sharing > 1 { pes } else { 0.0 },
        ..EventCounts::default()
    }
}

/// Silicon area per component, mm^2.
pub fn area_breakdown(proc: &Processor, cat: &CostCatalog) -> Result<BTreeMap<Component, f64>> {
    let cfg = &proc.cfg;
    let k = cfg.k as f64;
    let pes = proc.pe_count() as f64;
    let share = cfg.cap_sharing as f64;
    let blocks = pes * share;
    let (inputs, outputs) = proc.max_vmm();
    let um2 = |c: Component, n: f64| -> Result<(Component, f64)> { Ok((c, n * cat.get(c)?.area_um2 * 1e-6)) };
    let strings = k * 2.0 * k;
    [
        um2(Component::Dtc, inputs as f64),
        um2(Component::Tdc, outputs as f64),
        um2(Component::Nb, outputs as f64),
        um2(Component::Wl, blocks * strings * cfg.layers as f64),
        um2(Component::Bsl, blocks * k),
        um2(Component::Cap, pes * 2.0 * k * k * cfg.dp.c0() * 1e15),
        um2(Component::Fm, blocks * strings),
        um2(Component::Buffer, (inputs + outputs) as f64),
        um2(Component::Bus, 0.0),
        um2(Component::Mm, cfg.mm_bytes as f64),
        um2(Component::Im, cfg.im_bytes as f64),
        um2(Component::Aux, 1.0),
        um2(Component::Controller, 1.0),
        um2(Component::CapShare, if cfg.cap_sharing > 1 { blocks } else { 0.0 }),
    ]
    .into_iter()
    .collect()
}

/// Static power of the whole processor, watts.
pub fn static_power(cat: &CostCatalog) -> f64 {
    cat.entries.values().map(|e| e.static_w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-30)
    }

    #[test]
    fn default_capacities() {
        let p = build_processor(ArchConfig::default()).unwrap();
        assert_eq!(p.max_vmm(), (2048, 512));
        assert_eq!(p.weight_capacity(), 134_217_728);
        assert!(p.weight_capacity() >= 128 * 1_000_000);
        assert_eq!(p.weight_capacity(), 32 * 16 * 64 * 128 * 64 / 2);
    }

    #[test]
    fn unit_processor_holds_one_weight() {
        let cfg = ArchConfig {
            k: 1,
            m: 1,
            n: 1,
            layers: 1,
            ..ArchConfig::default()
        };
        // M x 2N PEs of K x 2K cells: two PEs, four cells, two weights; the
        // one-step VMM is a single weight.
        let p = build_processor(cfg).unwrap();
        assert_eq!(p.max_vmm(), (1, 1));
        assert_eq!(p.weight_capacity(), 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ArchConfig { k: 0, ..ArchConfig::default() },
            ArchConfig { t_ls: 31e-9, ..ArchConfig::default() },
            ArchConfig { t_ls: 10e-9, ..ArchConfig::default() },
            ArchConfig { tdc_bits: 5, ..ArchConfig::default() },
            ArchConfig { cap_sharing: 0, ..ArchConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(build_processor(cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn latency_examples() {
        let cfg = ArchConfig::default();
        assert!(close(step_latency(&cfg), 84e-9, 1e-12));
        let cfg = ArchConfig {
            t_ls: 20e-9,
            dp: VmmDesignPoint::new(8e-9, 100e-9).unwrap(),
            ..ArchConfig::default()
        };
        assert!(close(step_latency(&cfg), 62e-9, 1e-12));
        let cfg = ArchConfig { t_ls: 0.0, ..ArchConfig::default() };
        assert!(close(step_latency(&cfg), 16e-9 + 18e-9, 1e-12));
    }

    #[test]
    fn throughput_examples() {
        let cfg = ArchConfig { t_ls: 30e-9, ..ArchConfig::default() };
        let peak = peak_throughput(&cfg);
        assert!(close(peak, 2.0 * 2048.0 * 512.0 / 94e-9, 1e-12));
        assert!((peak / 1e12 - 22.3).abs() < 0.05);
        assert!(close(throughput(&cfg, 64, 64), 2.0 * 64.0 * 64.0 / 94e-9, 1e-12));
        assert_eq!(throughput(&cfg, 0, 0), 0.0);
    }

    #[test]
    fn throughput_monotonicity() {
        let base = ArchConfig::default();
        let slower = ArchConfig { t_ls: 28e-9, ..base };
        assert!(peak_throughput(&slower) < peak_throughput(&base));
        for bigger in [
            ArchConfig { m: 33, ..base },
            ArchConfig { n: 9, ..base },
            ArchConfig { k: 65, ..base },
        ] {
            assert!(peak_throughput(&bigger) > peak_throughput(&base));
        }
    }

    #[test]
    fn step_plans() {
        let p = build_processor(ArchConfig::default()).unwrap();
        let full = plan_vmm_step(&p, 2048, 512, 0).unwrap();
        assert_eq!(full.enabled_pes.len(), 32 * 8);
        let one = plan_vmm_step(&p, 1, 1, 3).unwrap();
        assert_eq!(one.enabled_pes, vec![(0, 0)]);
        let mid = plan_vmm_step(&p, 100, 100, 0).unwrap();
        assert_eq!((mid.input_tiles, mid.output_tiles), (2, 2));
        assert_eq!(mid.enabled_pes, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        for plan in [&full, &one, &mid] {
            assert!(plan.latency() >= step_latency(&p.cfg));
        }
        let kinds: Vec<PhaseKind> = full.phases.iter().map(|ph| ph.kind).collect();
        assert_eq!(
            kinds,
            [
                PhaseKind::Enable,
                PhaseKind::LoadSelect,
                PhaseKind::Integrate,
                PhaseKind::SweepSelect,
                PhaseKind::Digitize,
                PhaseKind::ActivateStore
            ]
        );
        assert!(matches!(plan_vmm_step(&p, 2049, 1, 0), Err(Error::Contract(_))));
        assert!(matches!(plan_vmm_step(&p, 1, 513, 0), Err(Error::Contract(_))));
        assert!(matches!(plan_vmm_step(&p, 1, 1, 64), Err(Error::Contract(_))));
        assert!(matches!(plan_vmm_step_at(&p, 64, 64, 0, (31, 16)), Err(Error::Contract(_))));
    }

    #[test]
    fn cap_sharing_scales_capacity() {
        let base = ArchConfig::default();
        assert_eq!(cap_sharing_transform(&base, 1).unwrap(), base);
        let cap = |c: &ArchConfig| build_processor(*c).unwrap().weight_capacity();
        assert_eq!(cap(&cap_sharing_transform(&base, 2).unwrap()), 2 * cap(&base));
        let shared = cap_sharing_transform(&base, 16).unwrap();
        assert_eq!(cap(&shared), 16 * cap(&base));
        let p = build_processor(shared).unwrap();
        assert_eq!(p.total_cells(), p.pe_count() * 16 * p.cells_per_block());
        assert!(cap_sharing_transform(&base, 0).is_err());
    }

    #[test]
    fn energy_is_linear_in_catalog() {
        let mut entries = BTreeMap::new();
        for (i, c) in Component::ALL.iter().enumerate() {
            entries.insert(
                *c,
                CostEntry {
                    energy_j: (i + 1) as f64 * 1e-15,
                    ..CostEntry::default()
                },
            );
        }
        let cat = CostCatalog { label: String::new(), entries };
        let ev = vmm_step_events(&ArchConfig::default(), 100, 100, 4);
        let e1: f64 = ev.energy(&cat).unwrap().values().sum();
        let e2: f64 = ev.energy(&cat.scale_energy(2.0)).unwrap().values().sum();
        assert_eq!(e2, 2.0 * e1);
    }

    #[test]
    fn catalog_requires_every_component() {
        let err = CostCatalog::from_json(r#"{"entries": {"dtc": {"energy_j": 1e-15}}}"#).unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("tdc") && msg.contains("cap_share")),
            e => panic!("{e}"),
        }
        let neg = r#"{"entries": {"dtc": {"energy_j": -1}}}"#;
        assert!(CostCatalog::from_json(neg).is_err());
    }
}
