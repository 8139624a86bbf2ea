// SPDX-License-Identifier: Apache-2.0
//! Behavioral models of the error sources in a 3D-NAND string: drain-voltage
//! sensitivity of the string current (DIBL), capacitive coupling onto the bit
//! line, white noise and process variation.
//!
//! Layer `0` is the top of the string (next to the bit-select transistor),
//! layer `L - 1` the bottom (next to the source). A selected cell at layer `l`
//! sees `l` pass-state cells plus the bit-select transistor on its drain side
//! and the remaining pass cells plus the ground-select transistor on its source
//! side.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge, coulombs.
pub const ELECTRON_CHARGE: f64 = 1.602176634e-19;

const BISECTION_MAX_STEPS: usize = 200;
const BISECTION_TOL_A: f64 = 1e-18;

/// Current law of the selected cell as a function of its drain-source voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellLaw {
    /// `I = I_on (1 - exp(-V/V_sat)) (1 + clm V)`, zero for `V <= 0`.
    SoftSaturation { v_sat: f64, clm: f64 },
    /// `I = G V`; the state's `i_on` is ignored.
    Linear { conductance: f64 },
}

impl CellLaw {
    fn shape(&self, v: f64) -> f64 {
        match *self {
            CellLaw::SoftSaturation { v_sat, clm } => {
                if v <= 0.0 {
                    0.0
                } else if v_sat == 0.0 {
                    1.0 + clm * v
                } else {
                    (1.0 - (-v / v_sat).exp()) * (1.0 + clm * v)
                }
            }
            CellLaw::Linear { conductance } => conductance * v.max(0.0),
        }
    }

    fn slope(&self, v: f64) -> f64 {
        match *self {
            CellLaw::SoftSaturation { v_sat, clm } => {
                if v <= 0.0 {
                    0.0
                } else if v_sat == 0.0 {
                    clm
                } else {
                    let e = (-v / v_sat).exp();
                    e / v_sat * (1.0 + clm * v) + (1.0 - e) * clm
                }
            }
            CellLaw::Linear { conductance } => conductance,
        }
    }

    /// Bare cell current with no series resistance.
    pub fn current(&self, state: &CellState, v_ds: f64) -> f64 {
        match self {
            CellLaw::SoftSaturation { .. } => state.i_on * self.shape(v_ds),
            CellLaw::Linear { .. } => self.shape(v_ds),
        }
    }

    fn scale(&self, state: &CellState) -> f64 {
        match self {
            CellLaw::SoftSaturation { .. } => state.i_on,
            CellLaw::Linear { .. } => 1.0,
        }
    }
}

/// One programmed state of the selected cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    /// Saturated current with no source degeneration, amperes.
    pub i_on: f64,
    /// Gate overdrive, volts. A drop `I R_S` on the source side reduces the
    /// current by the factor `1 - I R_S / v_ov`; infinite means no degeneration.
    pub v_ov: f64,
}

/// Series electrical model of a single string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StringModel {
    pub layers: usize,
    pub law: CellLaw,
    pub states: Vec<CellState>,
    /// Resistance of one pass-state cell, ohms.
    pub r_pass: f64,
    /// Bit-select transistor on resistance, ohms.
    pub r_bsl: f64,
    /// Ground-select transistor on resistance, ohms.
    pub r_gsl: f64,
}

impl Default for StringModel {
    fn default() -> Self {
        StringModel {
            layers: 64,
            law: CellLaw::SoftSaturation {
                v_sat: 0.1,
                clm: 0.05,
            },
            states: vec![
                CellState {
                    i_on: 50e-9,
                    v_ov: 0.3,
                },
                CellState {
                    i_on: 100e-9,
                    v_ov: 0.4,
                },
                CellState {
                    i_on: 200e-9,
                    v_ov: 0.5,
                },
                CellState {
                    i_on: 300e-9,
                    v_ov: 0.6,
                },
            ],
            r_pass: 2e3,
            r_bsl: 5e3,
            r_gsl: 5e3,
        }
    }
}

/// Small-signal parameters of the selected cell at an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallSignal {
    pub g_m: f64,
    pub r_0: f64,
    pub r_d: f64,
    pub r_s: f64,
    pub current: f64,
}

impl StringModel {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::config("string must have at least one layer"));
        }
        if self.states.is_empty() {
            return Err(Error::config("string model needs at least one cell state"));
        }
        for (name, r) in [("r_pass", self.r_pass), ("r_bsl", self.r_bsl), ("r_gsl", self.r_gsl)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config(format!("{name} must be >= 0, got {r}")));
            }
        }
        match self.law {
            CellLaw::SoftSaturation { v_sat, clm } => {
                if !(v_sat >= 0.0 && clm >= 0.0) {
                    return Err(Error::config("cell law parameters must be >= 0"));
                }
            }
            CellLaw::Linear { conductance } => {
                if !(conductance > 0.0) {
                    return Err(Error::config("linear cell conductance must be > 0"));
                }
            }
        }
        for (k, s) in self.states.iter().enumerate() {
            if !(s.i_on > 0.0 && s.v_ov > 0.0) {
                return Err(Error::config(format!("cell state {k} needs i_on > 0 and v_ov > 0")));
            }
        }
        Ok(())
    }

    /// Drain-side and source-side series resistance seen by layer `layer`.
    pub fn series_resistance(&self, layer: usize) -> (f64, f64) {
        let r_d = layer as f64 * self.r_pass + self.r_bsl;
        let r_s = (self.layers - 1 - layer) as f64 * self.r_pass + self.r_gsl;
        (r_d, r_s)
    }

    fn check_index(&self, layer: usize, state: usize) -> Result<&CellState> {
        if layer >= self.layers {
            return Err(Error::domain(format!(
                "layer {layer} outside string of {} layers",
                self.layers
            )));
        }
        self.states.get(state).ok_or_else(|| {
            Error::domain(format!("state {state} outside {} cell states", self.states.len()))
        })
    }

    /// String current for bit-line voltage `v_d`.
    ///
    /// Solves `I = law(V_D - I (R_D + R_S)) * (1 - I R_S / v_ov)` by bisection.
    /// The right side is non-increasing in `I`, so the root is unique.
    pub fn string_current(&self, layer: usize, state: usize, v_d: f64) -> Result<f64> {
        let cell = self.check_index(layer, state)?;
        if !(v_d > 0.0) {
            return Err(Error::domain(format!("drain voltage must be > 0, got {v_d}")));
        }
        let (r_d, r_s) = self.series_resistance(layer);
        if r_d + r_s == 0.0 {
            return Ok(self.law.current(cell, v_d));
        }
        let scale = self.law.scale(cell);
        let rhs = |i: f64| {
            let degeneration = (1.0 - i * r_s / cell.v_ov).max(0.0);
            scale * self.law.shape(v_d - i * (r_d + r_s)) * degeneration
        };
        let (mut lo, mut hi) = (0.0, rhs(0.0));
        if hi == 0.0 {
            return Ok(0.0);
        }
        for _ in 0..BISECTION_MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= BISECTION_TOL_A || mid == lo || mid == hi {
                return Ok(mid);
            }
            if mid - rhs(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::Numerical(format!(
            "string current did not converge for layer {layer}, state {state}, V_D = {v_d}"
        )))
    }

    /// Small-signal parameters of the selected cell at drain voltage `v_d`.
    pub fn small_signal(&self, layer: usize, state: usize, v_d: f64) -> Result<SmallSignal> {
        let cell = *self.check_index(layer, state)?;
        let current = self.string_current(layer, state, v_d)?;
        let (r_d, r_s) = self.series_resistance(layer);
        let v_ds = v_d - current * (r_d + r_s);
        let scale = self.law.scale(&cell);
        let degeneration = (1.0 - current * r_s / cell.v_ov).max(0.0);
        let g_ds = scale * self.law.slope(v_ds) * degeneration;
        let g_m = scale * self.law.shape(v_ds) / cell.v_ov;
        Ok(SmallSignal {
            g_m,
            r_0: 1.0 / g_ds,
            r_d,
            r_s,
            current,
        })
    }
}

/// Relative current change between the two extreme bit-line voltages,
/// `1 - I(V_th) / I(V_th + dV_D)`.
pub fn dibl_error(sm: &StringModel, layer: usize, state: usize, v_th: f64, dv_d: f64) -> Result<f64> {
    if !(dv_d > 0.0) {
        return Err(Error::domain(format!("bit-line swing must be > 0, got {dv_d}")));
    }
    let hi = sm.string_current(layer, state, v_th + dv_d)?;
    if hi == 0.0 {
        return Err(Error::domain("string current is zero at the top of the swing"));
    }
    let lo = sm.string_current(layer, state, v_th)?;
    Ok(1.0 - lo / hi)
}

/// Transconductance of a string, `dI_D/dV_D = 1 / (R_D + R_0 + (1 + g_m R_0) R_S)`.
pub fn small_signal_gain(g_m: f64, r_0: f64, r_d: f64, r_s: f64) -> f64 {
    1.0 / (r_d + r_0 + (1.0 + g_m * r_0) * r_s)
}

/// Which part of the two-phase operation a coupling charge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingPhase {
    /// Rising and falling BSL edge with the target layer selected.
    Integrate,
    /// Single rising BSL edge with the top (sweep) layer selected.
    Sweep,
    /// Both phases; this is the per-input `Q_D` that sizes `alpha_cp`.
    Total,
}

/// Disturbance charge injected on the bit line by one input.
///
/// The gate-drain part cancels across the integrate phase's rising and
/// falling edges and appears once in the sweep phase. The drain-side part
/// grows linearly from `q_dd_top` at layer 0 to the value that makes the
/// bottom-layer, worst-state total equal `q_d_max`, and shrinks by up to
/// `state_spread` for lower-current states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingModel {
    pub layers: usize,
    pub states: usize,
    /// Gate-drain charge of one BSL edge, coulombs.
    pub q_gd: f64,
    /// Drain-side charge with the top layer selected, coulombs.
    pub q_dd_top: f64,
    /// Worst-case total charge per input, coulombs.
    pub q_d_max: f64,
    /// Fractional reduction of the drain-side charge for the lowest state.
    pub state_spread: f64,
    /// Relative standard deviation of per-string charge.
    pub sigma_q: f64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        CouplingModel {
            layers: 64,
            states: 4,
            q_gd: 1.0e-16,
            q_dd_top: 0.5e-16,
            q_d_max: 6e-16,
            state_spread: 0.02,
            sigma_q: 0.05,
        }
    }
}

impl CouplingModel {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.states == 0 {
            return Err(Error::config("coupling model needs layers >= 1 and states >= 1"));
        }
        if !(self.q_gd >= 0.0 && self.q_dd_top >= 0.0 && self.q_d_max > 0.0) {
            return Err(Error::config("coupling charges must be non-negative"));
        }
        if self.q_dd_bottom() < self.q_dd_top {
            return Err(Error::config(format!(
                "q_d_max = {:e} C too small for q_gd = {:e} C and q_dd_top = {:e} C",
                self.q_d_max, self.q_gd, self.q_dd_top
            )));
        }
        if !(0.0..1.0).contains(&self.state_spread) || !(self.sigma_q >= 0.0) {
            return Err(Error::config("state_spread must be in [0, 1) and sigma_q >= 0"));
        }
        Ok(())
    }

    pub fn q_dd_bottom(&self) -> f64 {
        self.q_d_max - self.q_gd - self.q_dd_top
    }

    fn state_factor(&self, state: usize) -> f64 {
        if self.states == 1 {
            return 1.0;
        }
        let below_top = (self.states - 1 - state.min(self.states - 1)) as f64;
        1.0 - self.state_spread * below_top / (self.states - 1) as f64
    }

    /// Drain-side charge for a selected cell at `layer` in `state`.
    pub fn q_dd(&self, layer: usize, state: usize) -> f64 {
        let depth = if self.layers == 1 {
            1.0
        } else {
            layer.min(self.layers - 1) as f64 / (self.layers - 1) as f64
        };
        let layer_charge = self.q_dd_top + (self.q_dd_bottom() - self.q_dd_top) * depth;
        layer_charge * self.state_factor(state)
    }

    /// Nominal charge (no variation) for one input.
    pub fn charge(&self, layer: usize, state: usize, phase: CouplingPhase) -> f64 {
        match phase {
            CouplingPhase::Integrate => self.q_dd(layer, state),
            CouplingPhase::Sweep => self.q_gd + self.q_dd(0, state),
            CouplingPhase::Total => {
                self.charge(layer, state, CouplingPhase::Integrate)
                    + self.charge(layer, state, CouplingPhase::Sweep)
            }
        }
    }

    /// One draw of the relative charge error, normal with `sigma_q` and
    /// truncated at three sigma. Draws nothing when `sigma_q` is zero.
    pub fn sample_epsilon<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        truncated_normal(rng, self.sigma_q)
    }

    /// Bit-line voltage disturbance `dV_cp = Q_D (1 + eps) / C_0`.
    pub fn coupling_disturbance<R: Rng + ?Sized>(
        &self,
        layer: usize,
        state: usize,
        phase: CouplingPhase,
        c0: f64,
        rng: &mut R,
    ) -> Result<f64> {
        if !(c0 > 0.0) {
            return Err(Error::domain(format!("load capacitance must be > 0, got {c0}")));
        }
        let eps = self.sample_epsilon(rng);
        Ok(self.charge(layer, state, phase) * (1.0 + eps) / c0)
    }
}

pub(crate) fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 3.0 {
            return sigma * z;
        }
    }
}

/// White-noise model of an `M x 1` dot product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseEstimate {
    /// Single-ended output noise as a fraction of the window; `6 sigma` is the
    /// differential three-sigma error.
    pub sigma: f64,
    /// Three-sigma error as a fraction of the window, `6 sqrt(2q / (M I_max T))`.
    pub e3sigma: f64,
    /// `I_max T / (2q)`.
    pub snr_cell: f64,
    /// `M * snr_cell`.
    pub snr_mx1: f64,
}

pub fn noise_sigma_duration(m: usize, i_max: f64, t: f64) -> Result<NoiseEstimate> {
    if m == 0 {
        return Err(Error::domain("dot product needs at least one input"));
    }
    let snr_cell = i_max * t / (2.0 * ELECTRON_CHARGE);
    let snr_mx1 = m as f64 * snr_cell;
    let e3sigma = 6.0 * (2.0 * ELECTRON_CHARGE / (m as f64 * i_max * t)).sqrt();
    Ok(NoiseEstimate {
        sigma: e3sigma / 6.0,
        e3sigma,
        snr_cell,
        snr_mx1,
    })
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Noise switch for a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub enabled: bool,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub const Q_E: f64 = ELECTRON_CHARGE;
}

/// Lognormal current multipliers with mean 1 and relative standard deviation
/// `sigma_i`.
pub fn sample_variation<R: Rng + ?Sized>(rng: &mut R, sigma_i: f64, count: usize) -> Result<Vec<f64>> {
    if !(sigma_i >= 0.0 && sigma_i.is_finite()) {
        return Err(Error::domain(format!("variation sigma must be >= 0, got {sigma_i}")));
    }
    if sigma_i == 0.0 {
        return Ok(vec![1.0; count]);
    }
    let s2 = (1.0 + sigma_i * sigma_i).ln();
    let s = s2.sqrt();
    Ok((0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (s * z - 0.5 * s2).exp()
        })
        .collect())
}

/// Device-level parameters consumed by the Monte-Carlo simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub string: StringModel,
    pub coupling: CouplingModel,
    /// Relative standard deviation of programmed cell currents.
    pub sigma_i: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            string: StringModel::default(),
            coupling: CouplingModel::default(),
            sigma_i: 0.03,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<()> {
        self.string.validate()?;
        self.coupling.validate()?;
        if self.coupling.layers != self.string.layers {
            return Err(Error::config(format!(
                "coupling model has {} layers but string model has {}",
                self.coupling.layers, self.string.layers
            )));
        }
        if !(self.sigma_i >= 0.0) {
            return Err(Error::config("sigma_i must be >= 0"));
        }
        Ok(())
    }

    /// Index of the cell state whose on-current is closest to `current`.
    pub fn nearest_state(&self, current: f64) -> usize {
        self.string
            .states
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.i_on - current)
                    .abs()
                    .total_cmp(&(b.1.i_on - current).abs())
            })
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}
