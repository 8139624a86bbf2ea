// SPDX-License-Identifier: Apache-2.0
//! Ideal time-domain vector-by-matrix multiplication.
//!
//! Inputs `x_i` and outputs `y_j` live on `[0, 1]` and are carried as pulse
//! durations inside a window `T`; weights are normalized cell currents
//! `w_ij = I_ij / I_max`. Phase I integrates `I_ij * dt_i` on each column's
//! load capacitor, phase II sweeps it with `M * I_max` until the neuron
//! threshold, so the output pulse is `(1 / (M I_max)) * sum_i I_ij dt_i`.
//!
//! The integration window and the output window coincide on the ideal path
//! (`T = T_int`). Signed weights use a pair of columns per output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative overshoot tolerated when decoding a pulse longer than its window.
pub const DECODE_OVERSHOOT_TOL: f64 = 1e-9;

/// Circuit parameters of one VMM design point and the quantities derived
/// from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmmDesignPoint {
    /// Input (integration) window, seconds.
    pub t_int: f64,
    /// Maximum cell current, amperes.
    pub i_max: f64,
    /// Computation voltage swing on the bit line, volts.
    #[serde(default = "default_dv_cmp")]
    pub dv_cmp: f64,
    /// Worst-case coupling charge injected by one input, coulombs.
    #[serde(default = "default_q_d_max")]
    pub q_d_max: f64,
    /// Neuron threshold voltage, volts.
    #[serde(default = "default_v_th")]
    pub v_th: f64,
}

fn default_dv_cmp() -> f64 {
    0.2
}
fn default_q_d_max() -> f64 {
    6e-16
}
fn default_v_th() -> f64 {
    0.6
}

impl VmmDesignPoint {
    /// Design point with the default voltages and coupling charge.
    pub fn new(t_int: f64, i_max: f64) -> Result<Self> {
        let dp = VmmDesignPoint {
            t_int,
            i_max,
            dv_cmp: default_dv_cmp(),
            q_d_max: default_q_d_max(),
            v_th: default_v_th(),
        };
        dp.validate()?;
        Ok(dp)
    }

    /// The 4-bit optimum: 16 ns integration window at 300 nA.
    pub fn optimal() -> Self {
        Self::new(16e-9, 300e-9).expect("constant design point is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t_int", self.t_int),
            ("i_max", self.i_max),
            ("dv_cmp", self.dv_cmp),
            ("q_d_max", self.q_d_max),
            ("v_th", self.v_th),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "design point field {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Load capacitance per input, `C_0 = I_max T_int / dV_cmp`.
    pub fn c0(&self) -> f64 {
        self.i_max * self.t_int / self.dv_cmp
    }

    /// Worst-case coupling disturbance on the bit line, `Q_D,max / C_0`.
    pub fn dv_cp_max(&self) -> f64 {
        self.q_d_max / self.c0()
    }

    /// Output window scale reserving headroom for coupling.
    pub fn alpha_cp(&self) -> f64 {
        1.0 + self.dv_cp_max() / self.dv_cmp
    }

    pub fn t_out(&self) -> f64 {
        self.alpha_cp() * self.t_int
    }

    /// Total bit-line swing including the coupling reserve.
    pub fn dv_d(&self) -> f64 {
        self.dv_cmp + self.dv_cp_max()
    }

    /// Column load capacitor for an `m`-input dot product, `m * I_max * T / V_th`.
    pub fn load_capacitance(&self, m: usize) -> f64 {
        m as f64 * self.i_max * self.t_int / self.v_th
    }
}

/// Non-negative weight matrix stored row-major: `rows` inputs by `cols` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPlane {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
}

impl WeightPlane {
    pub fn new(rows: usize, cols: usize, w: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, w.len())?;
        if let Some((k, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::domain(format!(
                "weight ({}, {}) = {v} outside [0, 1]",
                k / cols,
                k % cols
            )));
        }
        Ok(WeightPlane { rows, cols, w })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        WeightPlane {
            rows,
            cols,
            w: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// Signed weight matrix on `[-1, 1]`, realized as a differential column pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedWeightPlane {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
}

impl SignedWeightPlane {
    pub fn new(rows: usize, cols: usize, w: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, w.len())?;
        if let Some((k, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1.0..=1.0).contains(*v))
        {
            return Err(Error::domain(format!(
                "signed weight ({}, {}) = {v} outside [-1, 1]",
                k / cols,
                k % cols
            )));
        }
        Ok(SignedWeightPlane { rows, cols, w })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.cols + j]
    }

    /// Canonical split `w = w_plus - w_minus` with `w_plus = max(w, 0)` and
    /// `w_minus = max(-w, 0)`; at most one of each pair is nonzero.
    pub fn decompose(&self) -> (WeightPlane, WeightPlane) {
        let plus = self.w.iter().map(|&v| v.max(0.0)).collect();
        let minus = self.w.iter().map(|&v| (-v).max(0.0)).collect();
        (
            WeightPlane {
                rows: self.rows,
                cols: self.cols,
                w: plus,
            },
            WeightPlane {
                rows: self.rows,
                cols: self.cols,
                w: minus,
            },
        )
    }
}

impl From<WeightPlane> for SignedWeightPlane {
    fn from(p: WeightPlane) -> Self {
        SignedWeightPlane {
            rows: p.rows,
            cols: p.cols,
            w: p.w,
        }
    }
}

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::domain(format!(
            "weight plane must be non-empty, got {rows}x{cols}"
        )));
    }
    if rows * cols != len {
        return Err(Error::domain(format!(
            "weight plane declared {rows}x{cols} but holds {len} values"
        )));
    }
    Ok(())
}

/// Pulse durations sharing one encoding window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseVector {
    pub durations: Vec<f64>,
    pub window: f64,
}

impl PulseVector {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }
}

fn check_unit_inputs(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::domain(format!(
            "input x[{i}] = {} outside [0, 1]",
            x[i]
        ))),
        None => Ok(()),
    }
}

/// Time-encode an input vector: `dt_i = x_i * T_int`.
pub fn encode_input(x: &[f64], t_int: f64) -> Result<PulseVector> {
    if !(t_int.is_finite() && t_int > 0.0) {
        return Err(Error::domain(format!("window must be > 0, got {t_int}")));
    }
    check_unit_inputs(x)?;
    Ok(PulseVector {
        durations: x.iter().map(|v| v * t_int).collect(),
        window: t_int,
    })
}

/// Exact `y_j = (1/M) sum_i w_ij x_i`.
pub fn ideal_vmm(w: &WeightPlane, x: &[f64]) -> Result<Vec<f64>> {
    check_len(w.rows(), x.len())?;
    check_unit_inputs(x)?;
    let m = w.rows() as f64;
    let mut y = vec![0.0; w.cols()];
    for (i, &xi) in x.iter().enumerate() {
        let row = &w.as_slice()[i * w.cols()..(i + 1) * w.cols()];
        for (acc, &wij) in y.iter_mut().zip(row) {
            *acc += wij * xi;
        }
    }
    for v in &mut y {
        *v /= m;
    }
    Ok(y)
}

fn check_len(rows: usize, n: usize) -> Result<()> {
    if rows != n {
        return Err(Error::domain(format!(
            "input length {n} does not match {rows} weight rows"
        )));
    }
    Ok(())
}

/// Phase-I column charges `sum_i (w_ij I_max s_ij) dt_i`, where `scale`
/// supplies a per-cell current multiplier (`1.0` on the ideal path).
pub(crate) fn column_charges(
    w: &WeightPlane,
    durations: &[f64],
    i_max: f64,
    mut scale: impl FnMut(usize, usize) -> f64,
) -> Vec<f64> {
    let mut q = vec![0.0; w.cols()];
    for (i, &dt) in durations.iter().enumerate() {
        if dt == 0.0 {
            continue;
        }
        for (j, acc) in q.iter_mut().enumerate() {
            let current = w.get(i, j) * i_max * scale(i, j);
            *acc += current * dt;
        }
    }
    q
}

/// Phase II: an `M * I_max` sweep turns each column charge into a pulse.
#[inline]
pub(crate) fn sweep_duration(charge: f64, m: usize, i_max: f64) -> f64 {
    charge / (m as f64 * i_max)
}

/// Noiseless two-phase computation: `dt_j = (1/(M I_max)) sum_i I_ij dt_i`.
pub fn time_domain_vmm(w: &WeightPlane, x: &[f64], dp: &VmmDesignPoint) -> Result<PulseVector> {
    dp.validate()?;
    check_len(w.rows(), x.len())?;
    let input = encode_input(x, dp.t_int)?;
    let charges = column_charges(w, &input.durations, dp.i_max, |_, _| 1.0);
    Ok(PulseVector {
        durations: charges
            .into_iter()
            .map(|q| sweep_duration(q, w.rows(), dp.i_max))
            .collect(),
        window: dp.t_int,
    })
}

/// Differential-column VMM: signed weights, non-negative inputs.
pub fn signed_vmm(ws: &SignedWeightPlane, x: &[f64], dp: &VmmDesignPoint) -> Result<Vec<f64>> {
    let (plus, minus) = ws.decompose();
    let yp = decode_output(&time_domain_vmm(&plus, x, dp)?, dp.t_int)?;
    let ym = decode_output(&time_domain_vmm(&minus, x, dp)?, dp.t_int)?;
    Ok(yp.iter().zip(&ym).map(|(a, b)| a - b).collect())
}

/// `y_j = dt_j / T`. Overshoot up to [`DECODE_OVERSHOOT_TOL`] is clipped;
/// anything longer means the simulation overflowed its window.
pub fn decode_output(p: &PulseVector, t: f64) -> Result<Vec<f64>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("window must be > 0, got {t}")));
    }
    let limit = t * (1.0 + DECODE_OVERSHOOT_TOL);
    p.durations
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            if d > limit {
                Err(Error::Range(format!(
                    "output pulse {j} lasts {d:e} s, longer than window {t:e} s"
                )))
            } else if d < 0.0 {
                Err(Error::Range(format!("output pulse {j} has negative duration {d:e} s")))
            } else {
                Ok(d.min(t) / t)
            }
        })
        .collect()
}

/// Achievable output precision. Ordered so that `Exact` exceeds any bit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "bits")]
pub enum PrecisionBits {
    Bits(u32),
    /// Ideal and actual pulses agree exactly.
    Exact,
}

impl PrecisionBits {
    /// Bits for a normalized error: `floor(-log2(E) - 1)`, zero once `E >= 0.5`.
    pub fn from_error(e: f64) -> Self {
        if e == 0.0 {
            PrecisionBits::Exact
        } else if e >= 0.5 {
            PrecisionBits::Bits(0)
        } else {
            PrecisionBits::Bits((-e.log2() - 1.0).floor() as u32)
        }
    }

    /// Number of bits, treating `Exact` as unbounded.
    pub fn at_least(&self, p: u32) -> bool {
        match self {
            PrecisionBits::Exact => true,
            PrecisionBits::Bits(b) => *b >= p,
        }
    }
}

impl std::fmt::Display for PrecisionBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrecisionBits::Exact => write!(f, "exact"),
            PrecisionBits::Bits(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Precision {
    /// `E_c`, the worst pulse-duration error normalized by the window.
    pub error: f64,
    pub bits: PrecisionBits,
}

/// True when `p` bits are achievable at normalized error `e`, i.e. `e <= 2^-(p+1)`.
pub fn achieves_bits(e: f64, p: u32) -> bool {
    e <= (-(p as f64 + 1.0)).exp2()
}

pub fn compute_precision(ideal: &PulseVector, actual: &PulseVector, t: f64) -> Result<Precision> {
    if ideal.is_empty() || actual.is_empty() {
        return Err(Error::domain("precision of an empty pulse vector"));
    }
    if ideal.len() != actual.len() {
        return Err(Error::domain(format!(
            "pulse vectors differ in length: {} vs {}",
            ideal.len(),
            actual.len()
        )));
    }
    let worst = ideal
        .durations
        .iter()
        .zip(&actual.durations)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let error = worst / t;
    Ok(Precision {
        error,
        bits: PrecisionBits::from_error(error),
    })
}
