// SPDX-License-Identifier: Apache-2.0
//! Monte-Carlo simulation of the non-ideal differential VMM, and the
//! analytical error budget used for design-space exploration.
//!
//! The analytical budget adds the noise-free circuit error (a shipped
//! calibration table) to the three-sigma noise error of an `M x 1` dot product:
//! `E_final = E_nf + E_3sigma_cell / sqrt(M)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{self, CouplingPhase, DeviceConfig};
use crate::error::{Error, Result};
use crate::vmm::{self, PrecisionBits, PulseVector, SignedWeightPlane, VmmDesignPoint, WeightPlane};

/// Fraction of trials allowed to clip at `T_out` before the summary warns.
pub const OVERFLOW_WARN_RATE: f64 = 1e-3;

/// Two-sided tail probability outside three sigma of a normal distribution.
const THREE_SIGMA_COVERAGE: f64 = 0.997_300_203_936_739_8;

const HISTOGRAM_BINS: usize = 50;

/// Dot-product sizes of the design-space table.
pub const TABLE_SIZES: [usize; 3] = [10, 100, 1000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimFlags {
    pub enable_noise: bool,
    pub enable_coupling: bool,
    pub enable_dibl: bool,
    pub enable_variation: bool,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SimFlags {
    fn default() -> Self {
        SimFlags {
            enable_noise: true,
            enable_coupling: true,
            enable_dibl: true,
            enable_variation: true,
            trials: 1000,
            seed: 0,
        }
    }
}

impl SimFlags {
    pub fn ideal(trials: usize, seed: u64) -> Self {
        SimFlags {
            enable_noise: false,
            enable_coupling: false,
            enable_dibl: false,
            enable_variation: false,
            trials,
            seed,
        }
    }

    pub fn noise_only(trials: usize, seed: u64) -> Self {
        SimFlags {
            enable_noise: true,
            ..Self::ideal(trials, seed)
        }
    }

    fn any_random(&self) -> bool {
        self.enable_noise || self.enable_coupling || self.enable_variation
    }
}

/// One Monte-Carlo trial: both columns of every differential output pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub plus: PulseVector,
    pub minus: PulseVector,
    /// Signed output error `(dt_plus - dt_minus - ideal) / T_int` per output.
    pub errors: Vec<f64>,
    /// `E_c` of this trial.
    pub max_error: f64,
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub trials: usize,
    pub outputs: usize,
    /// Largest `E_c` over all trials.
    pub max_error: f64,
    pub mean_max_error: f64,
    /// Mean and standard deviation of the signed per-output error.
    pub error_mean: f64,
    pub error_std: f64,
    /// Three-sigma-equivalent error: the 99.73% quantile of the per-output
    /// absolute error.
    pub error_3sigma: f64,
    pub bits: PrecisionBits,
    /// Noise three-sigma error predicted for this size and design point.
    pub predicted_noise_3sigma: f64,
    pub overflow_rate: f64,
    pub overflow_warning: bool,
    pub max_error_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: Vec<Trial>,
    pub summary: SimSummary,
}

/// Per-trial seed derived from the run seed (splitmix64 finalizer).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic, trial-independent part of one column of the pair.
struct Side {
    plane: WeightPlane,
    states: Vec<usize>,
    dibl_scale: Vec<f64>,
    ideal: PulseVector,
}

impl Side {
    fn new(
        plane: WeightPlane,
        x: &[f64],
        dp: &VmmDesignPoint,
        flags: &SimFlags,
        dev: &DeviceConfig,
        dibl_table: &[f64],
    ) -> Result<Self> {
        let ideal = vmm::time_domain_vmm(&plane, x, dp)?;
        let states: Vec<usize> = plane
            .as_slice()
            .iter()
            .map(|w| dev.nearest_state(w * dp.i_max))
            .collect();
        // The bit line falls by y_j * dV_cmp during integration; on average a
        // cell sees half of that drop out of the full swing dV_D = alpha dV_cmp.
        let dibl_scale = if flags.enable_dibl {
            let y = vmm::decode_output(&ideal, dp.t_int)?;
            let alpha = dp.alpha_cp();
            let cols = plane.cols();
            states
                .iter()
                .enumerate()
                .map(|(k, &s)| 1.0 - dibl_table[s] * y[k % cols] / (2.0 * alpha))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Side {
            plane,
            states,
            dibl_scale,
            ideal,
        })
    }
}

/// Monte-Carlo simulation of a signed VMM on one memory layer.
///
/// Each trial integrates `sum_i I_ij (1 + var) dt_i` plus the coupling charge
/// of every active input on both columns of each pair, adds the sweep-phase
/// coupling of every input, converts with the `M I_max` sweep, clips to
/// `[0, T_out]` and adds one Gaussian noise sample per differential output.
/// With every flag off the result equals [`vmm::time_domain_vmm`] bit for bit.
pub fn simulate_vmm(
    ws: &SignedWeightPlane,
    x: &[f64],
    dp: &VmmDesignPoint,
    layer: usize,
    flags: &SimFlags,
    dev: &DeviceConfig,
) -> Result<SimResult> {
    dp.validate()?;
    dev.validate()?;
    if flags.trials == 0 {
        return Err(Error::config("trials must be >= 1"));
    }
    if layer >= dev.string.layers {
        return Err(Error::domain(format!(
            "layer {layer} outside string of {} layers",
            dev.string.layers
        )));
    }
    if x.len() != ws.rows() {
        return Err(Error::domain(format!(
            "input length {} does not match {} weight rows",
            x.len(),
            ws.rows()
        )));
    }

    let dibl_table: Vec<f64> = if flags.enable_dibl {
        (0..dev.string.states.len())
            .map(|s| device::dibl_error(&dev.string, layer, s, dp.v_th, dp.dv_d()))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let (plus, minus) = ws.decompose();
    let plus = Side::new(plus, x, dp, flags, dev, &dibl_table)?;
    let minus = Side::new(minus, x, dp, flags, dev, &dibl_table)?;
    let input = vmm::encode_input(x, dp.t_int)?;
    let m = ws.rows();
    let noise_std = if flags.enable_noise {
        // Differential output noise is twice the single-ended sigma.
        2.0 * device::noise_sigma_duration(m, dp.i_max, dp.t_int)?.sigma * dp.t_int
    } else {
        0.0
    };
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Numerical(e.to_string()))?;
    let t_out = dp.t_out();
    let ideal_diff: Vec<f64> = plus
        .ideal
        .durations
        .iter()
        .zip(&minus.ideal.durations)
        .map(|(a, b)| a - b)
        .collect();

    let run_trial = |t: usize| -> Result<Trial> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(flags.seed, t as u64));
        let mut durations = [Vec::new(), Vec::new()];
        for (slot, side) in [&plus, &minus].into_iter().enumerate() {
            let cells = side.plane.rows() * side.plane.cols();
            let variation = if flags.enable_variation {
                device::sample_variation(&mut rng, dev.sigma_i, cells)?
            } else {
                Vec::new()
            };
            let cols = side.plane.cols();
            let mut charges = vmm::column_charges(&side.plane, &input.durations, dp.i_max, |i, j| {
                let k = i * cols + j;
                let mut s = 1.0;
                if flags.enable_variation {
                    s *= variation[k];
                }
                if flags.enable_dibl {
                    s *= side.dibl_scale[k];
                }
                s
            });
            if flags.enable_coupling {
                let top_state = dev.string.states.len() - 1;
                let cm = &dev.coupling;
                for (j, q) in charges.iter_mut().enumerate() {
                    for (i, &dt) in input.durations.iter().enumerate() {
                        if dt > 0.0 {
                            let s = side.states[i * cols + j];
                            let nominal = cm.charge(layer, s, CouplingPhase::Integrate);
                            *q += nominal * (1.0 + cm.sample_epsilon(&mut rng));
                        }
                        let sweep = cm.charge(0, top_state, CouplingPhase::Sweep);
                        *q += sweep * (1.0 + cm.sample_epsilon(&mut rng));
                    }
                }
            }
            durations[slot] = charges
                .into_iter()
                .map(|q| vmm::sweep_duration(q, m, dp.i_max))
                .collect();
        }
        let [mut dp_plus, mut dp_minus] = durations;
        if flags.enable_noise {
            for (a, b) in dp_plus.iter_mut().zip(dp_minus.iter_mut()) {
                let n = noise.sample(&mut rng);
                *a += 0.5 * n;
                *b -= 0.5 * n;
            }
        }
        let mut overflow = false;
        for d in dp_plus.iter_mut().chain(dp_minus.iter_mut()) {
            if *d > t_out {
                overflow = true;
                *d = t_out;
            } else if *d < 0.0 {
                *d = 0.0;
            }
        }
        let errors: Vec<f64> = dp_plus
            .iter()
            .zip(&dp_minus)
            .zip(&ideal_diff)
            .map(|((a, b), ideal)| (a - b - ideal) / dp.t_int)
            .collect();
        let max_error = errors.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
        Ok(Trial {
            plus: PulseVector {
                durations: dp_plus,
                window: t_out,
            },
            minus: PulseVector {
                durations: dp_minus,
                window: t_out,
            },
            errors,
            max_error,
            overflow,
        })
    };

    let trials: Vec<Trial> = if flags.any_random() {
        (0..flags.trials)
            .into_par_iter()
            .map(run_trial)
            .collect::<Result<_>>()?
    } else {
        let first = run_trial(0)?;
        vec![first; flags.trials]
    };

    let predicted = device::noise_sigma_duration(m, dp.i_max, dp.t_int)?.e3sigma;
    let summary = summarize(&trials, predicted);
    Ok(SimResult { trials, summary })
}

fn summarize(trials: &[Trial], predicted_noise_3sigma: f64) -> SimSummary {
    let outputs = trials.first().map_or(0, |t| t.errors.len());
    let n = (trials.len() * outputs).max(1) as f64;
    let all = || trials.iter().flat_map(|t| t.errors.iter().copied());
    let error_mean = all().sum::<f64>() / n;
    let var = all().map(|e| (e - error_mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut abs: Vec<f64> = all().map(f64::abs).collect();
    abs.sort_by(f64::total_cmp);
    let error_3sigma = quantile_sorted(&abs, THREE_SIGMA_COVERAGE);
    let max_error = trials.iter().fold(0.0f64, |a, t| a.max(t.max_error));
    let mean_max_error = trials.iter().map(|t| t.max_error).sum::<f64>() / trials.len().max(1) as f64;
    let overflow_rate =
        trials.iter().filter(|t| t.overflow).count() as f64 / trials.len().max(1) as f64;
    SimSummary {
        trials: trials.len(),
        outputs,
        max_error,
        mean_max_error,
        error_mean,
        error_std: var.sqrt(),
        error_3sigma,
        bits: PrecisionBits::from_error(error_3sigma),
        predicted_noise_3sigma,
        overflow_rate,
        overflow_warning: overflow_rate > OVERFLOW_WARN_RATE,
        max_error_histogram: histogram(trials.iter().map(|t| t.max_error), max_error),
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn histogram(values: impl Iterator<Item = f64>, hi: f64) -> Histogram {
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    let width = if hi > 0.0 { hi / HISTOGRAM_BINS as f64 } else { 1.0 };
    for v in values {
        let b = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[b] += 1;
    }
    Histogram { lo: 0.0, hi, counts }
}

/// Noise-free compute error per design point, percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFreeErrorTable {
    #[serde(default)]
    pub description: String,
    pub entries: Vec<NoiseFreeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFreeEntry {
    pub t_int: f64,
    pub i_max: f64,
    pub e_nf_pct: f64,
}

const SHIPPED_NOISE_FREE: &str = include_str!("../data/noise_free_error.json");

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

impl NoiseFreeErrorTable {
    /// The nine-point table shipped with the crate.
    pub fn shipped() -> Self {
        serde_json::from_str(SHIPPED_NOISE_FREE).expect("shipped noise-free table parses")
    }

    pub fn lookup(&self, t_int: f64, i_max: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| same(e.t_int, t_int) && same(e.i_max, i_max))
            .map(|e| e.e_nf_pct)
    }

    /// Design points in table order.
    pub fn columns(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.t_int, e.i_max)).collect()
    }
}

/// `E_final = E_nf + E_3sigma_cell / sqrt(M)`, all in percent.
pub fn final_error(e_nf_pct: f64, m: usize, i_max: f64, t_int: f64) -> Result<f64> {
    if !(e_nf_pct >= 0.0) {
        return Err(Error::domain(format!("noise-free error must be >= 0, got {e_nf_pct}")));
    }
    Ok(e_nf_pct + 100.0 * device::noise_sigma_duration(m, i_max, t_int)?.e3sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeError {
    pub m: usize,
    pub e_final_pct: f64,
    pub bits: PrecisionBits,
}

/// One design point with its derived circuit parameters and error budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpaceRow {
    pub t_int: f64,
    pub i_max: f64,
    pub c0: f64,
    pub dv_cp_max: f64,
    pub alpha_cp: f64,
    pub t_out: f64,
    pub snr_cell_db: f64,
    pub e3sigma_cell_pct: f64,
    pub e_nf_pct: f64,
    pub sizes: Vec<SizeError>,
}

impl DesignSpaceRow {
    pub fn min_bits(&self) -> PrecisionBits {
        self.sizes
            .iter()
            .map(|s| s.bits)
            .min()
            .unwrap_or(PrecisionBits::Exact)
    }
}

/// Color name used for a bit count in the design-space table.
pub fn bit_color(bits: PrecisionBits) -> &'static str {
    match bits {
        PrecisionBits::Bits(2) => "orange",
        PrecisionBits::Bits(3) => "blue",
        PrecisionBits::Bits(4) => "green",
        PrecisionBits::Bits(5) => "yellow",
        _ => "none",
    }
}

pub fn explore_design_space(
    columns: &[(f64, f64)],
    table: &NoiseFreeErrorTable,
    m_list: &[usize],
) -> Result<Vec<DesignSpaceRow>> {
    columns
        .iter()
        .map(|&(t_int, i_max)| {
            let dp = VmmDesignPoint::new(t_int, i_max)?;
            let e_nf = table.lookup(t_int, i_max).ok_or_else(|| {
                Error::config(format!(
                    "no noise-free error for T_int = {t_int:e} s, I_max = {i_max:e} A"
                ))
            })?;
            let cell = device::noise_sigma_duration(1, i_max, t_int)?;
            let sizes = m_list
                .iter()
                .map(|&m| {
                    let e = final_error(e_nf, m, i_max, t_int)?;
                    Ok(SizeError {
                        m,
                        e_final_pct: e,
                        bits: PrecisionBits::from_error(e / 100.0),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(DesignSpaceRow {
                t_int,
                i_max,
                c0: dp.c0(),
                dv_cp_max: dp.dv_cp_max(),
                alpha_cp: dp.alpha_cp(),
                t_out: dp.t_out(),
                snr_cell_db: device::to_db(cell.snr_cell),
                e3sigma_cell_pct: 100.0 * cell.e3sigma,
                e_nf_pct: e_nf,
                sizes,
            })
        })
        .collect()
}

/// Cheapest design point (smallest `I_max * T_int`) reaching `bits` at every
/// explored size.
pub fn optimal_point(rows: &[DesignSpaceRow], bits: u32) -> Option<(f64, f64)> {
    rows.iter()
        .filter(|r| r.sizes.iter().all(|s| vmm::achieves_bits(s.e_final_pct / 100.0, bits)))
        .min_by(|a, b| (a.t_int * a.i_max).total_cmp(&(b.t_int * b.i_max)))
        .map(|r| (r.t_int, r.i_max))
}

/// Output bits against dot-product size for one design point.
pub fn precision_vs_size(
    t_int: f64,
    i_max: f64,
    e_nf_pct: f64,
    m_range: &[usize],
) -> Result<Vec<(usize, PrecisionBits)>> {
    if m_range.is_empty() {
        return Err(Error::domain("size range is empty"));
    }
    if m_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("size range must be strictly increasing"));
    }
    m_range
        .iter()
        .map(|&m| {
            let e = final_error(e_nf_pct, m, i_max, t_int)?;
            Ok((m, PrecisionBits::from_error(e / 100.0)))
        })
        .collect()
}

/// Uniform weights in `[-1, 1]` and inputs in `[0, 1]` from one seed.
pub fn random_instance(rows: usize, cols: usize, seed: u64) -> Result<(SignedWeightPlane, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..rows * cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let x = (0..rows).map(|_| rng.random()).collect();
    Ok((SignedWeightPlane::new(rows, cols, w)?, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_signed(rows: usize, cols: usize, seed: u64) -> (SignedWeightPlane, Vec<f64>) {
        random_instance(rows, cols, seed).unwrap()
    }

    #[test]
    fn flags_off_is_bit_exact_ideal() {
        let (ws, x) = random_signed(37, 5, 1);
        let dp = VmmDesignPoint::optimal();
        let res = simulate_vmm(&ws, &x, &dp, 63, &SimFlags::ideal(3, 9), &DeviceConfig::default()).unwrap();
        let (p, m) = ws.decompose();
        let ip = vmm::time_domain_vmm(&p, &x, &dp).unwrap();
        let im = vmm::time_domain_vmm(&m, &x, &dp).unwrap();
        for t in &res.trials {
            assert_eq!(t.plus.durations, ip.durations);
            assert_eq!(t.minus.durations, im.durations);
            assert!(t.errors.iter().all(|&e| e == 0.0));
        }
        assert_eq!(res.summary.max_error, 0.0);
        assert_eq!(res.summary.bits, PrecisionBits::Exact);
    }

    #[test]
    fn zero_sigma_variation_is_ideal() {
        let (ws, x) = random_signed(12, 4, 2);
        let dp = VmmDesignPoint::optimal();
        let dev = DeviceConfig {
            sigma_i: 0.0,
            ..DeviceConfig::default()
        };
        let flags = SimFlags {
            enable_variation: true,
            ..SimFlags::ideal(4, 3)
        };
        let res = simulate_vmm(&ws, &x, &dp, 0, &flags, &dev).unwrap();
        assert_eq!(res.summary.max_error, 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let (ws, x) = random_signed(20, 6, 4);
        let dp = VmmDesignPoint::optimal();
        let flags = SimFlags {
            trials: 64,
            seed: 42,
            ..SimFlags::default()
        };
        let a = simulate_vmm(&ws, &x, &dp, 40, &flags, &DeviceConfig::default()).unwrap();
        let b = simulate_vmm(&ws, &x, &dp, 40, &flags, &DeviceConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = simulate_vmm(&ws, &x, &dp, 40, &SimFlags { seed: 43, ..flags }, &DeviceConfig::default()).unwrap();
        assert_ne!(a.summary, c.summary);
    }

    #[test]
    fn coupling_cancels_in_the_mean() {
        let (ws, x) = random_signed(50, 4, 5);
        let dp = VmmDesignPoint::optimal();
        let flags = SimFlags {
            enable_coupling: true,
            ..SimFlags::ideal(400, 6)
        };
        let res = simulate_vmm(&ws, &x, &dp, 63, &flags, &DeviceConfig::default()).unwrap();
        // State-dependent charge leaves a small bias; variation leaves a spread.
        assert!(res.summary.error_mean.abs() < 5e-3, "{:?}", res.summary);
        assert!(res.summary.error_std > 0.0);
        assert!(!res.summary.overflow_warning);
    }

    #[test]
    fn simulate_rejects_bad_input() {
        let (ws, x) = random_signed(4, 2, 7);
        let dp = VmmDesignPoint::optimal();
        let dev = DeviceConfig::default();
        assert!(simulate_vmm(&ws, &x[..3], &dp, 0, &SimFlags::default(), &dev).is_err());
        assert!(simulate_vmm(&ws, &x, &dp, 64, &SimFlags::default(), &dev).is_err());
        assert!(simulate_vmm(&ws, &x, &dp, 0, &SimFlags { trials: 0, ..SimFlags::default() }, &dev).is_err());
    }

    #[test]
    fn overflow_is_reported_when_headroom_is_removed() {
        // All-ones weights and inputs saturate the window; without coupling
        // headroom every trial clips.
        let ws = SignedWeightPlane::new(10, 2, vec![1.0; 20]).unwrap();
        let x = vec![1.0; 10];
        let dp = VmmDesignPoint {
            q_d_max: 1e-20,
            ..VmmDesignPoint::optimal()
        };
        let dev = DeviceConfig::default();
        let flags = SimFlags {
            enable_coupling: true,
            ..SimFlags::ideal(20, 1)
        };
        let res = simulate_vmm(&ws, &x, &dp, 63, &flags, &dev).unwrap();
        assert!(res.summary.overflow_warning);
        assert_eq!(res.summary.overflow_rate, 1.0);
    }

    #[test]
    fn final_error_examples() {
        assert!((final_error(1.16, 10, 300e-9, 16e-9).unwrap() - 2.71).abs() < 0.01);
        assert!((final_error(6.24, 10, 100e-9, 8e-9).unwrap() - 10.03).abs() < 0.01);
        assert!((final_error(3.62, 1000, 100e-9, 32e-9).unwrap() - 3.81).abs() < 0.01);
        assert!(final_error(-1.0, 10, 1e-7, 1e-8).is_err());
    }

    #[test]
    fn single_size_one_is_nf_plus_cell_noise() {
        let table = NoiseFreeErrorTable::shipped();
        let rows = explore_design_space(&[(16e-9, 300e-9)], &table, &[1]).unwrap();
        let r = &rows[0];
        assert!((r.sizes[0].e_final_pct - (r.e_nf_pct + r.e3sigma_cell_pct)).abs() < 1e-12);
    }

    #[test]
    fn missing_column_is_config_error() {
        let table = NoiseFreeErrorTable::shipped();
        let err = explore_design_space(&[(10e-9, 300e-9)], &table, &[10]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn precision_curve_limits() {
        let curve = precision_vs_size(16e-9, 300e-9, 1.16, &[1, 10, 100, 1000, 1_000_000_000]).unwrap();
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        let limit = (-(1.16f64 / 100.0).log2() - 1.0).floor() as u32;
        assert_eq!(curve.last().unwrap().1, PrecisionBits::Bits(limit));
        assert!(precision_vs_size(16e-9, 300e-9, 1.16, &[]).is_err());
        assert!(precision_vs_size(16e-9, 300e-9, 1.16, &[10, 10]).is_err());
    }

    #[test]
    fn seeds_differ_per_trial() {
        assert_ne!(derive_seed(0, 0), derive_seed(0, 1));
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
    }
}
