// SPDX-License-Identifier: Apache-2.0
//! Invariants over randomized inputs.

use nandvmm::arch::{build_processor, cap_sharing_transform, ArchConfig};
use nandvmm::device::{CouplingModel, CouplingPhase};
use nandvmm::mapper::{
    extract_weights, pack, place_weights, quantize_weight, reshape_with, KernelSpec, KernelTileSet, KernelValues,
    LayerGrid, PackOptions, ReshapeMode,
};
use nandvmm::mc::{self, NoiseFreeErrorTable, SimFlags};
use nandvmm::perf::{build_schedule, estimate};
use nandvmm::vmm::{self, SignedWeightPlane, VmmDesignPoint};
use nandvmm::{data, pipeline};
use proptest::prelude::*;

fn column() -> impl Strategy<Value = (f64, f64, f64)> {
    let cols = NoiseFreeErrorTable::shipped().entries;
    (0..cols.len()).prop_map(move |i| (cols[i].t_int, cols[i].i_max, cols[i].e_nf_pct))
}

fn kernels(max_dim: usize, grid: LayerGrid) -> impl Strategy<Value = Vec<KernelTileSet>> {
    prop::collection::vec((1..=max_dim, 1..=max_dim), 1..8).prop_map(move |dims| {
        dims.into_iter()
            .enumerate()
            .map(|(i, (r, c))| {
                reshape_with(KernelSpec::dense(format!("k{i}"), r, c), 1, grid.rows, grid.cols, ReshapeMode::RowFirst)
                    .unwrap()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_budget_improves_with_size((t, i, e_nf) in column(), m in 1usize..5000, dm in 1usize..5000) {
        let a = mc::final_error(e_nf, m, i, t).unwrap();
        let b = mc::final_error(e_nf, m + dm, i, t).unwrap();
        prop_assert!(b < a);
        prop_assert!(b > e_nf);
        prop_assert!(vmm::PrecisionBits::from_error(b / 100.0) >= vmm::PrecisionBits::from_error(a / 100.0));
    }

    #[test]
    fn encode_decode_round_trip(x in prop::collection::vec(0.0f64..=1.0, 1..64), t in 1e-9f64..1e-7) {
        let p = vmm::encode_input(&x, t).unwrap();
        let y = vmm::decode_output(&p, t).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn differential_vmm_is_signed_dot_product(m in 1usize..40, n in 1usize..10, seed in any::<u64>()) {
        let (ws, x) = mc::random_instance(m, n, seed).unwrap();
        let y = vmm::signed_vmm(&ws, &x, &VmmDesignPoint::optimal()).unwrap();
        for (j, yj) in y.iter().enumerate() {
            let want: f64 = (0..m).map(|i| ws.get(i, j) * x[i]).sum::<f64>() / m as f64;
            prop_assert!((yj - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn flags_off_simulation_is_exact(m in 1usize..30, n in 1usize..6, seed in any::<u64>()) {
        let (ws, x) = mc::random_instance(m, n, seed).unwrap();
        let r = mc::simulate_vmm(&ws, &x, &VmmDesignPoint::optimal(), 0, &SimFlags::ideal(3, seed), &Default::default())
            .unwrap();
        prop_assert_eq!(r.summary.max_error, 0.0);
    }

    #[test]
    fn coupling_grows_with_depth_and_is_bounded(layer in 0usize..63, state in 0usize..4) {
        let cm = CouplingModel::default();
        let here = cm.charge(layer, state, CouplingPhase::Total);
        let deeper = cm.charge(layer + 1, state, CouplingPhase::Total);
        prop_assert!(here <= deeper);
        prop_assert!(deeper <= cm.q_d_max);
    }

    #[test]
    fn quantization_error_is_half_a_step(w in -1.0f64..=1.0, bits in 1u32..8) {
        let q = quantize_weight(w, bits);
        let step = 0.5f64.powi(bits as i32);
        prop_assert!((q - w).abs() <= step / 2.0 + 1e-15);
        prop_assert_eq!((q / step).fract(), 0.0);
        prop_assert!(q.abs() <= 1.0);
    }

    #[test]
    fn packing_is_valid_and_bounded(
        sets in kernels(7, LayerGrid { rows: 4, cols: 4, layers: 64 }),
        seed in any::<u64>(),
    ) {
        let grid = LayerGrid { rows: 4, cols: 4, layers: 64 };
        let opts = PackOptions { iterations: 4, seed, prefer_colayer: true };
        let p = pack(&sets, &grid, &opts).unwrap();
        p.validate().unwrap();
        prop_assert!(p.layers_used >= grid.lower_bound(&sets));
        let tiles: usize = sets.iter().map(KernelTileSet::tiles).sum();
        prop_assert_eq!(p.fragmentation, p.layers_used * 16 - tiles);
        prop_assert_eq!(&p, &pack(&sets, &grid, &opts).unwrap());
    }

    #[test]
    fn weights_survive_placement(sets in kernels(9, LayerGrid { rows: 2, cols: 3, layers: 64 }), seed in any::<u64>()) {
        let grid = LayerGrid { rows: 2, cols: 3, layers: 64 };
        let p = pack(&sets, &grid, &PackOptions { iterations: 2, seed, prefer_colayer: true }).unwrap();
        let values: Vec<KernelValues> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (ws, _) = mc::random_instance(s.kernel.rows, s.kernel.cols, seed ^ i as u64).unwrap();
                let values = (0..s.kernel.rows * s.kernel.cols)
                    .map(|k| ws.get(k / s.kernel.cols, k % s.kernel.cols))
                    .collect();
                KernelValues { id: s.id().to_owned(), rows: s.kernel.rows, cols: s.kernel.cols, values }
            })
            .collect();
        let image = place_weights(&p, &sets, &values, 4).unwrap();
        for (s, v) in sets.iter().zip(&values) {
            let back = extract_weights(&image, &p, s).unwrap();
            for (a, b) in back.iter().zip(&v.values) {
                prop_assert_eq!(*a, quantize_weight(*b, 4));
            }
        }
    }

    #[test]
    fn capacity_scales_with_layers_and_sharing(layers in 1usize..128, share in 1usize..32) {
        let base = build_processor(ArchConfig { layers, ..ArchConfig::default() }).unwrap();
        let double = build_processor(ArchConfig { layers: 2 * layers, ..ArchConfig::default() }).unwrap();
        prop_assert_eq!(double.weight_capacity(), 2 * base.weight_capacity());
        let shared = build_processor(cap_sharing_transform(&base.cfg, share).unwrap()).unwrap();
        prop_assert_eq!(shared.weight_capacity(), share * base.weight_capacity());
        prop_assert_eq!(shared.pe_count(), base.pe_count());
    }
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let (ws, x) = mc::random_instance(50, 6, 1).unwrap();
    let run = || {
        mc::simulate_vmm(&ws, &x, &VmmDesignPoint::optimal(), 40, &SimFlags { trials: 300, seed: 5, ..Default::default() }, &Default::default())
            .unwrap()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
    assert_eq!(one, many);
}

#[test]
fn packing_is_independent_of_thread_count() {
    let g = data::graph("inception-v1").unwrap();
    let proc = build_processor(ArchConfig::default()).unwrap();
    let run = || pipeline::map_graph(&g, &proc, ReshapeMode::RowFirst, &PackOptions::default()).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
    assert_eq!(one, many);
}

#[test]
fn dynamic_energy_is_linear_in_catalog_energy() {
    let g = data::graph("resnet-152").unwrap();
    let proc = build_processor(ArchConfig::default()).unwrap();
    let mapped = pipeline::map_graph(&g, &proc, ReshapeMode::RowFirst, &PackOptions::default()).unwrap();
    let s = build_schedule(&g, &mapped.placement, &mapped.tile_sets, &proc).unwrap();
    let cat = data::calibrated_catalog();
    let a = estimate(&s, &cat).unwrap();
    let b = estimate(&s, &cat.scale_energy(3.0)).unwrap();
    // Static energy is power times latency and does not scale.
    let fixed: f64 = cat.entries.values().map(|e| e.static_w).sum::<f64>() * a.latency_s;
    assert!(((b.energy_j - fixed) / (a.energy_j - fixed) - 3.0).abs() < 1e-9);
    assert_eq!(a.latency_s, b.latency_s);
    assert_eq!(a.area_mm2, b.area_mm2);
}

#[test]
fn unsigned_planes_reject_negative_weights() {
    assert!(SignedWeightPlane::new(1, 1, vec![-1.0]).is_ok());
    assert!(vmm::WeightPlane::new(1, 1, vec![-0.5]).is_err());
}
