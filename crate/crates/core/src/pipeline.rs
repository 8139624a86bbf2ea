// SPDX-License-Identifier: Apache-2.0
//! Graph to report: map the kernels, schedule one inference, price it.

use serde::Serialize;

use crate::arch::{build_processor, ArchConfig, CostCatalog, Processor};
use crate::error::Result;
use crate::graph::NetworkGraph;
use crate::mapper::{graph_kernels, pack, reshape_to_3d, KernelTileSet, LayerGrid, PackOptions, Placement, ReshapeMode};
use crate::perf::{build_schedule, estimate, PerfReport, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappedGraph {
    pub tile_sets: Vec<KernelTileSet>,
    pub placement: Placement,
}

pub fn map_graph(g: &NetworkGraph, proc: &Processor, mode: ReshapeMode, opts: &PackOptions) -> Result<MappedGraph> {
    let tile_sets = graph_kernels(g)
        .into_iter()
        .map(|k| reshape_to_3d(k, proc, mode))
        .collect::<Result<Vec<_>>>()?;
    let placement = pack(&tile_sets, &LayerGrid::of(proc), opts)?;
    Ok(MappedGraph { tile_sets, placement })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mapped: MappedGraph,
    pub schedule: Schedule,
    pub report: PerfReport,
}

pub fn estimate_graph(
    g: &NetworkGraph,
    cfg: ArchConfig,
    catalog: &CostCatalog,
    mode: ReshapeMode,
    opts: &PackOptions,
) -> Result<Estimate> {
    let proc = build_processor(cfg)?;
    let mapped = map_graph(g, &proc, mode, opts)?;
    let schedule = build_schedule(g, &mapped.placement, &mapped.tile_sets, &proc)?;
    let report = estimate(&schedule, catalog)?;
    Ok(Estimate { mapped, schedule, report })
}
