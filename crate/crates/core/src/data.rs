// SPDX-License-Identifier: Apache-2.0
//! Data files compiled into the crate.

use crate::arch::CostCatalog;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::perf::ReferenceTable;

const GRAPHS: [(&str, &str); 4] = [
    ("toy-chain", include_str!("../data/graphs/toy_chain.json")),
    ("inception-v1", include_str!("../data/graphs/inception_v1.json")),
    ("resnet-152", include_str!("../data/graphs/resnet152.json")),
    ("gnmt-1024", include_str!("../data/graphs/gnmt1024.json")),
];

/// Names of the three benchmark networks.
pub const BENCHMARKS: [&str; 3] = ["inception-v1", "resnet-152", "gnmt-1024"];

pub fn graph_names() -> impl Iterator<Item = &'static str> {
    GRAPHS.iter().map(|(n, _)| *n)
}

pub fn graph(name: &str) -> Result<NetworkGraph> {
    let (_, text) = GRAPHS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config(format!("no shipped graph {name}")))?;
    NetworkGraph::from_json(text)
}

/// The calibration-fit cost catalog.
pub fn calibrated_catalog() -> CostCatalog {
    CostCatalog::from_json(include_str!("../data/catalog_calibrated.json")).expect("shipped catalog is valid")
}

pub fn reference_table() -> ReferenceTable {
    ReferenceTable::from_json(include_str!("../data/reference_rows.json")).expect("shipped references parse")
}
