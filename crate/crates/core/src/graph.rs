// SPDX-License-Identifier: Apache-2.0
//! Network computational graphs and their main-memory footprint.
//!
//! Nodes are layers, edges carry activation tensors between them. Layers run
//! one at a time in a topological order; while a layer runs, its inputs and
//! outputs and every tensor still waiting for a consumer occupy main memory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Input,
    Output,
    Conv,
    Fc,
    Recurrent,
    Maxpool,
    Avgpool,
    EltwiseAdd,
    EltwiseMul,
    Concat,
}

impl NodeKind {
    pub fn is_weighted(self) -> bool {
        matches!(self, NodeKind::Conv | NodeKind::Fc | NodeKind::Recurrent)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

/// Height, width, channels.
pub type Shape = [usize; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_shape: Option<Shape>,
    /// Window (height, width) of conv and pooling nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Weight rows of fc and recurrent nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<usize>,
    /// Weight columns of fc and recurrent nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<usize>,
    /// Sequence length of a recurrent node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Gate count of a recurrent cell: 4 for LSTM, 1 for a plain RNN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<usize>,
}

impl Node {
    /// Weight matrix (rows, cols) of a weighted node.
    pub fn weight_dims(&self) -> Option<(usize, usize)> {
        match self.kind {
            NodeKind::Conv => {
                let [kh, kw] = self.kernel?;
                Some((kh * kw * self.in_shape?[2], self.out_shape?[2]))
            }
            NodeKind::Fc | NodeKind::Recurrent => Some((self.inputs?, self.outputs?)),
            _ => None,
        }
    }

    /// Number of multiply-accumulates for one inference.
    pub fn macs(&self) -> u64 {
        let Some((r, c)) = self.weight_dims() else {
            return 0;
        };
        let per = (r * c) as u64;
        match self.kind {
            NodeKind::Conv => {
                let [h, w, _] = self.out_shape.unwrap_or([1, 1, 0]);
                per * (h * w) as u64
            }
            NodeKind::Recurrent => per * self.steps.unwrap_or(1) as u64,
            _ => per,
        }
    }

    fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::format(format!("node {}: {:?} node needs {what}", self.id, self.kind)))
            }
        };
        let positive_shape = |s: Option<Shape>| s.is_some_and(|s| s.iter().all(|&v| v > 0));
        match self.kind {
            NodeKind::Conv | NodeKind::Maxpool | NodeKind::Avgpool => {
                need(positive_shape(self.in_shape), "a positive in_shape")?;
                need(positive_shape(self.out_shape), "a positive out_shape")?;
                need(self.kernel.is_some_and(|k| k[0] > 0 && k[1] > 0), "a positive kernel")?;
                need(self.stride.is_some_and(|s| s > 0), "a positive stride")?;
            }
            NodeKind::Fc => {
                need(self.inputs.is_some_and(|v| v > 0), "inputs >= 1")?;
                need(self.outputs.is_some_and(|v| v > 0), "outputs >= 1")?;
            }
            NodeKind::Recurrent => {
                need(self.inputs.is_some_and(|v| v > 0), "inputs >= 1")?;
                need(self.outputs.is_some_and(|v| v > 0), "outputs >= 1")?;
                need(self.steps.is_some_and(|v| v > 0), "steps >= 1")?;
                let gates = self.gates.unwrap_or(1);
                need(gates > 0 && self.outputs.unwrap_or(0).is_multiple_of(gates), "outputs divisible by gates")?;
            }
            NodeKind::EltwiseAdd | NodeKind::EltwiseMul | NodeKind::Concat => {
                need(positive_shape(self.out_shape), "a positive out_shape")?;
            }
            NodeKind::Input | NodeKind::Output => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRole {
    #[default]
    Data,
    /// Skip connection summed into the destination's output.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "is_data")]
    pub role: EdgeRole,
}

fn is_data(r: &EdgeRole) -> bool {
    *r == EdgeRole::Data
}

fn default_word_bits() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkGraph {
    pub name: String,
    /// Activation word size; words are packed into bytes.
    #[serde(default = "default_word_bits")]
    pub word_bits: u32,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl NetworkGraph {
    pub fn new(name: impl Into<String>, word_bits: u32, nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let mut g = NetworkGraph {
            name: name.into(),
            word_bits,
            nodes,
            edges,
            index: HashMap::new(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: NetworkGraph =
            serde_json::from_str(text).map_err(|e| Error::format(format!("graph file: {e}")))?;
        Self::new(g.name, g.word_bits, g.nodes, g.edges)
    }

    fn validate(&mut self) -> Result<()> {
        if !(1..=32).contains(&self.word_bits) {
            return Err(Error::format(format!("word_bits must be in 1..=32, got {}", self.word_bits)));
        }
        self.index.clear();
        for (i, n) in self.nodes.iter().enumerate() {
            n.validate()?;
            if self.index.insert(n.id.clone(), i).is_some() {
                return Err(Error::format(format!("duplicate node id {}", n.id)));
            }
        }
        for e in &self.edges {
            for end in [&e.src, &e.dst] {
                if !self.index.contains_key(end) {
                    return Err(Error::format(format!("edge {} -> {} names unknown node {end}", e.src, e.dst)));
                }
            }
            if e.src == e.dst {
                return Err(Error::format(format!("self-loop on {}", e.src)));
            }
            if e.bytes == 0 {
                return Err(Error::format(format!("edge {} -> {} carries zero bytes", e.src, e.dst)));
            }
        }
        processing_order(self)?;
        if self.nodes.is_empty() {
            return Ok(());
        }
        self.check_connected()
    }

    /// Every node lies on a path from an input node to an output node.
    fn check_connected(&self) -> Result<()> {
        let n = self.nodes.len();
        let (succ, pred) = self.adjacency();
        let reach = |starts: Vec<usize>, adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; n];
            let mut stack = starts;
            while let Some(u) = stack.pop() {
                if !std::mem::replace(&mut seen[u], true) {
                    stack.extend(adj[u].iter().copied());
                }
            }
            seen
        };
        let of_kind = |k: NodeKind| -> Vec<usize> { (0..n).filter(|&i| self.nodes[i].kind == k).collect() };
        let inputs = of_kind(NodeKind::Input);
        let outputs = of_kind(NodeKind::Output);
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::format("graph needs at least one input and one output node"));
        }
        let fwd = reach(inputs, &succ);
        let bwd = reach(outputs, &pred);
        if let Some(i) = (0..n).find(|&i| !(fwd[i] && bwd[i])) {
            return Err(Error::format(format!(
                "node {} is not on a path from an input to an output",
                self.nodes[i].id
            )));
        }
        Ok(())
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    /// Successor and predecessor lists by node index.
    pub fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let n = self.nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for e in &self.edges {
            let (s, d) = (self.index[&e.src], self.index[&e.dst]);
            succ[s].push(d);
            pred[d].push(s);
        }
        (succ, pred)
    }

    /// Bytes of the tensor a node produces; fan-out edges share it.
    pub fn output_bytes(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.nodes.len()];
        for e in &self.edges {
            let s = self.index[&e.src];
            out[s] = out[s].max(e.bytes);
        }
        out
    }

    /// Bytes of one activation tensor of `words` words.
    pub fn tensor_bytes(&self, words: u64) -> u64 {
        (words * u64::from(self.word_bits)).div_ceil(8)
    }

    pub fn total_weights(&self) -> u64 {
        self.nodes
            .iter()
            .filter_map(|n| n.weight_dims())
            .map(|(r, c)| (r * c) as u64)
            .sum()
    }

    pub fn total_macs(&self) -> u64 {
        self.nodes.iter().map(Node::macs).sum()
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<NetworkGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    NetworkGraph::from_json(&text).map_err(|e| match e {
        Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Topological order of node indices; ready nodes are taken by smallest id.
pub fn processing_order(g: &NetworkGraph) -> Result<Vec<usize>> {
    let n = g.nodes.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for e in &g.edges {
        let (s, d) = (g.index[&e.src], g.index[&e.dst]);
        succ[s].push(d);
        indeg[d] += 1;
    }
    let mut ready: BTreeSet<(&str, usize)> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(|i| (g.nodes[i].id.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, u)) = ready.pop_first() {
        order.push(u);
        for &v in &succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.insert((g.nodes[v].id.as_str(), v));
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).map(|i| g.nodes[i].id.clone()).unwrap_or_default();
        return Err(Error::format(format!("graph has a cycle through {stuck}")));
    }
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryProfile {
    /// Node ids in processing order.
    pub order: Vec<String>,
    /// Bytes held in main memory while each node runs.
    pub live: Vec<u64>,
    pub peak: u64,
}

/// Main-memory occupancy along `order`.
///
/// While node `i` runs, memory holds the tensor of every earlier node that
/// still has a consumer at or after `i`, plus the tensor `i` produces. A
/// tensor read by several consumers is stored once.
pub fn memory_profile(g: &NetworkGraph, order: &[usize]) -> Result<MemoryProfile> {
    let n = g.nodes.len();
    let mut pos = vec![usize::MAX; n];
    for (p, &u) in order.iter().enumerate() {
        if u >= n || pos[u] != usize::MAX {
            return Err(Error::contract("order is not a permutation of the graph's nodes"));
        }
        pos[u] = p;
    }
    if order.len() != n {
        return Err(Error::contract("order is not a permutation of the graph's nodes"));
    }
    let mut last_use = vec![None::<usize>; n];
    for e in &g.edges {
        let (s, d) = (g.index[&e.src], g.index[&e.dst]);
        if pos[s] >= pos[d] {
            return Err(Error::contract(format!("order runs {} before its producer {}", e.dst, e.src)));
        }
        last_use[s] = Some(last_use[s].map_or(pos[d], |p: usize| p.max(pos[d])));
    }
    let out = g.output_bytes();
    // A tensor is live over [pos(producer), last_use]; accumulate with a
    // difference array.
    let mut diff = vec![0i128; n + 1];
    for u in 0..n {
        if let Some(last) = last_use[u] {
            diff[pos[u]] += i128::from(out[u]);
            diff[last + 1] -= i128::from(out[u]);
        }
    }
    let mut live = Vec::with_capacity(n);
    let mut acc = 0i128;
    for d in diff.iter().take(n) {
        acc += d;
        live.push(acc as u64);
    }
    let peak = live.iter().copied().max().unwrap_or(0);
    Ok(MemoryProfile {
        order: order.iter().map(|&u| g.nodes[u].id.clone()).collect(),
        live,
        peak,
    })
}

/// Per-kind node counts, for reports.
pub fn kind_histogram(g: &NetworkGraph) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for n in &g.nodes {
        let key = serde_json::to_value(n.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        *h.entry(key).or_insert(0) += 1;
    }
    h
}
