// SPDX-License-Identifier: Apache-2.0
//! Weight placement: quantize kernel dimensions to whole `K`-tiles, split
//! kernels larger than one VMM step into pieces, and pack the pieces into the
//! layered tile grid with randomized first-fit.
//!
//! A layer holds `M x 2N` tiles, one per PE; a tile is `K` inputs by `K`
//! signed outputs. A piece spans at most `M x N` tiles, the largest one-step
//! VMM.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::Processor;
use crate::error::{Error, Result};
use crate::graph::{NetworkGraph, NodeKind};

/// Smallest multiples of `k` covering `rows x cols`.
pub fn quantize_dims(rows: usize, cols: usize, k: usize) -> Result<(usize, usize)> {
    if rows == 0 || cols == 0 || k == 0 {
        return Err(Error::domain(format!("cannot quantize {rows}x{cols} by {k}")));
    }
    Ok((rows.div_ceil(k) * k, cols.div_ceil(k) * k))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReshapeMode {
    #[default]
    RowFirst,
    ColumnFirst,
}

/// Convolution geometry that fixes the row layout of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayout {
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
}

/// A weight kernel to be placed. Convolution rows are ordered
/// `(kernel column, kernel row, input channel)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvLayout>,
}

impl KernelSpec {
    pub fn dense(id: impl Into<String>, rows: usize, cols: usize) -> Self {
        KernelSpec {
            id: id.into(),
            rows,
            cols,
            conv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub index: usize,
    /// Offsets of the piece inside the quantized kernel, in cells.
    pub row_offset: usize,
    pub col_offset: usize,
    pub row_tiles: usize,
    pub col_tiles: usize,
}

impl Piece {
    pub fn tiles(&self) -> usize {
        self.row_tiles * self.col_tiles
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTileSet {
    pub kernel: KernelSpec,
    pub k: usize,
    pub rows_q: usize,
    pub cols_q: usize,
    pub mode: ReshapeMode,
    pub pieces: Vec<Piece>,
}

impl KernelTileSet {
    pub fn id(&self) -> &str {
        &self.kernel.id
    }

    pub fn tiles(&self) -> usize {
        self.pieces.iter().map(Piece::tiles).sum()
    }

    /// Row of the quantized layout holding kernel row `r`. Each kernel column
    /// of a convolution starts on a tile boundary, so shifting the input by
    /// one kernel column is a whole-tile shift.
    pub fn layout_row(&self, r: usize) -> usize {
        match self.kernel.conv {
            Some(c) => {
                let block = (c.kh * c.cin).div_ceil(self.k) * self.k;
                let per_col = c.kh * c.cin;
                (r / per_col) * block + r % per_col
            }
            None => r,
        }
    }
}

/// Quantizes a kernel and splits it into pieces of at most
/// `max_rows x max_cols` cells.
pub fn reshape_with(
    kernel: KernelSpec,
    k: usize,
    max_rows: usize,
    max_cols: usize,
    mode: ReshapeMode,
) -> Result<KernelTileSet> {
    if max_rows < k || max_cols < k || !max_rows.is_multiple_of(k) || !max_cols.is_multiple_of(k) {
        return Err(Error::config(format!(
            "piece limit {max_rows}x{max_cols} is not a positive multiple of K = {k}"
        )));
    }
    let (mut rows_q, cols_q) = quantize_dims(kernel.rows, kernel.cols, k)?;
    if let Some(c) = kernel.conv {
        if c.kh * c.kw * c.cin != kernel.rows || c.kh * c.kw * c.cin == 0 {
            return Err(Error::domain(format!(
                "kernel {}: conv geometry {}x{}x{} does not match {} rows",
                kernel.id, c.kh, c.kw, c.cin, kernel.rows
            )));
        }
        rows_q = c.kw * (c.kh * c.cin).div_ceil(k) * k;
    }
    let chunks = |total: usize, max: usize| -> Vec<(usize, usize)> {
        (0..total.div_ceil(max))
            .map(|i| (i * max, (total - i * max).min(max) / k))
            .collect()
    };
    let rs = chunks(rows_q, max_rows);
    let cs = chunks(cols_q, max_cols);
    let mut pieces = Vec::with_capacity(rs.len() * cs.len());
    let mut push = |r: (usize, usize), c: (usize, usize)| {
        pieces.push(Piece {
            index: pieces.len(),
            row_offset: r.0,
            col_offset: c.0,
            row_tiles: r.1,
            col_tiles: c.1,
        })
    };
    match mode {
        ReshapeMode::RowFirst => rs.iter().for_each(|&r| cs.iter().for_each(|&c| push(r, c))),
        ReshapeMode::ColumnFirst => cs.iter().for_each(|&c| rs.iter().for_each(|&r| push(r, c))),
    }
    Ok(KernelTileSet {
        kernel,
        k,
        rows_q,
        cols_q,
        mode,
        pieces,
    })
}

/// Splits a kernel into one-step VMM pieces of the processor.
pub fn reshape_to_3d(kernel: KernelSpec, proc: &Processor, mode: ReshapeMode) -> Result<KernelTileSet> {
    let (max_r, max_c) = proc.max_vmm();
    reshape_with(kernel, proc.cfg.k, max_r, max_c, mode)
}

/// Kernel of every weighted node, in node order.
pub fn graph_kernels(g: &NetworkGraph) -> Vec<KernelSpec> {
    g.nodes
        .iter()
        .filter_map(|n| {
            let (rows, cols) = n.weight_dims()?;
            let conv = match n.kind {
                NodeKind::Conv => {
                    let [kh, kw] = n.kernel?;
                    Some(ConvLayout {
                        kh,
                        kw,
                        cin: n.in_shape?[2],
                    })
                }
                _ => None,
            };
            Some(KernelSpec {
                id: n.id.clone(),
                rows,
                cols,
                conv,
            })
        })
        .collect()
}

/// Tile grid of the packing problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGrid {
    pub rows: usize,
    pub cols: usize,
    pub layers: usize,
}

impl LayerGrid {
    pub fn of(proc: &Processor) -> Self {
        let (rows, cols) = proc.layer_tiles();
        LayerGrid {
            rows,
            cols,
            layers: proc.mapping_layers(),
        }
    }

    pub fn tiles_per_layer(&self) -> usize {
        self.rows * self.cols
    }

    /// `ceil(total tiles / tiles per layer)`.
    pub fn lower_bound(&self, kernels: &[KernelTileSet]) -> usize {
        kernels.iter().map(KernelTileSet::tiles).sum::<usize>().div_ceil(self.tiles_per_layer())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedPiece {
    /// Position of the kernel in the packed list.
    pub kernel: usize,
    pub piece: usize,
    pub layer: usize,
    pub row: usize,
    pub col: usize,
    pub row_tiles: usize,
    pub col_tiles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub grid: LayerGrid,
    pub kernel_ids: Vec<String>,
    pub pieces: Vec<PlacedPiece>,
    pub layers_used: usize,
    /// Unoccupied tiles in utilized layers.
    pub fragmentation: usize,
    /// Kernels whose pieces span more than one layer.
    pub split_kernels: usize,
    pub iteration: usize,
}

impl Placement {
    /// Placed pieces of kernel `id`, in piece order.
    pub fn pieces_of(&self, id: &str) -> Vec<PlacedPiece> {
        let Some(k) = self.kernel_ids.iter().position(|x| x == id) else {
            return Vec::new();
        };
        let mut v: Vec<PlacedPiece> = self.pieces.iter().filter(|p| p.kernel == k).copied().collect();
        v.sort_by_key(|p| p.piece);
        v
    }

    /// Kernel position per tile of one layer; `None` for empty tiles.
    pub fn occupancy(&self, layer: usize) -> Vec<Vec<Option<usize>>> {
        let mut grid = vec![vec![None; self.grid.cols]; self.grid.rows];
        for p in self.pieces.iter().filter(|p| p.layer == layer) {
            for row in grid.iter_mut().skip(p.row).take(p.row_tiles) {
                for cell in row.iter_mut().skip(p.col).take(p.col_tiles) {
                    *cell = Some(p.kernel);
                }
            }
        }
        grid
    }

    /// Checks bounds and overlap of every piece.
    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeMap<usize, Vec<Vec<bool>>> = BTreeMap::new();
        for p in &self.pieces {
            if p.layer >= self.grid.layers
                || p.row + p.row_tiles > self.grid.rows
                || p.col + p.col_tiles > self.grid.cols
            {
                return Err(Error::contract(format!("piece {p:?} leaves the grid")));
            }
            let layer = seen
                .entry(p.layer)
                .or_insert_with(|| vec![vec![false; self.grid.cols]; self.grid.rows]);
            for row in layer.iter_mut().skip(p.row).take(p.row_tiles) {
                for cell in row.iter_mut().skip(p.col).take(p.col_tiles) {
                    if std::mem::replace(cell, true) {
                        return Err(Error::contract(format!("piece {p:?} overlaps another")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Try the layer of a kernel's previous piece before scanning.
    pub prefer_colayer: bool,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            iterations: 32,
            seed: 0,
            prefer_colayer: true,
        }
    }
}

/// Row occupancy bitmasks of one layer.
struct LayerMask {
    rows: Vec<u64>,
}

impl LayerMask {
    fn find(&self, h: usize, w: usize, cols: usize) -> Option<(usize, usize)> {
        let want = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        for r in 0..=self.rows.len().checked_sub(h)? {
            let band = self.rows[r..r + h].iter().fold(0u64, |a, m| a | m);
            for c in 0..=cols.checked_sub(w)? {
                if band & (want << c) == 0 {
                    return Some((r, c));
                }
            }
        }
        None
    }

    fn mark(&mut self, r: usize, c: usize, h: usize, w: usize) {
        let want = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        for m in &mut self.rows[r..r + h] {
            *m |= want << c;
        }
    }
}

fn check_fit(kernels: &[KernelTileSet], grid: &LayerGrid) -> Result<()> {
    if grid.rows == 0 || grid.cols == 0 || grid.layers == 0 {
        return Err(Error::config("layer grid must be non-empty"));
    }
    if grid.cols > 64 {
        return Err(Error::config("layer grids wider than 64 tiles are not supported"));
    }
    for ks in kernels {
        for p in &ks.pieces {
            if p.row_tiles > grid.rows || p.col_tiles > grid.cols || p.tiles() == 0 {
                return Err(Error::contract(format!(
                    "kernel {} piece {} ({}x{} tiles) does not fit a {}x{} layer",
                    ks.id(),
                    p.index,
                    p.row_tiles,
                    p.col_tiles,
                    grid.rows,
                    grid.cols
                )));
            }
        }
    }
    Ok(())
}

/// First-fit packing of kernels in the given order, scanning
/// (layer, row, column) ascending and opening a layer only when nothing fits.
/// Layers beyond `grid.layers` are opened freely; the caller decides whether
/// that is a capacity failure.
pub fn pack_in_order(
    kernels: &[KernelTileSet],
    order: &[usize],
    grid: &LayerGrid,
    prefer_colayer: bool,
) -> Result<Placement> {
    check_fit(kernels, grid)?;
    let mut layers: Vec<LayerMask> = Vec::new();
    let mut pieces = Vec::with_capacity(kernels.iter().map(|k| k.pieces.len()).sum());
    let mut split_kernels = 0;
    for &ki in order {
        let ks = kernels
            .get(ki)
            .ok_or_else(|| Error::contract(format!("order names kernel {ki} of {}", kernels.len())))?;
        let mut prev_layer: Option<usize> = None;
        let mut kernel_layers = Vec::new();
        for p in &ks.pieces {
            let (h, w) = (p.row_tiles, p.col_tiles);
            let preferred = prev_layer
                .filter(|_| prefer_colayer)
                .and_then(|l| layers[l].find(h, w, grid.cols).map(|rc| (l, rc)));
            let spot = preferred.or_else(|| {
                layers
                    .iter()
                    .enumerate()
                    .find_map(|(l, m)| m.find(h, w, grid.cols).map(|rc| (l, rc)))
            });
            let (layer, (row, col)) = match spot {
                Some(s) => s,
                None => {
                    layers.push(LayerMask {
                        rows: vec![0; grid.rows],
                    });
                    (layers.len() - 1, (0, 0))
                }
            };
            layers[layer].mark(row, col, h, w);
            prev_layer = Some(layer);
            if !kernel_layers.contains(&layer) {
                kernel_layers.push(layer);
            }
            pieces.push(PlacedPiece {
                kernel: ki,
                piece: p.index,
                layer,
                row,
                col,
                row_tiles: h,
                col_tiles: w,
            });
        }
        if kernel_layers.len() > 1 {
            split_kernels += 1;
        }
    }
    let used_tiles: usize = pieces.iter().map(|p: &PlacedPiece| p.row_tiles * p.col_tiles).sum();
    Ok(Placement {
        grid: *grid,
        kernel_ids: kernels.iter().map(|k| k.id().to_owned()).collect(),
        pieces,
        layers_used: layers.len(),
        fragmentation: layers.len() * grid.tiles_per_layer() - used_tiles,
        split_kernels,
        iteration: 0,
    })
}

fn capacity_error(p: &Placement) -> Error {
    let shortfall_tiles = p
        .pieces
        .iter()
        .filter(|x| x.layer >= p.grid.layers)
        .map(|x| x.row_tiles * x.col_tiles)
        .sum();
    Error::Capacity {
        needed: p.layers_used,
        available: p.grid.layers,
        shortfall: p.layers_used - p.grid.layers,
        shortfall_tiles,
    }
}

/// Randomized first-fit: each iteration packs a fresh random kernel order and
/// the placement with fewest layers wins, then least fragmentation, then the
/// earliest iteration.
pub fn pack(kernels: &[KernelTileSet], grid: &LayerGrid, opts: &PackOptions) -> Result<Placement> {
    if opts.iterations == 0 {
        return Err(Error::config("iterations must be >= 1"));
    }
    check_fit(kernels, grid)?;
    let lower = grid.lower_bound(kernels);
    if lower > grid.layers {
        let tiles: usize = kernels.iter().map(KernelTileSet::tiles).sum();
        return Err(Error::Capacity {
            needed: lower,
            available: grid.layers,
            shortfall: lower - grid.layers,
            shortfall_tiles: tiles - grid.layers * grid.tiles_per_layer(),
        });
    }
    let results: Vec<Placement> = (0..opts.iterations)
        .into_par_iter()
        .map(|it| {
            let mut order: Vec<usize> = (0..kernels.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(crate::mc::derive_seed(opts.seed, it as u64));
            order.shuffle(&mut rng);
            let mut p = pack_in_order(kernels, &order, grid, opts.prefer_colayer)?;
            p.iteration = it;
            Ok(p)
        })
        .collect::<Result<_>>()?;
    let best = results
        .into_iter()
        .min_by_key(|p| (p.layers_used, p.fragmentation, p.iteration))
        .expect("at least one iteration");
    if best.layers_used > grid.layers {
        return Err(capacity_error(&best));
    }
    Ok(best)
}

/// A signed kernel with its values, row-major `rows x cols` in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValues {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Differential cell conductances of one memory layer, row-major
/// `(rows * K) x (cols * K)` per polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCells {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellImage {
    pub k: usize,
    pub cell_rows: usize,
    pub cell_cols: usize,
    pub weight_bits: u32,
    pub layers: BTreeMap<usize, LayerCells>,
}

/// Rounds `w` to the nearest multiple of `2^-bits`; the error is at most
/// `2^-(bits+1)`.
pub fn quantize_weight(w: f64, bits: u32) -> f64 {
    let scale = f64::from(1u32 << bits);
    (w * scale).round() / scale
}

/// Writes quantized kernel values into the cells their pieces occupy.
/// Positive weights go to the plus cell, negative to the minus cell; padding
/// cells stay at zero.
pub fn place_weights(
    placement: &Placement,
    tile_sets: &[KernelTileSet],
    values: &[KernelValues],
    weight_bits: u32,
) -> Result<CellImage> {
    let k = tile_sets.first().map_or(1, |t| t.k);
    let cell_rows = placement.grid.rows * k;
    let cell_cols = placement.grid.cols * k;
    let mut image = CellImage {
        k,
        cell_rows,
        cell_cols,
        weight_bits,
        layers: BTreeMap::new(),
    };
    for kv in values {
        let ki = placement
            .kernel_ids
            .iter()
            .position(|id| *id == kv.id)
            .ok_or_else(|| Error::contract(format!("kernel {} is not placed", kv.id)))?;
        let ts = &tile_sets[ki];
        if kv.rows != ts.kernel.rows || kv.cols != ts.kernel.cols || kv.values.len() != kv.rows * kv.cols {
            return Err(Error::domain(format!(
                "kernel {}: values are {}x{} ({} entries), declared {}x{}",
                kv.id,
                kv.rows,
                kv.cols,
                kv.values.len(),
                ts.kernel.rows,
                ts.kernel.cols
            )));
        }
        if let Some(i) = kv.values.iter().position(|w| !(-1.0..=1.0).contains(w)) {
            return Err(Error::domain(format!("kernel {}: value {} at {i} outside [-1, 1]", kv.id, kv.values[i])));
        }
        let placed = placement.pieces_of(&kv.id);
        for r in 0..kv.rows {
            let lr = ts.layout_row(r);
            for c in 0..kv.cols {
                let (pp, p) = locate(ts, &placed, lr, c)?;
                let row = pp.row * k + (lr - p.row_offset);
                let col = pp.col * k + (c - p.col_offset);
                let layer = image.layers.entry(pp.layer).or_insert_with(|| LayerCells {
                    plus: vec![0.0; cell_rows * cell_cols],
                    minus: vec![0.0; cell_rows * cell_cols],
                });
                let q = quantize_weight(kv.values[r * kv.cols + c], weight_bits);
                let idx = row * cell_cols + col;
                layer.plus[idx] = q.max(0.0);
                layer.minus[idx] = (-q).max(0.0);
            }
        }
    }
    Ok(image)
}

fn locate<'a>(
    ts: &'a KernelTileSet,
    placed: &[PlacedPiece],
    lr: usize,
    c: usize,
) -> Result<(PlacedPiece, &'a Piece)> {
    let k = ts.k;
    let p = ts
        .pieces
        .iter()
        .find(|p| {
            (p.row_offset..p.row_offset + p.row_tiles * k).contains(&lr)
                && (p.col_offset..p.col_offset + p.col_tiles * k).contains(&c)
        })
        .ok_or_else(|| Error::contract(format!("kernel {}: cell ({lr}, {c}) outside every piece", ts.id())))?;
    let pp = placed
        .iter()
        .find(|pp| pp.piece == p.index)
        .ok_or_else(|| Error::contract(format!("kernel {}: piece {} is not placed", ts.id(), p.index)))?;
    Ok((*pp, p))
}

/// Reads a kernel's signed weights back out of a cell image.
pub fn extract_weights(image: &CellImage, placement: &Placement, ts: &KernelTileSet) -> Result<Vec<f64>> {
    let placed = placement.pieces_of(ts.id());
    let (rows, cols) = (ts.kernel.rows, ts.kernel.cols);
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        let lr = ts.layout_row(r);
        for c in 0..cols {
            let (pp, p) = locate(ts, &placed, lr, c)?;
            let row = pp.row * image.k + (lr - p.row_offset);
            let col = pp.col * image.k + (c - p.col_offset);
            let idx = row * image.cell_cols + col;
            out[r * cols + c] = image.layers.get(&pp.layer).map_or(0.0, |l| l.plus[idx] - l.minus[idx]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_processor, ArchConfig};
    use rand::Rng;

    fn proc() -> Processor {
        build_processor(ArchConfig::default()).unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_dims(100, 100, 64).unwrap(), (128, 128));
        assert_eq!(quantize_dims(64, 64, 64).unwrap(), (64, 64));
        assert_eq!(quantize_dims(1, 1, 64).unwrap(), (64, 64));
        assert!(quantize_dims(0, 4, 64).is_err());
    }

    #[test]
    fn reshape_examples() {
        let p = proc();
        let one = reshape_to_3d(KernelSpec::dense("a", 2048, 512), &p, ReshapeMode::RowFirst).unwrap();
        assert_eq!(one.pieces.len(), 1);
        let two = reshape_to_3d(KernelSpec::dense("b", 4096, 512), &p, ReshapeMode::RowFirst).unwrap();
        assert_eq!(two.pieces.len(), 2);
        assert_eq!((two.pieces[1].row_offset, two.pieces[1].col_offset), (2048, 0));
        let four = reshape_to_3d(KernelSpec::dense("c", 4096, 1024), &p, ReshapeMode::RowFirst).unwrap();
        let offs: Vec<(usize, usize)> = four.pieces.iter().map(|x| (x.row_offset, x.col_offset)).collect();
        assert_eq!(offs, [(0, 0), (0, 512), (2048, 0), (2048, 512)]);
        let colf = reshape_to_3d(KernelSpec::dense("c", 4096, 1024), &p, ReshapeMode::ColumnFirst).unwrap();
        let offs: Vec<(usize, usize)> = colf.pieces.iter().map(|x| (x.row_offset, x.col_offset)).collect();
        assert_eq!(offs, [(0, 0), (2048, 0), (0, 512), (2048, 512)]);
    }

    #[test]
    fn uneven_split_keeps_remainder_piece() {
        let ts = reshape_with(KernelSpec::dense("x", 5, 3), 1, 2, 2, ReshapeMode::RowFirst).unwrap();
        let dims: Vec<(usize, usize)> = ts.pieces.iter().map(|p| (p.row_tiles, p.col_tiles)).collect();
        assert_eq!(dims, [(2, 2), (2, 1), (2, 2), (2, 1), (1, 2), (1, 1)]);
        assert_eq!(ts.tiles(), 15);
    }

    #[test]
    fn conv_layout_aligns_kernel_columns_to_tiles() {
        // 3x3 kernel over 10 channels: each kernel column holds 30 rows padded to 64.
        let spec = KernelSpec {
            id: "c".into(),
            rows: 90,
            cols: 16,
            conv: Some(ConvLayout { kh: 3, kw: 3, cin: 10 }),
        };
        let ts = reshape_to_3d(spec, &proc(), ReshapeMode::RowFirst).unwrap();
        assert_eq!(ts.rows_q, 3 * 64);
        assert_eq!(ts.layout_row(0), 0);
        assert_eq!(ts.layout_row(29), 29);
        assert_eq!(ts.layout_row(30), 64);
        assert_eq!(ts.layout_row(89), 128 + 29);
    }

    #[test]
    fn full_grid_piece_uses_one_layer_and_overflow_is_capacity_error() {
        let p = proc();
        let grid = LayerGrid::of(&p);
        let full = reshape_with(KernelSpec::dense("f", 2048, 1024), 64, 2048, 1024, ReshapeMode::RowFirst).unwrap();
        let placed = pack(std::slice::from_ref(&full), &grid, &PackOptions::default()).unwrap();
        assert_eq!(placed.layers_used, 1);
        assert_eq!(placed.fragmentation, 0);
        let many: Vec<KernelTileSet> = (0..2 * grid.layers)
            .map(|i| KernelTileSet {
                kernel: KernelSpec::dense(format!("k{i}"), 2048, 1024),
                ..full.clone()
            })
            .collect();
        match pack(&many, &grid, &PackOptions::default()) {
            Err(Error::Capacity {
                needed,
                available,
                shortfall,
                shortfall_tiles,
            }) => {
                assert_eq!((needed, available, shortfall), (128, 64, 64));
                assert_eq!(shortfall_tiles, 64 * 512);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_fit_scans_layer_row_column() {
        let grid = LayerGrid { rows: 2, cols: 3, layers: 4 };
        let sets: Vec<KernelTileSet> = [(1, 2), (2, 2), (1, 1), (2, 1)]
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| reshape_with(KernelSpec::dense(format!("k{i}"), r, c), 1, 2, 3, ReshapeMode::RowFirst).unwrap())
            .collect();
        let p = pack_in_order(&sets, &[0, 1, 2, 3], &grid, false).unwrap();
        let at: Vec<(usize, usize, usize)> = p.pieces.iter().map(|x| (x.layer, x.row, x.col)).collect();
        assert_eq!(at, [(0, 0, 0), (1, 0, 0), (0, 0, 2), (1, 0, 2)]);
        assert_eq!(p.layers_used, 2);
        assert_eq!(p.fragmentation, 3);
        p.validate().unwrap();
    }

    #[test]
    fn packing_is_deterministic_per_seed() {
        let grid = LayerGrid { rows: 4, cols: 4, layers: 16 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets: Vec<KernelTileSet> = (0..15)
            .map(|i| {
                let spec = KernelSpec::dense(format!("k{i}"), rng.random_range(1..=6), rng.random_range(1..=3));
                reshape_with(spec, 1, 4, 2, ReshapeMode::RowFirst).unwrap()
            })
            .collect();
        let opts = PackOptions { iterations: 8, seed: 11, prefer_colayer: true };
        let a = pack(&sets, &grid, &opts).unwrap();
        assert_eq!(a, pack(&sets, &grid, &opts).unwrap());
        a.validate().unwrap();
        assert!(a.layers_used >= grid.lower_bound(&sets));
    }

    #[test]
    fn weights_round_trip_through_cells() {
        let cfg = ArchConfig { k: 4, m: 2, n: 1, layers: 8, ..ArchConfig::default() };
        let p = build_processor(cfg).unwrap();
        let grid = LayerGrid::of(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let specs = [
            KernelSpec::dense("fc", 13, 6),
            KernelSpec { id: "conv".into(), rows: 12, cols: 3, conv: Some(ConvLayout { kh: 2, kw: 2, cin: 3 }) },
            KernelSpec::dense("zero", 3, 3),
        ];
        let sets: Vec<KernelTileSet> =
            specs.iter().map(|s| reshape_to_3d(s.clone(), &p, ReshapeMode::RowFirst).unwrap()).collect();
        let values: Vec<KernelValues> = specs
            .iter()
            .map(|s| KernelValues {
                id: s.id.clone(),
                rows: s.rows,
                cols: s.cols,
                values: (0..s.rows * s.cols)
                    .map(|_| if s.id == "zero" { 0.0 } else { rng.random_range(-1.0..=1.0) })
                    .collect(),
            })
            .collect();
        let placement = pack(&sets, &grid, &PackOptions::default()).unwrap();
        let image = place_weights(&placement, &sets, &values, 4).unwrap();
        for (ts, kv) in sets.iter().zip(&values) {
            let back = extract_weights(&image, &placement, ts).unwrap();
            for (a, b) in back.iter().zip(&kv.values) {
                assert!((a - b).abs() <= 1.0 / 32.0 + 1e-15, "{a} vs {b}");
            }
        }
        for layer in image.layers.values() {
            for (a, b) in layer.plus.iter().zip(&layer.minus) {
                assert!((0.0..=1.0).contains(a) && (0.0..=1.0).contains(b));
                assert!(*a == 0.0 || *b == 0.0);
            }
        }
        // Cells outside every kernel are padding.
        let used: usize = image
            .layers
            .values()
            .map(|l| l.plus.iter().zip(&l.minus).filter(|(a, b)| **a != 0.0 || **b != 0.0).count())
            .sum();
        assert!(used <= 13 * 6 + 12 * 3);
    }

    #[test]
    fn unit_weight_maps_to_plus_cell() {
        let sets = vec![reshape_with(KernelSpec::dense("w", 1, 1), 1, 1, 1, ReshapeMode::RowFirst).unwrap()];
        let grid = LayerGrid { rows: 1, cols: 1, layers: 1 };
        let placement = pack_in_order(&sets, &[0], &grid, true).unwrap();
        let kv = |v: f64| KernelValues { id: "w".into(), rows: 1, cols: 1, values: vec![v] };
        let img = place_weights(&placement, &sets, &[kv(1.0)], 4).unwrap();
        assert_eq!((img.layers[&0].plus[0], img.layers[&0].minus[0]), (1.0, 0.0));
        assert!(matches!(place_weights(&placement, &sets, &[kv(1.5)], 4), Err(Error::Domain(_))));
    }
}
