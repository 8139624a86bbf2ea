// SPDX-License-Identifier: Apache-2.0
// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod arch;
pub mod data;
pub mod device;
pub mod error;
pub mod graph;
pub mod mapper;
pub mod mc;
pub mod perf;
pub mod pipeline;
pub mod vmm;
pub use error::{Error, Result};
