//! Config-driven experiments over `transmute-core`, with CSV reports and the
//! acceptance suite.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the tensor notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod experiments;
pub mod plots;
pub mod report;
pub mod suite;

/// Linear-algebra work is split into this many parts whatever the pool size,
/// so floating-point reductions, and hence reports, do not depend on `--jobs`.
pub const LINALG_SPLITS: usize = 4;

pub fn fix_parallelism() {
    faer::set_global_parallelism(faer::Par::rayon(LINALG_SPLITS));
}
