//! File formats and subcommands of the `qassert` tool.
//!
//! The workflow is split into steps that communicate through files in one
//! output directory:
//!
//! ```text
//! qassert translate prog.qasm --out run      # run/slice_<k>.qasm + run/slices.json
//! qassert simulate run/slices.json --shots 8192 --device dev.json
//! qassert verify run/slices.json --device dev.json --report run/report.json
//! ```
//!
//! Counts from a real device can replace the `simulate` step as long as they
//! follow the [`CountsFile`](formats::CountsFile) layout. `qassert check` runs
//! all three steps in one go.

pub mod commands;
pub mod files;
pub mod formats;

pub use commands::{
    amplitudes, check, recommend, simulate, translate, translate_source, verify, CheckArgs, RecommendArgs,
    SimulateArgs, Translation, VerifyArgs,
};
