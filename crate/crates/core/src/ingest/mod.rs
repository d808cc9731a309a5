//! From NGSIM-format CSV to lane-change episodes and fixed-length training windows.
//!
//! Positions are converted from feet to metres on the way in; everything
//! downstream works in SI units on a 0.1 s grid.

mod episode;
pub mod format;
mod parse;
mod samples;
pub mod synthetic;
mod trajectory;

pub use episode::{attach_neighbors, DropReason, Episode, NEIGHBOR_RANGE};
pub use parse::{parse_csv, parse_reader, RawRecord};
pub use samples::{
    frame_features, make_samples, stratified_split, Action, Sample, SampleSet, Split, Style,
    AUX_DIM, FEATURE_DIM, INNER_DIM, INTER_DIM, SEQ_LEN,
};
pub(crate) use trajectory::gradient;
pub use trajectory::{
    filter_vehicles, group_vehicles, smooth, to_si, FilterOutcome, FilterReason, SmoothOutcome,
    Trajectory, FT_TO_M, MEDIAN_WINDOW, SG_ORDER, SG_WINDOW, SPAN_MAX_M, SPAN_MIN_M,
};

pub(crate) mod pipeline;
pub use pipeline::{ingest_records, IngestConfig, IngestOutput, IngestReport};
