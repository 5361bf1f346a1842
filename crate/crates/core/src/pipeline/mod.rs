//! Data preparation: ingest, clean, resample, normalize, window and split.

mod ingest;
mod normalize;
mod prepare;
mod resample;
mod split;
mod table;
mod window;

pub use ingest::{ingest, parse_timestamp, Schema};
pub use normalize::{fit_column, FeatureRange, NormalizationParams};
pub use prepare::{DatasetManifest, PreparedDataset};
pub use resample::{compute_sdv, derive_sdv_column, interpolate_weekly_to_daily, resample_daily_mean};
pub use split::{split_chronological, SplitCounts, SplitSpec};
pub use table::{Column, Interval, TimeSeriesTable};
pub use window::{make_windows, SupervisedWindowSet};
