//! Loss, optimizer, schedule, temporal split and the training loop.

mod adam;
mod loss;
mod schedule;
mod split;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use loss::smoothed_cross_entropy;
pub use schedule::{lr_at, EarlyStopping, Verdict};
pub use split::{make_temporal_split, split_by_year, Partition, SplitBoundaries, TemporalSplit};
pub use trainer::{
    history_csv, predict_with, write_history_csv, BatchBuilder, HistoryRow, SamplingConfig,
    TrainConfig, TrainOutcome, Trainer,
};
