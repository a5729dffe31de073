//! Dataset ingestion, ranking, IR metrics and attention export.

mod dataset;
mod export;
mod metrics;

pub use dataset::{load_dataset, read_dataset, write_dataset, Candidate, LoadMode, LoadOptions, QAExample};
pub use export::{
    attention_records, export_attention, read_attention, write_attention, AttentionRecord,
    ATTENTION_SCHEMA_VERSION,
};
pub use metrics::{
    accuracy_by_answer_length, evaluate, mean_average_precision, mean_reciprocal_rank,
    precision_at_1, rank_all, rank_pool, LengthBucket, Metrics, RankedEntry, RankedPool,
};
