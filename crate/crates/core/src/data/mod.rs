//! Synthetic generators, the two-cluster heterogeneous splitter and CSV
//! ingestion for real tabular data.

mod hard;
mod ingest;
mod pool;
mod split;
mod toy;

pub use hard::{generate_hard_instance, hard_instance_optimum, HARD_TARGET};
pub use ingest::{ingest_csv, ingest_reader, CsvSchema, SensitiveSpec};
pub use pool::Pool;
pub use split::{split_heterogeneous, split_heterogeneous_indices, SplitConfig};
pub use toy::{generate_toy, ToyData, TOY_DIM, TOY_SENSITIVE_COL};
