//! Data generation, ingestion, masking, splitting and model persistence.

pub mod csv_io;
pub mod model_io;
pub mod occlude;
pub mod splits;
pub mod synthetic;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv, Aggregate, CsvData};
pub use model_io::{from_bytes, load_model, load_saved, save_model, save_saved, to_bytes, SavedModel};
pub use occlude::occlude_blocks;
pub use splits::{rolling_splits, SplitSpec, Window};
pub use synthetic::{gen_synthetic, is_stable, SyntheticConfig, SyntheticTruth};
