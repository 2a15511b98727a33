//! Dense linear algebra, datasets, the MLP and sparse gradient exchange.

mod dataset;
mod matrix;
mod mlp;
mod sparse;
mod train;

pub use dataset::{load_csv, load_idx, parse_idx, read_csv, BlobSpec, Dataset, GaussianBlobs};
pub use matrix::Matrix;
pub use mlp::{argmax, parameter_count, DenseGradient, InverseTimeDecay, MlpModel};
pub use sparse::{apply_updates, select_largest, SparseUpdate};
pub use train::{sqrt_lot_size, SgdTrainer};
