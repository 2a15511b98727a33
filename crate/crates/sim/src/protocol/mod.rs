pub mod baselines;
pub mod fdpddl;
pub mod party;
pub mod trace;

pub use fdpddl::{initial_model, model_dims, pretrain, Fdpddl, FdpddlOutcome, Pretrained};
pub use trace::{CellTrace, RoundRecord};
