//! Numerical kernels shared by every stage of the pipeline.

pub mod adamw;
pub mod filters;
pub mod gradcheck;
pub mod lstm;
pub mod matrix;
pub mod mlp;
pub mod params;
pub mod pca;
pub mod stats;

pub use adamw::AdamWState;
pub use lstm::LstmParams;
pub use matrix::Matrix;
pub use mlp::{Activation, MlpParams};
pub use params::Parameters;
