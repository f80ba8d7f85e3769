//! Transfer-aware label embedding projection for multi-label zero-shot
//! learning.
//!
//! Instance features `X` and label word embeddings `M` are co-projected
//! into a shared space, `F(i, c) = Xᵢ W Uᵀ M_cᵀ`, trained with a calibrated
//! max-margin ranking loss on seen labels. A transfer-aware penalty on `U`
//! (and optionally a Laplacian over auxiliary label similarities) shapes
//! the projected label geometry so that rankings carry over to unseen
//! labels. Training alternates exact dual coordinate passes over `Ψ` with
//! a closed-form eigenvector update of `U`.

pub mod eigen;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod qp;
pub mod regularizers;
pub mod scoring;
pub mod similarity;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{normalize_rows, validate, Dataset, LabelSpace, ModelParams, ValidationReport, Violation};
