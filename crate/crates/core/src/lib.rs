//! Low-rank orthogonal tensor PCA for third-order `genes × regions × times` data.
//!
//! The estimator combines an unfolding initializer (SVD of the mode-1
//! matricization, then a rank-one split of each reshaped right singular
//! vector) with a noise-corrected power iteration. Around it sit the
//! simulation generators, the estimation-error metric, k-means with the
//! adjusted Rand index, a seeded Monte-Carlo runner, and file I/O.
//!
//! ```
//! use tenspca::{decomp, linalg::SeededRng, synth};
//!
//! let mut rng = SeededRng::new(7);
//! let (x, truth) = synth::gen_rank1(30, 5.0, 1.0, &mut rng).unwrap();
//! let model = decomp::tensor_pca(&x, 1, &decomp::PowerOpts::default()).unwrap();
//! let err = synth::estimation_error(&model.components[0], &truth.components[0]).unwrap();
//! assert!(err < 0.2);
//! ```

pub mod decomp;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod synth;
pub mod tensor;

pub use decomp::{Component, PowerOpts, SigmaMode, TpcaModel, Variant};
pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::SeededRng;
pub use tensor::{Matrix, Tensor3, Vector};
