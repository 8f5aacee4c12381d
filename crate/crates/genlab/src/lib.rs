//! Generalization-analysis laboratory.
//!
//! The crate builds trainable feed-forward DAG networks whose outputs admit
//! an exact path-space reformulation, trains them with plain and two-phase
//! (freeze) SGD, and audits generalization-gap decompositions and
//! concentration bounds against finite ground-truth distributions where
//! every expectation is computable in closed form.
//!
//! Modules:
//! - [`linalg`]: dense symmetric eigendecomposition, null spaces, norms.
//! - [`netdag`]: DAG networks, forward/backward, path materialization.
//! - [`distribution`]: finite distributions, datasets, exact moments, IDX.
//! - [`train`]: SGD with momentum, DARC1 regularization, two-phase training.
//! - [`bounds`]: gap decomposition, validation/two-phase/margin bounds,
//!   scalar and matrix Bernstein thresholds.
//! - [`linmem`]: over-parameterized linear memorization and norm inflation.

pub mod bounds;
pub mod distribution;
pub mod linalg;
pub mod linmem;
pub mod netdag;
pub mod rng;
pub mod train;
