//! A small deterministic neural-network core: dense layers, sigmoid/ReLU
//! activations, inverted dropout, BCE and MSE losses, AdamW, and central
//! finite differences for gradient verification.
//!
//! Everything runs in `f64` on plain `Vec`s. There is no autodiff graph;
//! [`Mlp::forward`] returns a [`ForwardPass`] cache that [`Mlp::backward`]
//! consumes.

mod adamw;
mod gradcheck;
mod layer;
mod loss;
mod rng;

pub use adamw::{AdamWConfig, AdamWState};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error};
pub use layer::{
    sigmoid, Activation, Backward, DenseLayer, ForwardPass, Gradients, LayerGrad, LayerSpec, Mlp, Mode,
};
pub use loss::{bce_grad, bce_loss, mean_mse, mse_grad, mse_loss, Loss, PROB_EPS};
pub use rng::Rng;
