//! Dense-network numerics: parameters, backprop, Adam, soft updates,
//! finite-difference checks and snapshots.

mod adam;
pub mod gradcheck;
mod matrix;
mod net;
pub mod snapshot;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use gradcheck::{grad_check, grad_check_sweep, GradCheckReport, GradCheckSweep};
pub use matrix::Matrix;
pub use net::{soft_update, ForwardCache, Gradients, Layer, NetConfig, NetworkParams, OutputHead};

/// [`NetworkParams::init`] as a free function.
pub fn init_params(config: &NetConfig, seed: u64) -> crate::Result<NetworkParams> {
    NetworkParams::init(config, seed)
}
