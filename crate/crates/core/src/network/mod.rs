//! Convergent RNN: architecture, parameters, states and transition dynamics.

mod checkpoint;
mod dynamics;
mod spec;
mod state;
mod theta;

pub use checkpoint::Checkpoint;
pub use dynamics::{
    phi, phi_grad_state, predict, relax, sigma, sigma_prime, step, Dynamics, PreActivations, Relaxation,
};
pub(crate) use dynamics::argmax;
pub use spec::{InputShape, ModelSpec, ProjectionSpec};
pub use state::{InputBundle, LayerId, NetworkState};
pub use theta::{ConnectionId, Theta};
