//! Heterogeneously coupled neural networks and their mean-field reductions.
//!
//! The crate covers three levels of description of the same systems:
//!
//! - microscopic simulation of firing-rate networks with quenched random
//!   weights or stochastic synaptic noise ([`network`]) and of FitzHugh-Nagumo
//!   networks with random electrical synapses ([`fhn`]);
//! - closed mean/variance ODEs of the stochastic mean-field limit, with
//!   equilibrium continuation-free regime classification ([`moments`]);
//! - a damped fixed-point solver for the two-time covariance of the quenched
//!   mean-field equations ([`dmft`]).
//!
//! [`analysis`] holds the shared diagnostics (oscillation, synchrony and
//! trajectory divergence). Data-parallel loops go through [`par`], which uses
//! rayon when the `parallel` feature is enabled and plain iterators otherwise;
//! every result is bit-identical between the two paths.

pub mod analysis;
pub mod dense;
pub mod dmft;
pub mod error;
pub mod fhn;
pub mod model;
pub mod moments;
pub mod network;
pub mod ode;
pub mod par;
pub mod rng;
pub mod special;
#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use model::{
    CouplingSpec, DisorderKind, InitialLaw, InputSchedule, ModelSpec, PopulationSpec,
    SigmoidSpec, TimeGrid,
};
pub use rng::{SeededStream, StreamId, StreamKind};
