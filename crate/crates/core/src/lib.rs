pub mod baselines;
pub mod channel;
pub mod error;
pub mod features;
pub mod harness;
pub mod nn;
pub mod objective;
pub mod rng;
pub mod sdr;
