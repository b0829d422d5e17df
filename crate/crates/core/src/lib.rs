//! Exact enumeration and uniform sampling of level-k phylogenetic networks.
//!
//! The pipeline: enumerate generators, turn them into the exponential
//! generating series of head structures, tilt that series into a critical
//! offspring law, sample a conditioned Galton-Watson tree, decorate it with
//! uniform head structures and blow it up into a network.

pub mod bruteforce;
pub mod canon;
pub mod constants;
pub mod generators;
pub mod heads;
pub mod network;
pub mod offspring;
pub mod parallel;
pub mod sampler;
pub mod series;
pub mod stats;
pub mod verify;
