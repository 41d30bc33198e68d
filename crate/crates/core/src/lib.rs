//! Continuous-variable quantum secure direct communication simulator.
//!
//! Gaussian states are tracked in shot-noise units (vacuum quadrature
//! variance 1). All randomness flows from a [`rng::RngSeed`] through
//! independent ChaCha20 streams, so runs are reproducible bit for bit.

pub mod gf2;
pub mod numerics;
pub mod rng;

pub mod gaussian_core;
pub mod gaussian_map;
pub mod mask_codec;
pub mod channel_model;
pub mod oam_mux;
pub mod security_capacity;
pub mod estimation;
pub mod protocol_engine;
