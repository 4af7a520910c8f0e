//! Target-quality lossy compression for grayscale and spectral images.
//!
//! A [`codecs::Codec`] is driven by one scalar control parameter; the
//! [`search`] module finds the parameter value at which a chosen
//! [`metrics::QualityMetric`] reaches a target within a tolerance.
//! [`multichannel`] applies the same search band by band to spectral cubes.

pub mod codecs;
pub mod imagecore;
pub mod metrics;
pub mod multichannel;
pub mod synthetic;
pub mod transform;
pub mod search;
