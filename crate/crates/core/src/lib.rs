//! Mutual-coupling-aware channel estimation and beamforming for active
//! reconfigurable intelligent surfaces.
//!
//! Modules follow the processing chain: [`channel`] synthesizes subchannels
//! and the scattering matrix, [`training`] produces uplink pilots and
//! observations, [`dict`] builds dictionaries and sensing operators,
//! [`estimate`] runs sparse recovery, [`beamform`] optimizes the downlink and
//! [`exp`] runs seeded Monte-Carlo sweeps.

pub mod beamform;
pub mod channel;
pub mod dict;
pub mod error;
pub mod estimate;
pub mod exp;
pub mod linalg;
pub mod training;

pub use channel::{
    Angle2D, ArrayGeometry, ChannelPair, PathSet, RISConfig, Role, ScatteringMatrix,
    ScatteringOrigin,
};
pub use error::{Error, Result};
pub use linalg::{C64, CMat, CVec};
