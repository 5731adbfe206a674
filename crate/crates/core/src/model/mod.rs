//! Geometry, line-of-sight channel synthesis and rate evaluation shared by
//! every optimizer.
//!
//! Rates are computed in nats internally and reported in bits/s/Hz.

mod channel;
mod geometry;
mod params;

pub use channel::{
    free_space_response, guided_response, inner, multicast_rate_bits, multicast_rate_nats,
    pa_coefficient, ChannelState, TransmitBeamformer,
};
pub use geometry::{
    distance, region_y_center, region_y_range, sample_users, sample_users_with, LayoutViolation,
    PinchingLayout, UserSet, WaveguideLayout, POSITION_TOL,
};
pub use params::{dbm_to_watts, watts_to_dbm, SystemConfig, SystemParams, SPEED_OF_LIGHT};
