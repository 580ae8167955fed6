//! Hybrid plug-in-socket insertion: an SE(3) potential-field controller with
//! a residual policy trained by PPO under a success-driven noise curriculum,
//! evaluated in a quasi-static contact simulator.

pub mod env;
pub mod experiment;
pub mod geometry;
pub mod policy;
pub mod potential_field;
pub mod train;
