//! Experiments built on the engines: shape, curvature, sectors,
//! stabilization, nested sectors, coexistence and the 1D interface.

pub mod coexist;
pub mod curvature;
pub mod nested;
pub mod oned;
pub mod sectors;
pub mod shape;
pub mod stabilize;
pub mod stats;
