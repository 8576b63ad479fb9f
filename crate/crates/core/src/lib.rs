//! Through-the-wall radar simulation and inversion.
//!
//! [`fdtd`] time-steps Maxwell's equations on a 2D TM_z Yee grid, [`scene`]
//! samples and rasterizes wall/target layouts, [`dataset`] turns simulations
//! into labelled samples, and [`nn`] with [`trainer`] regress the wall and
//! target parameters back from the receiver time series.

pub mod dataset;
pub mod fdtd;
pub mod io;
pub mod nn;
pub mod par;
pub mod scene;
pub mod trainer;
