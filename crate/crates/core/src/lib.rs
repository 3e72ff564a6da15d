//! Conformal differential geometry of surfaces in R³: conformal principal
//! curvatures, the invariant Ψ, osculating Dupin cyclides, Dupin and Darboux
//! line fields, surface–cyclide intersection curves and the prescribed
//! Dupin-foliation system.

pub mod catalog;
pub mod error;
pub mod exec;
pub mod intersect;
pub mod invariants;
pub mod io;
pub mod lines;
pub mod osculation;
pub mod prescribe;
pub mod series;
pub mod surface;

pub use error::{Error, Result};
