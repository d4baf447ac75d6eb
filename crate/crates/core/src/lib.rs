//! Survival and extinction of colonies struck by binomial and geometric
//! catastrophes, with and without dispersal of the survivors.

pub mod effects;
pub mod error;
pub mod offspring;

pub use effects::{Model, ModelParams};
pub use error::{Error, Result};
pub mod analytic;
pub mod numfmt;
pub mod simulate;
pub mod sweep;
pub mod validate;
