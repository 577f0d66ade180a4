//! Ridge after model selection for mixed-frequency nowcasting.
//!
//! Targeted t-statistic preselection of high-dimensional predictors
//! ([`screen`]), ridge with a GCV-chosen penalty ([`ridge`]), weekly bridge
//! equations over ragged-edge panels ([`bridge`], [`dataset`]) and a Monte
//! Carlo engine for the simulation study ([`mc`]).

// Negated float comparisons such as `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod dataset;
pub mod error;
pub mod mc;
pub mod par;
pub mod ridge;
pub mod screen;
pub mod synthetic;

pub use error::{Error, Result};
pub use par::Exec;
