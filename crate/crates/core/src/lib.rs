//! Local statistics with bounded dependency: exact moments, skewness-corrected tail
//! approximations, moderate-deviation range formulas and a deterministic parallel Monte
//! Carlo harness.
//!
//! `W = sum_i xi_i` where each `xi_i` is a function of a small set `I_i` of independent
//! base variables. The main entry points are [`model::LocalStatisticModel`],
//! [`moments::moments_exact`], [`tails::skew_corrected_tail`] and [`mc::estimate_tails`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod deps;
pub mod error;
pub mod mc;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod report;
pub mod special;
pub mod sum;
pub mod tails;
pub mod validation;

pub use error::{Error, Result};
