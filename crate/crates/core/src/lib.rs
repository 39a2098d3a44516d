//! Steady state, stability and output squeezing spectrum of a driven
//! microwave-cavity / magnon / phonon / optical-cavity system.
//!
//! The usual pipeline is
//!
//! ```
//! use optomagnon::model::SystemParams;
//! use optomagnon::spectrum::SpectrumEngine;
//! use optomagnon::steady_state::solve_steady_state;
//!
//! let params = SystemParams::reference();
//! let ss = solve_steady_state(&params)?;
//! let engine = SpectrumEngine::new(&params, &ss)?;
//! let s = engine.density(0.65)?; // omega in units of omega_b
//! assert!(s < 0.5);
//! # Ok::<(), optomagnon::error::Error>(())
//! ```
//!
//! Sweeps over detuning, phase, decay rate and temperature live in [`sweep`],
//! configuration files in [`config`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod spectrum;
pub mod steady_state;
pub mod sweep;
pub mod units;
pub mod validate;

pub use error::{Error, Result};
