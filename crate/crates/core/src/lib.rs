//! Queue-length and waiting-time analysis for a fixed-capacity transit line
//! whose vehicles are held up by random short suspensions.
//!
//! Stations are numbered from 1 in every public function that takes a
//! station argument. Internally everything is 0-based.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod headway;
pub mod model;
pub mod roots;
pub mod sampling;
pub mod simulator;
pub mod solver;
pub mod special;

mod poly;

pub use error::{Error, Result};
pub use num_complex::Complex64;
