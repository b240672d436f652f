//! Joint neural translation and dependency parsing.
//!
//! The decoder of an attention-based encoder/decoder translator doubles as
//! the word source of a transition-based parser: a stack LSTM and an action
//! history LSTM predict labeled arc-standard actions, and the decoder is
//! advanced exactly once per SHIFT. Training maximizes the joint likelihood
//! of words and actions; inference can run the translator alone (the parser
//! components are dropped) or greedily decode a translation together with
//! its dependency tree.
//!
//! The crate is `no_std`-compatible (with `alloc`); file IO, the CLI, and
//! on-disk formats live in the companion `parslate-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// Numeric kernels index parallel arrays, and frozen reference constants
// keep their full published digits.
#![allow(clippy::needless_range_loop, clippy::excessive_precision)]

extern crate alloc;

pub mod checkpoint;
pub mod encdec;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod infer;
pub mod lstm;
pub mod model;
pub mod oracle;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod trainer;
pub mod transition;

pub use error::{CoreError, Result};
pub use tensor::{Real, Tensor};
