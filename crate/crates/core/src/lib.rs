//! Precision of frequency standards built from n two-level ions under
//! independent dephasing.
//!
//! The crate covers uncorrelated and GHZ Ramsey schemes, the generalized
//! Ramsey scheme that measures the collective operator S_x, and
//! Fisher-information optimal measurements on the permutation- and
//! flip-symmetric family of partially entangled states.

pub mod cli;
pub mod collective;
pub mod error;
pub mod evolution;
pub mod fisher;
pub mod optimize;
pub mod qstate;
pub mod ramsey;

pub use error::{Error, Result};
