//! Port-based teleportation with the pretty good measurement, built from
//! symmetric-group representations, Schur and twisted Schur transforms,
//! block-encodings and oblivious amplitude amplification.

pub mod amplify;
pub mod blockenc;
pub mod cli;
pub mod error;
pub mod la;
pub mod pbt;
pub mod schur;
pub mod simulate;
pub mod store;
pub mod symrep;
pub mod twisted;
pub mod verify;
pub mod young;

pub use error::{PbtError, Result};
pub use symrep::Perm;
pub use young::Partition;
