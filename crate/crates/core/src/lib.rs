//! Repliable onion routing with a nymserverless Sphinx packet format.

pub mod error;
pub mod crypto;
pub mod kem;
pub mod packet;
pub mod events;
pub mod node;
pub mod ideal;
pub mod sim;
pub mod games;

pub use error::{Error, Result};
