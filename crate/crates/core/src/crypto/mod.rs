//! Group arithmetic, random oracles, PRG, MAC and the wide-block PRP.

pub mod group;
pub mod oracle;
pub mod prg;
pub mod mac;
pub mod prp;
pub mod vectors;

pub use group::{Group, GroupElement, GroupParams, Scalar};
pub use oracle::OracleTag;
pub use prp::Lioness;

use crate::error::{arg, Result};

/// κ-byte symmetric key.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymKey(Vec<u8>);

impl SymKey {
    pub fn new(bytes: Vec<u8>, kappa: usize) -> Result<Self> {
        if bytes.len() != kappa {
            return arg(format!("key length {} != kappa {}", bytes.len(), kappa));
        }
        Ok(SymKey(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for SymKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymKey({})", hex::encode(&self.0))
    }
}

/// Fixes the group, κ and the hop bound that caps PRG output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CryptoSuite {
    pub group: Group,
    pub kappa: usize,
    pub max_hops: usize,
}

impl CryptoSuite {
    pub fn new(group: Group, kappa: usize, max_hops: usize) -> Result<Self> {
        if !(2..=32).contains(&kappa) {
            return arg("kappa must be in 2..=32 bytes");
        }
        if max_hops == 0 {
            return arg("max_hops must be positive");
        }
        Ok(CryptoSuite { group, kappa, max_hops })
    }

    pub fn prg_cap(&self) -> usize {
        (2 * self.max_hops + 3) * self.kappa
    }
}

impl Default for CryptoSuite {
    fn default() -> Self {
        CryptoSuite { group: Group::Ristretto255, kappa: 16, max_hops: 5 }
    }
}

pub fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}
