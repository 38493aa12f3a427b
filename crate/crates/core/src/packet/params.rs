use serde::{Deserialize, Serialize};

use crate::crypto::{CryptoSuite, Group, Lioness};
use crate::error::{arg, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FillerMode {
    Random,
    /// Zero-filled final header layer; leaks path length to the exit.
    LegacyZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FormatParams {
    pub kappa: usize,
    pub max_hops: usize,
    pub addr_len: usize,
    pub payload_len: usize,
    pub group: Group,
    pub filler: FillerMode,
}

impl Default for FormatParams {
    fn default() -> Self {
        FormatParams {
            kappa: 16,
            max_hops: 5,
            addr_len: 8,
            payload_len: 1024,
            group: Group::Ristretto255,
            filler: FillerMode::Random,
        }
    }
}

/// Fixed-width relay or receiver name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(Vec<u8>);

impl Address {
    pub fn new(params: &FormatParams, name: &str) -> Result<Self> {
        Self::from_bytes(params, name.as_bytes())
    }

    /// Zero-pads `bytes` to `addr_len`.
    pub fn from_bytes(params: &FormatParams, bytes: &[u8]) -> Result<Self> {
        if bytes.len() > params.addr_len {
            return arg(format!("address {:?} longer than {} bytes", String::from_utf8_lossy(bytes), params.addr_len));
        }
        let mut v = bytes.to_vec();
        v.resize(params.addr_len, 0);
        Ok(Address(v))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn name(&self) -> String {
        let end = self.0.iter().rposition(|&b| b != 0).map_or(0, |i| i + 1);
        String::from_utf8_lossy(&self.0[..end]).into_owned()
    }
}

impl std::fmt::Debug for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Address({})", self.name())
    }
}

impl std::fmt::Display for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

pub(crate) const LEN_PREFIX: usize = 4;

impl FormatParams {
    pub fn validate(&self) -> Result<()> {
        CryptoSuite::new(self.group, self.kappa, self.max_hops)?;
        if self.addr_len == 0 || self.addr_len + 1 > self.kappa {
            return arg("need 1 <= addr_len and addr_len + 1 <= kappa");
        }
        if self.payload_len < self.kappa + self.addr_len + self.reply_block_len() + LEN_PREFIX + 1 {
            return Err(Error::Argument(format!(
                "payload_len {} too small; need at least {}",
                self.payload_len,
                self.kappa + self.addr_len + self.reply_block_len() + LEN_PREFIX + 1
            )));
        }
        Lioness::new(self.payload_len)?;
        Ok(())
    }

    pub fn suite(&self) -> CryptoSuite {
        CryptoSuite { group: self.group, kappa: self.kappa, max_hops: self.max_hops }
    }

    pub fn prp(&self) -> Lioness {
        Lioness::new(self.payload_len).expect("validated payload length")
    }

    pub fn alpha_len(&self) -> usize {
        self.group.element_len()
    }

    pub fn beta_len(&self) -> usize {
        (2 * self.max_hops + 1) * self.kappa
    }

    pub fn header_len(&self) -> usize {
        self.alpha_len() + self.beta_len() + self.kappa
    }

    pub fn onion_len(&self) -> usize {
        self.header_len() + self.payload_len
    }

    /// first_hop ‖ η₀ ‖ k̃
    pub fn reply_block_len(&self) -> usize {
        self.addr_len + self.header_len() + self.kappa
    }

    pub fn max_message_len(&self) -> usize {
        self.payload_len - self.kappa - self.addr_len - self.reply_block_len() - LEN_PREFIX
    }

    /// Random (or zero) bytes closing the final β layer of an n-hop header.
    pub fn final_filler_len(&self, n: usize) -> usize {
        (2 * (self.max_hops - n) + 1) * self.kappa
    }
}
