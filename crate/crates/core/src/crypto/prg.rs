//! PRG ρ: ChaCha20 keystream with a zero nonce.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use sha2::{Digest, Sha256};

use super::{CryptoSuite, SymKey};
use crate::error::{arg, Result};

const PREFIX_PRG: u8 = 0x10;

/// Uncapped keystream over arbitrary key material.
pub(crate) fn keystream(key: &[u8], out: &mut [u8]) {
    let k: [u8; 32] = Sha256::new().chain_update([PREFIX_PRG]).chain_update(key).finalize().into();
    let mut c = ChaCha20::new(&k.into(), &[0u8; 12].into());
    out.fill(0);
    c.apply_keystream(out);
}

impl CryptoSuite {
    pub fn prg(&self, key: &SymKey, out_len: usize) -> Result<Vec<u8>> {
        if out_len > self.prg_cap() {
            return arg(format!("prg request {out_len} exceeds cap {}", self.prg_cap()));
        }
        let mut out = vec![0u8; out_len];
        keystream(key.as_bytes(), &mut out);
        Ok(out)
    }
}
