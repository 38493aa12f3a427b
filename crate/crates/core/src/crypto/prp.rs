//! LIONESS-style wide-block PRP over the whole payload.
//!
//! Block = L ‖ R with |L| = min(32, len/2). Four rounds:
//! R ^= S(L ^ K1); L ^= H_K2(R); R ^= S(L ^ K3); L ^= H_K4(R).

use sha2::{Digest, Sha256};

use super::mac::hmac256;
use super::prg::keystream;
use super::SymKey;
use crate::error::{arg, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lioness {
    block_len: usize,
}

fn round_keys(key: &SymKey) -> [[u8; 32]; 4] {
    let mut out = [[0u8; 32]; 4];
    for (i, k) in out.iter_mut().enumerate() {
        *k = Sha256::new()
            .chain_update([0x20 + i as u8])
            .chain_update(key.as_bytes())
            .finalize()
            .into();
    }
    out
}

impl Lioness {
    pub fn new(block_len: usize) -> Result<Self> {
        if block_len < 4 {
            return arg("prp block must be at least 4 bytes");
        }
        Ok(Lioness { block_len })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    fn split(&self) -> usize {
        (self.block_len / 2).min(32)
    }

    fn check(&self, block: &[u8]) -> Result<()> {
        if block.len() != self.block_len {
            return arg(format!("prp block length {} != {}", block.len(), self.block_len));
        }
        Ok(())
    }

    fn stream_round(&self, k: &[u8; 32], block: &mut [u8]) {
        let l = self.split();
        let mut sk = *k;
        for (a, b) in sk.iter_mut().zip(&block[..l]) {
            *a ^= b;
        }
        let mut ks = vec![0u8; self.block_len - l];
        keystream(&sk, &mut ks);
        for (r, s) in block[l..].iter_mut().zip(&ks) {
            *r ^= s;
        }
    }

    fn hash_round(&self, k: &[u8; 32], block: &mut [u8]) {
        let l = self.split();
        let h = hmac256(k, &block[l..]);
        for (a, b) in block[..l].iter_mut().zip(&h) {
            *a ^= b;
        }
    }

    pub fn encrypt(&self, key: &SymKey, block: &mut [u8]) -> Result<()> {
        self.check(block)?;
        let k = round_keys(key);
        self.stream_round(&k[0], block);
        self.hash_round(&k[1], block);
        self.stream_round(&k[2], block);
        self.hash_round(&k[3], block);
        Ok(())
    }

    pub fn decrypt(&self, key: &SymKey, block: &mut [u8]) -> Result<()> {
        self.check(block)?;
        let k = round_keys(key);
        self.hash_round(&k[3], block);
        self.stream_round(&k[2], block);
        self.hash_round(&k[1], block);
        self.stream_round(&k[0], block);
        Ok(())
    }

    pub fn prp_enc(&self, key: &SymKey, block: &[u8]) -> Result<Vec<u8>> {
        let mut b = block.to_vec();
        self.encrypt(key, &mut b)?;
        Ok(b)
    }

    pub fn prp_dec(&self, key: &SymKey, block: &[u8]) -> Result<Vec<u8>> {
        let mut b = block.to_vec();
        self.decrypt(key, &mut b)?;
        Ok(b)
    }
}
