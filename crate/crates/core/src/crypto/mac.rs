//! MAC μ: HMAC-SHA256 truncated to κ bytes.

use hmac::{Hmac, Mac};
use sha2::Sha256;

use super::{CryptoSuite, SymKey};

pub(crate) fn hmac256(key: &[u8], data: &[u8]) -> [u8; 32] {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
    m.update(data);
    m.finalize().into_bytes().into()
}

impl CryptoSuite {
    pub fn mac(&self, key: &SymKey, data: &[u8]) -> Vec<u8> {
        hmac256(key.as_bytes(), data)[..self.kappa].to_vec()
    }

    pub fn mac_verify(&self, key: &SymKey, data: &[u8], tag: &[u8]) -> bool {
        let want = self.mac(key, data);
        // length is public; fold so every byte is touched
        want.len() == tag.len() && want.iter().zip(tag).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }
}
