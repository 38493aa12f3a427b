//! Random oracles h_b, h_ρ, h_μ, h_π as domain-separated hashes.

use sha2::{Digest, Sha256, Sha512};

use super::{CryptoSuite, GroupElement, Scalar, SymKey};
use crate::error::Result;

const PREFIX_HB: u8 = 0x01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum OracleTag {
    Rho,
    Mu,
    Pi,
}

impl OracleTag {
    pub const ALL: [OracleTag; 3] = [OracleTag::Rho, OracleTag::Mu, OracleTag::Pi];

    fn prefix(self) -> u8 {
        match self {
            OracleTag::Rho => 0x02,
            OracleTag::Mu => 0x03,
            OracleTag::Pi => 0x04,
        }
    }
}

impl CryptoSuite {
    /// h_b(α, s) in Z_q^*. A zero reduction is re-hashed with a counter.
    pub fn ro_hb(&self, alpha: &GroupElement, s: &GroupElement) -> Result<Scalar> {
        self.group.decode(alpha.as_bytes())?;
        self.group.decode(s.as_bytes())?;
        for ctr in 0u32.. {
            let mut h = Sha512::new();
            h.update([PREFIX_HB]);
            h.update(alpha.as_bytes());
            h.update(s.as_bytes());
            h.update(ctr.to_be_bytes());
            let wide: [u8; 64] = h.finalize().into();
            if let Some(b) = self.group.scalar_from_wide(&wide) {
                return Ok(b);
            }
        }
        unreachable!()
    }

    pub fn ro_hsym(&self, tag: OracleTag, s: &GroupElement) -> Result<SymKey> {
        self.group.decode(s.as_bytes())?;
        let mut h = Sha256::new();
        h.update([tag.prefix()]);
        h.update(s.as_bytes());
        let out = h.finalize();
        SymKey::new(out[..self.kappa].to_vec(), self.kappa)
    }

    /// h_*(s) = h_ρ(s) ‖ h_μ(s) ‖ h_π(s).
    pub fn h_star(&self, s: &GroupElement) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(3 * self.kappa);
        for t in OracleTag::ALL {
            out.extend_from_slice(self.ro_hsym(t, s)?.as_bytes());
        }
        Ok(out)
    }
}
