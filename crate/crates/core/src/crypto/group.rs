//! Prime-order groups behind one interface: Ristretto255 for real use and
//! the order-5 subgroup of Z_11^* for hand-checkable tests.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_COMPRESSED;
use curve25519_dalek::ristretto::CompressedRistretto;
use curve25519_dalek::scalar::Scalar as DalekScalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOY_P: u64 = 11;
const TOY_Q: u64 = 5;
const TOY_G: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Toy11,
    Ristretto255,
}

/// Exponent in Z_q^*, stored as 32 little-endian bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scalar([u8; 32]);

impl Scalar {
    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    fn from_small(v: u64) -> Self {
        let mut b = [0u8; 32];
        b[..8].copy_from_slice(&v.to_le_bytes());
        Scalar(b)
    }

    fn small(&self) -> u64 {
        u64::from_le_bytes(self.0[..8].try_into().unwrap())
    }
}

impl std::fmt::Debug for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.0))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(Vec<u8>);

impl GroupElement {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupElement({})", hex::encode(&self.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupParams {
    pub id: &'static str,
    pub generator: GroupElement,
    /// Group order, little-endian.
    pub order: [u8; 32],
    pub element_len: usize,
}

fn modpow(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

fn toy_member(v: u64) -> bool {
    (1..TOY_P).contains(&v) && modpow(v, TOY_Q, TOY_P) == 1
}

impl Group {
    pub fn params(self) -> GroupParams {
        match self {
            Group::Toy11 => GroupParams {
                id: "toy-z11-order5",
                generator: GroupElement(vec![TOY_G]),
                order: Scalar::from_small(TOY_Q).0,
                element_len: 1,
            },
            Group::Ristretto255 => {
                // l = 2^252 + 27742317777372353535851937790883648493
                let mut order = [0u8; 32];
                order.copy_from_slice(&hex::decode(
                    "edd3f55c1a631258d69cf7a2def9de1400000000000000000000000000000010",
                )
                .unwrap());
                GroupParams {
                    id: "ristretto255",
                    generator: GroupElement(RISTRETTO_BASEPOINT_COMPRESSED.to_bytes().to_vec()),
                    order,
                    element_len: 32,
                }
            }
        }
    }

    pub fn element_len(self) -> usize {
        match self {
            Group::Toy11 => 1,
            Group::Ristretto255 => 32,
        }
    }

    pub fn generator(self) -> GroupElement {
        self.params().generator
    }

    /// Rejects malformed encodings and the identity.
    pub fn decode(self, bytes: &[u8]) -> Result<GroupElement> {
        if bytes.len() != self.element_len() {
            return Err(Error::Decode);
        }
        match self {
            Group::Toy11 => {
                let v = bytes[0] as u64;
                if toy_member(v) && v != 1 {
                    Ok(GroupElement(bytes.to_vec()))
                } else {
                    Err(Error::Decode)
                }
            }
            Group::Ristretto255 => {
                let p = CompressedRistretto::from_slice(bytes)
                    .map_err(|_| Error::Decode)?
                    .decompress()
                    .ok_or(Error::Decode)?;
                if p == curve25519_dalek::RistrettoPoint::identity() {
                    return Err(Error::Decode);
                }
                Ok(GroupElement(bytes.to_vec()))
            }
        }
    }

    pub fn scalar_from_u64(self, v: u64) -> Result<Scalar> {
        match self {
            Group::Toy11 if v == 0 || v >= TOY_Q => Err(Error::InvalidScalar),
            Group::Ristretto255 if v == 0 => Err(Error::InvalidScalar),
            _ => Ok(Scalar::from_small(v)),
        }
    }

    pub fn scalar_from_bytes(self, bytes: [u8; 32]) -> Result<Scalar> {
        match self {
            Group::Toy11 => {
                if bytes[8..].iter().any(|&b| b != 0) {
                    return Err(Error::InvalidScalar);
                }
                self.scalar_from_u64(Scalar(bytes).small())
            }
            Group::Ristretto255 => {
                let s: Option<DalekScalar> = DalekScalar::from_canonical_bytes(bytes).into();
                match s {
                    Some(s) if s != DalekScalar::ZERO => Ok(Scalar(bytes)),
                    _ => Err(Error::InvalidScalar),
                }
            }
        }
    }

    /// Reduces 64 uniform bytes mod q; `None` if the result is zero.
    pub fn scalar_from_wide(self, wide: &[u8; 64]) -> Option<Scalar> {
        match self {
            Group::Toy11 => {
                let v = u64::from_le_bytes(wide[..8].try_into().unwrap()) % TOY_Q;
                (v != 0).then(|| Scalar::from_small(v))
            }
            Group::Ristretto255 => {
                let s = DalekScalar::from_bytes_mod_order_wide(wide);
                (s != DalekScalar::ZERO).then(|| Scalar(s.to_bytes()))
            }
        }
    }

    pub fn random_scalar<R: RngCore + CryptoRng>(self, rng: &mut R) -> Scalar {
        loop {
            let mut wide = [0u8; 64];
            rng.fill(&mut wide[..]);
            if let Some(s) = self.scalar_from_wide(&wide) {
                return s;
            }
        }
    }

    pub fn scalar_mul(self, a: &Scalar, b: &Scalar) -> Scalar {
        match self {
            Group::Toy11 => Scalar::from_small(a.small() * b.small() % TOY_Q),
            Group::Ristretto255 => {
                let p = DalekScalar::from_bytes_mod_order(a.0) * DalekScalar::from_bytes_mod_order(b.0);
                Scalar(p.to_bytes())
            }
        }
    }

    /// base^e. The base must be a valid non-identity element.
    pub fn exp(self, base: &GroupElement, e: &Scalar) -> Result<GroupElement> {
        let base = self.decode(base.as_bytes())?;
        match self {
            Group::Toy11 => {
                let v = modpow(base.0[0] as u64, e.small(), TOY_P);
                Ok(GroupElement(vec![v as u8]))
            }
            Group::Ristretto255 => {
                let p = CompressedRistretto::from_slice(base.as_bytes())
                    .map_err(|_| Error::Decode)?
                    .decompress()
                    .ok_or(Error::Decode)?;
                let r = p * DalekScalar::from_bytes_mod_order(e.0);
                Ok(GroupElement(r.compress().to_bytes().to_vec()))
            }
        }
    }

    pub fn exp_g(self, e: &Scalar) -> GroupElement {
        self.exp(&self.generator(), e).expect("generator is valid")
    }
}
