//! Sphinx RO-KEM: α chain with blinding factors.

pub mod game;

use rand::{CryptoRng, RngCore};

use crate::crypto::{CryptoSuite, GroupElement, OracleTag, Scalar, SymKey};
use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemKeyPair {
    pub sk: Scalar,
    pub pk: GroupElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSecrets {
    pub alpha: GroupElement,
    pub s: GroupElement,
    pub b: Scalar,
    pub k_rho: SymKey,
    pub k_mu: SymKey,
    pub k_pi: SymKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemChain {
    pub x: Scalar,
    pub layers: Vec<LayerSecrets>,
}

pub fn kem_keygen<R: RngCore + CryptoRng>(suite: &CryptoSuite, rng: &mut R) -> KemKeyPair {
    let sk = suite.group.random_scalar(rng);
    KemKeyPair { pk: suite.group.exp_g(&sk), sk }
}

pub fn keypair_from_sk(suite: &CryptoSuite, sk: Scalar) -> KemKeyPair {
    KemKeyPair { pk: suite.group.exp_g(&sk), sk }
}

fn derive(suite: &CryptoSuite, alpha: GroupElement, s: GroupElement) -> Result<LayerSecrets> {
    Ok(LayerSecrets {
        b: suite.ro_hb(&alpha, &s)?,
        k_rho: suite.ro_hsym(OracleTag::Rho, &s)?,
        k_mu: suite.ro_hsym(OracleTag::Mu, &s)?,
        k_pi: suite.ro_hsym(OracleTag::Pi, &s)?,
        alpha,
        s,
    })
}

/// Sender side: one layer per public key.
pub fn kem_chain_create(suite: &CryptoSuite, x: &Scalar, pubkeys: &[GroupElement]) -> Result<KemChain> {
    if pubkeys.is_empty() {
        return arg("empty public key list");
    }
    if pubkeys.len() > 2 * suite.max_hops {
        return arg("public key list longer than 2N");
    }
    let g = suite.group;
    let mut acc = *x;
    let mut alpha = g.exp_g(x);
    let mut layers = Vec::with_capacity(pubkeys.len());
    for y in pubkeys {
        let s = g.exp(y, &acc)?;
        let layer = derive(suite, alpha.clone(), s)?;
        acc = g.scalar_mul(&acc, &layer.b);
        alpha = g.exp(&alpha, &layer.b)?;
        layers.push(layer);
    }
    Ok(KemChain { x: *x, layers })
}

/// Relay side: s = α^sk and everything derived from it.
pub fn kem_decap(suite: &CryptoSuite, sk: &Scalar, alpha: &GroupElement) -> Result<LayerSecrets> {
    let s = suite.group.exp(alpha, sk)?;
    derive(suite, alpha.clone(), s)
}

pub fn kem_blind(suite: &CryptoSuite, alpha: &GroupElement, b: &Scalar) -> Result<GroupElement> {
    suite.group.exp(alpha, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Group;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn toy() -> CryptoSuite {
        CryptoSuite::new(Group::Toy11, 16, 5).unwrap()
    }

    #[test]
    fn toy_values() {
        let s = toy();
        let g = s.group;
        let kp = keypair_from_sk(&s, g.scalar_from_u64(2).unwrap());
        assert_eq!(kp.pk.as_bytes(), &[9]);
        let chain = kem_chain_create(&s, &g.scalar_from_u64(2).unwrap(), &[kp.pk.clone()]).unwrap();
        assert_eq!(chain.layers.len(), 1);
        assert_eq!(chain.layers[0].alpha.as_bytes(), &[9]);
        assert_eq!(chain.layers[0].s.as_bytes(), &[4]);
        let d = kem_decap(&s, &kp.sk, &g.decode(&[9]).unwrap()).unwrap();
        assert_eq!(d.s.as_bytes(), &[4]);
        let blinded = kem_blind(&s, &g.decode(&[9]).unwrap(), &g.scalar_from_u64(3).unwrap()).unwrap();
        assert_eq!(blinded.as_bytes(), &[3]);
        assert_eq!(blinded, g.exp_g(&g.scalar_from_u64(1).unwrap()));
    }

    #[test]
    fn empty_and_overlong_paths_rejected() {
        let s = CryptoSuite::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = s.group.random_scalar(&mut rng);
        assert!(kem_chain_create(&s, &x, &[]).is_err());
        let pks: Vec<_> = (0..11).map(|_| kem_keygen(&s, &mut rng).pk).collect();
        assert!(kem_chain_create(&s, &x, &pks[..10]).is_ok());
        assert!(kem_chain_create(&s, &x, &pks).is_err());
    }

    #[test]
    fn keygen_consistent_and_fresh() {
        let s = CryptoSuite::default();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut seen = HashSet::new();
        for _ in 0..100 {
            let kp = kem_keygen(&s, &mut rng);
            assert_eq!(s.group.exp_g(&kp.sk), kp.pk);
            assert!(seen.insert(kp.sk.to_bytes()));
        }
    }

    #[test]
    fn chain_invariants_and_decap_agreement() {
        for grp in [Group::Toy11, Group::Ristretto255] {
            let s = CryptoSuite::new(grp, 16, 5).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(3);
            for len in 1..=5 {
                for _ in 0..10 {
                    let kps: Vec<_> = (0..len).map(|_| kem_keygen(&s, &mut rng)).collect();
                    let x = grp.random_scalar(&mut rng);
                    let pks: Vec<_> = kps.iter().map(|k| k.pk.clone()).collect();
                    let chain = kem_chain_create(&s, &x, &pks).unwrap();
                    assert_eq!(chain.layers[0].alpha, grp.exp_g(&x));
                    let mut alpha = chain.layers[0].alpha.clone();
                    for (i, kp) in kps.iter().enumerate() {
                        let d = kem_decap(&s, &kp.sk, &alpha).unwrap();
                        assert_eq!(d, chain.layers[i]);
                        alpha = kem_blind(&s, &alpha, &d.b).unwrap();
                        if i + 1 < len {
                            assert_eq!(alpha, chain.layers[i + 1].alpha);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn blinding_freshness() {
        let s = CryptoSuite::default();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..100 {
            let pks: Vec<_> = (0..5).map(|_| kem_keygen(&s, &mut rng).pk).collect();
            let chain = kem_chain_create(&s, &s.group.random_scalar(&mut rng), &pks).unwrap();
            let alphas: HashSet<_> = chain.layers.iter().map(|l| l.alpha.clone()).collect();
            assert_eq!(alphas.len(), 5);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn chain_is_deterministic_and_blinds_forward(seed in any::<u64>(), len in 1usize..=5) {
                let s = CryptoSuite::default();
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let kps: Vec<_> = (0..len).map(|_| kem_keygen(&s, &mut rng)).collect();
                let pks: Vec<_> = kps.iter().map(|k| k.pk.clone()).collect();
                let x = s.group.random_scalar(&mut rng);
                let chain = kem_chain_create(&s, &x, &pks).unwrap();
                prop_assert_eq!(&kem_chain_create(&s, &x, &pks).unwrap(), &chain);
                for (i, kp) in kps.iter().enumerate() {
                    let l = &chain.layers[i];
                    prop_assert_eq!(&kem_decap(&s, &kp.sk, &l.alpha).unwrap(), l);
                    if i + 1 < len {
                        prop_assert_eq!(&kem_blind(&s, &l.alpha, &l.b).unwrap(), &chain.layers[i + 1].alpha);
                    }
                }
            }
        }
    }
}
