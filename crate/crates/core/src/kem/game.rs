//! Sphinx-KEM-IND-CCA experiment.
//!
//! The oracles answer with the instantiated hashes, so a b=0 challenge is
//! exactly what an honest relay would decapsulate. The query lists mirror
//! the bookkeeping a reduction would keep; `bad` records whether the
//! adversary ever touched the challenge secret.

use rand::{CryptoRng, Rng, RngCore};
use serde::Serialize;

use super::{kem_decap, kem_keygen, KemKeyPair};
use crate::crypto::{CryptoSuite, GroupElement, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecapAnswer {
    Refused,
    Invalid,
    Keys { h_star: Vec<u8>, b: Scalar },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemSubmission {
    pub j: usize,
    /// The n-1 adversarial keys, in path order with position j omitted.
    pub pubkeys: Vec<GroupElement>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemAux {
    pub alpha0: GroupElement,
    pub h_star: Vec<Vec<u8>>,
    pub blinding: Vec<Scalar>,
    /// Only populated for white-box controls.
    pub sender_secret: Option<Scalar>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemChallenge {
    pub alpha_j: GroupElement,
    pub h_star_j: Vec<u8>,
    pub b_j: Scalar,
    pub tail_h_star: Vec<Vec<u8>>,
    pub tail_blinding: Vec<Scalar>,
}

#[derive(Serialize)]
struct Rec<'a> {
    step: &'a str,
    data: Vec<String>,
}

pub struct KemOracles {
    suite: CryptoSuite,
    honest: KemKeyPair,
    challenge_alpha: Option<GroupElement>,
    challenge_s: Option<GroupElement>,
    pub l: Vec<(GroupElement, Vec<u8>, Scalar)>,
    pub l_y: Vec<(GroupElement, Vec<u8>, Scalar)>,
    pub l_b: Vec<((GroupElement, GroupElement), Scalar)>,
    pub l_o: Vec<GroupElement>,
    pub l_h: Vec<GroupElement>,
    pub bad: bool,
    transcript: Vec<String>,
}

impl KemOracles {
    fn log(&mut self, step: &str, data: Vec<String>) {
        self.transcript.push(serde_json::to_string(&Rec { step, data }).unwrap());
    }

    pub fn public_key(&self) -> &GroupElement {
        &self.honest.pk
    }

    pub fn decap(&mut self, alpha: &GroupElement) -> DecapAnswer {
        let ans = if self.challenge_alpha.as_ref() == Some(alpha) {
            DecapAnswer::Refused
        } else {
            match kem_decap(&self.suite, &self.honest.sk, alpha) {
                Ok(ls) => {
                    let h_star = [ls.k_rho.as_bytes(), ls.k_mu.as_bytes(), ls.k_pi.as_bytes()].concat();
                    self.l_o.push(alpha.clone());
                    self.l.push((alpha.clone(), h_star.clone(), ls.b));
                    DecapAnswer::Keys { h_star, b: ls.b }
                }
                Err(_) => DecapAnswer::Invalid,
            }
        };
        let out = match &ans {
            DecapAnswer::Refused => "refused".to_string(),
            DecapAnswer::Invalid => "invalid".to_string(),
            DecapAnswer::Keys { h_star, b } => hex::encode([&h_star[..], &b.to_bytes()].concat()),
        };
        self.log("decap", vec![hex::encode(alpha.as_bytes()), out]);
        ans
    }

    pub fn h_star(&mut self, s: &GroupElement) -> Result<Vec<u8>> {
        let out = self.suite.h_star(s)?;
        if self.challenge_s.as_ref() == Some(s) {
            self.bad = true;
        }
        self.l_h.push(s.clone());
        self.log("h_star", vec![hex::encode(s.as_bytes()), hex::encode(&out)]);
        Ok(out)
    }

    pub fn h_b(&mut self, alpha: &GroupElement, s: &GroupElement) -> Result<Scalar> {
        let out = self.suite.ro_hb(alpha, s)?;
        if self.challenge_alpha.as_ref() == Some(alpha) && self.challenge_s.as_ref() == Some(s) {
            self.bad = true;
        }
        self.l_b.push(((alpha.clone(), s.clone()), out));
        self.log("h_b", vec![hex::encode(alpha.as_bytes()), hex::encode(s.as_bytes()), hex::encode(out.to_bytes())]);
        Ok(out)
    }
}

pub trait KemAdversary {
    fn name(&self) -> &str;
    fn submit(&mut self, oracles: &mut KemOracles, rng: &mut dyn RngCore) -> KemSubmission;
    fn guess(&mut self, aux: &KemAux, ch: &KemChallenge, oracles: &mut KemOracles, rng: &mut dyn RngCore) -> bool;
}

#[derive(Clone, Copy, Debug)]
pub struct KemGameConfig {
    pub suite: CryptoSuite,
    pub reveal_sender_secret: bool,
}

#[derive(Clone, Debug)]
pub struct KemGameOutcome {
    pub adversary_won: bool,
    pub b: bool,
    pub bad: bool,
    pub transcript: Vec<String>,
}

pub fn kem_game_run<R: RngCore + CryptoRng>(
    adversary: &mut dyn KemAdversary,
    config: &KemGameConfig,
    rng: &mut R,
) -> Result<KemGameOutcome> {
    let b: bool = rng.gen();
    kem_game_run_with_bit(adversary, config, b, rng)
}

pub fn kem_game_run_with_bit<R: RngCore + CryptoRng>(
    adversary: &mut dyn KemAdversary,
    config: &KemGameConfig,
    b: bool,
    rng: &mut R,
) -> Result<KemGameOutcome> {
    let suite = config.suite;
    let g = suite.group;
    let honest = kem_keygen(&suite, rng);
    let mut o = KemOracles {
        suite,
        honest,
        challenge_alpha: None,
        challenge_s: None,
        l: vec![],
        l_y: vec![],
        l_b: vec![],
        l_o: vec![],
        l_h: vec![],
        bad: false,
        transcript: vec![],
    };
    let pk_hex = hex::encode(o.honest.pk.as_bytes());
    o.log("pk", vec![pk_hex]);

    let sub = adversary.submit(&mut o, rng);
    let n = sub.pubkeys.len() + 1;
    o.log("submit", std::iter::once(sub.j.to_string()).chain(sub.pubkeys.iter().map(|y| hex::encode(y.as_bytes()))).collect());
    if n >= suite.max_hops {
        return Err(Error::Rejected(format!("n = {n} must be below N = {}", suite.max_hops)));
    }
    if sub.j >= n {
        return Err(Error::Rejected("position j out of range".into()));
    }
    let mut ys = sub.pubkeys.clone();
    ys.insert(sub.j, o.honest.pk.clone());
    for (i, y) in ys.iter().enumerate() {
        if g.decode(y.as_bytes()).is_err() {
            return Err(Error::Rejected("invalid public key".into()));
        }
        if ys[..i].contains(y) {
            return Err(Error::Rejected("public keys not distinct".into()));
        }
    }

    let x = g.random_scalar(rng);
    let mut acc = x;
    let mut alpha = g.exp_g(&x);
    let alpha0 = alpha.clone();
    let mut aux = KemAux {
        alpha0: alpha0.clone(),
        h_star: vec![],
        blinding: vec![],
        sender_secret: config.reveal_sender_secret.then_some(x),
    };
    let mut challenge = None;
    let mut tail_h = vec![];
    let mut tail_b = vec![];
    for (i, y) in ys.iter().enumerate() {
        let s = g.exp(y, &acc)?;
        let h = suite.h_star(&s)?;
        let bi = suite.ro_hb(&alpha, &s)?;
        let (h_given, b_used) = if i == sub.j {
            o.challenge_alpha = Some(alpha.clone());
            o.challenge_s = Some(s.clone());
            if b {
                let mut r1 = vec![0u8; 3 * suite.kappa];
                rng.fill(&mut r1[..]);
                (r1, g.random_scalar(rng))
            } else {
                (h, bi)
            }
        } else {
            o.l_y.push((alpha.clone(), h.clone(), bi));
            (h, bi)
        };
        if i < sub.j {
            aux.h_star.push(h_given);
            aux.blinding.push(b_used);
        } else if i == sub.j {
            challenge = Some((alpha.clone(), h_given, b_used));
        } else {
            tail_h.push(h_given);
            tail_b.push(b_used);
        }
        acc = g.scalar_mul(&acc, &b_used);
        alpha = g.exp(&alpha, &b_used)?;
    }
    let (alpha_j, h_star_j, b_j) = challenge.expect("j < n");
    let ch = KemChallenge { alpha_j, h_star_j, b_j, tail_h_star: tail_h, tail_blinding: tail_b };
    o.log(
        "aux",
        std::iter::once(hex::encode(aux.alpha0.as_bytes()))
            .chain(aux.h_star.iter().map(hex::encode))
            .chain(aux.blinding.iter().map(|s| hex::encode(s.to_bytes())))
            .collect(),
    );
    o.log(
        "challenge",
        vec![hex::encode(ch.alpha_j.as_bytes()), hex::encode(&ch.h_star_j), hex::encode(ch.b_j.to_bytes())]
            .into_iter()
            .chain(ch.tail_h_star.iter().map(hex::encode))
            .chain(ch.tail_blinding.iter().map(|s| hex::encode(s.to_bytes())))
            .collect(),
    );
    let guess = adversary.guess(&aux, &ch, &mut o, rng);
    o.log("guess", vec![(guess as u8).to_string()]);
    Ok(KemGameOutcome { adversary_won: guess == b, b, bad: o.bad, transcript: o.transcript })
}

/// Coin-flip adversary with a fixed oracle script.
pub struct GuessingKemAdversary {
    pub n: usize,
    pub j: usize,
}

fn fresh_keys(suite: &CryptoSuite, count: usize, rng: &mut dyn RngCore) -> Vec<GroupElement> {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let mut r = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::from_seed(seed);
    (0..count).map(|_| kem_keygen(suite, &mut r).pk).collect()
}

impl KemAdversary for GuessingKemAdversary {
    fn name(&self) -> &str {
        "guessing"
    }

    fn submit(&mut self, o: &mut KemOracles, rng: &mut dyn RngCore) -> KemSubmission {
        let suite = o.suite;
        let probe = fresh_keys(&suite, 1, rng).remove(0);
        o.decap(&probe);
        KemSubmission { j: self.j, pubkeys: fresh_keys(&suite, self.n - 1, rng) }
    }

    fn guess(&mut self, _aux: &KemAux, ch: &KemChallenge, o: &mut KemOracles, rng: &mut dyn RngCore) -> bool {
        o.decap(&ch.alpha_j);
        rng.next_u32() & 1 == 1
    }
}

/// Given the sender secret, recomputes s_j and compares h_*(s_j).
pub struct WhiteBoxKemAdversary {
    pub n: usize,
    pub j: usize,
}

impl KemAdversary for WhiteBoxKemAdversary {
    fn name(&self) -> &str {
        "white-box"
    }

    fn submit(&mut self, o: &mut KemOracles, rng: &mut dyn RngCore) -> KemSubmission {
        KemSubmission { j: self.j, pubkeys: fresh_keys(&o.suite, self.n - 1, rng) }
    }

    fn guess(&mut self, aux: &KemAux, ch: &KemChallenge, o: &mut KemOracles, rng: &mut dyn RngCore) -> bool {
        let Some(x) = aux.sender_secret else {
            return rng.next_u32() & 1 == 1;
        };
        let g = o.suite.group;
        let mut acc = x;
        for b in &aux.blinding {
            acc = g.scalar_mul(&acc, b);
        }
        let pk = o.public_key().clone();
        let Ok(s_j) = g.exp(&pk, &acc) else {
            return false;
        };
        match o.h_star(&s_j) {
            Ok(h) => h != ch.h_star_j,
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Group;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn cfg(reveal: bool) -> KemGameConfig {
        KemGameConfig { suite: CryptoSuite::default(), reveal_sender_secret: reveal }
    }

    #[test]
    fn rejects_bad_submissions() {
        struct Dup;
        impl KemAdversary for Dup {
            fn name(&self) -> &str {
                "dup"
            }
            fn submit(&mut self, o: &mut KemOracles, _r: &mut dyn RngCore) -> KemSubmission {
                KemSubmission { j: 0, pubkeys: vec![o.public_key().clone()] }
            }
            fn guess(&mut self, _: &KemAux, _: &KemChallenge, _: &mut KemOracles, _: &mut dyn RngCore) -> bool {
                false
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(kem_game_run(&mut Dup, &cfg(false), &mut rng), Err(Error::Rejected(_))));
        let mut long = GuessingKemAdversary { n: 5, j: 0 };
        assert!(kem_game_run(&mut long, &cfg(false), &mut rng).is_err());
        let mut badj = GuessingKemAdversary { n: 3, j: 3 };
        assert!(kem_game_run(&mut badj, &cfg(false), &mut rng).is_err());
    }

    #[test]
    fn challenge_alpha_is_refused() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let out = kem_game_run(&mut GuessingKemAdversary { n: 3, j: 1 }, &cfg(false), &mut rng).unwrap();
        assert!(out.transcript.iter().any(|l| l.contains("refused")));
    }

    #[test]
    fn b0_challenge_matches_honest_decap() {
        struct Check(bool);
        impl KemAdversary for Check {
            fn name(&self) -> &str {
                "check"
            }
            fn submit(&mut self, o: &mut KemOracles, rng: &mut dyn RngCore) -> KemSubmission {
                KemSubmission { j: 1, pubkeys: fresh_keys(&o.suite, 2, rng) }
            }
            fn guess(&mut self, _: &KemAux, ch: &KemChallenge, o: &mut KemOracles, _: &mut dyn RngCore) -> bool {
                let d = kem_decap(&o.suite, &o.honest.sk, &ch.alpha_j).unwrap();
                let h = [d.k_rho.as_bytes(), d.k_mu.as_bytes(), d.k_pi.as_bytes()].concat();
                self.0 = h == ch.h_star_j && d.b == ch.b_j;
                false
            }
        }
        let mut adv = Check(false);
        kem_game_run_with_bit(&mut adv, &cfg(false), false, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert!(adv.0);
        kem_game_run_with_bit(&mut adv, &cfg(false), true, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert!(!adv.0);
    }

    #[test]
    fn transcript_lengths_independent_of_b() {
        for seed in 0..20 {
            let a = kem_game_run_with_bit(&mut GuessingKemAdversary { n: 4, j: 2 }, &cfg(false), false, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let b = kem_game_run_with_bit(&mut GuessingKemAdversary { n: 4, j: 2 }, &cfg(false), true, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let la: Vec<usize> = a.transcript.iter().map(|l| l.len()).collect();
            let lb: Vec<usize> = b.transcript.iter().map(|l| l.len()).collect();
            assert_eq!(la, lb);
        }
    }

    #[test]
    fn white_box_sets_bad_flag_and_toy_group_runs() {
        let suite = CryptoSuite::new(Group::Ristretto255, 16, 5).unwrap();
        let c = KemGameConfig { suite, reveal_sender_secret: true };
        let out = kem_game_run(&mut WhiteBoxKemAdversary { n: 4, j: 3 }, &c, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert!(out.adversary_won);
        assert!(out.bad);
    }
}
