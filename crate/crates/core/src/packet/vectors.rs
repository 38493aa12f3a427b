//! Deterministic sample networks and packet test vectors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::header::build_padding;
use super::onion::{OnionMaterial, OnionSpec, PathHop};
use super::params::{Address, FormatParams};
use crate::crypto::vectors::VectorRecord;
use crate::crypto::Scalar;
use crate::error::Result;
use crate::kem::{kem_keygen, KemKeyPair};

/// Relays `r0..`, one sender `s0` and one receiver `bob`.
#[derive(Clone, Debug)]
pub struct SampleNetwork {
    pub relays: Vec<(Address, KemKeyPair)>,
    pub sender: (Address, KemKeyPair),
    pub receiver: Address,
}

impl SampleNetwork {
    pub fn new<R: Rng + rand::CryptoRng>(params: &FormatParams, rng: &mut R, relays: usize) -> Self {
        let suite = params.suite();
        SampleNetwork {
            relays: (0..relays).map(|i| (Address::new(params, &format!("r{i}")).unwrap(), kem_keygen(&suite, rng))).collect(),
            sender: (Address::new(params, "s0").unwrap(), kem_keygen(&suite, rng)),
            receiver: Address::new(params, "bob").unwrap(),
        }
    }

    fn hop(a: &(Address, KemKeyPair)) -> PathHop {
        PathHop { name: a.0.clone(), pk: a.1.pk.clone() }
    }

    /// Random acyclic paths; a nonempty reply path ends at the sender.
    pub fn spec<R: Rng>(&self, params: &FormatParams, rng: &mut R, n: usize, n_reply: usize) -> OnionSpec {
        let forward = self.relays.choose_multiple(rng, n).map(Self::hop).collect();
        let mut reply: Vec<PathHop> =
            if n_reply == 0 { vec![] } else { self.relays.choose_multiple(rng, n_reply - 1).map(Self::hop).collect() };
        if n_reply > 0 {
            reply.push(Self::hop(&self.sender));
        }
        let len = rng.gen_range(0..=params.max_message_len().min(64));
        let mut message = vec![0u8; len];
        rng.fill(&mut message[..]);
        OnionSpec { seed: rng.gen(), message, receiver: self.receiver.clone(), forward, reply }
    }

    pub fn sk_of(&self, name: &Address) -> Option<&Scalar> {
        if &self.sender.0 == name {
            return Some(&self.sender.1.sk);
        }
        self.relays.iter().find(|(a, _)| a == name).map(|(_, k)| &k.sk)
    }
}

fn cases(params: &FormatParams, master: u64) -> Vec<(usize, usize, OnionSpec)> {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    let net = SampleNetwork::new(params, &mut rng, 8);
    let mut out = vec![];
    for n in 1..=params.max_hops {
        let n_reply = (n + master as usize) % (params.max_hops + 1);
        out.push((n, n_reply, net.spec(params, &mut rng, n, n_reply)));
    }
    out
}

pub fn generate(params: &FormatParams, masters: &[u64]) -> Result<Vec<VectorRecord>> {
    let mut out = vec![];
    for &m in masters {
        for (n, nr, spec) in cases(params, m) {
            let id = |i: usize| vec![m.to_be_bytes().to_vec(), vec![n as u8, nr as u8, i as u8]];
            let mat = OnionMaterial::expand(params, &spec)?;
            for i in 0..n {
                out.push(VectorRecord::new("phi", id(i), build_padding(params, &mat.forward_chain, i)?));
            }
            for i in 1..=mat.layer_count() {
                let o = mat.layer(i)?;
                let kind = if i <= n { "onion" } else { "reply_onion" };
                if i <= n {
                    out.push(VectorRecord::new("beta", id(i), o.header.beta.clone()));
                    out.push(VectorRecord::new("gamma", id(i), o.header.gamma.clone()));
                }
                out.push(VectorRecord::new(kind, id(i), o.to_bytes()));
            }
        }
    }
    Ok(out)
}

/// Regenerates the record's case and compares.
pub fn verify(params: &FormatParams, rec: &VectorRecord) -> Result<bool> {
    let m = u64::from_be_bytes(rec.inputs[0].clone().try_into().unwrap_or([0; 8]));
    let (n, nr, i) = (rec.inputs[1][0] as usize, rec.inputs[1][1] as usize, rec.inputs[1][2] as usize);
    let Some((_, _, spec)) = cases(params, m).into_iter().find(|(a, b, _)| *a == n && *b == nr) else {
        return Ok(false);
    };
    let mat = OnionMaterial::expand(params, &spec)?;
    let got = match rec.primitive.as_str() {
        "phi" => build_padding(params, &mat.forward_chain, i)?,
        "beta" => mat.layer(i)?.header.beta.clone(),
        "gamma" => mat.layer(i)?.header.gamma.clone(),
        "onion" | "reply_onion" => mat.layer(i)?.to_bytes(),
        _ => return Ok(false),
    };
    Ok(got == rec.output)
}
