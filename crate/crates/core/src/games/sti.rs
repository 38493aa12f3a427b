//! Tail indistinguishability.
//!
//! The adversary asks for an onion from position j on. b=0 hands out the
//! real O_{j+1}; b=1 hands out Ō_1, built fresh over (P_{j+1}..P_n) with the
//! same message and receiver and a return path cut off at P_H←. Either way
//! the reply dies silently at P_H←.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{at, checked_paths, expand, reject, ChallengeRules, HonestParty, OracleAnswer, Prepared, Submission};
use crate::error::Result;
use crate::packet::{FormatParams, Header, Onion, OnionSpec};

struct Rules {
    absorbed: Header,
}

const P_H_BACK: usize = 1;

impl ChallengeRules for Rules {
    fn proc(&mut self, _: &FormatParams, _: &mut [HonestParty], who: usize, o: &Onion) -> Option<OracleAnswer> {
        (who == P_H_BACK && o.header == self.absorbed).then_some(OracleAnswer::Nothing)
    }

    fn reply(&mut self, _: &FormatParams, _: &mut [HonestParty], _: usize, _: &Onion, _: &[u8]) -> Option<OracleAnswer> {
        None
    }
}

pub(crate) fn prepare(
    params: &FormatParams,
    sub: &Submission,
    parties: &[&HonestParty],
    b: bool,
    rng: &mut ChaCha20Rng,
) -> Result<Prepared> {
    let (ph, phb, ps) = (parties[0], parties[1], parties[2]);
    let (n, n_back, j, j_back) = (sub.path.len(), sub.reply_path.len(), sub.j, sub.j_back);
    if j >= n {
        return reject("need 0 <= j < n");
    }
    if j >= 1 && !at(&sub.path, j, ph) && !at(&sub.path, j, phb) {
        return reject("P_H or P_H_back must sit at forward position j");
    }
    if j_back < 1 || j_back > n_back || !at(&sub.reply_path, j_back, phb) || !at(&sub.reply_path, n_back, ps) {
        return reject("P_H_back or P_s not at the submitted backward positions");
    }
    let (path, reply) = checked_paths(params, sub, parties)?;
    let spec = OnionSpec {
        seed: rng.gen(),
        message: sub.message.clone(),
        receiver: sub.receiver.clone(),
        forward: path.clone(),
        reply: reply.clone(),
    };
    let bar_spec = OnionSpec { seed: rng.gen(), forward: path[j..].to_vec(), reply: reply[..j_back].to_vec(), ..spec.clone() };
    let original = expand(params, &spec)?;
    let bar = expand(params, &bar_spec)?;
    let (challenge, absorbed) = if b {
        (bar.layer(1)?.clone(), bar.layer(n - j + j_back)?.header.clone())
    } else {
        (original.layer(j + 1)?.clone(), original.layer(n + j_back)?.header.clone())
    };
    Ok(Prepared { challenge, rules: Some(Box::new(Rules { absorbed })), expectation: original.reply_expectation() })
}
