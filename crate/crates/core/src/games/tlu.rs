//! Forward layer unlinkability with tag forwarding.
//!
//! b=0 hands out O_1 and answers every request normally. b=1 hands out Ō_1,
//! an onion over (P_1..P_j) only, and when Ō_j reaches P_H the challenger
//! substitutes the real O_{j+1}, carrying over any payload modification.

use rand_chacha::ChaCha20Rng;
use rand::Rng;

use super::{at, checked_paths, expand, random_filling, reject, ChallengeRules, HonestParty, OracleAnswer, Prepared, Submission};
use crate::error::Result;
use crate::packet::{header_valid, tag_payload, Address, FormatParams, Onion, OnionMaterial, OnionSpec};

struct Rules {
    j: usize,
    n: usize,
    message: Vec<u8>,
    receiver: Address,
    spec: OnionSpec,
    original: OnionMaterial,
    bar_j: Onion,
    next: Option<Address>,
    reply_first: Option<Address>,
}

impl ChallengeRules for Rules {
    fn proc(&mut self, params: &FormatParams, parties: &mut [HonestParty], who: usize, o: &Onion) -> Option<OracleAnswer> {
        let ph = &mut parties[who];
        if who != 0 || o.header != self.bar_j.header || ph.seen(&o.header) {
            return None;
        }
        if self.j < self.n {
            // the guard is on the header; a modified payload is passed on
            if !header_valid(params, &ph.keys.sk, &o.header) {
                return None;
            }
            ph.store(o);
            let o_c = self.original.layer(self.j + 1).ok()?.clone();
            let out = if o.payload == self.bar_j.payload {
                o_c
            } else {
                let mask: Vec<u8> = o.payload.iter().zip(&self.bar_j.payload).map(|(a, b)| a ^ b).collect();
                tag_payload(&o_c, &mask).ok()?
            };
            Some(OracleAnswer::Forward { next: self.next.clone()?, onion: out })
        } else {
            if matches!(ph.process(params, o), crate::packet::ProcResult::Fail(_)) {
                return None;
            }
            ph.store(o);
            Some(OracleAnswer::Exit { message: self.message.clone(), receiver: self.receiver.clone() })
        }
    }

    fn reply(
        &mut self,
        params: &FormatParams,
        parties: &mut [HonestParty],
        who: usize,
        o: &Onion,
        m: &[u8],
    ) -> Option<OracleAnswer> {
        let ph = &mut parties[who];
        if who != 0 || self.j != self.n || o.header != self.bar_j.header || !ph.may_reply(o) {
            return None;
        }
        let first_hop = self.reply_first.clone()?;
        let spec = OnionSpec { message: m.to_vec(), ..self.spec.clone() };
        let answer = match OnionMaterial::expand(params, &spec).and_then(|mat| mat.layer(self.n + 1).cloned()) {
            Ok(onion) => {
                ph.replied.insert(o.header.clone());
                OracleAnswer::ReplyOnion { first_hop, onion }
            }
            // same outcome FormReply has for an unframeable reply
            Err(_) => OracleAnswer::Fail(crate::packet::FailCode::Malformed),
        };
        Some(answer)
    }
}

pub(crate) fn prepare(
    params: &FormatParams,
    sub: &Submission,
    parties: &[&HonestParty],
    b: bool,
    rng: &mut ChaCha20Rng,
) -> Result<Prepared> {
    let (ph, ps) = (parties[0], parties[1]);
    let n = sub.path.len();
    if sub.j < 1 || sub.j > n || !at(&sub.path, sub.j, ph) {
        return reject("P_H must sit at forward position 1 <= j <= n");
    }
    if sub.reply_path.last().map(|h| &h.name) != Some(&ps.name) {
        return reject("the reply path must end at P_s");
    }
    let (path, reply) = checked_paths(params, sub, parties)?;
    let spec = OnionSpec { seed: rng.gen(), message: sub.message.clone(), receiver: sub.receiver.clone(), forward: path.clone(), reply };
    let (m_bar, r_bar) = random_filling(params, rng);
    let bar_spec = OnionSpec { seed: rng.gen(), message: m_bar, receiver: r_bar, forward: path[..sub.j].to_vec(), reply: vec![] };
    let original = expand(params, &spec)?;
    let bar = expand(params, &bar_spec)?;
    let expectation = original.reply_expectation();
    if !b {
        return Ok(Prepared { challenge: original.layer(1)?.clone(), rules: None, expectation });
    }
    let rules = Rules {
        j: sub.j,
        n,
        message: sub.message.clone(),
        receiver: sub.receiver.clone(),
        next: path.get(sub.j).map(|h| h.name.clone()),
        reply_first: original.reply_info.as_ref().map(|i| i.first_hop.clone()),
        bar_j: bar.layer(sub.j)?.clone(),
        spec,
        original,
    };
    Ok(Prepared { challenge: bar.layer(1)?.clone(), rules: Some(Box::new(rules)), expectation })
}
