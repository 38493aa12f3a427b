//! Backward layer unlinkability.
//!
//! The adversary always gets the real O_1. The bit only matters once the
//! honest relay P_H handles the reply: at backward position j← > 0 when it
//! processes layer n+j←, or at the exit (j← = 0) when asked to reply. The
//! challenger then hands out either the real next reply layer or Ō_1, a
//! fresh forward onion over the rest of the return path.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{at, checked_paths, expand, random_filling, reject, ChallengeRules, HonestParty, OracleAnswer, Prepared, Submission};
use crate::error::Result;
use crate::packet::{form_reply, Address, FormatParams, Header, Onion, OnionMaterial, OnionSpec, ProcResult};

struct Rules {
    b: bool,
    j_back: usize,
    /// Header of layer n+j← (j← > 0) or n (j← = 0) of the real onion.
    trigger: Header,
    next: Address,
    bar_1: Onion,
    final_header: Header,
    p_s: usize,
}

impl ChallengeRules for Rules {
    fn proc(&mut self, params: &FormatParams, parties: &mut [HonestParty], who: usize, o: &Onion) -> Option<OracleAnswer> {
        if who == self.p_s && o.header == self.final_header {
            return Some(OracleAnswer::Nothing);
        }
        let ph = &mut parties[who];
        if who != 0 || self.j_back == 0 || o.header != self.trigger || ph.seen(&o.header) {
            return None;
        }
        let real = ph.process(params, o);
        if matches!(real, ProcResult::Fail(_)) {
            return None;
        }
        ph.store(o);
        Some(if self.b { OracleAnswer::Forward { next: self.next.clone(), onion: self.bar_1.clone() } } else { real.into() })
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
        if who != 0 || self.j_back != 0 || o.header != self.trigger || !ph.may_reply(o) {
            return None;
        }
        let (onion, first_hop) = form_reply(params, m, o, &ph.name, &ph.keys.sk).ok()?;
        ph.replied.insert(o.header.clone());
        let onion = if self.b { self.bar_1.clone() } else { onion };
        Some(OracleAnswer::ReplyOnion { first_hop, onion })
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
    let (n, n_back, j_back) = (sub.path.len(), sub.reply_path.len(), sub.j_back);
    // j← = n← would put P_H where P_s must be
    if j_back >= n_back {
        return reject("need 0 <= j_back < n_back");
    }
    let placed = if j_back == 0 { at(&sub.path, n, ph) } else { at(&sub.reply_path, j_back, ph) };
    if !placed || !at(&sub.reply_path, n_back, ps) {
        return reject("P_H or P_s not at the submitted positions");
    }
    let (path, reply) = checked_paths(params, sub, parties)?;
    let spec = OnionSpec {
        seed: rng.gen(),
        message: sub.message.clone(),
        receiver: sub.receiver.clone(),
        forward: path,
        reply: reply.clone(),
    };
    let (m_bar, r_bar) = random_filling(params, rng);
    let bar_spec = OnionSpec { seed: rng.gen(), message: m_bar, receiver: r_bar, forward: reply[j_back..].to_vec(), reply: vec![] };
    let original: OnionMaterial = expand(params, &spec)?;
    let bar = expand(params, &bar_spec)?;
    let final_header = if b { bar.layer(n_back - j_back)? } else { original.layer(n + n_back)? }.header.clone();
    let rules = Rules {
        b,
        j_back,
        trigger: original.layer(n + j_back)?.header.clone(),
        next: reply[j_back].name.clone(),
        bar_1: bar.layer(1)?.clone(),
        final_header,
        p_s: 1,
    };
    Ok(Prepared { challenge: original.layer(1)?.clone(), rules: Some(Box::new(rules)), expectation: original.reply_expectation() })
}
