//! Legacy third-party nymserver, kept only to reproduce the attack on it.
//!
//! The sender parks its reply header here under a pseudonym; receivers
//! look the pseudonym up to reply.

use std::collections::BTreeMap;

use crate::crypto::SymKey;
use crate::error::Result;
use crate::packet::{build_payload_reply, Address, FormatParams, Header, Onion, ReplyInfo};

const PSEUDONYM_LEN: usize = 16;

pub(super) fn encode_block(pseudonym: &str, info: &ReplyInfo) -> Vec<u8> {
    [pseudonym.as_bytes(), info.first_hop.as_bytes(), &info.eta0.to_bytes(), info.k_tilde.as_bytes()].concat()
}

fn decode_block(params: &FormatParams, b: &[u8]) -> Option<(String, ReplyInfo)> {
    let (a, h) = (params.addr_len, params.header_len());
    if b.len() != PSEUDONYM_LEN + a + h + params.kappa {
        return None;
    }
    let pseudonym = String::from_utf8(b[..PSEUDONYM_LEN].to_vec()).ok()?;
    let first_hop = Address::from_bytes(params, &b[PSEUDONYM_LEN..PSEUDONYM_LEN + a]).ok()?;
    let eta0 = Header::from_bytes(params, &b[PSEUDONYM_LEN + a..PSEUDONYM_LEN + a + h]).ok()?;
    let k_tilde = SymKey::new(b[PSEUDONYM_LEN + a + h..].to_vec(), params.kappa).ok()?;
    Some((pseudonym, ReplyInfo { first_hop, eta0, k_tilde }))
}

/// "nym:<pseudonym>:..." messages carry the pseudonym to the receiver.
pub(super) fn pseudonym_of(message: &[u8]) -> Option<String> {
    let rest = message.strip_prefix(b"nym:")?;
    let p = rest.get(..PSEUDONYM_LEN)?;
    (rest.get(PSEUDONYM_LEN) == Some(&b':')).then(|| String::from_utf8_lossy(p).into_owned())
}

#[derive(Debug, Default)]
pub(super) struct Nymserver {
    table: BTreeMap<String, ReplyInfo>,
}

impl Nymserver {
    pub fn store(&mut self, params: &FormatParams, message: &[u8]) -> bool {
        match decode_block(params, message) {
            Some((p, info)) => {
                self.table.insert(p, info);
                true
            }
            None => false,
        }
    }

    /// Single use, like the header it stores.
    pub fn lookup(&mut self, params: &FormatParams, pseudonym: &str, m: &[u8]) -> Result<Option<(Onion, Address)>> {
        let Some(info) = self.table.remove(pseudonym) else { return Ok(None) };
        let mut d = build_payload_reply(params, m)?;
        params.prp().encrypt(&info.k_tilde, &mut d)?;
        Ok(Some((Onion { header: info.eta0, payload: d }, info.first_hop)))
    }
}
