//! Innermost payload plaintexts.
//!
//! forward: 0_κ ‖ R ‖ reply-block ‖ len ‖ m ‖ 0…
//! reply:   0_κ ‖ pad ‖ len ‖ m ‖ 0…
//! reply-block = first_hop ‖ η₀ ‖ k̃, or all zeros when not repliable.
//! `pad` spans R and the reply block so both layouts share one offset.

use super::header::Header;
use super::params::{Address, FormatParams, LEN_PREFIX};
use crate::crypto::SymKey;
use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplyInfo {
    pub first_hop: Address,
    pub eta0: Header,
    pub k_tilde: SymKey,
}

impl ReplyInfo {
    fn to_bytes(&self) -> Vec<u8> {
        [self.first_hop.as_bytes(), &self.eta0.to_bytes(), self.k_tilde.as_bytes()].concat()
    }

    fn from_bytes(params: &FormatParams, b: &[u8]) -> Option<Self> {
        let a = params.addr_len;
        let h = a + params.header_len();
        let eta0 = Header::from_bytes(params, &b[a..h]).ok()?;
        params.group.decode(&eta0.alpha).ok()?;
        Some(ReplyInfo {
            first_hop: Address::from_bytes(params, &b[..a]).ok()?,
            eta0,
            k_tilde: SymKey::new(b[h..].to_vec(), params.kappa).ok()?,
        })
    }
}

fn frame(params: &FormatParams, out: &mut Vec<u8>, m: &[u8]) -> Result<()> {
    if m.len() > params.max_message_len() {
        return arg(format!("message of {} bytes exceeds {}", m.len(), params.max_message_len()));
    }
    out.extend_from_slice(&(m.len() as u32).to_be_bytes());
    out.extend_from_slice(m);
    out.resize(params.payload_len, 0);
    Ok(())
}

fn unframe(params: &FormatParams, body: &[u8]) -> Option<Vec<u8>> {
    let len = u32::from_be_bytes(body[..LEN_PREFIX].try_into().unwrap()) as usize;
    if len > params.max_message_len() {
        return None;
    }
    let m = &body[LEN_PREFIX..LEN_PREFIX + len];
    body[LEN_PREFIX + len..].iter().all(|&b| b == 0).then(|| m.to_vec())
}

pub fn build_payload_forward(params: &FormatParams, receiver: &Address, reply: Option<&ReplyInfo>, m: &[u8]) -> Result<Vec<u8>> {
    let mut out = vec![0u8; params.kappa];
    out.extend_from_slice(receiver.as_bytes());
    match reply {
        Some(r) => out.extend_from_slice(&r.to_bytes()),
        None => out.resize(out.len() + params.reply_block_len(), 0),
    }
    frame(params, &mut out, m)?;
    Ok(out)
}

pub fn build_payload_reply(params: &FormatParams, m: &[u8]) -> Result<Vec<u8>> {
    let mut out = vec![0u8; params.kappa + params.addr_len + params.reply_block_len()];
    frame(params, &mut out, m)?;
    Ok(out)
}

pub fn has_zero_prefix(params: &FormatParams, plain: &[u8]) -> bool {
    plain[..params.kappa].iter().all(|&b| b == 0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardPlain {
    pub receiver: Address,
    /// `None` for a zero reply block; `Some(None)` for a malformed one.
    pub reply: Option<Option<ReplyInfo>>,
    pub message: Vec<u8>,
}

/// Assumes the zero prefix was already checked.
pub fn parse_payload_forward(params: &FormatParams, plain: &[u8]) -> Option<ForwardPlain> {
    let k = params.kappa;
    let a = params.addr_len;
    let rb = &plain[k + a..k + a + params.reply_block_len()];
    let reply = if rb.iter().all(|&b| b == 0) { None } else { Some(ReplyInfo::from_bytes(params, rb)) };
    Some(ForwardPlain {
        receiver: Address::from_bytes(params, &plain[k..k + a]).ok()?,
        reply,
        message: unframe(params, &plain[k + a + params.reply_block_len()..])?,
    })
}

pub fn parse_payload_reply(params: &FormatParams, plain: &[u8]) -> Option<Vec<u8>> {
    let off = params.kappa + params.addr_len + params.reply_block_len();
    if plain[..off].iter().any(|&b| b != 0) {
        return None;
    }
    unframe(params, &plain[off..])
}
