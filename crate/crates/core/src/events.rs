//! Environment-visible events shared by the real protocol and the ideal
//! functionality, so that the two can be diffed.

use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Fresh random identifier (tid, rid, sid) as hex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Id(pub String);

impl Id {
    pub fn fresh<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut b = vec![0u8; len];
        rng.fill_bytes(&mut b);
        Id(hex::encode(b))
    }
}

impl std::fmt::Display for Id {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EnvEvent {
    OnionReceived { party: String, from: String, tid: Option<Id> },
    OnionSent { party: String, to: String },
    MessageSent { party: String, receiver: String },
    MessageReceived { receiver: String, from: String, message: String, rid: Option<Id> },
    ReplyRequestReceived { party: String, receiver: String, message: String, rid: Option<Id> },
    ReplyOnionQueued { party: String, tid: Option<Id> },
    ReplyReceived { party: String, message: String },
    IntegrityFailure { party: String },
}

fn blank(id: &Option<Id>) -> Option<Id> {
    id.as_ref().map(|_| Id(String::new()))
}

impl EnvEvent {
    /// Replaces every tid/rid by a placeholder, keeping only presence.
    pub fn without_ids(&self) -> EnvEvent {
        use EnvEvent::*;
        match self {
            OnionReceived { party, from, tid } => OnionReceived { party: party.clone(), from: from.clone(), tid: blank(tid) },
            MessageReceived { receiver, from, message, rid } => MessageReceived {
                receiver: receiver.clone(),
                from: from.clone(),
                message: message.clone(),
                rid: blank(rid),
            },
            ReplyRequestReceived { party, receiver, message, rid } => ReplyRequestReceived {
                party: party.clone(),
                receiver: receiver.clone(),
                message: message.clone(),
                rid: blank(rid),
            },
            ReplyOnionQueued { party, tid } => ReplyOnionQueued { party: party.clone(), tid: blank(tid) },
            other => other.clone(),
        }
    }

    /// The party at which the event is output.
    pub fn party(&self) -> &str {
        use EnvEvent::*;
        match self {
            OnionReceived { party, .. }
            | OnionSent { party, .. }
            | MessageSent { party, .. }
            | ReplyRequestReceived { party, .. }
            | ReplyOnionQueued { party, .. }
            | ReplyReceived { party, .. }
            | IntegrityFailure { party } => party,
            MessageReceived { receiver, .. } => receiver,
        }
    }

    pub fn kind(&self) -> &'static str {
        use EnvEvent::*;
        match self {
            OnionReceived { .. } => "onion-received",
            OnionSent { .. } => "forwarded",
            MessageSent { .. } => "message-delivered",
            MessageReceived { .. } => "message-received",
            ReplyRequestReceived { .. } => "reply-request",
            ReplyOnionQueued { .. } => "reply-sent",
            ReplyReceived { .. } => "got-reply",
            IntegrityFailure { .. } => "integrity-failure",
        }
    }
}

/// Sorted id-free multiset; equal vectors mean equal traces up to renaming.
pub fn canonical_multiset(events: &[EnvEvent]) -> Vec<EnvEvent> {
    let mut v: Vec<EnvEvent> = events.iter().map(EnvEvent::without_ids).collect();
    v.sort();
    v
}

/// Events in `a` but not `b` and vice versa, after canonicalization.
pub fn multiset_diff(a: &[EnvEvent], b: &[EnvEvent]) -> (Vec<EnvEvent>, Vec<EnvEvent>) {
    let (ca, cb) = (canonical_multiset(a), canonical_multiset(b));
    let (mut i, mut j) = (0, 0);
    let (mut only_a, mut only_b) = (vec![], vec![]);
    while i < ca.len() || j < cb.len() {
        match (ca.get(i), cb.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                only_a.push(x.clone());
                i += 1;
            }
            (Some(_), Some(y)) => {
                only_b.push(y.clone());
                j += 1;
            }
            (Some(x), None) => {
                only_a.push(x.clone());
                i += 1;
            }
            (None, Some(y)) => {
                only_b.push(y.clone());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    (only_a, only_b)
}
