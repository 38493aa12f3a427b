//! Protocol runtime: relays, senders and receivers.
//!
//! Every handler returns the environment-visible events it caused plus an
//! optional network action; failures surface only as diagnostics.

use std::collections::{BTreeMap, HashMap};

use rand::RngCore;

use crate::crypto::GroupElement;
use crate::error::{arg, Result};
use crate::events::{EnvEvent, Id};
use crate::kem::KemKeyPair;
use crate::packet::{
    form_reply, proc_onion, Address, BasicView, FailCode, FormatParams, Onion, OnionMaterial, OnionSpec, ProcResult, ReplyExpectation,
};

pub fn msg_hex(m: &[u8]) -> String {
    hex::encode(m)
}

/// In-memory PKI.
#[derive(Clone, Debug, Default)]
pub struct Directory(pub BTreeMap<Address, GroupElement>);

impl Directory {
    pub fn register(&mut self, name: Address, pk: GroupElement) {
        self.0.insert(name, pk);
    }

    pub fn lookup(&self, name: &Address) -> Option<&GroupElement> {
        self.0.get(name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    SendOnion { to: Address, onion: Onion },
    SendMessage { receiver: Address, message: Vec<u8>, rid: Option<Id> },
    SendReplyRequest { to: Address, message: Vec<u8>, rid: Id },
}

/// Result of handing something to a party.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Step {
    pub events: Vec<EnvEvent>,
    pub action: Option<Action>,
    /// Test-only; never shown to the environment.
    pub dropped: Option<FailCode>,
    pub tid: Option<Id>,
}

impl Step {
    fn drop(code: FailCode) -> Self {
        Step { dropped: Some(code), ..Default::default() }
    }
}

#[derive(Clone, Debug)]
enum Pending {
    Onion { next: Address, onion: Onion },
    Deliver { receiver: Address, message: Vec<u8>, exit_layer: Onion },
}

#[derive(Clone, Debug)]
pub struct RelayState {
    pub name: Address,
    pub keypair: KemKeyPair,
    params: FormatParams,
    view: BasicView,
    outgoing: HashMap<Id, Pending>,
    reply_buffer: HashMap<Id, Onion>,
}

impl RelayState {
    pub fn new(params: FormatParams, name: Address, keypair: KemKeyPair) -> Self {
        RelayState { name, keypair, params, view: BasicView::default(), outgoing: HashMap::new(), reply_buffer: HashMap::new() }
    }

    pub fn seen_count(&self) -> usize {
        self.view.seen.len()
    }

    pub fn pending_rids(&self) -> usize {
        self.reply_buffer.len()
    }

    pub fn on_onion(&mut self, onion: &Onion, from: &Address, rng: &mut dyn RngCore) -> Step {
        let me = self.name.clone();
        let pending = match proc_onion(&self.params, &self.keypair.sk, onion, &me, &mut self.view) {
            ProcResult::Forward { onion, next_hop } => Pending::Onion { next: next_hop, onion },
            ProcResult::Exit { message, receiver, .. } => Pending::Deliver { receiver, message, exit_layer: onion.clone() },
            ProcResult::ReplyReceived { .. } => return Step::drop(FailCode::UnknownReply),
            ProcResult::Fail(code) => {
                let mut s = Step::drop(code);
                if code == FailCode::IntegrityCheck {
                    s.events.push(EnvEvent::IntegrityFailure { party: me.name() });
                }
                return s;
            }
        };
        let tid = Id::fresh(rng, self.params.kappa);
        self.outgoing.insert(tid.clone(), pending);
        Step {
            events: vec![EnvEvent::OnionReceived { party: me.name(), from: from.name(), tid: Some(tid.clone()) }],
            tid: Some(tid),
            ..Default::default()
        }
    }

    /// The environment's "forward tid" instruction. Unknown tids do nothing.
    pub fn forward(&mut self, tid: &Id, rng: &mut dyn RngCore) -> Step {
        let Some(p) = self.outgoing.remove(tid) else {
            return Step::default();
        };
        match p {
            Pending::Onion { next, onion } => Step {
                events: vec![EnvEvent::OnionSent { party: self.name.name(), to: next.name() }],
                action: Some(Action::SendOnion { to: next, onion }),
                ..Default::default()
            },
            Pending::Deliver { receiver, message, exit_layer } => {
                let repliable = form_reply(&self.params, b"", &exit_layer, &self.name, &self.keypair.sk).is_ok();
                let rid = repliable.then(|| {
                    let rid = Id::fresh(rng, self.params.kappa);
                    self.reply_buffer.insert(rid.clone(), exit_layer);
                    rid
                });
                Step {
                    events: vec![EnvEvent::MessageSent { party: self.name.name(), receiver: receiver.name() }],
                    action: Some(Action::SendMessage { receiver, message, rid }),
                    ..Default::default()
                }
            }
        }
    }

    /// A receiver's (m←, rid). Each rid works once.
    pub fn on_receiver_reply(&mut self, m_reply: &[u8], rid: &Id, receiver: &Address, rng: &mut dyn RngCore) -> Step {
        let mut events = vec![EnvEvent::ReplyRequestReceived {
            party: self.name.name(),
            receiver: receiver.name(),
            message: msg_hex(m_reply),
            rid: Some(rid.clone()),
        }];
        let Some(stored) = self.reply_buffer.remove(rid) else {
            return Step { events, ..Default::default() };
        };
        match form_reply(&self.params, m_reply, &stored, &self.name, &self.keypair.sk) {
            Ok((onion, first)) => {
                events.push(EnvEvent::ReplyOnionQueued { party: self.name.name(), tid: Some(Id::fresh(rng, self.params.kappa)) });
                events.push(EnvEvent::OnionSent { party: self.name.name(), to: first.name() });
                Step { events, action: Some(Action::SendOnion { to: first, onion }), ..Default::default() }
            }
            Err(code) => Step { events, dropped: Some(code), ..Default::default() },
        }
    }
}

#[derive(Clone, Debug)]
pub struct SenderState {
    pub name: Address,
    pub keypair: KemKeyPair,
    params: FormatParams,
    view: BasicView,
}

impl SenderState {
    pub fn new(params: FormatParams, name: Address, keypair: KemKeyPair) -> Self {
        SenderState { name, keypair, params, view: BasicView::default() }
    }

    pub fn pending_replies(&self) -> usize {
        self.view.expectations.len()
    }

    /// Registers a reply the sender will accept without sending anything.
    pub fn expect(&mut self, e: ReplyExpectation) {
        self.view.expectations.insert(e.ident.clone(), e);
    }

    pub fn send(&mut self, spec: &OnionSpec) -> Result<Step> {
        if spec.repliable() && spec.reply.last().map(|h| &h.name) != Some(&self.name) {
            return arg("reply path must end at the sender");
        }
        let mat = OnionMaterial::expand(&self.params, spec)?;
        if let Some(e) = mat.reply_expectation() {
            self.view.expectations.insert(e.ident.clone(), e);
        }
        let first = spec.forward[0].name.clone();
        Ok(Step {
            events: vec![EnvEvent::OnionSent { party: self.name.name(), to: first.name() }],
            action: Some(Action::SendOnion { to: first, onion: mat.layer(1)?.clone() }),
            ..Default::default()
        })
    }

    /// Tampered, replayed or unsolicited onions vanish without any event.
    pub fn on_onion(&mut self, onion: &Onion) -> Step {
        let me = self.name.clone();
        match proc_onion(&self.params, &self.keypair.sk, onion, &me, &mut self.view) {
            ProcResult::ReplyReceived { message, ident } => {
                self.view.expectations.remove(&ident);
                Step { events: vec![EnvEvent::ReplyReceived { party: me.name(), message: msg_hex(&message) }], ..Default::default() }
            }
            ProcResult::Fail(code) => Step::drop(code),
            _ => Step::drop(FailCode::BadRoute),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InboxEntry {
    pub message: Vec<u8>,
    pub rid: Option<Id>,
    pub from: Address,
}

#[derive(Clone, Debug)]
pub struct ReceiverState {
    pub address: Address,
    pub inbox: Vec<InboxEntry>,
}

impl ReceiverState {
    pub fn new(address: Address) -> Self {
        ReceiverState { address, inbox: vec![] }
    }

    pub fn on_message(&mut self, message: &[u8], rid: Option<Id>, from: &Address) -> Step {
        self.inbox.push(InboxEntry { message: message.to_vec(), rid: rid.clone(), from: from.clone() });
        Step {
            events: vec![EnvEvent::MessageReceived {
                receiver: self.address.name(),
                from: from.name(),
                message: msg_hex(message),
                rid,
            }],
            ..Default::default()
        }
    }

    pub fn reply(&self, m_reply: &[u8], rid: &Id, to: &Address) -> Action {
        Action::SendReplyRequest { to: to.clone(), message: m_reply.to_vec(), rid: rid.clone() }
    }

    /// Receivers never parse onions.
    pub fn on_onion(&mut self, _onion: &Onion) -> Step {
        Step::drop(FailCode::BadRoute)
    }
}
