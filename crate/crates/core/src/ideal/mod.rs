//! Executable F_RSOR.
//!
//! One method per message or procedure of the functionality. Calls return
//! what the functionality sends: events for the environment (through the
//! named party) and leaks to the adversary S. The environment Z and S share
//! this API and are told apart by capability tokens.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EnvEvent, Id};
use crate::node::msg_hex;

const ID_LEN: usize = 16;

/// Held by the environment driver.
pub struct EnvToken(());
/// Held by the simulator / adversary driver.
pub struct SimToken(());

#[derive(Clone, Copy)]
pub enum Caller<'a> {
    Env(&'a EnvToken),
    Sim(&'a SimToken),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    F,
    B,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractOnion {
    pub sid: Id,
    pub sender: String,
    /// R for forward onions, P_r for replies.
    pub dest: String,
    pub message: Option<Vec<u8>>,
    pub path: Vec<String>,
    pub reply_path: Vec<String>,
    pub i: usize,
    pub dir: Dir,
}

impl AbstractOnion {
    /// P_{o_i}; position 0 is the onion's originator.
    fn party_at(&self, i: usize) -> String {
        if i == 0 {
            self.sender.clone()
        } else {
            self.path[i - 1].clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    Start,
    End,
    Tagged,
    Tid(Id),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "leak", rename_all = "kebab-case")]
pub enum AdvMsg {
    CorruptSender {
        marker: Marker,
        sender: String,
        sid: Id,
        dest: String,
        message: String,
        path: Vec<String>,
        reply_path: Vec<String>,
        dir: Dir,
        fwd_sid: Option<Id>,
    },
    Hop { from: String, tid: Id, to: String, via: Vec<String> },
    TidBelongs { tid: Id, sid: Id },
    ReplyRid { rid: Id },
    ReplyTid { tid: Id, prefix: Vec<String> },
    MessageLeak { from: String, message: String, receiver: String, via: Vec<String> },
    ReplyLeak { from: String, tid: Id, message: String, to: String, via: Vec<String> },
    Tagged { from: String, via: Vec<String> },
    InitiateReply { receiver: String, rid: Id, message: String, via: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdealOutput {
    Env(EnvEvent),
    Adv(AdvMsg),
}

#[derive(Clone, Debug)]
struct BackEntry {
    sender: String,
    path: Vec<String>,
    reply_path: Vec<String>,
    origin: String,
    sid: Id,
}

pub struct IdealState {
    max_hops: usize,
    bad: HashSet<String>,
    l_o: Vec<(Id, AbstractOnion, usize)>,
    b: HashMap<String, HashMap<Id, AbstractOnion>>,
    b_r: HashMap<String, HashMap<Id, (Vec<u8>, Id)>>,
    l_tag: HashSet<Id>,
    back: HashMap<Id, BackEntry>,
    id_fwd: HashMap<Id, Id>,
    rep: HashMap<String, HashMap<Id, Id>>,
    rng: ChaCha20Rng,
    minted: HashSet<Id>,
    out: Vec<IdealOutput>,
}

impl IdealState {
    /// Static corruption: `bad` is fixed for the instance's lifetime.
    pub fn new(max_hops: usize, bad: impl IntoIterator<Item = String>, seed: u64) -> (Self, EnvToken, SimToken) {
        let s = IdealState {
            max_hops,
            bad: bad.into_iter().collect(),
            l_o: vec![],
            b: HashMap::new(),
            b_r: HashMap::new(),
            l_tag: HashSet::new(),
            back: HashMap::new(),
            id_fwd: HashMap::new(),
            rep: HashMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            minted: HashSet::new(),
            out: vec![],
        };
        (s, EnvToken(()), SimToken(()))
    }

    pub fn is_bad(&self, p: &str) -> bool {
        self.bad.contains(p)
    }

    pub fn minted_ids(&self) -> usize {
        self.minted.len()
    }

    fn fresh(&mut self) -> Id {
        loop {
            let id = Id::fresh(&mut self.rng, ID_LEN);
            if self.minted.insert(id.clone()) {
                return id;
            }
        }
    }

    fn env(&mut self, e: EnvEvent) {
        self.out.push(IdealOutput::Env(e));
    }

    fn adv(&mut self, m: AdvMsg) {
        self.out.push(IdealOutput::Adv(m));
    }

    fn take(&mut self) -> Vec<IdealOutput> {
        std::mem::take(&mut self.out)
    }

    /// S may only act through corrupted parties.
    fn allowed(&self, caller: Caller<'_>, via: &str) -> bool {
        match caller {
            Caller::Env(_) => true,
            Caller::Sim(_) => self.is_bad(via),
        }
    }

    pub fn process_new_onion(
        &mut self,
        caller: Caller<'_>,
        sender: &str,
        receiver: &str,
        m: &[u8],
        path: &[String],
        reply_path: &[String],
    ) -> Result<Vec<IdealOutput>> {
        if !self.allowed(caller, sender) {
            return Err(Error::Rejected("S may only send via a corrupted party".into()));
        }
        if path.len() > self.max_hops || reply_path.len() > self.max_hops {
            return Err(Error::Rejected("path longer than N".into()));
        }
        if path.is_empty() {
            return Err(Error::Rejected("empty forward path".into()));
        }
        let sid = self.fresh();
        let o = AbstractOnion {
            sid: sid.clone(),
            sender: sender.to_string(),
            dest: receiver.to_string(),
            message: Some(m.to_vec()),
            path: path.to_vec(),
            reply_path: reply_path.to_vec(),
            i: 0,
            dir: Dir::F,
        };
        self.out_cor_sender(sender, &sid, receiver, Some(m), path, reply_path, Marker::Start, Dir::F);
        self.proc_next_step(o);
        Ok(self.take())
    }

    fn process_new_reply(&mut self, m: &[u8], tid: &Id) {
        let Some(e) = self.back.remove(tid) else {
            return;
        };
        let sid = self.fresh();
        self.id_fwd.insert(sid.clone(), e.sid.clone());
        let o = AbstractOnion {
            sid: sid.clone(),
            sender: e.origin.clone(),
            dest: e.sender.clone(),
            message: Some(m.to_vec()),
            path: e.reply_path.clone(),
            reply_path: vec![],
            i: 0,
            dir: Dir::B,
        };
        self.out_cor_sender(&e.origin, &sid, &e.sender, Some(m), &e.path, &e.reply_path, Marker::Start, Dir::B);
        self.proc_next_step(o);
    }

    pub fn deliver_onion(&mut self, _s: &SimToken, tid: &Id) -> Vec<IdealOutput> {
        if let Some(pos) = self.l_o.iter().position(|(t, _, _)| t == tid) {
            let (_, mut o, j) = self.l_o.remove(pos);
            o.i = j;
            if o.dir == Dir::B && j == o.path.len() {
                if let Some(m) = &o.message {
                    if !self.l_tag.contains(&o.sid) {
                        let e = EnvEvent::ReplyReceived { party: o.dest.clone(), message: msg_hex(m) };
                        self.env(e);
                    }
                }
            } else {
                let t2 = self.fresh();
                let party = o.party_at(j);
                self.env(EnvEvent::OnionReceived { party: party.clone(), from: o.party_at(j - 1), tid: Some(t2.clone()) });
                self.b.entry(party).or_default().insert(t2, o);
            }
        }
        self.take()
    }

    pub fn forward_onion(&mut self, caller: Caller<'_>, party: &str, tid: &Id) -> Vec<IdealOutput> {
        if !self.allowed(caller, party) {
            return vec![];
        }
        if let Some(o) = self.b.get_mut(party).and_then(|m| m.remove(tid)) {
            self.proc_next_step(o);
        } else if let Some((m, t)) = self.b_r.get_mut(party).and_then(|m| m.remove(tid)) {
            self.process_new_reply(&m, &t);
        }
        self.take()
    }

    pub fn tag(&mut self, _s: &SimToken, tid: &Id) -> Vec<IdealOutput> {
        if let Some((_, o, _)) = self.l_o.iter().find(|(t, _, _)| t == tid) {
            self.l_tag.insert(o.sid.clone());
        }
        self.take()
    }

    #[allow(clippy::too_many_arguments)]
    fn out_cor_sender(
        &mut self,
        sender: &str,
        sid: &Id,
        dest: &str,
        m: Option<&[u8]>,
        path: &[String],
        reply_path: &[String],
        marker: Marker,
        d: Dir,
    ) {
        let leak = |fwd_sid| AdvMsg::CorruptSender {
            marker: marker.clone(),
            sender: sender.to_string(),
            sid: sid.clone(),
            dest: dest.to_string(),
            message: m.map(msg_hex).unwrap_or_default(),
            path: path.to_vec(),
            reply_path: reply_path.to_vec(),
            dir: d,
            fwd_sid,
        };
        if d == Dir::F && self.is_bad(sender) {
            self.adv(leak(None));
        } else if d == Dir::B && self.is_bad(dest) {
            let f = self.id_fwd.get(sid).cloned();
            self.adv(leak(f));
        }
    }

    fn proc_to_relay(&mut self, o: AbstractOnion) {
        let i = o.i;
        let n = o.path.len();
        let Some(j) = (i + 1..=n).find(|&k| !self.is_bad(&o.path[k - 1])) else {
            return;
        };
        let tid = self.fresh();
        let from = o.party_at(i);
        self.adv(AdvMsg::Hop { from: from.clone(), tid: tid.clone(), to: o.path[j - 1].clone(), via: o.path[i..j - 1].to_vec() });
        self.env(EnvEvent::OnionSent { party: from, to: o.path[i].clone() });
        self.out_cor_sender(&o.sender, &o.sid, &o.dest, o.message.as_deref(), &o.path, &o.reply_path, Marker::Tid(tid.clone()), o.dir);
        if o.dir == Dir::B && i == 0 {
            self.adv(AdvMsg::TidBelongs { tid: tid.clone(), sid: o.sid.clone() });
        }
        self.l_o.push((tid, o, j));
    }

    fn setup_reply(&mut self, o: &AbstractOnion, rid: Id) {
        let tid = self.fresh();
        let origin = o.party_at(o.i);
        self.back.insert(
            tid.clone(),
            BackEntry { sender: o.sender.clone(), path: o.path.clone(), reply_path: o.reply_path.clone(), origin: origin.clone(), sid: o.sid.clone() },
        );
        if o.i == o.path.len() {
            self.rep.entry(origin).or_default().insert(rid.clone(), tid);
            self.adv(AdvMsg::ReplyRid { rid });
        } else {
            let end = o.reply_path.iter().position(|p| !self.is_bad(p)).map_or(o.reply_path.len(), |k| k + 1);
            self.adv(AdvMsg::ReplyTid { tid, prefix: o.reply_path[..end].to_vec() });
        }
    }

    fn leak_message(&mut self, o: AbstractOnion) {
        let Some(m) = o.message.clone() else {
            return;
        };
        self.out_cor_sender(&o.sender, &o.sid, &o.dest, Some(&m), &o.path, &o.reply_path, Marker::End, o.dir);
        if !o.reply_path.is_empty() {
            let rid = self.fresh();
            self.setup_reply(&o, rid);
        }
        let from = o.party_at(o.i);
        if o.i == o.path.len() {
            self.env(EnvEvent::MessageSent { party: from.clone(), receiver: o.dest.clone() });
        } else {
            self.env(EnvEvent::OnionSent { party: from.clone(), to: o.path[o.i].clone() });
        }
        self.adv(AdvMsg::MessageLeak { from, message: msg_hex(&m), receiver: o.dest.clone(), via: o.path[o.i..].to_vec() });
    }

    pub fn deliver_message(&mut self, _s: &SimToken, exit: &str, m: &[u8], rid: Option<Id>, receiver: &str) -> Vec<IdealOutput> {
        self.env(EnvEvent::MessageReceived { receiver: receiver.to_string(), from: exit.to_string(), message: msg_hex(m), rid });
        self.take()
    }

    pub fn initiate_reply(&mut self, caller: Caller<'_>, receiver: &str, exit: &str, m: &[u8], rid: &Id) -> Vec<IdealOutput> {
        if self.allowed(caller, receiver) {
            self.adv(AdvMsg::InitiateReply { receiver: receiver.to_string(), rid: rid.clone(), message: msg_hex(m), via: exit.to_string() });
        }
        self.take()
    }

    pub fn deliver_reply(&mut self, _s: &SimToken, receiver: &str, exit: &str, m: &[u8], rid: &Id) -> Vec<IdealOutput> {
        self.env(EnvEvent::ReplyRequestReceived {
            party: exit.to_string(),
            receiver: receiver.to_string(),
            message: msg_hex(m),
            rid: Some(rid.clone()),
        });
        if let Some(tid) = self.rep.get_mut(exit).and_then(|r| r.remove(rid)) {
            let t2 = self.fresh();
            self.b_r.entry(exit.to_string()).or_default().insert(t2.clone(), (m.to_vec(), tid));
            self.env(EnvEvent::ReplyOnionQueued { party: exit.to_string(), tid: Some(t2) });
        }
        self.take()
    }

    pub fn bypass_reply(&mut self, s: &SimToken, via: &str, m: &[u8], tid: &Id) -> Vec<IdealOutput> {
        if self.allowed(Caller::Sim(s), via) && self.back.contains_key(tid) {
            self.process_new_reply(m, tid);
        }
        self.take()
    }

    fn leak_reply(&mut self, o: AbstractOnion) {
        let tid = self.fresh();
        let n = o.path.len();
        let from = o.party_at(o.i);
        let via = o.path[o.i.min(n)..n.saturating_sub(1).max(o.i.min(n))].to_vec();
        self.adv(AdvMsg::ReplyLeak {
            from: from.clone(),
            tid: tid.clone(),
            message: o.message.as_deref().map(msg_hex).unwrap_or_default(),
            to: o.dest.clone(),
            via,
        });
        if o.i < n {
            self.env(EnvEvent::OnionSent { party: from, to: o.path[o.i].clone() });
        }
        self.out_cor_sender(&o.sender, &o.sid, &o.dest, o.message.as_deref(), &o.path, &o.reply_path, Marker::Tid(tid), Dir::B);
    }

    fn proc_next_step(&mut self, o: AbstractOnion) {
        let n = o.path.len();
        let rest_bad = (o.i + 1..=n).all(|k| self.is_bad(&o.path[k - 1]));
        if rest_bad || o.i == n {
            if self.l_tag.contains(&o.sid) {
                self.out_cor_sender(&o.sender, &o.sid, &o.dest, o.message.as_deref(), &o.path, &o.reply_path, Marker::Tagged, o.dir);
                let from = o.party_at(o.i);
                if o.i < n {
                    self.adv(AdvMsg::Tagged { from: from.clone(), via: o.path[o.i..].to_vec() });
                    self.env(EnvEvent::OnionSent { party: from, to: o.path[o.i].clone() });
                } else {
                    self.env(EnvEvent::IntegrityFailure { party: from });
                }
            } else if o.dir == Dir::F {
                self.leak_message(o);
            } else {
                self.leak_reply(o);
            }
        } else {
            self.proc_to_relay(o);
        }
    }
}
