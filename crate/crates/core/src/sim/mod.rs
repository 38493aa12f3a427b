//! Deterministic in-memory network simulator.
//!
//! Time is a logical round counter. A packet sent in round t arrives in
//! round t+1; each round's arrivals are shuffled by the run's seed, the
//! adversary script runs over them, then they are delivered in order.

mod config;
mod nymserver;
pub mod attacks;
pub mod ideal_driver;
pub mod scenarios;
pub mod usage;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{parse_config, ConfigFile};

use crate::error::{Error, Result};
use crate::events::{EnvEvent, Id};
use crate::kem::{kem_keygen, KemKeyPair};
use crate::node::{Action, ReceiverState, RelayState, SenderState, Step};
use crate::packet::{tag_payload, Address, FillerMode, FormatParams, Onion, OnionMaterial, OnionSpec, PathHop};
use nymserver::Nymserver;

/// Receiver name of the legacy third-party nymserver.
pub const NYMSERVER: &str = "nym";
const MAX_ROUNDS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    SecureRelayLink,
    PlaintextEdgeLink,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub relays: Vec<String>,
    #[serde(default)]
    pub corrupted: BTreeSet<String>,
    pub senders: Vec<String>,
    pub receivers: Vec<String>,
}

impl Topology {
    pub fn is_relay(&self, p: &str) -> bool {
        self.relays.iter().any(|r| r == p)
    }

    pub fn is_sender(&self, p: &str) -> bool {
        self.senders.iter().any(|r| r == p)
    }

    pub fn is_receiver(&self, p: &str) -> bool {
        p == NYMSERVER || self.receivers.iter().any(|r| r == p)
    }

    pub fn is_corrupted(&self, p: &str) -> bool {
        self.corrupted.contains(p)
    }

    /// Relays and receivers do not share secure channels.
    pub fn link_kind(&self, a: &str, b: &str) -> LinkKind {
        if self.is_receiver(a) || self.is_receiver(b) {
            LinkKind::PlaintextEdgeLink
        } else {
            LinkKind::SecureRelayLink
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendItem {
    pub sender: String,
    pub receiver: String,
    pub message: String,
    pub path: Vec<String>,
    #[serde(default)]
    pub reply_path: Vec<String>,
    /// What the receiver answers, if it answers.
    #[serde(default)]
    pub reply: Option<String>,
    #[serde(default)]
    pub round: u64,
    /// Application-level session marker carried inside the message.
    #[serde(default)]
    pub session: Option<String>,
    /// Legacy mode only: path of the onion carrying the reply header to the nymserver.
    #[serde(default)]
    pub nym_path: Vec<String>,
}

/// Picks packets by what the adversary can see: link, round, and position
/// among that link's packets in the round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    #[serde(default)]
    pub src: Option<String>,
    #[serde(default)]
    pub dst: Option<String>,
    #[serde(default)]
    pub round: Option<u64>,
    #[serde(default)]
    pub index: Option<usize>,
}

impl Selector {
    fn matches(&self, p: &Packet, t: u64, idx: usize) -> bool {
        self.src.as_ref().map_or(true, |s| *s == p.src)
            && self.dst.as_ref().map_or(true, |d| *d == p.dst)
            && self.round.map_or(true, |r| r == t)
            && self.index.map_or(true, |i| i == idx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    /// Record every link crossing as the adversary sees it.
    Observe,
    Drop { at: Selector },
    /// XOR `xor` into payload byte `offset`; needs a corrupted endpoint.
    Tag { at: Selector, offset: usize, xor: u8 },
    Delay { at: Selector, rounds: u64 },
    /// Swap the rids of the first two exit-to-receiver messages of a round.
    SwapRid { round: u64 },
    /// Send a plaintext message to a receiver claiming to be `exit`.
    ImpersonateEdge { exit: String, receiver: String, message: String, round: u64 },
    /// Inject serialized onion bytes (hex) from a corrupted party.
    Inject { from: String, to: String, onion: String, round: u64 },
    /// Resend a packet one round later; needs a corrupted endpoint.
    Replay { at: Selector },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    #[serde(default)]
    pub legacy_zero_padding: bool,
    #[serde(default)]
    pub legacy_nymserver: bool,
}

/// How the workload's exits were chosen; only read by the usage lint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitPolicy {
    #[default]
    Explicit,
    UniformRandom,
    ReceiverHash,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    #[serde(default)]
    pub workload: Vec<SendItem>,
    #[serde(default)]
    pub script: Vec<Rule>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub exit_policy: ExitPolicy,
    /// The sender application emits output when a reply fails to arrive.
    #[serde(default)]
    pub sender_reacts_to_reply: bool,
    /// Event kinds that must appear in the environment stream.
    #[serde(default)]
    pub expect: Vec<String>,
    /// Event kinds that must not appear.
    #[serde(default)]
    pub forbid: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Env,
    Adversary,
    Diagnostic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: u64,
    pub actor: String,
    pub kind: String,
    pub visibility: Visibility,
    pub fields: Value,
}

#[derive(Clone, Debug)]
pub struct SimRun {
    pub params: FormatParams,
    pub records: Vec<TraceRecord>,
    /// Environment-visible events of honest parties, in order.
    pub env: Vec<EnvEvent>,
    /// Onions that arrived at corrupted relays.
    pub adversary_inbox: Vec<(u64, String, Onion)>,
    pub corrupted_keys: BTreeMap<String, KemKeyPair>,
    pub rounds: u64,
}

impl SimRun {
    pub fn to_jsonl(&self) -> String {
        jsonl(self.records.iter())
    }

    pub fn without_diagnostics(&self) -> String {
        jsonl(self.records.iter().filter(|r| r.visibility != Visibility::Diagnostic))
    }

    pub fn adversary_view(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.visibility == Visibility::Adversary)
    }

    /// Failed `expect` / `forbid` assertions of the scenario.
    pub fn check(&self, sc: &Scenario) -> Vec<String> {
        let kinds: BTreeSet<&str> = self.env.iter().map(|e| e.kind()).collect();
        let mut bad = vec![];
        for k in &sc.expect {
            if !kinds.contains(k.as_str()) {
                bad.push(format!("expected event {k} did not occur"));
            }
        }
        for k in &sc.forbid {
            if kinds.contains(k.as_str()) {
                bad.push(format!("forbidden event {k} occurred"));
            }
        }
        bad
    }
}

pub fn jsonl<'a>(records: impl Iterator<Item = &'a TraceRecord>) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
enum Body {
    Onion(Onion),
    Message { message: Vec<u8>, rid: Option<Id> },
    ReplyRequest { message: Vec<u8>, rid: Id },
    NymLookup { pseudonym: String, message: Vec<u8> },
}

#[derive(Clone, Debug)]
struct Packet {
    src: String,
    dst: String,
    due: u64,
    body: Body,
    /// Already delayed or replayed once; rules do not apply twice.
    touched: bool,
}

pub fn params_for(flags: &Flags) -> FormatParams {
    let mut p = FormatParams::default();
    if flags.legacy_zero_padding {
        p.filler = FillerMode::LegacyZero;
    }
    p
}

/// Runs a scenario; a pure function of (scenario, seed).
pub fn run_scenario(sc: &Scenario, seed: u64) -> Result<SimRun> {
    let params = params_for(&sc.flags);
    validate(sc, &params)?;
    Engine::new(sc, params, seed)?.run()
}

fn cfg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn validate(sc: &Scenario, params: &FormatParams) -> Result<()> {
    let t = &sc.topology;
    let mut all = BTreeSet::new();
    for name in t.relays.iter().chain(&t.senders).chain(&t.receivers) {
        if name.is_empty() || name.len() > params.addr_len {
            return cfg(format!("party name {name:?} must be 1..={} bytes", params.addr_len));
        }
        if name == NYMSERVER || !all.insert(name.clone()) {
            return cfg(format!("party name {name:?} is reserved or repeated"));
        }
    }
    for c in &t.corrupted {
        if !t.is_relay(c) && !t.is_receiver(c) {
            return cfg(format!("corrupted party {c:?} is not a relay or receiver"));
        }
    }
    for (i, w) in sc.workload.iter().enumerate() {
        if !t.is_sender(&w.sender) {
            return cfg(format!("item {i}: unknown sender {:?}", w.sender));
        }
        if !t.is_receiver(&w.receiver) || w.receiver == NYMSERVER {
            return cfg(format!("item {i}: unknown receiver {:?}", w.receiver));
        }
        for path in [&w.path, &w.nym_path] {
            if path.len() > params.max_hops || path.iter().any(|p| !t.is_relay(p)) {
                return cfg(format!("item {i}: bad forward path {path:?}"));
            }
        }
        if w.path.is_empty() {
            return cfg(format!("item {i}: empty forward path"));
        }
        if let Some((last, rest)) = w.reply_path.split_last() {
            if *last != w.sender || rest.iter().any(|p| !t.is_relay(p)) || w.reply_path.len() > params.max_hops {
                return cfg(format!("item {i}: reply path must be relays ending at the sender"));
            }
        }
        if w.message.len() + 64 > params.max_message_len() {
            return cfg(format!("item {i}: message too long"));
        }
    }
    Ok(())
}

struct Engine<'a> {
    sc: &'a Scenario,
    params: FormatParams,
    rng: ChaCha20Rng,
    keys: BTreeMap<String, KemKeyPair>,
    relays: BTreeMap<String, RelayState>,
    senders: BTreeMap<String, SenderState>,
    receivers: BTreeMap<String, ReceiverState>,
    nym: Option<Nymserver>,
    planned: BTreeMap<(String, Vec<u8>), Vec<u8>>,
    inflight: Vec<Packet>,
    observe: bool,
    records: Vec<TraceRecord>,
    env: Vec<EnvEvent>,
    inbox: Vec<(u64, String, Onion)>,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, params: FormatParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let suite = params.suite();
        let t = &sc.topology;
        let mut keys = BTreeMap::new();
        for name in t.relays.iter().chain(&t.senders) {
            keys.insert(name.clone(), kem_keygen(&suite, &mut rng));
        }
        let addr = |n: &str| Address::new(&params, n);
        let mut relays = BTreeMap::new();
        for r in &t.relays {
            relays.insert(r.clone(), RelayState::new(params, addr(r)?, keys[r].clone()));
        }
        let mut senders = BTreeMap::new();
        for s in &t.senders {
            senders.insert(s.clone(), SenderState::new(params, addr(s)?, keys[s].clone()));
        }
        let mut receivers = BTreeMap::new();
        for r in &t.receivers {
            receivers.insert(r.clone(), ReceiverState::new(addr(r)?));
        }
        Ok(Engine {
            sc,
            params,
            rng,
            keys,
            relays,
            senders,
            receivers,
            nym: sc.flags.legacy_nymserver.then(Nymserver::default),
            planned: BTreeMap::new(),
            inflight: vec![],
            observe: sc.script.contains(&Rule::Observe),
            records: vec![],
            env: vec![],
            inbox: vec![],
        })
    }

    fn run(mut self) -> Result<SimRun> {
        let last = self.sc.workload.iter().map(|w| w.round).max();
        let mut t = 0;
        loop {
            for i in 0..self.sc.workload.len() {
                if self.sc.workload[i].round == t {
                    self.send_item(i, t)?;
                }
            }
            let (mut due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.inflight).into_iter().partition(|p| p.due == t);
            self.inflight = rest;
            due.shuffle(&mut self.rng);
            for p in self.adversary(due, t) {
                self.deliver(p, t)?;
            }
            if self.inflight.is_empty() && last.map_or(true, |r| t >= r) {
                break;
            }
            t += 1;
            if t > MAX_ROUNDS {
                return cfg("scenario did not quiesce");
            }
        }
        let corrupted_keys =
            self.keys.iter().filter(|(k, _)| self.sc.topology.is_corrupted(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
        Ok(SimRun { params: self.params, records: self.records, env: self.env, adversary_inbox: self.inbox, corrupted_keys, rounds: t })
    }

    fn record(&mut self, time: u64, actor: &str, kind: &str, visibility: Visibility, fields: Value) {
        self.records.push(TraceRecord { time, actor: actor.to_string(), kind: kind.to_string(), visibility, fields });
    }

    fn addr(&self, name: &str) -> Result<Address> {
        Address::new(&self.params, name)
    }

    fn spec(&mut self, path: &[String], reply: &[String], receiver: &str, message: Vec<u8>) -> Result<OnionSpec> {
        let hop = |n: &String| -> Result<PathHop> { Ok(PathHop { name: Address::new(&self.params, n)?, pk: self.keys[n].pk.clone() }) };
        let forward = path.iter().map(hop).collect::<Result<_>>()?;
        let reply = reply.iter().map(hop).collect::<Result<_>>()?;
        Ok(OnionSpec { seed: self.rng.gen(), message, receiver: self.addr(receiver)?, forward, reply })
    }

    fn send_item(&mut self, i: usize, t: u64) -> Result<()> {
        let w = self.sc.workload[i].clone();
        let mut message = w.message.clone().into_bytes();
        if let Some(s) = &w.session {
            message = format!("session:{s}:").into_bytes().into_iter().chain(message).collect();
        }
        let mut sends = vec![];
        if self.sc.flags.legacy_nymserver && !w.reply_path.is_empty() {
            // Two onions: the message, and the reply header parked at the nymserver.
            let full = self.spec(&w.path, &w.reply_path, &w.receiver, vec![])?;
            let mat = OnionMaterial::expand(&self.params, &full)?;
            let info = mat.reply_info.clone().expect("repliable spec has a reply block");
            self.senders.get_mut(&w.sender).unwrap().expect(mat.reply_expectation().expect("repliable"));
            let pseudonym = hex::encode(self.rng.gen::<[u8; 8]>());
            let tagged = [format!("nym:{pseudonym}:").into_bytes(), message].concat();
            if let Some(r) = &w.reply {
                self.planned.insert((w.receiver.clone(), tagged.clone()), r.clone().into_bytes());
            }
            sends.push(self.spec(&w.path, &[], &w.receiver, tagged)?);
            let nym_path = if w.nym_path.is_empty() { &w.path } else { &w.nym_path };
            let block = nymserver::encode_block(&pseudonym, &info);
            sends.push(self.spec(nym_path, &[], NYMSERVER, block)?);
        } else {
            if let Some(r) = &w.reply {
                self.planned.insert((w.receiver.clone(), message.clone()), r.clone().into_bytes());
            }
            sends.push(self.spec(&w.path, &w.reply_path, &w.receiver, message)?);
        }
        for spec in sends {
            let step = self.senders.get_mut(&w.sender).unwrap().send(&spec)?;
            let action = self.emit(t, &w.sender, step).1;
            self.enqueue(&w.sender, action, t);
        }
        Ok(())
    }

    fn emit(&mut self, t: u64, party: &str, step: Step) -> (Option<Id>, Option<Action>) {
        let vis = if self.sc.topology.is_corrupted(party) { Visibility::Adversary } else { Visibility::Env };
        for e in step.events {
            let fields = serde_json::to_value(&e).expect("events serialize");
            self.record(t, party, e.kind(), vis, fields);
            if vis == Visibility::Env {
                self.env.push(e);
            }
        }
        if let Some(c) = step.dropped {
            self.record(t, party, "drop", Visibility::Diagnostic, json!({ "code": c.as_str() }));
        }
        (step.tid, step.action)
    }

    fn enqueue(&mut self, src: &str, action: Option<Action>, t: u64) {
        let Some(a) = action else { return };
        let (dst, body) = match a {
            Action::SendOnion { to, onion } => (to.name(), Body::Onion(onion)),
            Action::SendMessage { receiver, message, rid } => (receiver.name(), Body::Message { message, rid }),
            Action::SendReplyRequest { to, message, rid } => (to.name(), Body::ReplyRequest { message, rid }),
        };
        self.push(src, &dst, body, t + 1);
    }

    fn push(&mut self, src: &str, dst: &str, body: Body, due: u64) {
        self.inflight.push(Packet { src: src.to_string(), dst: dst.to_string(), due, body, touched: false });
    }

    fn controls(&self, p: &Packet) -> bool {
        self.sc.topology.is_corrupted(&p.src) || self.sc.topology.is_corrupted(&p.dst)
    }

    fn observe_packet(&mut self, p: &Packet, idx: usize, t: u64) {
        let topo = &self.sc.topology;
        let kind = topo.link_kind(&p.src, &p.dst);
        let mut f = json!({ "src": p.src, "dst": p.dst, "index": idx, "link": kind });
        let open = kind == LinkKind::PlaintextEdgeLink || self.controls(p);
        if open {
            match &p.body {
                Body::Onion(o) => f["digest"] = json!(hex::encode(&Sha256::digest(o.to_bytes())[..8])),
                Body::Message { message, rid } => {
                    f["message"] = json!(hex::encode(message));
                    f["rid"] = json!(rid);
                }
                Body::ReplyRequest { message, rid } => {
                    f["message"] = json!(hex::encode(message));
                    f["rid"] = json!(rid);
                }
                Body::NymLookup { pseudonym, message } => {
                    f["pseudonym"] = json!(pseudonym);
                    f["message"] = json!(hex::encode(message));
                }
            }
        } else {
            // honest-to-honest secure channel: only that a packet crossed
            f["marker"] = json!("packet");
        }
        self.record(t, "adversary", "link", Visibility::Adversary, f);
    }

    fn action(&mut self, t: u64, what: &str, p: &Packet) {
        self.record(t, "adversary", what, Visibility::Diagnostic, json!({ "src": p.src, "dst": p.dst }));
    }

    fn adversary(&mut self, due: Vec<Packet>, t: u64) -> Vec<Packet> {
        let mut per_link: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut indexed = vec![];
        for p in due {
            let c = per_link.entry((p.src.clone(), p.dst.clone())).or_default();
            indexed.push((p, *c));
            *c += 1;
        }
        if self.observe {
            for (p, i) in &indexed {
                self.observe_packet(p, *i, t);
            }
        }
        let script = self.sc.script.clone();
        let mut out = vec![];
        'packets: for (mut p, idx) in indexed {
            for rule in &script {
                match rule {
                    Rule::Drop { at } if at.matches(&p, t, idx) => {
                        self.action(t, "drop", &p);
                        continue 'packets;
                    }
                    Rule::Tag { at, offset, xor } if at.matches(&p, t, idx) && self.controls(&p) => {
                        if let Body::Onion(o) = &p.body {
                            let mut mask = vec![0u8; o.payload.len()];
                            let at = offset % mask.len();
                            mask[at] = (*xor).max(1);
                            p.body = Body::Onion(tag_payload(o, &mask).expect("nonzero mask of payload width"));
                            self.action(t, "tag", &p);
                        }
                    }
                    Rule::Delay { at, rounds } if !p.touched && at.matches(&p, t, idx) => {
                        self.action(t, "delay", &p);
                        p.due = t + (*rounds).max(1);
                        p.touched = true;
                        self.inflight.push(p);
                        continue 'packets;
                    }
                    Rule::Replay { at } if !p.touched && at.matches(&p, t, idx) && self.controls(&p) => {
                        self.action(t, "replay", &p);
                        let mut copy = p.clone();
                        copy.due = t + 1;
                        copy.touched = true;
                        self.inflight.push(copy);
                    }
                    _ => {}
                }
            }
            out.push(p);
        }
        for rule in &script {
            match rule {
                Rule::SwapRid { round } if *round == t => {
                    let idx: Vec<usize> = out
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| matches!(p.body, Body::Message { rid: Some(_), .. }))
                        .map(|(i, _)| i)
                        .take(2)
                        .collect();
                    if let [a, b] = idx[..] {
                        let ra = match &out[a].body {
                            Body::Message { rid, .. } => rid.clone(),
                            _ => None,
                        };
                        let rb = match &mut out[b].body {
                            Body::Message { rid, .. } => std::mem::replace(rid, ra),
                            _ => None,
                        };
                        if let Body::Message { rid, .. } = &mut out[a].body {
                            *rid = rb;
                        }
                        let pa = out[a].clone();
                        self.action(t, "swap-rid", &pa);
                    }
                }
                Rule::ImpersonateEdge { exit, receiver, message, round } if *round == t => {
                    let p = Packet {
                        src: exit.clone(),
                        dst: receiver.clone(),
                        due: t,
                        body: Body::Message { message: message.clone().into_bytes(), rid: None },
                        touched: true,
                    };
                    self.action(t, "impersonate-edge", &p);
                    out.push(p);
                }
                Rule::Inject { from, to, onion, round } if *round == t && self.sc.topology.is_corrupted(from) => {
                    let parsed = hex::decode(onion).ok().and_then(|b| Onion::from_bytes(&self.params, &b).ok());
                    if let Some(o) = parsed {
                        let p = Packet { src: from.clone(), dst: to.clone(), due: t, body: Body::Onion(o), touched: true };
                        self.action(t, "inject", &p);
                        out.push(p);
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn deliver(&mut self, p: Packet, t: u64) -> Result<()> {
        let from = self.addr(&p.src)?;
        let dst = p.dst.clone();
        if self.relays.contains_key(&dst) {
            match p.body {
                Body::Onion(o) => {
                    if self.sc.topology.is_corrupted(&dst) {
                        self.inbox.push((t, dst.clone(), o.clone()));
                    }
                    let s = self.relays.get_mut(&dst).unwrap().on_onion(&o, &from, &mut self.rng);
                    if let (Some(tid), _) = self.emit(t, &dst, s) {
                        let f = self.relays.get_mut(&dst).unwrap().forward(&tid, &mut self.rng);
                        let a = self.emit(t, &dst, f).1;
                        self.enqueue(&dst, a, t);
                    }
                }
                Body::ReplyRequest { message, rid } => {
                    let s = self.relays.get_mut(&dst).unwrap().on_receiver_reply(&message, &rid, &from, &mut self.rng);
                    let a = self.emit(t, &dst, s).1;
                    self.enqueue(&dst, a, t);
                }
                _ => self.record(t, &dst, "drop", Visibility::Diagnostic, json!({ "code": "unexpected-body" })),
            }
        } else if self.senders.contains_key(&dst) {
            match p.body {
                Body::Onion(o) => {
                    let s = self.senders.get_mut(&dst).unwrap().on_onion(&o);
                    self.emit(t, &dst, s);
                }
                _ => self.record(t, &dst, "drop", Visibility::Diagnostic, json!({ "code": "unexpected-body" })),
            }
        } else if dst == NYMSERVER {
            self.nym_deliver(p, t)?;
        } else if self.receivers.contains_key(&dst) {
            match p.body {
                Body::Message { message, rid } => {
                    let s = self.receivers.get_mut(&dst).unwrap().on_message(&message, rid.clone(), &from);
                    self.emit(t, &dst, s);
                    let Some(reply) = self.planned.get(&(dst.clone(), message.clone())).cloned() else { return Ok(()) };
                    if let Some(pseudonym) = nymserver::pseudonym_of(&message).filter(|_| self.nym.is_some()) {
                        self.planned.remove(&(dst.clone(), message));
                        self.push(&dst, NYMSERVER, Body::NymLookup { pseudonym, message: reply }, t + 1);
                    } else if let Some(rid) = rid {
                        self.planned.remove(&(dst.clone(), message));
                        let a = self.receivers[&dst].reply(&reply, &rid, &from);
                        self.enqueue(&dst, Some(a), t);
                    }
                }
                Body::Onion(o) => {
                    let s = self.receivers.get_mut(&dst).unwrap().on_onion(&o);
                    self.emit(t, &dst, s);
                }
                _ => self.record(t, &dst, "drop", Visibility::Diagnostic, json!({ "code": "unexpected-body" })),
            }
        } else {
            self.record(t, &dst, "drop", Visibility::Diagnostic, json!({ "code": "unknown-party" }));
        }
        Ok(())
    }

    fn nym_deliver(&mut self, p: Packet, t: u64) -> Result<()> {
        let params = self.params;
        let Some(nym) = self.nym.as_mut() else {
            self.record(t, NYMSERVER, "drop", Visibility::Diagnostic, json!({ "code": "no-nymserver" }));
            return Ok(());
        };
        match p.body {
            Body::Message { message, .. } => {
                let stored = nym.store(&params, &message);
                self.record(t, NYMSERVER, "nym-store", Visibility::Diagnostic, json!({ "stored": stored }));
            }
            Body::NymLookup { pseudonym, message } => {
                let found = nym.lookup(&params, &pseudonym, &message)?;
                // the nymserver is a third party: whether a lookup yields an onion is public
                self.record(t, NYMSERVER, "nym-lookup", Visibility::Adversary, json!({ "pseudonym": pseudonym, "requester": p.src, "found": found.is_some() }));
                if let Some((onion, first)) = found {
                    self.push(NYMSERVER, &first.name(), Body::Onion(onion), t + 1);
                }
            }
            _ => self.record(t, NYMSERVER, "drop", Visibility::Diagnostic, json!({ "code": "unexpected-body" })),
        }
        Ok(())
    }
}
