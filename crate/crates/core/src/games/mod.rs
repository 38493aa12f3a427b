//! Challengers for the onion properties, driven by pluggable adversaries.
//!
//! Each game follows the same move protocol: the adversary gets the honest
//! parties' names and keys, queries the oracles, submits a challenge
//! request, receives the challenge, queries again and guesses. The
//! challenger keeps per-party η-lists and O-lists; game-specific
//! exceptions to the default oracle behaviour live in [`tlu`], [`slu`]
//! and [`sti`].

pub mod adversaries;
pub mod correctness;
pub mod slu;
pub mod stats;
pub mod sti;
pub mod tlu;

#[cfg(test)]
mod tests;

use std::collections::{HashMap, HashSet};

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kem::{kem_keygen, KemKeyPair};
use crate::packet::{
    form_reply, proc_onion, Address, FailCode, FormatParams, Header, Onion, OnionMaterial, OnionSpec, PathHop, ProcResult,
    ProcView, ReplyExpectation,
};

pub use stats::WinRate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    Tlu,
    Slu,
    Sti,
}

impl GameKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tlu" => Some(GameKind::Tlu),
            "slu" => Some(GameKind::Slu),
            "sti" => Some(GameKind::Sti),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::Tlu => "tlu",
            GameKind::Slu => "slu",
            GameKind::Sti => "sti",
        }
    }
}

/// What an oracle request returns. `Nothing` is the challenger staying
/// silent; `Fail` is ⊥ with a diagnostic code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleAnswer {
    Nothing,
    Fail(FailCode),
    Forward { next: Address, onion: Onion },
    Exit { message: Vec<u8>, receiver: Address },
    ReplyReceived { message: Vec<u8> },
    ReplyOnion { first_hop: Address, onion: Onion },
}

impl OracleAnswer {
    fn tag(&self) -> &'static str {
        match self {
            OracleAnswer::Nothing => "nothing",
            OracleAnswer::Fail(_) => "fail",
            OracleAnswer::Forward { .. } => "forward",
            OracleAnswer::Exit { .. } => "exit",
            OracleAnswer::ReplyReceived { .. } => "reply-received",
            OracleAnswer::ReplyOnion { .. } => "reply-onion",
        }
    }

    /// Bytes handed to the adversary.
    pub fn wire_len(&self) -> usize {
        match self {
            OracleAnswer::Nothing => 0,
            OracleAnswer::Fail(_) => 1,
            OracleAnswer::Forward { next, onion } | OracleAnswer::ReplyOnion { first_hop: next, onion } => {
                next.as_bytes().len() + onion.to_bytes().len()
            }
            OracleAnswer::Exit { message, receiver } => message.len() + receiver.as_bytes().len(),
            OracleAnswer::ReplyReceived { message } => message.len(),
        }
    }
}

impl From<ProcResult> for OracleAnswer {
    fn from(r: ProcResult) -> Self {
        match r {
            ProcResult::Forward { onion, next_hop } => OracleAnswer::Forward { next: next_hop, onion },
            ProcResult::Exit { message, receiver, .. } => OracleAnswer::Exit { message, receiver },
            ProcResult::ReplyReceived { message, .. } => OracleAnswer::ReplyReceived { message },
            ProcResult::Fail(c) => OracleAnswer::Fail(c),
        }
    }
}

/// Expectations only; the η-list is kept by [`HonestParty`] itself.
struct Expectations<'a>(&'a HashMap<Vec<u8>, ReplyExpectation>);

impl ProcView for Expectations<'_> {
    fn check_and_record(&mut self, _: &Header) -> bool {
        true
    }
    fn reply_expectation(&self, ident: &[u8]) -> Option<ReplyExpectation> {
        self.0.get(ident).cloned()
    }
}

/// A challenger-controlled party with its η-list and O-list.
pub struct HonestParty {
    pub name: Address,
    keys: KemKeyPair,
    eta: HashSet<Header>,
    o_list: HashSet<Onion>,
    replied: HashSet<Header>,
    expectations: HashMap<Vec<u8>, ReplyExpectation>,
}

impl HonestParty {
    pub fn new<R: RngCore + CryptoRng>(params: &FormatParams, name: &str, rng: &mut R) -> Result<Self> {
        Ok(HonestParty {
            name: Address::new(params, name)?,
            keys: kem_keygen(&params.suite(), rng),
            eta: HashSet::new(),
            o_list: HashSet::new(),
            replied: HashSet::new(),
            expectations: HashMap::new(),
        })
    }

    pub fn hop(&self) -> PathHop {
        PathHop { name: self.name.clone(), pk: self.keys.pk.clone() }
    }

    pub fn seen(&self, h: &Header) -> bool {
        self.eta.contains(h)
    }

    fn store(&mut self, o: &Onion) {
        self.eta.insert(o.header.clone());
        self.o_list.insert(o.clone());
    }

    fn expect(&mut self, e: ReplyExpectation) {
        self.expectations.insert(e.ident.clone(), e);
    }

    /// ProcOnion without touching the lists.
    fn process(&self, params: &FormatParams, o: &Onion) -> ProcResult {
        proc_onion(params, &self.keys.sk, o, &self.name, &mut Expectations(&self.expectations))
    }

    fn may_reply(&self, o: &Onion) -> bool {
        self.o_list.contains(o) && !self.replied.contains(&o.header)
    }

    /// Default Proc: silent on a known η, otherwise process and store.
    fn proc(&mut self, params: &FormatParams, o: &Onion) -> OracleAnswer {
        if self.seen(&o.header) {
            return OracleAnswer::Nothing;
        }
        let r = self.process(params, o);
        self.store(o);
        r.into()
    }

    /// Default Reply: only for stored onions, once per η.
    fn reply(&mut self, params: &FormatParams, o: &Onion, m: &[u8]) -> OracleAnswer {
        if !self.may_reply(o) {
            return OracleAnswer::Nothing;
        }
        match form_reply(params, m, o, &self.name, &self.keys.sk) {
            Ok((onion, first_hop)) => {
                self.replied.insert(o.header.clone());
                OracleAnswer::ReplyOnion { first_hop, onion }
            }
            Err(c) => OracleAnswer::Fail(c),
        }
    }
}

/// The request channels an adversary sees.
pub trait Oracles {
    fn proc(&mut self, party: &Address, onion: &Onion) -> OracleAnswer;
    fn reply(&mut self, party: &Address, onion: &Onion, m: &[u8]) -> OracleAnswer;
}

/// Exceptions a game makes to the default oracles after the challenge.
/// Returning `None` falls through to the default behaviour.
pub(crate) trait ChallengeRules {
    fn proc(&mut self, params: &FormatParams, parties: &mut [HonestParty], who: usize, o: &Onion) -> Option<OracleAnswer>;
    fn reply(
        &mut self,
        params: &FormatParams,
        parties: &mut [HonestParty],
        who: usize,
        o: &Onion,
        m: &[u8],
    ) -> Option<OracleAnswer>;
}

#[derive(Serialize)]
struct Move<'a> {
    call: &'a str,
    party: String,
    answer: &'a str,
    len: usize,
}

pub struct GameOracles {
    params: FormatParams,
    parties: Vec<HonestParty>,
    rules: Option<Box<dyn ChallengeRules>>,
    pub transcript: Vec<String>,
}

impl GameOracles {
    fn new(params: FormatParams, parties: Vec<HonestParty>) -> Self {
        GameOracles { params, parties, rules: None, transcript: vec![] }
    }

    fn index(&self, name: &Address) -> Option<usize> {
        self.parties.iter().position(|p| &p.name == name)
    }

    fn log(&mut self, call: &str, party: &Address, a: &OracleAnswer) {
        let m = Move { call, party: party.name(), answer: a.tag(), len: a.wire_len() };
        self.transcript.push(serde_json::to_string(&m).expect("moves serialize"));
    }
}

impl Oracles for GameOracles {
    fn proc(&mut self, party: &Address, onion: &Onion) -> OracleAnswer {
        let a = match self.index(party) {
            None => OracleAnswer::Nothing,
            Some(i) => {
                let special = self.rules.as_mut().and_then(|r| r.proc(&self.params, &mut self.parties, i, onion));
                special.unwrap_or_else(|| self.parties[i].proc(&self.params, onion))
            }
        };
        self.log("proc", party, &a);
        a
    }

    fn reply(&mut self, party: &Address, onion: &Onion, m: &[u8]) -> OracleAnswer {
        let a = match self.index(party) {
            None => OracleAnswer::Nothing,
            Some(i) => {
                let special = self.rules.as_mut().and_then(|r| r.reply(&self.params, &mut self.parties, i, onion, m));
                special.unwrap_or_else(|| self.parties[i].reply(&self.params, onion, m))
            }
        };
        self.log("reply", party, &a);
        a
    }
}

/// Names and keys of the challenger's parties.
#[derive(Clone, Debug)]
pub struct GameSetup {
    pub kind: GameKind,
    pub params: FormatParams,
    pub p_h: PathHop,
    /// Only in the tail game.
    pub p_h_back: Option<PathHop>,
    pub p_s: PathHop,
}

/// The adversary's challenge request. `j` is the forward position (TLU,
/// STI) and `j_back` the backward one (SLU, STI); unused fields are
/// ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Submission {
    pub message: Vec<u8>,
    pub receiver: Address,
    pub j: usize,
    pub j_back: usize,
    pub path: Vec<PathHop>,
    pub reply_path: Vec<PathHop>,
}

pub trait GameAdversary {
    fn name(&self) -> &str;
    fn submit(&mut self, setup: &GameSetup, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission;
    /// `challenge` is what step 5/6 hands over: O_1 in the backward game,
    /// the b-dependent onion otherwise.
    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> bool;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameOutcome {
    pub b: bool,
    pub guess: bool,
    pub guess_correct: bool,
    pub transcript: Vec<String>,
}

fn reject<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Rejected(msg.into()))
}

/// Step-4 checks shared by all games. Hops named like an honest party get
/// that party's key; the caller has already checked positions.
pub(crate) fn checked_paths(
    params: &FormatParams,
    sub: &Submission,
    honest: &[&HonestParty],
) -> Result<(Vec<PathHop>, Vec<PathHop>)> {
    let fix = |path: &[PathHop]| -> Vec<PathHop> {
        path.iter().map(|h| honest.iter().find(|p| p.name == h.name).map_or_else(|| h.clone(), |p| p.hop())).collect()
    };
    let (path, reply) = (fix(&sub.path), fix(&sub.reply_path));
    let mut keys: HashMap<&Address, &[u8]> = HashMap::new();
    for h in path.iter().chain(&reply) {
        if params.group.decode(h.pk.as_bytes()).is_err() {
            return reject(format!("invalid key for {}", h.name));
        }
        if *keys.entry(&h.name).or_insert(h.pk.as_bytes()) != h.pk.as_bytes() {
            return reject(format!("two keys for {}", h.name));
        }
    }
    let probe = OnionSpec {
        seed: [0; 32],
        message: sub.message.clone(),
        receiver: sub.receiver.clone(),
        forward: path.clone(),
        reply: reply.clone(),
    };
    probe.validate(params).map_err(|e| Error::Rejected(e.to_string()))?;
    Ok((path, reply))
}

pub(crate) fn at(path: &[PathHop], pos: usize, who: &HonestParty) -> bool {
    pos >= 1 && path.get(pos - 1).is_some_and(|h| h.name == who.name)
}

/// Random maximal-length message and random receiver for Ō.
pub(crate) fn random_filling<R: Rng>(params: &FormatParams, rng: &mut R) -> (Vec<u8>, Address) {
    let mut m = vec![0u8; params.max_message_len()];
    rng.fill(&mut m[..]);
    let mut r = vec![0u8; params.addr_len];
    rng.fill(&mut r[..]);
    (m, Address::from_bytes(params, &r).expect("addr_len bytes"))
}

pub(crate) fn expand(params: &FormatParams, spec: &OnionSpec) -> Result<OnionMaterial> {
    OnionMaterial::expand(params, spec).map_err(|e| Error::Rejected(e.to_string()))
}

/// What a game hands back after checking a submission.
pub(crate) struct Prepared {
    pub challenge: Onion,
    pub rules: Option<Box<dyn ChallengeRules>>,
    /// Reply expectation for the sender P_s, from the adversary's onion.
    pub expectation: Option<ReplyExpectation>,
}

const P_H: &str = "ph";
const P_H_BACK: &str = "phb";
const P_S: &str = "ps";

/// Plays one game with a fixed bit. The challenger and the adversary use
/// separate randomness so a transcript can be replayed under both bits.
pub fn run_game_with_bit(
    kind: GameKind,
    adversary: &mut dyn GameAdversary,
    params: &FormatParams,
    b: bool,
    challenger_rng: &mut ChaCha20Rng,
    adversary_rng: &mut ChaCha20Rng,
) -> Result<GameOutcome> {
    params.validate()?;
    let mut parties = vec![HonestParty::new(params, P_H, challenger_rng)?];
    if kind == GameKind::Sti {
        parties.push(HonestParty::new(params, P_H_BACK, challenger_rng)?);
    }
    parties.push(HonestParty::new(params, P_S, challenger_rng)?);
    let setup = GameSetup {
        kind,
        params: *params,
        p_h: parties[0].hop(),
        p_h_back: (kind == GameKind::Sti).then(|| parties[1].hop()),
        p_s: parties.last().unwrap().hop(),
    };
    let mut oracles = GameOracles::new(*params, parties);
    let sub = adversary.submit(&setup, &mut oracles, adversary_rng);
    let prepared = {
        let ps: Vec<&HonestParty> = oracles.parties.iter().collect();
        match kind {
            GameKind::Tlu => tlu::prepare(params, &sub, &ps, b, challenger_rng)?,
            GameKind::Slu => slu::prepare(params, &sub, &ps, b, challenger_rng)?,
            GameKind::Sti => sti::prepare(params, &sub, &ps, b, challenger_rng)?,
        }
    };
    if let Some(e) = prepared.expectation {
        oracles.parties.last_mut().unwrap().expect(e);
    }
    oracles.rules = prepared.rules;
    oracles.transcript.push(format!("{{\"challenge\":{}}}", prepared.challenge.to_bytes().len()));
    let guess = adversary.guess(&prepared.challenge, &mut oracles, adversary_rng);
    Ok(GameOutcome { b, guess, guess_correct: guess == b, transcript: oracles.transcript })
}

pub fn run_game<R: RngCore + CryptoRng>(
    kind: GameKind,
    adversary: &mut dyn GameAdversary,
    params: &FormatParams,
    rng: &mut R,
) -> Result<GameOutcome> {
    let b = rng.gen();
    let mut c = ChaCha20Rng::from_seed(rng.gen());
    let mut a = ChaCha20Rng::from_seed(rng.gen());
    run_game_with_bit(kind, adversary, params, b, &mut c, &mut a)
}

pub fn game_tlu_forward<R: RngCore + CryptoRng>(
    adversary: &mut dyn GameAdversary,
    params: &FormatParams,
    rng: &mut R,
) -> Result<GameOutcome> {
    run_game(GameKind::Tlu, adversary, params, rng)
}

pub fn game_slu_backward<R: RngCore + CryptoRng>(
    adversary: &mut dyn GameAdversary,
    params: &FormatParams,
    rng: &mut R,
) -> Result<GameOutcome> {
    run_game(GameKind::Slu, adversary, params, rng)
}

pub fn game_sti_tail<R: RngCore + CryptoRng>(
    adversary: &mut dyn GameAdversary,
    params: &FormatParams,
    rng: &mut R,
) -> Result<GameOutcome> {
    run_game(GameKind::Sti, adversary, params, rng)
}

/// Plays `games` independent games with a fresh adversary each time.
pub fn play_many(
    kind: GameKind,
    make: &dyn Fn() -> Box<dyn GameAdversary>,
    params: &FormatParams,
    games: u64,
    seed: u64,
) -> Result<WinRate> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut wins = 0;
    for _ in 0..games {
        let mut adv = make();
        wins += run_game(kind, adv.as_mut(), params, &mut rng)?.guess_correct as u64;
    }
    Ok(WinRate { wins, games })
}
