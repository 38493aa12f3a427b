//! Adversaries for the indistinguishability games.
//!
//! Every adversary runs its own relays (`a0`..`a9`) and follows its onion
//! through them, asking the oracles wherever an honest party sits. The
//! distinguishers guess 1 only on evidence and flip a coin otherwise, so a
//! distinguisher without evidence lands at 1/2 whatever the bit's bias.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{GameAdversary, GameKind, GameSetup, OracleAnswer, Oracles, Submission};
use crate::crypto::Scalar;
use crate::kem::{kem_decap, kem_keygen, KemKeyPair};
use crate::packet::header::peel_beta;
use crate::packet::{form_reply, proc_onion, tag_payload, Address, FailCode, FillerMode, FormatParams, NoReplay, Onion, PathHop};

/// Relays the adversary controls.
pub struct OwnRelays {
    params: FormatParams,
    relays: Vec<(Address, KemKeyPair)>,
}

impl OwnRelays {
    pub fn new(params: &FormatParams, count: usize, rng: &mut dyn RngCore) -> Self {
        let mut r = ChaCha20Rng::from_seed(rng.gen());
        let suite = params.suite();
        let relays =
            (0..count).map(|i| (Address::new(params, &format!("a{i}")).unwrap(), kem_keygen(&suite, &mut r))).collect();
        OwnRelays { params: *params, relays }
    }

    fn sk(&self, name: &Address) -> Option<&Scalar> {
        self.relays.iter().find(|(a, _)| a == name).map(|(_, k)| &k.sk)
    }

    /// `count` distinct relays in random order.
    pub fn pick(&self, rng: &mut dyn RngCore, count: usize) -> Vec<PathHop> {
        self.relays.choose_multiple(rng, count).map(|(a, k)| PathHop { name: a.clone(), pk: k.pk.clone() }).collect()
    }

    /// One hop: peel at an own relay, ask the oracle elsewhere.
    pub fn ask(&self, oracles: &mut dyn Oracles, at: &Address, o: &Onion) -> OracleAnswer {
        match self.sk(at) {
            Some(sk) => proc_onion(&self.params, sk, o, at, &mut NoReplay).into(),
            None => oracles.proc(at, o),
        }
    }

    /// Moves `o` along `hops` and returns what arrives at the last one.
    /// None if some hop does not forward to the next or an onion changes
    /// width.
    pub fn carry(&self, oracles: &mut dyn Oracles, mut o: Onion, hops: &[Address]) -> Option<Onion> {
        for w in hops.windows(2) {
            match self.ask(oracles, &w[0], &o) {
                OracleAnswer::Forward { next, onion } if next == w[1] && onion.to_bytes().len() == self.params.onion_len() => {
                    o = onion
                }
                _ => return None,
            }
        }
        Some(o)
    }

    /// Reply at the exit, own or honest.
    pub fn reply_at(&self, oracles: &mut dyn Oracles, exit: &Address, o: &Onion, m: &[u8]) -> Option<(Onion, Address)> {
        match self.sk(exit) {
            Some(sk) => form_reply(&self.params, m, o, exit, sk).ok(),
            None => match oracles.reply(exit, o, m) {
                OracleAnswer::ReplyOnion { first_hop, onion } => Some((onion, first_hop)),
                _ => None,
            },
        }
    }

    /// Zero bytes after the routing slots when an own relay peels `o`.
    pub fn zero_run(&self, at: &Address, o: &Onion) -> Option<usize> {
        let p = &self.params;
        let alpha = p.group.decode(&o.header.alpha).ok()?;
        let ls = kem_decap(&p.suite(), self.sk(at)?, &alpha).ok()?;
        let (_, _, next_beta) = peel_beta(p, &ls, &o.header.beta).ok()?;
        Some(next_beta.iter().take_while(|&&b| b == 0).count())
    }
}

/// Path length implied by a zero run at the exit: the smallest n whose
/// final filler fits in it.
pub fn length_from_zero_run(params: &FormatParams, run: usize) -> Option<usize> {
    (1..=params.max_hops).find(|&m| params.final_filler_len(m) <= run)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plan {
    pub n: usize,
    pub j: usize,
    pub n_back: usize,
    pub j_back: usize,
}

impl Plan {
    /// Uniform over the positions the game accepts. `j_below_n` keeps the
    /// honest forward position strictly before the exit.
    pub fn random(kind: GameKind, max: usize, j_below_n: bool, rng: &mut dyn RngCore) -> Plan {
        let lo = if j_below_n { 2 } else { 1 };
        match kind {
            GameKind::Tlu => {
                let n = rng.gen_range(lo..=max);
                let j = if j_below_n { rng.gen_range(1..n) } else { rng.gen_range(1..=n) };
                Plan { n, j, n_back: rng.gen_range(1..=max), j_back: 0 }
            }
            GameKind::Slu => {
                let n_back = rng.gen_range(1..=max);
                Plan { n: rng.gen_range(1..=max), j: 0, n_back, j_back: rng.gen_range(0..n_back) }
            }
            GameKind::Sti => {
                let n = rng.gen_range(lo..=max);
                let j = if j_below_n { rng.gen_range(1..n) } else { rng.gen_range(0..n) };
                let n_back = rng.gen_range(2..=max);
                Plan { n, j, n_back, j_back: rng.gen_range(1..n_back) }
            }
        }
    }

    /// Own relays everywhere except where the game puts honest parties.
    pub fn submission(&self, setup: &GameSetup, own: &OwnRelays, rng: &mut dyn RngCore) -> Submission {
        let mut path = own.pick(rng, self.n);
        let mut reply = own.pick(rng, self.n_back);
        match setup.kind {
            GameKind::Tlu => path[self.j - 1] = setup.p_h.clone(),
            GameKind::Slu if self.j_back == 0 => path[self.n - 1] = setup.p_h.clone(),
            GameKind::Slu => reply[self.j_back - 1] = setup.p_h.clone(),
            GameKind::Sti => {
                if self.j >= 1 {
                    path[self.j - 1] = setup.p_h.clone();
                }
                reply[self.j_back - 1] = setup.p_h_back.clone().expect("tail game has P_H_back");
            }
        }
        reply[self.n_back - 1] = setup.p_s.clone();
        let mut message = vec![0u8; rng.gen_range(0..=32)];
        rng.fill(&mut message[..]);
        Submission {
            message,
            receiver: Address::new(&setup.params, "recv").unwrap(),
            j: self.j,
            j_back: self.j_back,
            path,
            reply_path: reply,
        }
    }
}

fn names(path: &[PathHop]) -> Vec<Address> {
    path.iter().map(|h| h.name.clone()).collect()
}

fn decide(evidence: bool, rng: &mut dyn RngCore) -> bool {
    evidence || rng.gen()
}

/// State every scripted adversary keeps between its two moves.
struct Script {
    setup: Option<GameSetup>,
    own: Option<OwnRelays>,
    sub: Option<Submission>,
    m_reply: Vec<u8>,
}

impl Script {
    fn new() -> Self {
        Script { setup: None, own: None, sub: None, m_reply: b"reply".to_vec() }
    }

    fn submit(&mut self, setup: &GameSetup, j_below_n: bool, rng: &mut dyn RngCore) -> Submission {
        let own = OwnRelays::new(&setup.params, 10, rng);
        let plan = Plan::random(setup.kind, setup.params.max_hops, j_below_n, rng);
        let sub = plan.submission(setup, &own, rng);
        self.setup = Some(setup.clone());
        self.own = Some(own);
        self.sub = Some(sub.clone());
        sub
    }

    fn parts(&self) -> (&GameSetup, &OwnRelays, &Submission) {
        (self.setup.as_ref().unwrap(), self.own.as_ref().unwrap(), self.sub.as_ref().unwrap())
    }
}

/// Valid submission, two probing queries, coin-flip guess.
pub struct Guessing {
    script: Script,
}

impl Guessing {
    pub fn new() -> Self {
        Guessing { script: Script::new() }
    }
}

impl Default for Guessing {
    fn default() -> Self {
        Self::new()
    }
}

impl GameAdversary for Guessing {
    fn name(&self) -> &str {
        "guessing"
    }

    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.script.submit(setup, false, rng)
    }

    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> bool {
        let p_h = self.script.parts().0.p_h.name.clone();
        oracles.proc(&p_h, challenge);
        oracles.proc(&p_h, challenge);
        rng.gen()
    }
}

/// Forward game: checks the challenge's width, follows it through every
/// hop to the exit, checks (m, R), replies and checks that the reply
/// reaches P_s intact. Any deviation is taken as b=1.
pub struct TluStructural {
    script: Script,
}

impl TluStructural {
    pub fn new() -> Self {
        TluStructural { script: Script::new() }
    }

    fn consistent(&self, challenge: &Onion, oracles: &mut dyn Oracles) -> Option<()> {
        let (setup, own, sub) = self.script.parts();
        (challenge.to_bytes().len() == setup.params.onion_len()).then_some(())?;
        let fwd = names(&sub.path);
        let at_exit = own.carry(oracles, challenge.clone(), &fwd)?;
        let exit = fwd.last()?;
        match own.ask(oracles, exit, &at_exit) {
            OracleAnswer::Exit { message, receiver } if message == sub.message && receiver == sub.receiver => {}
            _ => return None,
        }
        let (r, first) = own.reply_at(oracles, exit, &at_exit, &self.script.m_reply)?;
        let back = names(&sub.reply_path);
        (first == back[0]).then_some(())?;
        let at_sender = own.carry(oracles, r, &back)?;
        match oracles.proc(back.last()?, &at_sender) {
            OracleAnswer::ReplyReceived { message } if message == self.script.m_reply => Some(()),
            _ => None,
        }
    }
}

impl Default for TluStructural {
    fn default() -> Self {
        Self::new()
    }
}

impl GameAdversary for TluStructural {
    fn name(&self) -> &str {
        "structural"
    }

    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.script.submit(setup, false, rng)
    }

    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> bool {
        decide(self.consistent(challenge, oracles).is_none(), rng)
    }
}

/// Forward game: tags the onion before P_H and watches whether the exit
/// still sees a well-formed payload. With tag forwarding both worlds fail
/// the exit's integrity check.
pub struct TluTagConsistency {
    script: Script,
}

impl TluTagConsistency {
    pub fn new() -> Self {
        TluTagConsistency { script: Script::new() }
    }

    fn exit_fails_integrity(&self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> Option<bool> {
        let (_, own, sub) = self.script.parts();
        let fwd = names(&sub.path);
        let at_ph = own.carry(oracles, challenge.clone(), &fwd[..sub.j])?;
        let mut mask = vec![0u8; at_ph.payload.len()];
        let at = rng.gen_range(0..mask.len());
        mask[at] = 1 << rng.gen_range(0..8);
        let tagged = tag_payload(&at_ph, &mask).ok()?;
        let at_exit = own.carry(oracles, tagged, &fwd[sub.j - 1..])?;
        Some(own.ask(oracles, fwd.last()?, &at_exit) == OracleAnswer::Fail(FailCode::IntegrityCheck))
    }
}

impl Default for TluTagConsistency {
    fn default() -> Self {
        Self::new()
    }
}

impl GameAdversary for TluTagConsistency {
    fn name(&self) -> &str {
        "tag-consistency"
    }

    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.script.submit(setup, true, rng)
    }

    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> bool {
        let failed = self.exit_fails_integrity(challenge, oracles, rng);
        decide(failed != Some(true), rng)
    }
}

/// Reads the path length off the zero filler its own exit sees and guesses
/// 1 when it differs from the submitted n. Only meaningful with
/// zero-filled headers.
pub struct LegacyPadding {
    script: Script,
    /// Length inferred in the last game, for inspection.
    pub inferred: Option<usize>,
}

impl LegacyPadding {
    pub fn new() -> Self {
        LegacyPadding { script: Script::new(), inferred: None }
    }

    fn infer(&self, challenge: &Onion, oracles: &mut dyn Oracles) -> Option<usize> {
        let (setup, own, sub) = self.script.parts();
        let fwd = names(&sub.path);
        // the challenge enters at P_1 in the forward game, at P_{j+1} in the tail game
        let start = if setup.kind == GameKind::Sti { sub.j } else { 0 };
        let at_exit = own.carry(oracles, challenge.clone(), &fwd[start..])?;
        length_from_zero_run(&setup.params, own.zero_run(fwd.last()?, &at_exit)?)
    }
}

impl Default for LegacyPadding {
    fn default() -> Self {
        Self::new()
    }
}

impl GameAdversary for LegacyPadding {
    fn name(&self) -> &str {
        "legacy-padding"
    }

    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.script.submit(setup, true, rng)
    }

    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, _: &mut dyn RngCore) -> bool {
        self.inferred = self.infer(challenge, oracles);
        self.inferred != Some(self.script.parts().2.path.len())
    }
}

/// Backward game: follows the reply past P_H and checks that every later
/// onion has the same width and routes like a reply layer would, ending
/// silently at P_s.
pub struct SluDirectionStructure {
    script: Script,
}

impl SluDirectionStructure {
    pub fn new() -> Self {
        SluDirectionStructure { script: Script::new() }
    }

    fn consistent(&self, o1: &Onion, oracles: &mut dyn Oracles) -> Option<()> {
        let (_, own, sub) = self.script.parts();
        let fwd = names(&sub.path);
        let at_exit = own.carry(oracles, o1.clone(), &fwd)?;
        let exit = fwd.last()?;
        matches!(own.ask(oracles, exit, &at_exit), OracleAnswer::Exit { .. }).then_some(())?;
        let (r, first) = own.reply_at(oracles, exit, &at_exit, &self.script.m_reply)?;
        let back = names(&sub.reply_path);
        (first == back[0]).then_some(())?;
        let at_sender = own.carry(oracles, r, &back)?;
        (oracles.proc(back.last()?, &at_sender) == OracleAnswer::Nothing).then_some(())
    }
}

impl Default for SluDirectionStructure {
    fn default() -> Self {
        Self::new()
    }
}

impl GameAdversary for SluDirectionStructure {
    fn name(&self) -> &str {
        "direction-structure"
    }

    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.script.submit(setup, false, rng)
    }

    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> bool {
        decide(self.consistent(challenge, oracles).is_none(), rng)
    }
}

/// Tail game: checks that its exit gets the submitted (m, R) and that the
/// reply dies silently at P_H_back.
pub struct StiSameMessage {
    script: Script,
    /// What the exit delivered in the last game.
    pub delivered: Option<(Vec<u8>, Address)>,
}

impl StiSameMessage {
    pub fn new() -> Self {
        StiSameMessage { script: Script::new(), delivered: None }
    }

    fn consistent(&mut self, challenge: &Onion, oracles: &mut dyn Oracles) -> Option<()> {
        let (_, own, sub) = self.script.parts();
        let fwd = names(&sub.path[sub.j..]);
        let at_exit = own.carry(oracles, challenge.clone(), &fwd)?;
        let exit = fwd.last()?;
        let OracleAnswer::Exit { message, receiver } = own.ask(oracles, exit, &at_exit) else { return None };
        let same = message == sub.message && receiver == sub.receiver;
        let (r, first) = own.reply_at(oracles, exit, &at_exit, &self.script.m_reply)?;
        let back = names(&sub.reply_path[..sub.j_back]);
        let ok = same
            && first == back[0]
            && own.carry(oracles, r, &back).is_some_and(|o| oracles.proc(back.last().unwrap(), &o) == OracleAnswer::Nothing);
        self.delivered = Some((message, receiver));
        ok.then_some(())
    }
}

impl Default for StiSameMessage {
    fn default() -> Self {
        Self::new()
    }
}

impl GameAdversary for StiSameMessage {
    fn name(&self) -> &str {
        "same-message"
    }

    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.script.submit(setup, false, rng)
    }

    fn guess(&mut self, challenge: &Onion, oracles: &mut dyn Oracles, rng: &mut dyn RngCore) -> bool {
        decide(self.consistent(challenge, oracles).is_none(), rng)
    }
}

/// Expected win rate of a registered adversary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expectation {
    /// 1/2 inside the two-sided 99% interval.
    Chance,
    AtLeast(f64),
}

pub struct Registered {
    pub kind: GameKind,
    pub name: &'static str,
    pub expectation: Expectation,
    /// Run with zero-filled headers.
    pub legacy: bool,
    pub make: fn() -> Box<dyn GameAdversary>,
}

impl Registered {
    pub fn params(&self) -> FormatParams {
        let mut p = FormatParams::default();
        if self.legacy {
            p.filler = FillerMode::LegacyZero;
        }
        p
    }
}

pub fn registry() -> Vec<Registered> {
    use Expectation::*;
    use GameKind::*;
    let r = |kind, name, expectation, legacy, make: fn() -> Box<dyn GameAdversary>| Registered {
        kind,
        name,
        expectation,
        legacy,
        make,
    };
    vec![
        r(Tlu, "guessing", Chance, false, || Box::new(Guessing::new())),
        r(Tlu, "structural", Chance, false, || Box::new(TluStructural::new())),
        r(Tlu, "tag-consistency", Chance, false, || Box::new(TluTagConsistency::new())),
        r(Tlu, "legacy-padding", AtLeast(0.95), true, || Box::new(LegacyPadding::new())),
        r(Slu, "guessing", Chance, false, || Box::new(Guessing::new())),
        r(Slu, "direction-structure", Chance, false, || Box::new(SluDirectionStructure::new())),
        r(Sti, "guessing", Chance, false, || Box::new(Guessing::new())),
        r(Sti, "same-message", Chance, false, || Box::new(StiSameMessage::new())),
        r(Sti, "legacy-padding", AtLeast(0.95), true, || Box::new(LegacyPadding::new())),
    ]
}

pub fn lookup(kind: GameKind, name: &str) -> Option<Registered> {
    registry().into_iter().find(|r| r.kind == kind && r.name == name)
}
