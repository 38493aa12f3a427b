use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::adversaries::*;
use super::correctness::*;
use super::*;
use crate::packet::vectors::SampleNetwork;

fn bits(kind: GameKind, adv: &mut dyn GameAdversary, params: &FormatParams, seed: u64, b: bool) -> GameOutcome {
    let mut c = ChaCha20Rng::seed_from_u64(seed);
    let mut a = ChaCha20Rng::seed_from_u64(seed ^ 0xa5a5);
    run_game_with_bit(kind, adv, params, b, &mut c, &mut a).unwrap()
}

fn lens(t: &[String]) -> Vec<usize> {
    t.iter().map(|l| l.len()).collect()
}

#[test]
fn correctness_over_random_specs() {
    let r = game_correctness(&FormatParams::default(), 200, 1).unwrap();
    assert!(r.passed(), "{:?}", r.failures);
    assert_eq!(r.widths.len(), 1);
}

#[test]
fn correctness_minimal_case() {
    let p = FormatParams::default();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let net = SampleNetwork::new(&p, &mut rng, 4);
    let spec = net.spec(&p, &mut rng, 1, 1);
    let c = check_clauses(&p, &spec, &|a| net.sk_of(a).cloned(), b"r", &mut Default::default()).unwrap();
    assert!(c.all());
}

#[test]
fn wrong_key_at_hop_two_breaks_forward_clause() {
    let p = FormatParams::default();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let net = SampleNetwork::new(&p, &mut rng, 8);
    let mut spec = net.spec(&p, &mut rng, 3, 2);
    spec.forward[1].pk = crate::kem::kem_keygen(&p.suite(), &mut rng).pk;
    let c = check_clauses(&p, &spec, &|a| net.sk_of(a).cloned(), b"r", &mut Default::default()).unwrap();
    assert_eq!(c, Clauses::default());
}

#[test]
fn chance_adversaries_cannot_tell_the_worlds_apart() {
    // with the same coins, an adversary without evidence guesses the same
    // under both bits and sees transcripts of the same shape
    for reg in registry().into_iter().filter(|r| r.expectation == Expectation::Chance) {
        let p = reg.params();
        for seed in 0..12 {
            let o0 = bits(reg.kind, (reg.make)().as_mut(), &p, seed, false);
            let o1 = bits(reg.kind, (reg.make)().as_mut(), &p, seed, true);
            assert_eq!(o0.guess, o1.guess, "{:?} {} seed {seed}", reg.kind, reg.name);
            assert_eq!(lens(&o0.transcript), lens(&o1.transcript), "{:?} {} seed {seed}", reg.kind, reg.name);
        }
    }
}

#[test]
fn padding_adversary_wins_the_tail_game_in_legacy_mode() {
    let reg = lookup(GameKind::Sti, "legacy-padding").unwrap();
    let w = play_many(reg.kind, &|| (reg.make)(), &reg.params(), 40, 7).unwrap();
    assert_eq!(w.wins, 40);
    // without zero filler the run carries no information
    let w = play_many(reg.kind, &|| (reg.make)(), &FormatParams::default(), 200, 7).unwrap();
    assert!(w.consistent_with(0.5, 0.99), "{w}");
}

#[test]
fn padding_adversary_sees_the_real_length_in_the_forward_game() {
    let reg = lookup(GameKind::Tlu, "legacy-padding").unwrap();
    for b in [false, true] {
        let mut adv = LegacyPadding::new();
        let o = bits(GameKind::Tlu, &mut adv, &reg.params(), 5, b);
        assert!(!o.guess);
        assert!(adv.inferred.is_some());
    }
}

#[test]
fn tail_game_delivers_the_same_message() {
    for seed in 0..6 {
        for b in [false, true] {
            let mut adv = StiSameMessage::new();
            let o = bits(GameKind::Sti, &mut adv, &FormatParams::default(), seed, b);
            let (m, r) = adv.delivered.clone().unwrap();
            let sub = adv_submission(GameKind::Sti, seed);
            assert_eq!((m, r), (sub.message, sub.receiver));
            assert!(o.transcript.iter().any(|l| l.contains("\"party\":\"phb\"") && l.contains("nothing")));
        }
    }
}

/// The submission a scripted adversary makes for `seed` under [`bits`].
fn adv_submission(kind: GameKind, seed: u64) -> Submission {
    let mut rec = Recorder(None);
    bits(kind, &mut rec, &FormatParams::default(), seed, false);
    rec.0.unwrap()
}

struct Recorder(Option<Submission>);

impl GameAdversary for Recorder {
    fn name(&self) -> &str {
        "recorder"
    }
    fn submit(&mut self, setup: &GameSetup, o: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        let mut g = StiSameMessage::new();
        let s = g.submit(setup, o, rng);
        self.0 = Some(s.clone());
        s
    }
    fn guess(&mut self, _: &Onion, _: &mut dyn Oracles, _: &mut dyn RngCore) -> bool {
        false
    }
}

/// Builds its own onion to P_H (exit) and probes the replay and reply
/// rules after the challenge.
struct Probe {
    setup: Option<GameSetup>,
    answers: Vec<OracleAnswer>,
}

impl GameAdversary for Probe {
    fn name(&self) -> &str {
        "probe"
    }
    fn submit(&mut self, setup: &GameSetup, o: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        self.setup = Some(setup.clone());
        Guessing::new().submit(setup, o, rng)
    }
    fn guess(&mut self, _: &Onion, o: &mut dyn Oracles, _: &mut dyn RngCore) -> bool {
        let s = self.setup.as_ref().unwrap();
        let spec = OnionSpec {
            seed: [9; 32],
            message: b"probe".to_vec(),
            receiver: Address::new(&s.params, "recv").unwrap(),
            forward: vec![s.p_h.clone()],
            reply: vec![s.p_s.clone()],
        };
        let onion = crate::packet::form_onion(&s.params, 1, &spec).unwrap();
        let never_processed = crate::packet::form_onion(&s.params, 1, &OnionSpec { seed: [8; 32], ..spec }).unwrap();
        self.answers = vec![
            o.proc(&s.p_h.name, &onion),
            o.proc(&s.p_h.name, &onion),
            o.reply(&s.p_h.name, &onion, b"x"),
            o.reply(&s.p_h.name, &onion, b"y"),
            o.reply(&s.p_h.name, &never_processed, b"z"),
        ];
        false
    }
}

#[test]
fn replay_and_one_reply_rules_hold_in_every_game() {
    for kind in [GameKind::Tlu, GameKind::Slu, GameKind::Sti] {
        for b in [false, true] {
            let mut p = Probe { setup: None, answers: vec![] };
            bits(kind, &mut p, &FormatParams::default(), 1, b);
            let a = &p.answers;
            assert!(matches!(a[0], OracleAnswer::Exit { .. }), "{kind:?} {a:?}");
            assert_eq!(a[1], OracleAnswer::Nothing);
            assert!(matches!(a[2], OracleAnswer::ReplyOnion { .. }));
            assert_eq!(a[3], OracleAnswer::Nothing);
            assert_eq!(a[4], OracleAnswer::Nothing);
        }
    }
}

struct Fixed(Box<dyn Fn(&GameSetup, &mut dyn RngCore) -> Submission>);

impl GameAdversary for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn submit(&mut self, setup: &GameSetup, _: &mut dyn Oracles, rng: &mut dyn RngCore) -> Submission {
        (self.0)(setup, rng)
    }
    fn guess(&mut self, _: &Onion, _: &mut dyn Oracles, _: &mut dyn RngCore) -> bool {
        false
    }
}

fn rejected(kind: GameKind, edit: impl Fn(&GameSetup, &mut Submission) + 'static) -> bool {
    let mut adv = Fixed(Box::new(move |setup, rng| {
        let own = OwnRelays::new(&setup.params, 10, rng);
        let plan = match kind {
            GameKind::Tlu => Plan { n: 3, j: 2, n_back: 2, j_back: 0 },
            GameKind::Slu => Plan { n: 3, j: 0, n_back: 3, j_back: 1 },
            GameKind::Sti => Plan { n: 3, j: 1, n_back: 3, j_back: 1 },
        };
        let mut s = plan.submission(setup, &own, rng);
        edit(setup, &mut s);
        s
    }));
    let mut c = ChaCha20Rng::seed_from_u64(0);
    let mut a = ChaCha20Rng::seed_from_u64(1);
    matches!(run_game_with_bit(kind, &mut adv, &FormatParams::default(), false, &mut c, &mut a), Err(Error::Rejected(_)))
}

#[test]
fn challengers_reject_malformed_submissions() {
    for kind in [GameKind::Tlu, GameKind::Slu, GameKind::Sti] {
        assert!(!rejected(kind, |_, _| {}), "{kind:?} baseline");
        assert!(rejected(kind, |_, s| s.path[2] = s.path[0].clone()), "{kind:?} cycle");
        assert!(rejected(kind, |_, s| s.reply_path.pop().map(|_| ()).unwrap_or(())), "{kind:?} no P_s");
        assert!(
            rejected(kind, |_, s| {
                let i = s.reply_path.iter().position(|h| h.name.name().starts_with('a')).unwrap();
                s.reply_path[i].name = s.path[2].name.clone();
            }),
            "{kind:?} key clash"
        );
        assert!(rejected(kind, |_, s| s.message = vec![0; 2000]), "{kind:?} long message");
    }
    assert!(rejected(GameKind::Tlu, |_, s| s.j = 0));
    assert!(rejected(GameKind::Tlu, |_, s| s.j = 4));
    assert!(rejected(GameKind::Tlu, |_, s| s.j = 1));
    assert!(rejected(GameKind::Slu, |_, s| s.j_back = 3));
    assert!(rejected(GameKind::Slu, |_, s| s.j_back = 0));
    assert!(rejected(GameKind::Sti, |_, s| s.j = 3));
    assert!(rejected(GameKind::Sti, |_, s| s.j_back = 3));
    // P_H_back may take the forward position instead of P_H
    assert!(!rejected(GameKind::Sti, |setup, s| s.path[0] = setup.p_h_back.clone().unwrap()));
    // a wrong key for an honest name is replaced, not rejected
    assert!(!rejected(GameKind::Tlu, |_, s| s.path[1].pk = s.path[0].pk.clone()));
}

#[test]
fn tag_forwarding_reaches_the_exit_in_both_worlds() {
    for seed in 0..6 {
        let o0 = bits(GameKind::Tlu, &mut TluTagConsistency::new(), &FormatParams::default(), seed, false);
        let o1 = bits(GameKind::Tlu, &mut TluTagConsistency::new(), &FormatParams::default(), seed, true);
        // the oracle at P_H answered with a forward onion in both worlds
        for o in [&o0, &o1] {
            assert!(o.transcript.iter().any(|l| l.contains("\"party\":\"ph\"") && l.contains("forward")));
        }
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn proc_refuses_seen_headers(seed in any::<u64>(), n in 1usize..=5, idx in 0usize..1024) {
            let p = FormatParams::default();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let net = SampleNetwork::new(&p, &mut rng, 8);
            let mut ph = HonestParty::new(&p, "ph", &mut rng).unwrap();
            let mut spec = net.spec(&p, &mut rng, n, 1);
            spec.forward[0] = ph.hop();
            let o = crate::packet::form_onion(&p, 1, &spec).unwrap();
            prop_assert!(ph.proc(&p, &o) != OracleAnswer::Nothing);
            prop_assert!(ph.seen(&o.header));
            let mut mask = vec![0u8; p.payload_len];
            mask[idx] = 1;
            let tagged = crate::packet::tag_payload(&o, &mask).unwrap();
            prop_assert_eq!(ph.proc(&p, &o), OracleAnswer::Nothing);
            prop_assert_eq!(ph.proc(&p, &tagged), OracleAnswer::Nothing);
        }
    }
}
