//! Attack scenarios. Each adversary decides from its own script, the
//! adversary-visible trace records and the keys of corrupted relays.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::scenarios::{at, names};
use super::{run_scenario, LinkKind, Rule, Scenario, SendItem, SimRun, Topology, Visibility};
use crate::error::{Error, Result};
use crate::events::EnvEvent;
use crate::kem::kem_decap;
use crate::node::msg_hex;
use crate::packet::header::peel_beta;

/// Adversary-side coin, independent of the run's randomness.
fn coin(seed: u64, salt: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.rotate_left(17) ^ salt)
}

fn link_records(run: &SimRun) -> impl Iterator<Item = (&str, &str, LinkKind)> {
    run.adversary_view().filter(|r| r.kind == "link").filter_map(|r| {
        let f = &r.fields;
        let kind = serde_json::from_value(f["link"].clone()).ok()?;
        Some((f["src"].as_str()?, f["dst"].as_str()?, kind))
    })
}

// ---------------------------------------------------------------- tagging

/// Two senders through a corrupted first hop `c0` and one shared honest
/// relay `h` to two honest exits. Returns the scenario, the true
/// sender-to-exit map and the sender whose onion is tagged.
pub fn tagging_scenario(seed: u64, tag: bool) -> (Scenario, BTreeMap<String, String>, Option<String>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut exits = names(&["e0", "e1"]);
    exits.shuffle(&mut rng);
    let senders = names(&["s0", "s1"]);
    let truth: BTreeMap<String, String> = senders.iter().cloned().zip(exits.iter().cloned()).collect();
    let workload = senders
        .iter()
        .map(|s| SendItem {
            sender: s.clone(),
            receiver: "bob".into(),
            message: format!("msg-{:016x}", rng.gen::<u64>()),
            path: vec!["c0".into(), "h".into(), truth[s].clone()],
            ..Default::default()
        })
        .collect();
    let tagged = tag.then(|| senders.choose(&mut rng).unwrap().clone());
    let mut script = vec![Rule::Observe];
    if let Some(s) = &tagged {
        script.push(Rule::Tag { at: at(s, "c0"), offset: rng.gen_range(0..1024), xor: 0x80 });
    }
    let sc = Scenario {
        name: "tagging".into(),
        topology: Topology {
            relays: names(&["c0", "h", "e0", "e1"]),
            corrupted: ["c0".to_string()].into(),
            senders,
            receivers: names(&["bob"]),
        },
        workload,
        script,
        ..Default::default()
    };
    (sc, truth, tagged)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinkageOutcome {
    /// The adversary had evidence, not a guess.
    pub linked: bool,
    pub linked_pair: (String, String),
    pub correct: bool,
    pub tagged_message_delivered: bool,
}

pub fn scenario_tagging_linkage(seed: u64, tag: bool) -> Result<LinkageOutcome> {
    let (sc, truth, tagged) = tagging_scenario(seed, tag);
    let run = run_scenario(&sc, seed)?;
    let links: Vec<_> = link_records(&run).collect();
    let exits: BTreeSet<&str> = links.iter().filter(|(s, _, _)| *s == "h").map(|(_, d, _)| *d).collect();
    let delivering: BTreeSet<&str> =
        links.iter().filter(|(s, _, k)| *k == LinkKind::PlaintextEdgeLink && exits.contains(s)).map(|(s, _, _)| *s).collect();
    let silent: Vec<&str> = exits.difference(&delivering).copied().collect();
    let (linked, pair) = match (&tagged, silent.as_slice()) {
        (Some(s), [e]) => (true, (s.clone(), e.to_string())),
        _ => {
            let candidates: Vec<&str> = exits.iter().copied().collect();
            let g = candidates.choose(&mut coin(seed, 1)).copied().unwrap_or("e0");
            (false, ("s0".to_string(), g.to_string()))
        }
    };
    let correct = truth.get(&pair.0) == Some(&pair.1);
    let tagged_message_delivered = tagged.as_ref().is_some_and(|s| {
        let m = msg_hex(sc.workload.iter().find(|w| &w.sender == s).unwrap().message.as_bytes());
        run.env.iter().any(|e| matches!(e, EnvEvent::MessageReceived { message, .. } if *message == m))
    });
    Ok(LinkageOutcome { linked, linked_pair: pair, correct, tagged_message_delivered })
}

// ---------------------------------------------------------------- nymserver

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NymChoice {
    /// The adversary is told which onion goes to the nymserver.
    Oracle,
    /// The adversary picks one of the sender's onions uniformly.
    Guess,
}

/// Sender `s0` behind corrupted first hop `c0`. Legacy mode sends the
/// message and the nymserver onion via different middle relays.
pub fn nymserver_scenario(seed: u64, legacy: bool, choice: NymChoice) -> (Scenario, bool) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (ha, hb) = if rng.gen_bool(0.5) { ("h0", "h1") } else { ("h1", "h0") };
    let target = match (legacy, choice) {
        (false, _) => ha,
        (true, NymChoice::Oracle) => hb,
        (true, NymChoice::Guess) => *["h0", "h1"].choose(&mut coin(seed, 2)).unwrap(),
    };
    let item = SendItem {
        sender: "s0".into(),
        receiver: "bob".into(),
        message: format!("msg-{:016x}", rng.gen::<u64>()),
        path: names(&["c0", ha, "e0"]),
        reply_path: names(&["h2", "h3", "s0"]),
        reply: Some("re".into()),
        nym_path: if legacy { names(&["c0", hb, "e1"]) } else { vec![] },
        ..Default::default()
    };
    // legacy: drop one onion; adapted: only one onion exists, tag it
    let act = if legacy {
        Rule::Drop { at: at("c0", target) }
    } else {
        Rule::Tag { at: at("s0", "c0"), offset: 512, xor: 1 }
    };
    let sc = Scenario {
        name: "nymserver".into(),
        topology: Topology {
            relays: names(&["c0", "h0", "h1", "e0", "e1", "h2", "h3"]),
            corrupted: ["c0".to_string()].into(),
            senders: names(&["s0"]),
            receivers: names(&["bob"]),
        },
        workload: vec![item],
        script: vec![Rule::Observe, act],
        flags: super::Flags { legacy_nymserver: legacy, ..Default::default() },
        ..Default::default()
    };
    (sc, legacy && target == hb)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NymOutcome {
    pub attack_succeeds: bool,
    pub lookups: usize,
    pub failed_lookups: usize,
    pub picked_nym_onion: bool,
}

/// Success means a pseudonym lookup visibly failed right after the
/// adversary dropped one of the sender's onions, linking the two.
pub fn scenario_nymserver_attack(seed: u64, legacy: bool, choice: NymChoice) -> Result<NymOutcome> {
    let (sc, picked) = nymserver_scenario(seed, legacy, choice);
    let run = run_scenario(&sc, seed)?;
    let lookups: Vec<bool> =
        run.adversary_view().filter(|r| r.kind == "nym-lookup").filter_map(|r| r.fields["found"].as_bool()).collect();
    let failed = lookups.iter().filter(|f| !**f).count();
    Ok(NymOutcome { attack_succeeds: failed > 0, lookups: lookups.len(), failed_lookups: failed, picked_nym_onion: picked })
}

// ---------------------------------------------------------------- padding

/// One onion of length 2 or 5 (by seed) ending at corrupted exit `cx`.
pub fn padding_scenario(seed: u64, legacy: bool) -> (Scenario, usize) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = if rng.gen_bool(0.5) { 2 } else { 5 };
    let honest = names(&["r0", "r1", "r2", "r3", "r4"]);
    let mut path: Vec<String> = honest.choose_multiple(&mut rng, n - 1).cloned().collect();
    path.push("cx".into());
    let sc = Scenario {
        name: "padding".into(),
        topology: Topology {
            relays: [honest, vec!["cx".into()]].concat(),
            corrupted: ["cx".to_string()].into(),
            senders: names(&["s0"]),
            receivers: names(&["bob"]),
        },
        workload: vec![SendItem {
            sender: "s0".into(),
            receiver: "bob".into(),
            message: format!("msg-{:016x}", rng.gen::<u64>()),
            path,
            ..Default::default()
        }],
        script: vec![Rule::Observe],
        flags: super::Flags { legacy_zero_padding: legacy, ..Default::default() },
        ..Default::default()
    };
    (sc, n)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PaddingOutcome {
    pub true_len: usize,
    pub zero_run: usize,
    /// Length read off the zero run, if the run is evidence of anything.
    pub inferred: Option<usize>,
    pub guess: usize,
    pub path_length_recovered: bool,
}

/// Zero bytes right after the exit's own route and identifier slots.
pub fn exit_zero_run(run: &SimRun, exit: &str) -> Result<Option<usize>> {
    let suite = run.params.suite();
    let Some((_, _, onion)) = run.adversary_inbox.iter().find(|(_, p, _)| p == exit) else { return Ok(None) };
    let sk = &run.corrupted_keys.get(exit).ok_or_else(|| Error::Config(format!("{exit} is not corrupted")))?.sk;
    let alpha = run.params.group.decode(&onion.header.alpha)?;
    let ls = kem_decap(&suite, sk, &alpha)?;
    let (_, _, next_beta) = peel_beta(&run.params, &ls, &onion.header.beta)?;
    Ok(Some(next_beta.iter().take_while(|&&b| b == 0).count()))
}

pub fn scenario_zero_padding_leak(seed: u64, legacy: bool) -> Result<PaddingOutcome> {
    let (sc, n) = padding_scenario(seed, legacy);
    let run = run_scenario(&sc, seed)?;
    let zero_run = exit_zero_run(&run, "cx")?.ok_or_else(|| Error::Config("onion never reached the exit".into()))?;
    let p = run.params;
    // filler shrinks with n; the smallest n whose filler fits the run
    let inferred = (1..=p.max_hops).find(|&m| p.final_filler_len(m) <= zero_run);
    let guess = match inferred {
        Some(m) if m == 2 || m == 5 => m,
        _ => *[2, 5].choose(&mut coin(seed, 3)).unwrap(),
    };
    Ok(PaddingOutcome { true_len: n, zero_run, inferred, guess, path_length_recovered: guess == n })
}

/// Trace lines the adversary sees, for debugging attack runs.
pub fn adversary_lines(run: &SimRun) -> Vec<String> {
    run.records.iter().filter(|r| r.visibility == Visibility::Adversary).map(|r| serde_json::to_string(r).unwrap()).collect()
}
