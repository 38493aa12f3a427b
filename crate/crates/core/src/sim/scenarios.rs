//! Built-in scenarios, addressable by name from the CLI.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::attacks;
use super::{Rule, Scenario, Selector, SendItem, Topology};
use crate::error::{Error, Result};

pub const NAMES: &[&str] =
    &["baseline", "empty", "tag-forward", "tag-reply", "drop-reply", "tagging", "nymserver", "padding", "random-honest"];

pub(crate) fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn at(src: &str, dst: &str) -> Selector {
    Selector { src: Some(src.into()), dst: Some(dst.into()), ..Default::default() }
}

pub fn named(name: &str, seed: u64) -> Result<Scenario> {
    Ok(match name {
        "baseline" => baseline(),
        "empty" => Scenario { name: "empty".into(), topology: baseline().topology, ..Default::default() },
        "tag-forward" => tag_forward(),
        "tag-reply" => final_reply_link(true),
        "drop-reply" => final_reply_link(false),
        "tagging" => attacks::tagging_scenario(seed, true).0,
        "nymserver" => attacks::nymserver_scenario(seed, true, attacks::NymChoice::Oracle).0,
        "padding" => attacks::padding_scenario(seed, true).0,
        "random-honest" => random_honest(seed),
        other => return Err(Error::Config(format!("unknown scenario {other:?}; known: {}", NAMES.join(", ")))),
    })
}

/// One repliable round trip over honest relays.
pub fn baseline() -> Scenario {
    Scenario {
        name: "baseline".into(),
        topology: Topology {
            relays: names(&["r0", "r1", "r2", "r3", "r4", "r5"]),
            senders: names(&["s0"]),
            receivers: names(&["bob"]),
            ..Default::default()
        },
        workload: vec![SendItem {
            sender: "s0".into(),
            receiver: "bob".into(),
            message: "hello bob".into(),
            path: names(&["r0", "r1", "r2"]),
            reply_path: names(&["r3", "r4", "s0"]),
            reply: Some("hello s0".into()),
            ..Default::default()
        }],
        script: vec![Rule::Observe],
        expect: names(&["message-received", "got-reply"]),
        ..Default::default()
    }
}

/// A corrupted first hop tags the forward onion; the honest exit drops it.
pub fn tag_forward() -> Scenario {
    let mut sc = baseline();
    sc.name = "tag-forward".into();
    sc.topology.relays[0] = "c0".into();
    sc.topology.corrupted.insert("c0".into());
    sc.workload[0].path[0] = "c0".into();
    sc.script.push(Rule::Tag { at: at("s0", "c0"), offset: 300, xor: 1 });
    sc.expect = names(&["integrity-failure"]);
    sc.forbid = names(&["message-received", "got-reply"]);
    sc
}

/// The last reply relay is corrupted and tags (or drops) the reply on its
/// way to the sender.
pub fn final_reply_link(tag: bool) -> Scenario {
    let mut sc = baseline();
    sc.name = if tag { "tag-reply" } else { "drop-reply" }.into();
    sc.topology.relays[4] = "c1".into();
    sc.topology.corrupted.insert("c1".into());
    sc.workload[0].reply_path = names(&["r3", "c1", "s0"]);
    let sel = at("c1", "s0");
    sc.script.push(if tag { Rule::Tag { at: sel, offset: 300, xor: 1 } } else { Rule::Drop { at: sel } });
    sc.expect = names(&["message-received", "reply-sent"]);
    sc.forbid = names(&["got-reply"]);
    sc
}

/// Random honest-only workload for the ideal/real comparison.
pub fn random_honest(seed: u64) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_0f_ca11);
    let relays: Vec<String> = (0..8).map(|i| format!("r{i}")).collect();
    let senders = names(&["s0", "s1"]);
    let receivers = names(&["bob", "carol"]);
    let items = rng.gen_range(1..=4);
    let mut workload = vec![];
    for i in 0..items {
        let sender = senders.choose(&mut rng).unwrap().clone();
        let n = rng.gen_range(1..=5);
        let nr = rng.gen_range(0..=5);
        let path: Vec<String> = relays.choose_multiple(&mut rng, n).cloned().collect();
        let mut reply_path: Vec<String> = if nr == 0 { vec![] } else { relays.choose_multiple(&mut rng, nr - 1).cloned().collect() };
        if nr > 0 {
            reply_path.push(sender.clone());
        }
        let reply = (nr > 0 && rng.gen_bool(0.7)).then(|| format!("re{i}-{:08x}", rng.gen::<u32>()));
        workload.push(SendItem {
            sender,
            receiver: receivers.choose(&mut rng).unwrap().clone(),
            message: format!("m{i}-{:08x}", rng.gen::<u32>()),
            path,
            reply_path,
            reply,
            round: rng.gen_range(0..3),
            ..Default::default()
        });
    }
    Scenario {
        name: "random-honest".into(),
        topology: Topology { relays, senders, receivers, ..Default::default() },
        workload,
        script: vec![Rule::Observe],
        ..Default::default()
    }
}
