//! Drives the ideal functionality through a scenario's workload.
//!
//! The environment part forwards every onion it is told about and answers
//! messages as the workload says; the simulator part delivers everything
//! and never tags. Only meaningful for honest-only scenarios.

use std::collections::{BTreeMap, VecDeque};

use serde_json::json;

use super::{Scenario, TraceRecord, Visibility};
use crate::error::{Error, Result};
use crate::events::EnvEvent;
use crate::ideal::{AdvMsg, Caller, IdealOutput, IdealState};

pub fn ideal_env_events(sc: &Scenario, seed: u64) -> Result<(Vec<EnvEvent>, Vec<TraceRecord>)> {
    if sc.flags.legacy_nymserver || !sc.script.iter().all(|r| *r == super::Rule::Observe) {
        return Err(Error::Config("the ideal driver only runs honest schedules".into()));
    }
    let params = super::params_for(&sc.flags);
    super::validate(sc, &params)?;
    let bad = sc.topology.corrupted.iter().cloned();
    let (mut f, z, s) = IdealState::new(params.max_hops, bad, seed);
    let mut planned: BTreeMap<(String, Vec<u8>), Vec<u8>> = BTreeMap::new();
    let mut order: Vec<usize> = (0..sc.workload.len()).collect();
    order.sort_by_key(|&i| sc.workload[i].round);
    let mut batches: VecDeque<Vec<IdealOutput>> = VecDeque::new();
    for i in order {
        let w = &sc.workload[i];
        let mut message = w.message.clone().into_bytes();
        if let Some(sess) = &w.session {
            message = [format!("session:{sess}:").into_bytes(), message].concat();
        }
        if let Some(r) = &w.reply {
            planned.insert((w.receiver.clone(), message.clone()), r.clone().into_bytes());
        }
        batches.push_back(f.process_new_onion(Caller::Env(&z), &w.sender, &w.receiver, &message, &w.path, &w.reply_path)?);
    }
    let mut env = vec![];
    let mut records = vec![];
    let mut step = 0u64;
    while let Some(batch) = batches.pop_front() {
        let mut pending_rid = None;
        for out in batch {
            step += 1;
            match out {
                IdealOutput::Adv(a) => {
                    records.push(TraceRecord {
                        time: step,
                        actor: "F_RSOR".into(),
                        kind: "leak".into(),
                        visibility: Visibility::Adversary,
                        fields: serde_json::to_value(&a).expect("leaks serialize"),
                    });
                    match a {
                        AdvMsg::Hop { tid, .. } => batches.push_back(f.deliver_onion(&s, &tid)),
                        AdvMsg::ReplyRid { rid } => pending_rid = Some(rid),
                        AdvMsg::MessageLeak { from, message, receiver, via } if via.is_empty() => {
                            let m = hex::decode(&message).map_err(|e| Error::Config(e.to_string()))?;
                            batches.push_back(f.deliver_message(&s, &from, &m, pending_rid.take(), &receiver));
                        }
                        AdvMsg::InitiateReply { receiver, rid, message, via } => {
                            let m = hex::decode(&message).map_err(|e| Error::Config(e.to_string()))?;
                            batches.push_back(f.deliver_reply(&s, &receiver, &via, &m, &rid));
                        }
                        _ => {}
                    }
                }
                IdealOutput::Env(e) => {
                    records.push(TraceRecord {
                        time: step,
                        actor: "F_RSOR".into(),
                        kind: e.kind().into(),
                        visibility: Visibility::Env,
                        fields: json!({ "party": e.party(), "event": e }),
                    });
                    match &e {
                        EnvEvent::OnionReceived { party, tid: Some(t), .. } | EnvEvent::ReplyOnionQueued { party, tid: Some(t) } => {
                            batches.push_back(f.forward_onion(Caller::Env(&z), party, t));
                        }
                        EnvEvent::MessageReceived { receiver, from, message, rid: Some(rid) } => {
                            let m = hex::decode(message).map_err(|e| Error::Config(e.to_string()))?;
                            if let Some(reply) = planned.remove(&(receiver.clone(), m)) {
                                batches.push_back(f.initiate_reply(Caller::Env(&z), receiver, from, &reply, rid));
                            }
                        }
                        _ => {}
                    }
                    env.push(e);
                }
            }
        }
    }
    Ok((env, records))
}
