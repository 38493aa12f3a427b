//! Static lint for the conditions under which the protocol's guarantees
//! hold in deployment.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{ExitPolicy, Scenario};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    /// The exit relay is picked from the receiver or message.
    ExitChoiceLeaks { policy: String },
    /// The sender emits something observable when a reply is tagged or missing.
    SenderReactsToReply,
    /// Several onions carry the same session marker to their exits.
    LinkableSession { marker: String, onions: usize },
}

pub fn check_usage_conditions(sc: &Scenario) -> Vec<Violation> {
    let mut v = vec![];
    if sc.exit_policy == ExitPolicy::ReceiverHash {
        v.push(Violation::ExitChoiceLeaks { policy: "receiver-hash".into() });
    }
    if sc.sender_reacts_to_reply && sc.workload.iter().any(|w| !w.reply_path.is_empty()) {
        v.push(Violation::SenderReactsToReply);
    }
    let mut sessions: BTreeMap<&str, usize> = BTreeMap::new();
    for w in &sc.workload {
        if let Some(s) = &w.session {
            *sessions.entry(s).or_default() += 1;
        }
    }
    for (marker, onions) in sessions {
        if onions > 1 {
            v.push(Violation::LinkableSession { marker: marker.to_string(), onions });
        }
    }
    v
}
