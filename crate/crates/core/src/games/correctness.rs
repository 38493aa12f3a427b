//! The four correctness clauses as a runnable check.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::crypto::Scalar;
use crate::error::Result;
use crate::packet::vectors::SampleNetwork;
use crate::packet::{
    form_onion, form_reply, proc_onion, Address, BasicView, FormatParams, NoReplay, OnionMaterial, OnionSpec, ProcResult,
};

/// Which clauses held. A clause that depends on a broken earlier one
/// counts as broken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Clauses {
    pub forward_path: bool,
    pub request_reception: bool,
    pub backward_path: bool,
    pub reply_reception: bool,
}

impl Clauses {
    pub fn all(&self) -> bool {
        self.forward_path && self.request_reception && self.backward_path && self.reply_reception
    }
}

/// Runs one spec through every hop with the relays' real secret keys.
/// Non-repliable specs pass the backward clauses vacuously. Every onion
/// seen along the way has its width added to `widths`.
pub fn check_clauses(
    params: &FormatParams,
    spec: &OnionSpec,
    sk_of: &dyn Fn(&Address) -> Option<Scalar>,
    m_reply: &[u8],
    widths: &mut BTreeSet<usize>,
) -> Result<Clauses> {
    let mut c = Clauses::default();
    let n = spec.n();
    let mut o = form_onion(params, 1, spec)?;
    widths.insert(o.to_bytes().len());
    for i in 0..n - 1 {
        let Some(sk) = sk_of(&spec.forward[i].name) else { return Ok(c) };
        match proc_onion(params, &sk, &o, &spec.forward[i].name, &mut NoReplay) {
            ProcResult::Forward { onion, next_hop } if next_hop == spec.forward[i + 1].name => o = onion,
            _ => return Ok(c),
        }
        widths.insert(o.to_bytes().len());
    }
    c.forward_path = true;
    let exit = &spec.forward[n - 1].name;
    let Some(exit_sk) = sk_of(exit) else { return Ok(c) };
    match proc_onion(params, &exit_sk, &o, exit, &mut NoReplay) {
        ProcResult::Exit { message, receiver, .. } if message == spec.message && receiver == spec.receiver => {}
        _ => return Ok(c),
    }
    c.request_reception = true;
    if !spec.repliable() {
        c.backward_path = true;
        c.reply_reception = true;
        return Ok(c);
    }
    let Ok((mut r, first)) = form_reply(params, m_reply, &o, exit, &exit_sk) else { return Ok(c) };
    if first != spec.reply[0].name {
        return Ok(c);
    }
    widths.insert(r.to_bytes().len());
    let k = spec.n_reply();
    for i in 0..k - 1 {
        let Some(sk) = sk_of(&spec.reply[i].name) else { return Ok(c) };
        match proc_onion(params, &sk, &r, &spec.reply[i].name, &mut NoReplay) {
            ProcResult::Forward { onion, next_hop } if next_hop == spec.reply[i + 1].name => r = onion,
            _ => return Ok(c),
        }
        widths.insert(r.to_bytes().len());
    }
    c.backward_path = true;
    let sender = &spec.reply[k - 1].name;
    let Some(sender_sk) = sk_of(sender) else { return Ok(c) };
    let mut view = BasicView::default();
    let e = OnionMaterial::expand(params, spec)?.reply_expectation().expect("repliable");
    view.expectations.insert(e.ident.clone(), e);
    if let ProcResult::ReplyReceived { message, .. } = proc_onion(params, &sender_sk, &r, sender, &mut view) {
        c.reply_reception = message == m_reply;
    }
    Ok(c)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CorrectnessReport {
    pub specs: usize,
    /// (n, n_reply, clauses) for every spec that broke a clause.
    pub failures: Vec<(usize, usize, Clauses)>,
    pub widths: BTreeSet<usize>,
}

impl CorrectnessReport {
    pub fn passed(&self) -> bool {
        self.specs > 0 && self.failures.is_empty()
    }
}

fn run_cells(params: &FormatParams, cells: &[(usize, usize)], seed: u64) -> Result<CorrectnessReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let net = SampleNetwork::new(params, &mut rng, 2 * params.max_hops + 2);
    let sk_of = |a: &Address| net.sk_of(a).cloned();
    let mut report = CorrectnessReport::default();
    for &(n, k) in cells {
        let spec = net.spec(params, &mut rng, n, k);
        let mut m_reply = vec![0u8; rng.gen_range(0..=params.max_message_len())];
        rng.fill(&mut m_reply[..]);
        let c = check_clauses(params, &spec, &sk_of, &m_reply, &mut report.widths)?;
        report.specs += 1;
        if !c.all() {
            report.failures.push((n, k, c));
        }
    }
    Ok(report)
}

/// `trials` specs with path lengths drawn uniformly.
pub fn game_correctness(params: &FormatParams, trials: usize, seed: u64) -> Result<CorrectnessReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let cells: Vec<_> =
        (0..trials).map(|_| (rng.gen_range(1..=params.max_hops), rng.gen_range(0..=params.max_hops))).collect();
    run_cells(params, &cells, seed)
}

/// `per_cell` specs for every (n, n_reply) in 1..=N × 0..=N.
pub fn correctness_grid(params: &FormatParams, per_cell: usize, seed: u64) -> Result<CorrectnessReport> {
    let mut cells = vec![];
    for n in 1..=params.max_hops {
        for k in 0..=params.max_hops {
            cells.extend(std::iter::repeat((n, k)).take(per_cell));
        }
    }
    run_cells(params, &cells, seed)
}
