//! FormOnion, ProcOnion, FormReply, RecognizeOnion and payload tagging.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::header::{build_header, peel_beta, Header, Route};
use super::params::{Address, FillerMode, FormatParams};
use super::payload::{
    build_payload_forward, build_payload_reply, has_zero_prefix, parse_payload_forward, parse_payload_reply, ReplyInfo,
};
use crate::crypto::{GroupElement, Scalar, SymKey};
use crate::error::{arg, Result};
use crate::kem::{kem_blind, kem_chain_create, kem_decap, KemChain};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Onion {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl std::fmt::Debug for Onion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Onion({:?}, {} payload bytes)", self.header, self.payload.len())
    }
}

impl Onion {
    /// Wire format: α ‖ β ‖ γ ‖ δ.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = self.header.to_bytes();
        v.extend_from_slice(&self.payload);
        v
    }

    pub fn from_bytes(params: &FormatParams, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != params.onion_len() {
            return arg(format!("onion length {} != {}", bytes.len(), params.onion_len()));
        }
        let h = params.header_len();
        Ok(Onion { header: Header::from_bytes(params, &bytes[..h])?, payload: bytes[h..].to_vec() })
    }

    fn well_formed(&self, params: &FormatParams) -> bool {
        self.header.alpha.len() == params.alpha_len()
            && self.header.beta.len() == params.beta_len()
            && self.header.gamma.len() == params.kappa
            && self.payload.len() == params.payload_len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathHop {
    pub name: Address,
    pub pk: GroupElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnionSpec {
    /// All randomness of the onion is drawn from this seed.
    pub seed: [u8; 32],
    pub message: Vec<u8>,
    pub receiver: Address,
    pub forward: Vec<PathHop>,
    /// Empty for a non-repliable onion; otherwise ends at the sender.
    pub reply: Vec<PathHop>,
}

impl OnionSpec {
    pub fn n(&self) -> usize {
        self.forward.len()
    }

    pub fn n_reply(&self) -> usize {
        self.reply.len()
    }

    pub fn repliable(&self) -> bool {
        !self.reply.is_empty()
    }

    pub fn validate(&self, params: &FormatParams) -> Result<()> {
        let n_max = params.max_hops;
        if self.forward.is_empty() || self.forward.len() > n_max {
            return arg(format!("forward path length {} outside 1..={n_max}", self.forward.len()));
        }
        if self.reply.len() > n_max {
            return arg(format!("reply path length {} exceeds {n_max}", self.reply.len()));
        }
        for path in [&self.forward, &self.reply] {
            let names: HashSet<_> = path.iter().map(|h| &h.name).collect();
            if names.len() != path.len() {
                return arg("path is not acyclic");
            }
            for h in path.iter() {
                params.group.decode(h.pk.as_bytes())?;
                if h.name.as_bytes().len() != params.addr_len {
                    return arg("address width mismatch");
                }
            }
        }
        if self.message.len() > params.max_message_len() {
            return arg("message too long");
        }
        Ok(())
    }
}

/// What a sender keeps to recognize and open a returning reply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplyExpectation {
    pub ident: Vec<u8>,
    pub reply_pi_keys: Vec<SymKey>,
    pub k_tilde: SymKey,
}

/// Every layer an onion spec determines.
#[derive(Clone, Debug)]
pub struct OnionMaterial {
    pub forward_chain: KemChain,
    pub reply_chain: Option<KemChain>,
    pub reply_info: Option<ReplyInfo>,
    pub ident: Vec<u8>,
    pub k_tilde: SymKey,
    pub forward_filler: Vec<u8>,
    pub reply_filler: Vec<u8>,
    layers: Vec<Onion>,
}

fn draw_filler(params: &FormatParams, rng: &mut ChaCha20Rng, n: usize) -> Vec<u8> {
    let mut f = vec![0u8; params.final_filler_len(n.max(1))];
    rng.fill(&mut f[..]);
    if params.filler == FillerMode::LegacyZero {
        f.fill(0);
    }
    f
}

impl OnionMaterial {
    pub fn expand(params: &FormatParams, spec: &OnionSpec) -> Result<Self> {
        params.validate()?;
        spec.validate(params)?;
        let suite = params.suite();
        let g = params.group;
        let prp = params.prp();
        let k = params.kappa;
        let mut rng = ChaCha20Rng::from_seed(spec.seed);
        let x: Scalar = g.random_scalar(&mut rng);
        let x_reply: Scalar = g.random_scalar(&mut rng);
        let mut kt = vec![0u8; k];
        rng.fill(&mut kt[..]);
        let k_tilde = SymKey::new(kt, k)?;
        let mut ident = vec![0u8; k];
        rng.fill(&mut ident[..]);
        let forward_filler = draw_filler(params, &mut rng, spec.n());
        let reply_filler = draw_filler(params, &mut rng, spec.n_reply());

        let n = spec.n();
        let fpks: Vec<_> = spec.forward.iter().map(|h| h.pk.clone()).collect();
        let fnames: Vec<_> = spec.forward.iter().map(|h| h.name.clone()).collect();
        let forward_chain = kem_chain_create(&suite, &x, &fpks)?;
        let fheaders = build_header(params, &forward_chain, &fnames, &Route::Exit, &vec![0u8; k], &forward_filler)?;

        let mut layers = Vec::with_capacity(n + spec.n_reply());
        let (reply_chain, reply_info, rheaders) = if spec.repliable() {
            let rpks: Vec<_> = spec.reply.iter().map(|h| h.pk.clone()).collect();
            let rnames: Vec<_> = spec.reply.iter().map(|h| h.name.clone()).collect();
            let chain = kem_chain_create(&suite, &x_reply, &rpks)?;
            let sender = rnames.last().unwrap().clone();
            let hs = build_header(params, &chain, &rnames, &Route::ReplyReturn(sender), &ident, &reply_filler)?;
            let info = ReplyInfo { first_hop: rnames[0].clone(), eta0: hs[0].clone(), k_tilde: k_tilde.clone() };
            (Some(chain), Some(info), hs)
        } else {
            (None, None, vec![])
        };

        let mut delta = build_payload_forward(params, &spec.receiver, reply_info.as_ref(), &spec.message)?;
        let mut fpay = vec![vec![]; n];
        for i in (0..n).rev() {
            prp.encrypt(&forward_chain.layers[i].k_pi, &mut delta)?;
            fpay[i] = delta.clone();
        }
        for (h, p) in fheaders.into_iter().zip(fpay) {
            layers.push(Onion { header: h, payload: p });
        }
        if let Some(chain) = &reply_chain {
            let mut d = build_payload_reply(params, &spec.message)?;
            prp.encrypt(&k_tilde, &mut d)?;
            for (i, h) in rheaders.into_iter().enumerate() {
                if i > 0 {
                    prp.decrypt(&chain.layers[i - 1].k_pi, &mut d)?;
                }
                layers.push(Onion { header: h, payload: d.clone() });
            }
        }
        Ok(OnionMaterial { forward_chain, reply_chain, reply_info, ident, k_tilde, forward_filler, reply_filler, layers })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// 1-indexed: layer i is what hop i receives.
    pub fn layer(&self, i: usize) -> Result<&Onion> {
        if i == 0 || i > self.layers.len() {
            return arg(format!("layer {i} outside 1..={}", self.layers.len()));
        }
        Ok(&self.layers[i - 1])
    }

    pub fn reply_expectation(&self) -> Option<ReplyExpectation> {
        self.reply_chain.as_ref().map(|c| ReplyExpectation {
            ident: self.ident.clone(),
            reply_pi_keys: c.layers.iter().map(|l| l.k_pi.clone()).collect(),
            k_tilde: self.k_tilde.clone(),
        })
    }
}

pub fn form_onion(params: &FormatParams, i: usize, spec: &OnionSpec) -> Result<Onion> {
    OnionMaterial::expand(params, spec)?.layer(i).cloned()
}

/// True iff the header matches layer i of `spec`; the payload is ignored.
pub fn recognize_onion(params: &FormatParams, i: usize, onion: &Onion, spec: &OnionSpec) -> Result<bool> {
    Ok(form_onion(params, i, spec)?.header == onion.header)
}

pub fn tag_payload(onion: &Onion, mask: &[u8]) -> Result<Onion> {
    if mask.len() != onion.payload.len() {
        return arg("mask length must equal payload length");
    }
    if mask.iter().all(|&b| b == 0) {
        return arg("mask must be nonzero");
    }
    let mut o = onion.clone();
    for (p, m) in o.payload.iter_mut().zip(mask) {
        *p ^= m;
    }
    Ok(o)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailCode {
    Malformed,
    Decode,
    MacMismatch,
    Replay,
    BadRoute,
    IntegrityCheck,
    UnknownReply,
    NotRepliable,
}

impl FailCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FailCode::Malformed => "malformed",
            FailCode::Decode => "decode",
            FailCode::MacMismatch => "mac-mismatch",
            FailCode::Replay => "replay",
            FailCode::BadRoute => "bad-route",
            FailCode::IntegrityCheck => "integrity-check",
            FailCode::UnknownReply => "unknown-reply",
            FailCode::NotRepliable => "not-repliable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProcResult {
    Forward { onion: Onion, next_hop: Address },
    Exit { message: Vec<u8>, receiver: Address, reply: Option<ReplyInfo> },
    ReplyReceived { message: Vec<u8>, ident: Vec<u8> },
    /// The code is a test diagnostic; callers treat every failure alike.
    Fail(FailCode),
}

/// Replay cache and reply expectations supplied by the caller.
pub trait ProcView {
    /// Returns false if this header was seen before; records it otherwise.
    fn check_and_record(&mut self, header: &Header) -> bool;
    fn reply_expectation(&self, ident: &[u8]) -> Option<ReplyExpectation>;
}

/// No replay cache and no expectations.
pub struct NoReplay;

impl ProcView for NoReplay {
    fn check_and_record(&mut self, _: &Header) -> bool {
        true
    }
    fn reply_expectation(&self, _: &[u8]) -> Option<ReplyExpectation> {
        None
    }
}

#[derive(Clone, Debug, Default)]
pub struct BasicView {
    pub seen: HashSet<Header>,
    pub expectations: HashMap<Vec<u8>, ReplyExpectation>,
}

impl ProcView for BasicView {
    fn check_and_record(&mut self, header: &Header) -> bool {
        self.seen.insert(header.clone())
    }
    fn reply_expectation(&self, ident: &[u8]) -> Option<ReplyExpectation> {
        self.expectations.get(ident).cloned()
    }
}

/// Outcome of the header checks alone (decode, MAC), without the replay
/// cache or payload. Used where only header validity matters.
pub fn header_valid(params: &FormatParams, sk: &Scalar, header: &Header) -> bool {
    let suite = params.suite();
    let Ok(alpha) = params.group.decode(&header.alpha) else { return false };
    let Ok(ls) = kem_decap(&suite, sk, &alpha) else { return false };
    header.beta.len() == params.beta_len() && suite.mac_verify(&ls.k_mu, &header.beta, &header.gamma)
}

pub fn proc_onion(params: &FormatParams, sk: &Scalar, onion: &Onion, self_name: &Address, view: &mut dyn ProcView) -> ProcResult {
    match proc_inner(params, sk, onion, self_name, view) {
        Ok(r) => r,
        Err(_) => ProcResult::Fail(FailCode::Malformed),
    }
}

fn proc_inner(params: &FormatParams, sk: &Scalar, onion: &Onion, self_name: &Address, view: &mut dyn ProcView) -> Result<ProcResult> {
    use ProcResult::Fail;
    if !onion.well_formed(params) {
        return Ok(Fail(FailCode::Malformed));
    }
    let suite = params.suite();
    let prp = params.prp();
    let Ok(alpha) = params.group.decode(&onion.header.alpha) else {
        return Ok(Fail(FailCode::Decode));
    };
    let ls = kem_decap(&suite, sk, &alpha)?;
    if !suite.mac_verify(&ls.k_mu, &onion.header.beta, &onion.header.gamma) {
        return Ok(Fail(FailCode::MacMismatch));
    }
    if !view.check_and_record(&onion.header) {
        return Ok(Fail(FailCode::Replay));
    }
    let (route, next_gamma, next_beta) = peel_beta(params, &ls, &onion.header.beta)?;
    let mut delta = onion.payload.clone();
    prp.decrypt(&ls.k_pi, &mut delta)?;
    Ok(match route {
        None => Fail(FailCode::BadRoute),
        Some(Route::Relay(next_hop)) => {
            let next_alpha = kem_blind(&suite, &alpha, &ls.b)?;
            ProcResult::Forward {
                onion: Onion {
                    header: Header { alpha: next_alpha.as_bytes().to_vec(), beta: next_beta, gamma: next_gamma },
                    payload: delta,
                },
                next_hop,
            }
        }
        Some(Route::Exit) => {
            if !has_zero_prefix(params, &delta) {
                return Ok(Fail(FailCode::IntegrityCheck));
            }
            match parse_payload_forward(params, &delta) {
                Some(fp) => ProcResult::Exit { message: fp.message, receiver: fp.receiver, reply: fp.reply.flatten() },
                None => Fail(FailCode::Malformed),
            }
        }
        Some(Route::ReplyReturn(addr)) => {
            if &addr != self_name {
                return Ok(Fail(FailCode::BadRoute));
            }
            let Some(exp) = view.reply_expectation(&next_gamma) else {
                return Ok(Fail(FailCode::UnknownReply));
            };
            for k in exp.reply_pi_keys.iter().rev() {
                prp.encrypt(k, &mut delta)?;
            }
            prp.decrypt(&exp.k_tilde, &mut delta)?;
            if !has_zero_prefix(params, &delta) {
                return Ok(Fail(FailCode::IntegrityCheck));
            }
            match parse_payload_reply(params, &delta) {
                Some(message) => ProcResult::ReplyReceived { message, ident: next_gamma },
                None => Fail(FailCode::Malformed),
            }
        }
    })
}

/// Exit-side reply construction from the stored exit-layer onion.
pub fn form_reply(
    params: &FormatParams,
    m_reply: &[u8],
    onion_at_exit: &Onion,
    exit_name: &Address,
    sk: &Scalar,
) -> std::result::Result<(Onion, Address), FailCode> {
    match proc_onion(params, sk, onion_at_exit, exit_name, &mut NoReplay) {
        ProcResult::Exit { reply: Some(info), .. } => {
            let mut d = build_payload_reply(params, m_reply).map_err(|_| FailCode::Malformed)?;
            params.prp().encrypt(&info.k_tilde, &mut d).map_err(|_| FailCode::Malformed)?;
            Ok((Onion { header: info.eta0, payload: d }, info.first_hop))
        }
        ProcResult::Exit { reply: None, .. } => Err(FailCode::NotRepliable),
        ProcResult::Fail(c) => Err(c),
        _ => Err(FailCode::BadRoute),
    }
}
