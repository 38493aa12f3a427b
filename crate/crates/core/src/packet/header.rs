//! Header η = (α, β, γ): construction, padding and per-hop peeling.
//!
//! Layers are 0-indexed. With N = max_hops and n path hops:
//!   Φ_0 = ε, Φ_i = (Φ_{i-1} ‖ 0_{2κ}) ⊕ ρ_{i-1}[(2(N-i)+3)κ ..]
//!   β_{n-1} = ((route ‖ I ‖ filler) ⊕ ρ_{n-1}[..(2(N-n)+3)κ]) ‖ Φ_{n-1}
//!   β_i = (route_{i+1} ‖ γ_{i+1} ‖ β_{i+1}[..(2N-1)κ]) ⊕ ρ_i[..(2N+1)κ]
//!   γ_i = μ(k_μ,i, β_i)

use super::params::{Address, FormatParams};
use crate::crypto::xor_into;
use crate::error::{arg, Result};
use crate::kem::{KemChain, LayerSecrets};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Header {
    pub alpha: Vec<u8>,
    pub beta: Vec<u8>,
    pub gamma: Vec<u8>,
}

impl std::fmt::Debug for Header {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Header(alpha={}, gamma={})", hex::encode(&self.alpha), hex::encode(&self.gamma))
    }
}

impl Header {
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.alpha[..], &self.beta[..], &self.gamma[..]].concat()
    }

    pub fn from_bytes(params: &FormatParams, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != params.header_len() {
            return arg(format!("header length {} != {}", bytes.len(), params.header_len()));
        }
        let a = params.alpha_len();
        let b = a + params.beta_len();
        Ok(Header { alpha: bytes[..a].to_vec(), beta: bytes[a..b].to_vec(), gamma: bytes[b..].to_vec() })
    }
}

/// Routing slot contents: a κ-byte field of type byte, address, zero fill.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    Relay(Address),
    /// The ∗ sentinel; the receiver travels in the payload.
    Exit,
    ReplyReturn(Address),
}

const ROUTE_RELAY: u8 = 1;
const ROUTE_EXIT: u8 = 2;
const ROUTE_REPLY: u8 = 3;

pub fn encode_route(params: &FormatParams, r: &Route) -> Vec<u8> {
    let mut out = vec![0u8; params.kappa];
    let (t, a) = match r {
        Route::Relay(a) => (ROUTE_RELAY, Some(a)),
        Route::Exit => (ROUTE_EXIT, None),
        Route::ReplyReturn(a) => (ROUTE_REPLY, Some(a)),
    };
    out[0] = t;
    if let Some(a) = a {
        out[1..1 + params.addr_len].copy_from_slice(a.as_bytes());
    }
    out
}

pub fn decode_route(params: &FormatParams, slot: &[u8]) -> Option<Route> {
    let addr = &slot[1..1 + params.addr_len];
    if slot[1 + params.addr_len..].iter().any(|&b| b != 0) {
        return None;
    }
    let a = || Address::from_bytes(params, addr).ok();
    match slot[0] {
        ROUTE_RELAY => a().map(Route::Relay),
        ROUTE_EXIT if addr.iter().all(|&b| b == 0) => Some(Route::Exit),
        ROUTE_REPLY => a().map(Route::ReplyReturn),
        _ => None,
    }
}

fn rho(params: &FormatParams, layer: &LayerSecrets, len: usize) -> Result<Vec<u8>> {
    params.suite().prg(&layer.k_rho, len)
}

/// Φ_upto, built from the first `upto` layers' ρ keys.
pub fn build_padding(params: &FormatParams, chain: &KemChain, upto: usize) -> Result<Vec<u8>> {
    if upto > chain.layers.len() || upto > params.max_hops {
        return arg("padding index beyond chain");
    }
    let k = params.kappa;
    let n_max = params.max_hops;
    let mut phi = Vec::new();
    for i in 1..=upto {
        phi.extend_from_slice(&vec![0u8; 2 * k]);
        let stream = rho(params, &chain.layers[i - 1], (2 * n_max + 3) * k)?;
        xor_into(&mut phi, &stream[(2 * (n_max - i) + 3) * k..]);
    }
    Ok(phi)
}

/// One header per layer. `hops[i]` names the relay at layer i; the last
/// layer routes to `fin` with identifier `ident` and the given filler.
pub fn build_header(
    params: &FormatParams,
    chain: &KemChain,
    hops: &[Address],
    fin: &Route,
    ident: &[u8],
    filler: &[u8],
) -> Result<Vec<Header>> {
    let n = chain.layers.len();
    let k = params.kappa;
    let n_max = params.max_hops;
    if n == 0 || n > n_max {
        return arg(format!("path length {n} outside 1..={n_max}"));
    }
    if hops.len() != n {
        return arg("hop list and chain length differ");
    }
    if ident.len() != k {
        return arg("identifier must be kappa bytes");
    }
    if filler.len() != params.final_filler_len(n) {
        return arg("final filler has wrong length");
    }
    let mut fin_plain = encode_route(params, fin);
    fin_plain.extend_from_slice(ident);
    fin_plain.extend_from_slice(filler);
    let head_len = (2 * (n_max - n) + 3) * k;
    debug_assert_eq!(fin_plain.len(), head_len);
    xor_into(&mut fin_plain, &rho(params, &chain.layers[n - 1], head_len)?);
    let mut beta = fin_plain;
    beta.extend_from_slice(&build_padding(params, chain, n - 1)?);
    debug_assert_eq!(beta.len(), params.beta_len());

    let suite = params.suite();
    let mut out = vec![Header { alpha: vec![], beta: vec![], gamma: vec![] }; n];
    let mut gamma = suite.mac(&chain.layers[n - 1].k_mu, &beta);
    out[n - 1] = Header { alpha: chain.layers[n - 1].alpha.as_bytes().to_vec(), beta: beta.clone(), gamma: gamma.clone() };
    for i in (0..n - 1).rev() {
        let mut b = encode_route(params, &Route::Relay(hops[i + 1].clone()));
        b.extend_from_slice(&gamma);
        b.extend_from_slice(&beta[..(2 * n_max - 1) * k]);
        xor_into(&mut b, &rho(params, &chain.layers[i], params.beta_len())?);
        gamma = suite.mac(&chain.layers[i].k_mu, &b);
        beta = b;
        out[i] = Header { alpha: chain.layers[i].alpha.as_bytes().to_vec(), beta: beta.clone(), gamma: gamma.clone() };
    }
    Ok(out)
}

/// Relay-side β peel: returns (route, next γ or I, next β).
pub fn peel_beta(params: &FormatParams, layer: &LayerSecrets, beta: &[u8]) -> Result<(Option<Route>, Vec<u8>, Vec<u8>)> {
    let k = params.kappa;
    let mut tmp = beta.to_vec();
    tmp.extend_from_slice(&vec![0u8; 2 * k]);
    xor_into(&mut tmp, &rho(params, layer, (2 * params.max_hops + 3) * k)?);
    let route = decode_route(params, &tmp[..k]);
    Ok((route, tmp[k..2 * k].to_vec(), tmp[2 * k..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kem::{kem_blind, kem_chain_create, kem_decap, kem_keygen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn setup(n: usize, seed: u64) -> (FormatParams, Vec<crate::kem::KemKeyPair>, KemChain, Vec<Address>) {
        let p = FormatParams::default();
        let suite = p.suite();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let kps: Vec<_> = (0..n).map(|_| kem_keygen(&suite, &mut rng)).collect();
        let pks: Vec<_> = kps.iter().map(|k| k.pk.clone()).collect();
        let chain = kem_chain_create(&suite, &suite.group.random_scalar(&mut rng), &pks).unwrap();
        let hops = (0..n).map(|i| Address::new(&p, &format!("r{i}")).unwrap()).collect();
        (p, kps, chain, hops)
    }

    #[test]
    fn route_round_trip() {
        let p = FormatParams::default();
        for r in [Route::Exit, Route::Relay(Address::new(&p, "ab").unwrap()), Route::ReplyReturn(Address::new(&p, "s").unwrap())] {
            assert_eq!(decode_route(&p, &encode_route(&p, &r)), Some(r));
        }
        assert_eq!(decode_route(&p, &vec![0u8; 16]), None);
        let mut bad = encode_route(&p, &Route::Exit);
        bad[15] = 1;
        assert_eq!(decode_route(&p, &bad), None);
    }

    #[test]
    fn padding_lengths() {
        let (p, _, chain, _) = setup(5, 1);
        assert!(build_padding(&p, &chain, 0).unwrap().is_empty());
        for i in 1..=5 {
            assert_eq!(build_padding(&p, &chain, i).unwrap().len(), 2 * i * p.kappa);
        }
        assert!(build_padding(&p, &chain, 6).is_err());
    }

    #[test]
    fn headers_peel_into_each_other() {
        for n in 1..=5 {
            let (p, kps, chain, hops) = setup(n, 10 + n as u64);
            let mut rng = ChaCha20Rng::seed_from_u64(n as u64);
            let mut filler = vec![0u8; p.final_filler_len(n)];
            rng.fill(&mut filler[..]);
            let ident = vec![7u8; 16];
            let hs = build_header(&p, &chain, &hops, &Route::Exit, &ident, &filler).unwrap();
            let phi = build_padding(&p, &chain, n - 1).unwrap();
            assert!(hs[n - 1].beta.ends_with(&phi));
            let suite = p.suite();
            let mut alpha = suite.group.decode(&hs[0].alpha).unwrap();
            for i in 0..n {
                assert_eq!(hs[i].beta.len(), p.beta_len());
                let ls = kem_decap(&suite, &kps[i].sk, &alpha).unwrap();
                assert!(suite.mac_verify(&ls.k_mu, &hs[i].beta, &hs[i].gamma));
                let (route, g, b) = peel_beta(&p, &ls, &hs[i].beta).unwrap();
                alpha = kem_blind(&suite, &alpha, &ls.b).unwrap();
                if i + 1 < n {
                    assert_eq!(route, Some(Route::Relay(hops[i + 1].clone())));
                    assert_eq!(g, hs[i + 1].gamma);
                    assert_eq!(b, hs[i + 1].beta);
                    assert_eq!(alpha.as_bytes(), &hs[i + 1].alpha[..]);
                } else {
                    assert_eq!(route, Some(Route::Exit));
                    assert_eq!(g, ident);
                    // the filler region follows the identifier
                    assert_eq!(&b[..filler.len()], &filler[..]);
                }
            }
        }
    }

    #[test]
    fn zero_filler_shows_in_exit_peel() {
        for n in [2usize, 5] {
            let (p, kps, chain, hops) = setup(n, 30 + n as u64);
            let filler = vec![0u8; p.final_filler_len(n)];
            let hs = build_header(&p, &chain, &hops, &Route::Exit, &[0u8; 16], &filler).unwrap();
            let ls = kem_decap(&p.suite(), &kps[n - 1].sk, &p.group.decode(&hs[n - 1].alpha).unwrap()).unwrap();
            let (_, _, b) = peel_beta(&p, &ls, &hs[n - 1].beta).unwrap();
            let zeros = b.iter().take_while(|&&x| x == 0).count();
            assert_eq!(zeros / p.kappa, 2 * (p.max_hops - n) + 1);
        }
    }
}
