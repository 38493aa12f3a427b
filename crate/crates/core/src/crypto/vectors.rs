//! Line-oriented test vectors: `primitive,hex-input,...,hex-output`.

use rand::{CryptoRng, Rng, RngCore};

use super::{CryptoSuite, GroupElement, Lioness, OracleTag, SymKey};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorRecord {
    pub primitive: String,
    pub inputs: Vec<Vec<u8>>,
    pub output: Vec<u8>,
}

impl VectorRecord {
    pub fn new(primitive: &str, inputs: Vec<Vec<u8>>, output: Vec<u8>) -> Self {
        VectorRecord { primitive: primitive.to_string(), inputs, output }
    }

    pub fn to_line(&self) -> String {
        let mut parts = vec![self.primitive.clone()];
        parts.extend(self.inputs.iter().map(hex::encode));
        parts.push(hex::encode(&self.output));
        parts.join(",")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() < 2 {
            return Err(Error::Config(format!("short vector line: {line}")));
        }
        let dec = |s: &str| hex::decode(s).map_err(|e| Error::Config(e.to_string()));
        let inputs = parts[1..parts.len() - 1].iter().map(|s| dec(s)).collect::<Result<_>>()?;
        Ok(VectorRecord {
            primitive: parts[0].to_string(),
            inputs,
            output: dec(parts[parts.len() - 1])?,
        })
    }
}

pub fn parse_file(text: &str) -> Result<Vec<VectorRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(VectorRecord::parse_line)
        .collect()
}

pub fn render_file(records: &[VectorRecord]) -> String {
    records.iter().map(|r| r.to_line() + "\n").collect()
}

pub const VECTOR_PRP_BLOCK: usize = 128;

fn tag_name(t: OracleTag) -> &'static str {
    match t {
        OracleTag::Rho => "ro_hsym_rho",
        OracleTag::Mu => "ro_hsym_mu",
        OracleTag::Pi => "ro_hsym_pi",
    }
}

pub fn generate<R: RngCore + CryptoRng>(suite: &CryptoSuite, rng: &mut R, count: usize) -> Result<Vec<VectorRecord>> {
    let g = suite.group;
    let prp = Lioness::new(VECTOR_PRP_BLOCK)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let a = g.random_scalar(rng);
        let e = g.random_scalar(rng);
        let base = g.exp_g(&a);
        let s = g.exp(&base, &e)?;
        out.push(VectorRecord::new("exp", vec![base.as_bytes().to_vec(), e.to_bytes().to_vec()], s.as_bytes().to_vec()));
        out.push(VectorRecord::new(
            "ro_hb",
            vec![base.as_bytes().to_vec(), s.as_bytes().to_vec()],
            suite.ro_hb(&base, &s)?.to_bytes().to_vec(),
        ));
        for t in OracleTag::ALL {
            out.push(VectorRecord::new(tag_name(t), vec![s.as_bytes().to_vec()], suite.ro_hsym(t, &s)?.as_bytes().to_vec()));
        }
        let mut kb = vec![0u8; suite.kappa];
        rng.fill(&mut kb[..]);
        let k = SymKey::new(kb, suite.kappa)?;
        let len = rng.gen_range(0..=suite.prg_cap());
        out.push(VectorRecord::new(
            "prg",
            vec![k.as_bytes().to_vec(), (len as u32).to_be_bytes().to_vec()],
            suite.prg(&k, len)?,
        ));
        let mut msg = vec![0u8; rng.gen_range(0..64)];
        rng.fill(&mut msg[..]);
        out.push(VectorRecord::new("mac", vec![k.as_bytes().to_vec(), msg.clone()], suite.mac(&k, &msg)));
        let mut block = vec![0u8; VECTOR_PRP_BLOCK];
        rng.fill(&mut block[..]);
        out.push(VectorRecord::new("prp_enc", vec![k.as_bytes().to_vec(), block.clone()], prp.prp_enc(&k, &block)?));
    }
    Ok(out)
}

/// Recomputes one record; returns whether the output matches.
pub fn verify(suite: &CryptoSuite, rec: &VectorRecord) -> Result<bool> {
    let g = suite.group;
    let el = |i: usize| -> Result<GroupElement> { g.decode(&rec.inputs[i]) };
    let key = |i: usize| SymKey::new(rec.inputs[i].clone(), suite.kappa);
    let got = match rec.primitive.as_str() {
        "exp" => {
            let e: [u8; 32] = rec.inputs[1].clone().try_into().map_err(|_| Error::InvalidScalar)?;
            g.exp(&el(0)?, &g.scalar_from_bytes(e)?)?.as_bytes().to_vec()
        }
        "ro_hb" => suite.ro_hb(&el(0)?, &el(1)?)?.to_bytes().to_vec(),
        "ro_hsym_rho" => suite.ro_hsym(OracleTag::Rho, &el(0)?)?.as_bytes().to_vec(),
        "ro_hsym_mu" => suite.ro_hsym(OracleTag::Mu, &el(0)?)?.as_bytes().to_vec(),
        "ro_hsym_pi" => suite.ro_hsym(OracleTag::Pi, &el(0)?)?.as_bytes().to_vec(),
        "prg" => {
            let len: [u8; 4] = rec.inputs[1].clone().try_into().map_err(|_| Error::Config("prg len".into()))?;
            suite.prg(&key(0)?, u32::from_be_bytes(len) as usize)?
        }
        "mac" => suite.mac(&key(0)?, &rec.inputs[1]),
        "prp_enc" => Lioness::new(rec.inputs[1].len())?.prp_enc(&key(0)?, &rec.inputs[1])?,
        other => return Err(Error::Config(format!("unknown primitive {other}"))),
    };
    Ok(got == rec.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn generate_render_parse_verify() {
        let suite = CryptoSuite::default();
        let recs = generate(&suite, &mut ChaCha20Rng::seed_from_u64(11), 5).unwrap();
        let text = render_file(&recs);
        let back = parse_file(&text).unwrap();
        assert_eq!(back, recs);
        for r in &back {
            assert!(verify(&suite, r).unwrap(), "{}", r.primitive);
        }
        let mut bad = back[0].clone();
        bad.output[0] ^= 1;
        assert!(!verify(&suite, &bad).unwrap());
    }

    #[test]
    fn frozen_crypto_vectors() {
        let recs = parse_file(include_str!("../../tests/data/crypto_vectors.txt")).unwrap();
        assert_eq!(recs.len(), 32);
        let suite = CryptoSuite::default();
        for r in &recs {
            assert!(verify(&suite, r).unwrap(), "{}", r.primitive);
        }
    }
}
