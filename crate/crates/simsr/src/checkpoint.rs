//! Binary checkpoints.
//!
//! Layout, all integers `u32` and all reals `f64`, little-endian:
//!
//! ```text
//! magic     8 bytes  "SIMSRCK\0"
//! version   u32      1
//! scalars   u32 count, then per entry: name, value
//! networks  u32 count, then per entry: name, u32 layers,
//!           per layer: u32 in, u32 out, out·in weights, out biases
//! ```
//!
//! Names are a `u32` byte length followed by UTF-8. Network names are
//! `encoder.online`, `encoder.target`, `dynamics.<k>`, `critic.q1`,
//! `critic.q2`, `critic.q1_target`, `critic.q2_target` and `actor`;
//! scalars are `step`, `encoder.normalized` and `encoder.momentum`.

use std::collections::BTreeMap;
use std::path::Path;

use simsr_core::encoder::{Encoder, EncoderPair};
use simsr_core::nn::{Linear, Mlp};
use simsr_core::run::Learner;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"SIMSRCK\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub scalars: BTreeMap<String, f64>,
    pub networks: BTreeMap<String, Mlp>,
}

impl Checkpoint {
    pub fn from_learner(learner: &Learner, step: u64) -> Self {
        let mut ck = Checkpoint::default();
        let rep = learner.representation();
        ck.scalars.insert("step".into(), step as f64);
        ck.scalars.insert("encoder.normalized".into(), f64::from(u8::from(rep.pair.online.is_normalized())));
        ck.scalars.insert("encoder.momentum".into(), rep.pair.momentum());
        ck.networks.insert("encoder.online".into(), rep.pair.online.net().clone());
        ck.networks.insert("encoder.target".into(), rep.pair.target.net().clone());
        if let Some(ens) = &rep.ensemble {
            for (k, head) in ens.heads().iter().enumerate() {
                ck.networks.insert(format!("dynamics.{k}"), head.clone());
            }
        }
        if let Some(agent) = learner.agent() {
            let c = &agent.critic;
            for (name, net) in [("q1", &c.q1), ("q2", &c.q2), ("q1_target", &c.q1_target), ("q2_target", &c.q2_target)] {
                ck.networks.insert(format!("critic.{name}"), net.clone());
            }
            ck.networks.insert("actor".into(), agent.actor.net.clone());
        }
        ck
    }

    fn network(&self, name: &str) -> Result<&Mlp> {
        self.networks.get(name).ok_or_else(|| CliError::validation(format!("checkpoint has no `{name}` network")))
    }

    fn encoder_from(&self, name: &str) -> Result<Encoder> {
        let enc = Encoder::from_mlp(self.network(name)?.clone());
        Ok(match self.scalars.get("encoder.normalized") {
            Some(0.0) => enc.without_normalization(),
            _ => enc,
        })
    }

    /// The online encoder.
    pub fn encoder(&self) -> Result<Encoder> {
        self.encoder_from("encoder.online")
    }

    pub fn encoder_pair(&self) -> Result<EncoderPair> {
        let m = self.scalars.get("encoder.momentum").copied().unwrap_or(simsr_core::encoder::DEFAULT_MOMENTUM);
        Ok(EncoderPair::from_parts(self.encoder()?, self.encoder_from("encoder.target")?, m)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let put_name = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.scalars.len() as u32).to_le_bytes());
        for (name, v) in &self.scalars {
            put_name(&mut out, name);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.networks.len() as u32).to_le_bytes());
        for (name, net) in &self.networks {
            put_name(&mut out, name);
            out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
            for layer in net.layers() {
                out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
                out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
                for x in layer.weight.iter().chain(&layer.bias) {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CliError::validation("not a checkpoint: bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::validation(format!("unsupported checkpoint version {version}")));
        }
        let mut ck = Checkpoint::default();
        for _ in 0..r.u32()? {
            let name = r.name()?;
            let v = r.f64()?;
            ck.scalars.insert(name, v);
        }
        for _ in 0..r.u32()? {
            let name = r.name()?;
            let n_layers = r.u32()? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let (i, o) = (r.u32()? as usize, r.u32()? as usize);
                let weight = r.f64s(i.checked_mul(o).ok_or_else(|| CliError::validation("layer too large"))?)?;
                let bias = r.f64s(o)?;
                layers.push(Linear::from_parts(i, o, weight, bias)?);
            }
            ck.networks.insert(name, Mlp::from_layers(layers)?);
        }
        if r.pos != bytes.len() {
            return Err(CliError::validation("trailing bytes after checkpoint"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::validation("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| CliError::validation("layer too large"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn name(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CliError::validation("checkpoint name is not UTF-8"))
    }
}
