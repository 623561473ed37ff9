//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "COSRECCK" u32 version
//! u32 len, run config JSON
//! u32 len, model config JSON
//! u32 count, then per tensor: u32 name len, name, u32 rank, u32 dims.., f32 data..
//! u8 has_optimizer [u32 len, adam config JSON, u64 step, u32 count, tensors (m then v)]
//! u8 has_rng [32-byte seed, u64 stream, u128 word position]
//! ```
//!
//! Tensors are parameters followed by batch-norm running statistics.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{CosRecConfig, CosRecModel};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;
use crate::train::RunConfig;

pub const MAGIC: &[u8; 8] = b"COSRECCK";
pub const VERSION: u32 = 1;

/// Largest accepted dimension or byte count in a single field.
const FIELD_LIMIT: u64 = 1 << 32;

/// Snapshot of a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub run: RunConfig,
    pub model: CosRecModel<f32>,
    pub optimizer: Option<Adam<f32>>,
    pub rng: Option<RngState>,
}

impl Checkpoint {
    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut w = Out(w);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.json(&self.run)?;
        w.json(self.model.config())?;
        let tensors: Vec<(String, &Tensor<f32>)> =
            self.model.parameters().into_iter().chain(self.model.buffers()).collect();
        w.len(tensors.len())?;
        for (name, t) in tensors {
            w.str(&name)?;
            w.tensor(t)?;
        }
        match &self.optimizer {
            None => w.bytes(&[0])?,
            Some(adam) => {
                w.bytes(&[1])?;
                w.json(adam.config())?;
                w.bytes(&adam.step_count().to_le_bytes())?;
                w.len(adam.first_moments().len())?;
                for t in adam.first_moments().iter().chain(adam.second_moments()) {
                    w.tensor(t)?;
                }
            }
        }
        match &self.rng {
            None => w.bytes(&[0])?,
            Some(s) => {
                w.bytes(&[1])?;
                w.bytes(&s.seed)?;
                w.bytes(&s.stream.to_le_bytes())?;
                w.bytes(&s.word_pos.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let mut r = In(r);
        let mut magic = [0u8; 8];
        r.exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}, expected {VERSION}")));
        }
        let run: RunConfig = r.json()?;
        let config: CosRecConfig = r.json()?;
        let mut model = CosRecModel::<f32>::zeroed(config)?;

        let count = r.u32()? as usize;
        let mut stored = HashMap::with_capacity(count);
        for _ in 0..count {
            let name = r.str()?;
            let t = r.tensor()?;
            if stored.insert(name.clone(), t).is_some() {
                return Err(Error::Checkpoint(format!("tensor {name} stored twice")));
            }
        }
        let names: Vec<String> = model.parameters().into_iter().chain(model.buffers()).map(|(n, _)| n).collect();
        if names.len() != stored.len() {
            return Err(Error::Checkpoint(format!("{} stored tensors, model expects {}", stored.len(), names.len())));
        }
        let slots = model.parameters_mut();
        let n_params = slots.len();
        for (name, slot) in names.iter().zip(slots) {
            fill(slot, name, &mut stored)?;
        }
        for (name, slot) in names[n_params..].iter().zip(model.buffers_mut()) {
            fill(slot, name, &mut stored)?;
        }

        let optimizer = match r.flag()? {
            false => None,
            true => {
                let cfg: AdamConfig = r.json()?;
                let mut step = [0u8; 8];
                r.exact(&mut step)?;
                let n = r.u32()? as usize;
                if n != n_params {
                    return Err(Error::Checkpoint(format!("optimizer holds {n} slots for {n_params} parameters")));
                }
                let mut moments = Vec::with_capacity(2 * n);
                for _ in 0..2 * n {
                    moments.push(r.tensor()?);
                }
                let second = moments.split_off(n);
                for (m, (name, p)) in moments.iter().zip(model.parameters()) {
                    if m.shape() != p.shape() {
                        return Err(Error::Checkpoint(format!("optimizer state for {name} has shape {:?}", m.shape())));
                    }
                }
                Some(Adam::from_parts(cfg, moments, second, u64::from_le_bytes(step))?)
            }
        };
        let rng = match r.flag()? {
            false => None,
            true => {
                let mut seed = [0u8; 32];
                let mut stream = [0u8; 8];
                let mut pos = [0u8; 16];
                r.exact(&mut seed)?;
                r.exact(&mut stream)?;
                r.exact(&mut pos)?;
                Some(RngState { seed, stream: u64::from_le_bytes(stream), word_pos: u128::from_le_bytes(pos) })
            }
        };
        let mut probe = [0u8; 1];
        if r.0.read(&mut probe)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
        }
        Ok(Self { run, model, optimizer, rng })
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(BufReader::new(File::open(path)?))
    }
}

fn fill(slot: &mut Tensor<f32>, name: &str, stored: &mut HashMap<String, Tensor<f32>>) -> Result<()> {
    let t = stored.remove(name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
    if t.shape() != slot.shape() {
        return Err(Error::Checkpoint(format!(
            "tensor {name} has shape {:?}, model expects {:?}",
            t.shape(),
            slot.shape()
        )));
    }
    *slot = t;
    Ok(())
}

struct Out<W>(W);

impl<W: Write> Out<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.0.write_all(b)?)
    }

    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn len(&mut self, n: usize) -> Result<()> {
        let v = u32::try_from(n).map_err(|_| Error::Checkpoint(format!("length {n} exceeds u32")))?;
        self.u32(v)
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.len(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn json<T: serde::Serialize>(&mut self, v: &T) -> Result<()> {
        let s = serde_json::to_string(v).map_err(|e| Error::Checkpoint(e.to_string()))?;
        self.str(&s)
    }

    fn tensor(&mut self, t: &Tensor<f32>) -> Result<()> {
        self.len(t.rank())?;
        for &d in t.shape() {
            self.len(d)?;
        }
        let mut buf = Vec::with_capacity(4 * t.len());
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }
}

struct In<R>(R);

impl<R: Read> In<R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated checkpoint".into()),
            _ => Error::Io(e),
        })
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn flag(&mut self) -> Result<bool> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        match b[0] {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Checkpoint(format!("bad presence flag {v}"))),
        }
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let mut buf = vec![0u8; n];
        self.exact(&mut buf)?;
        String::from_utf8(buf).map_err(|_| Error::Checkpoint("string field is not UTF-8".into()))
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self) -> Result<T> {
        let s = self.str()?;
        serde_json::from_str(&s).map_err(|e| Error::Checkpoint(format!("bad JSON field: {e}")))
    }

    fn tensor(&mut self) -> Result<Tensor<f32>> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("tensor rank {rank} is implausible")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut len: u64 = 1;
        for _ in 0..rank {
            let d = self.u32()?;
            len = len.saturating_mul(d as u64);
            shape.push(d as usize);
        }
        if len >= FIELD_LIMIT {
            return Err(Error::Checkpoint(format!("tensor of shape {shape:?} is too large")));
        }
        let mut raw = vec![0u8; 4 * len as usize];
        self.exact(&mut raw)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Tensor::new(shape, data)?)
    }
}
