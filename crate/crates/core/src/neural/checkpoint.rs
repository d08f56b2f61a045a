//! `NMNN` checkpoint format, little-endian throughout:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `NMNN` |
//! | 4 | version (`u32`) |
//! | 4 × 4 | inputs, outputs, blocks, layout tag (0 uniform, 1 tapered) |
//! | 4 × 4 | four block widths |
//! | 8 × 4 | dropout, L2 ratio, batch-norm epsilon, momentum (`f64`) |
//! | 4 | 1 if Adam state follows, else 0 |
//!
//! followed by every trainable tensor in network order as `f32`, the
//! running mean and variance of every batch norm, and optionally the Adam
//! step (`u64`), hyperparameters (4 × `f64`) and both moment sets (`f32`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

use super::network::{Layout, MudNetwork, NetworkConfig};
use super::optim::{Adam, AdamConfig};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NMNN";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_f32s<W: Write, F: Scalar>(w: &mut W, xs: &[F]) -> Result<()> {
    for &x in xs {
        w.write_all(&(x.to_f64_lossy() as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write, F: Scalar>(mut w: W, net: &MudNetwork<F>, adam: Option<&Adam<F>>) -> Result<()> {
    let c = net.config();
    let (tag, widths) = match c.layout {
        Layout::Uniform(_) => (0u32, c.layout.block_widths()),
        Layout::Tapered(ws) => (1, ws),
    };
    w.write_all(&CHECKPOINT_MAGIC)?;
    for v in [CHECKPOINT_VERSION, c.inputs as u32, c.outputs as u32, c.blocks as u32, tag] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in widths {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in [c.dropout, c.l2, c.bn_eps, c.bn_momentum] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&u32::from(adam.is_some()).to_le_bytes())?;
    for t in net.tensors() {
        put_f32s(&mut w, t)?;
    }
    for n in net.norms() {
        put_f32s(&mut w, &n.running_mean)?;
        put_f32s(&mut w, &n.running_var)?;
    }
    if let Some(a) = adam {
        w.write_all(&a.step.to_le_bytes())?;
        for v in [a.config.learning_rate, a.config.beta1, a.config.beta2, a.config.eps] {
            w.write_all(&v.to_le_bytes())?;
        }
        for t in a.m.iter().chain(&a.v) {
            put_f32s(&mut w, t)?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Truncated { expected: end, found: self.buf.len() });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn fill<F: Scalar>(&mut self, dst: &mut [F]) -> Result<()> {
        let raw = self.take(4 * dst.len())?;
        for (d, b) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *d = F::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64);
        }
        Ok(())
    }
}

/// Parse a checkpoint, restoring the optimiser state when present.
pub fn read_checkpoint<R: Read, F: Scalar>(mut r: R) -> Result<(MudNetwork<F>, Option<Adam<F>>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a network checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let (inputs, outputs, blocks, tag) = (c.u32()? as usize, c.u32()? as usize, c.u32()? as usize, c.u32()?);
    let mut widths = [0usize; 4];
    for w in &mut widths {
        *w = c.u32()? as usize;
    }
    let layout = match tag {
        0 if widths.iter().all(|&w| w == widths[0]) => Layout::Uniform(widths[0]),
        1 => Layout::Tapered(widths),
        _ => return Err(Error::CorruptHeader(format!("layout tag {tag} with widths {widths:?}"))),
    };
    let config = NetworkConfig {
        inputs,
        outputs,
        blocks,
        layout,
        dropout: c.f64()?,
        l2: c.f64()?,
        bn_eps: c.f64()?,
        bn_momentum: c.f64()?,
    };
    config.validate().map_err(|e| Error::CorruptHeader(e.to_string()))?;
    let has_adam = match c.u32()? {
        0 => false,
        1 => true,
        v => return Err(Error::CorruptHeader(format!("optimiser flag {v}"))),
    };
    // guard allocation against absurd headers before building the network
    let w = config.layout.block_widths();
    let t = config.layout.trunk_width();
    let per_block = t * w[0] + w[0] * w[1] + w[1] * w[2] + w[2] * w[3] + 3 * w.iter().sum::<usize>();
    let approx = inputs * t + blocks * per_block + t * outputs;
    if approx > buf.len() {
        return Err(Error::Truncated { expected: approx, found: buf.len() });
    }
    let mut net = MudNetwork::<F>::new(config, &mut crate::rng::seeded(0))?;
    for tensor in net.tensors_mut() {
        c.fill(tensor)?;
    }
    for n in net.norms_mut() {
        c.fill(&mut n.running_mean)?;
        c.fill(&mut n.running_var)?;
    }
    if net.norms().iter().any(|n| n.running_var.iter().any(|&v| !(v >= F::zero()))) {
        return Err(Error::Format("negative running variance".into()));
    }
    let adam = if has_adam {
        let step = c.u64()?;
        let config = AdamConfig {
            learning_rate: c.f64()?,
            beta1: c.f64()?,
            beta2: c.f64()?,
            eps: c.f64()?,
        };
        let mut a = Adam::<F>::new(config, net.tensors().iter().map(|t| t.len()));
        a.step = step;
        for t in a.m.iter_mut().chain(a.v.iter_mut()) {
            c.fill(t)?;
        }
        Some(a)
    } else {
        None
    };
    if c.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Ok((net, adam))
}

pub fn save_checkpoint<F: Scalar>(path: impl AsRef<Path>, net: &MudNetwork<F>, adam: Option<&Adam<F>>) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), net, adam)
}

pub fn load_checkpoint<F: Scalar>(path: impl AsRef<Path>) -> Result<(MudNetwork<F>, Option<Adam<F>>)> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
