//! `NMUD` dataset container.
//!
//! 32-byte little-endian header: magic `NMUD`, `u32` version, `u32` sample
//! count D, `u32` feature length, `u32` device count N, `u8` mode
//! (0 single-antenna, 1 multi-antenna), `u8` antenna count X, two reserved
//! zero bytes, then the 8-byte configuration hash. The body holds the
//! features (`f32`, sample-major), the labels (`u8`, sample-major) and the
//! per-sample SNR in dB (`f32`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NMUD";
pub const DATASET_VERSION: u32 = 1;
const HEADER: usize = 32;

pub fn write_dataset<W: Write>(mut w: W, d: &Dataset) -> Result<()> {
    d.validate()?;
    let mut head = [0u8; HEADER];
    head[..4].copy_from_slice(MAGIC);
    head[4..8].copy_from_slice(&DATASET_VERSION.to_le_bytes());
    head[8..12].copy_from_slice(&(d.samples as u32).to_le_bytes());
    head[12..16].copy_from_slice(&(d.feature_len as u32).to_le_bytes());
    head[16..20].copy_from_slice(&(d.devices as u32).to_le_bytes());
    head[20] = u8::from(d.is_mmv());
    head[21] = d.antennas as u8;
    head[24..32].copy_from_slice(&d.config_hash);
    w.write_all(&head)?;
    let mut buf = Vec::with_capacity(d.features.len() * 4);
    for v in &d.features {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.write_all(&d.labels)?;
    buf.clear();
    for v in &d.snr_db {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    if bytes.len() < HEADER {
        return Err(Error::Truncated {
            expected: HEADER,
            found: bytes.len(),
        });
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = word(4);
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let (samples, feature_len, devices) = (word(8) as usize, word(12) as usize, word(16) as usize);
    let (mode, antennas) = (bytes[20], bytes[21] as usize);
    if mode > 1 || antennas == 0 || (mode == 0) != (antennas == 1) {
        return Err(Error::CorruptHeader(format!("mode {mode} with {antennas} antennas")));
    }
    if bytes[22] != 0 || bytes[23] != 0 {
        return Err(Error::CorruptHeader("reserved bytes are not zero".into()));
    }
    if feature_len == 0 || feature_len % (2 * antennas) != 0 || devices == 0 {
        return Err(Error::CorruptHeader(format!(
            "feature length {feature_len} is not 2*K*{antennas}, or no devices"
        )));
    }
    let config_hash: [u8; 8] = bytes[24..32].try_into().unwrap();
    let body = samples
        .checked_mul(feature_len * 4 + devices + 4)
        .ok_or_else(|| Error::CorruptHeader("sizes overflow".into()))?;
    let expected = HEADER + body;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after the dataset body",
            bytes.len() - expected
        )));
    }
    let f_end = HEADER + samples * feature_len * 4;
    let l_end = f_end + samples * devices;
    let f32s = |s: &[u8]| -> Vec<f32> {
        s.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let labels = bytes[f_end..l_end].to_vec();
    if labels.iter().any(|&b| b > 1) {
        return Err(Error::Format("label byte other than 0/1".into()));
    }
    Ok(Dataset {
        samples,
        feature_len,
        devices,
        antennas,
        features: f32s(&bytes[HEADER..f_end]),
        labels,
        snr_db: f32s(&bytes[l_end..]),
        config_hash,
    })
}

pub fn save_dataset(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, d)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            samples: 3,
            feature_len: 4,
            devices: 2,
            antennas: 1,
            features: (0..12).map(|i| i as f32 * 0.5 - 1.0).collect(),
            labels: vec![1, 0, 0, 1, 1, 1],
            snr_db: vec![0.0, 10.0, f32::NEG_INFINITY],
            config_hash: *b"abcdefgh",
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &tiny()).unwrap();
        assert_eq!(buf.len(), 32 + 3 * (16 + 2 + 4));
        assert_eq!(read_dataset(&buf[..]).unwrap(), tiny());
    }

    #[test]
    fn error_kinds() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &tiny()).unwrap();
        assert!(matches!(read_dataset(&buf[..40]), Err(Error::Truncated { .. })));
        assert!(matches!(read_dataset(&buf[..10]), Err(Error::Truncated { .. })));
        let mut m = buf.clone();
        m[1] = b'X';
        assert!(matches!(read_dataset(&m[..]), Err(Error::Format(_))));
        let mut v = buf.clone();
        v[4] = 2;
        assert!(matches!(read_dataset(&v[..]), Err(Error::VersionMismatch { found: 2, .. })));
        let mut h = buf.clone();
        h[21] = 3;
        assert!(matches!(read_dataset(&h[..]), Err(Error::CorruptHeader(_))));
    }
}
