//! `NMCS` code-set container and CSV dump.
//!
//! Layout (little-endian): magic `NMCS`, `u32` version, `u32` K, N, R, U,
//! then `f64` real/imaginary pairs. SCMA sets store every device's `K x R`
//! codebook in turn, each column-major. MUSA sets store the unit-norm
//! `K x N` sequence matrix column-major with `R = 1`, `U = 0`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::CodeSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const MAGIC: &[u8; 4] = b"NMCS";
const VERSION: u32 = 1;
const HEADER: usize = 24;

/// Decoded container contents.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSetFile {
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub u: usize,
    pub data: Vec<Complex64>,
}

impl CodeSetFile {
    pub fn from_code_set(set: &CodeSet) -> Self {
        match set {
            CodeSet::Scma(cb) => {
                let mut data = Vec::with_capacity(cb.resources() * cb.points() * cb.devices());
                for i in 0..cb.devices() {
                    data.extend_from_slice(cb.codebook(i).as_col_major());
                }
                Self {
                    k: cb.resources(),
                    n: cb.devices(),
                    r: cb.points(),
                    u: cb.dims(),
                    data,
                }
            }
            CodeSet::Musa(m) => Self {
                k: m.code_length(),
                n: m.len(),
                r: 1,
                u: 0,
                data: m.columns().as_col_major().to_vec(),
            },
        }
    }

    pub fn is_musa(&self) -> bool {
        self.u == 0
    }

    /// `K x R` block of device `i` (`R = 1` for MUSA).
    pub fn device_block(&self, i: usize) -> &[Complex64] {
        let len = self.k * self.r;
        &self.data[i * len..(i + 1) * len]
    }

    /// Pilot signatures (`K x N`), as [`CodeSet::signatures`].
    pub fn signatures(&self, pilot_symbol: usize) -> CMatrix<f64> {
        let col = pilot_symbol % self.r;
        let cols: Vec<Vec<Complex64>> = (0..self.n)
            .map(|i| self.device_block(i)[col * self.k..(col + 1) * self.k].to_vec())
            .collect();
        CMatrix::from_columns(self.k, &cols).expect("consistent block shapes")
    }
}

pub fn write_code_set<W: Write>(mut w: W, set: &CodeSet) -> Result<()> {
    let f = CodeSetFile::from_code_set(set);
    w.write_all(MAGIC)?;
    for v in [VERSION, f.k as u32, f.n as u32, f.r as u32, f.u as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for z in &f.data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_code_set<R: Read>(mut r: R) -> Result<CodeSetFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::Format("not a code-set file (bad magic)".into()));
        }
        return Err(Error::Truncated {
            expected: HEADER,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("not a code-set file (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let (k, n, rr, u) = (word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
    if k == 0 || n == 0 || rr == 0 {
        return Err(Error::CorruptHeader(format!("zero dimension K={k} N={n} R={rr}")));
    }
    let count = k
        .checked_mul(n)
        .and_then(|x| x.checked_mul(rr))
        .ok_or_else(|| Error::CorruptHeader("dimensions overflow".into()))?;
    let expected = HEADER + count * 16;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[HEADER..expected]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(CodeSetFile { k, n, r: rr, u, data })
}

pub fn save_code_set(path: impl AsRef<Path>, set: &CodeSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_code_set(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn load_code_set(path: impl AsRef<Path>) -> Result<CodeSetFile> {
    read_code_set(BufReader::new(File::open(path)?))
}

/// One CSV row per matrix entry: `device,row,col,re,im`.
pub fn write_code_set_csv<W: Write>(mut w: W, set: &CodeSet) -> Result<()> {
    let f = CodeSetFile::from_code_set(set);
    writeln!(w, "device,row,col,re,im")?;
    for dev in 0..f.n {
        let block = f.device_block(dev);
        for col in 0..f.r {
            for row in 0..f.k {
                let z = block[col * f.k + row];
                writeln!(w, "{dev},{row},{col},{:e},{:e}", z.re, z.im)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn scma() -> CodeSet {
        let g = build_factor_graph(6, 8, 3).unwrap();
        let f = assign_phase_rotations(&g, 4).unwrap();
        let m = build_mother_constellation(4, 3).unwrap();
        CodeSet::Scma(build_scma_codebook(&f, &m).unwrap())
    }

    #[test]
    fn round_trip_scma_and_musa() {
        for set in [scma(), CodeSet::Musa(select_musa_sequences(5, 9, 0.7, 1).unwrap())] {
            let mut buf = Vec::new();
            write_code_set(&mut buf, &set).unwrap();
            let back = read_code_set(&buf[..]).unwrap();
            assert_eq!(back, CodeSetFile::from_code_set(&set));
            assert_eq!(back.signatures(0), set.signatures::<f64>(0));
        }
    }

    #[test]
    fn errors_are_distinct() {
        let mut buf = Vec::new();
        write_code_set(&mut buf, &scma()).unwrap();
        assert!(matches!(read_code_set(&buf[..buf.len() - 3]), Err(Error::Truncated { .. })));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_code_set(&bad[..]), Err(Error::Format(_))));
        let mut ver = buf.clone();
        ver[4] = 9;
        assert!(matches!(read_code_set(&ver[..]), Err(Error::VersionMismatch { found: 9, .. })));
    }

    #[test]
    fn csv_has_one_row_per_entry() {
        let mut out = Vec::new();
        write_code_set_csv(&mut out, &scma()).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 8 * 6 * 4);
        assert!(text.starts_with("device,row,col,re,im\n"));
    }
}
