use num_complex::Complex64;

use crate::error::{Error, Result};

/// `U x R` mother constellation shared by every SCMA device.
#[derive(Debug, Clone, PartialEq)]
pub struct MotherConstellation {
    dims: usize,
    points: usize,
    /// Row-major `dims x points`.
    data: Vec<Complex64>,
}

impl MotherConstellation {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn get(&self, dim: usize, point: usize) -> Complex64 {
        self.data[dim * self.points + point]
    }

    pub fn row(&self, dim: usize) -> &[Complex64] {
        &self.data[dim * self.points..(dim + 1) * self.points]
    }

    /// Average symbol energy of one dimension.
    pub fn row_energy(&self, dim: usize) -> f64 {
        self.row(dim).iter().map(|z| z.norm_sqr()).sum::<f64>() / self.points as f64
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Pulse-amplitude level for a Gray label on an `m`-level axis.
fn pam_level(label: usize, m: usize) -> f64 {
    2.0 * gray_to_binary(label) as f64 - (m as f64 - 1.0)
}

/// Build the mother constellation.
///
/// The first dimension is a rectangular `Z^2` lattice with `R` points and
/// per-axis Gray labels (QPSK for `R = 4`), scaled to unit average energy.
/// Dimension `u` is the first dimension rotated by `u * pi / (R * U)`, and
/// every second dimension lists its points in reverse order.
pub fn build_mother_constellation(r: usize, u: usize) -> Result<MotherConstellation> {
    let (mi, mq): (usize, usize) = match r {
        4 => (2, 2),
        8 => (4, 2),
        16 => (4, 4),
        _ => {
            return Err(Error::invalid(format!(
                "unsupported constellation size {r}: expected 4, 8 or 16"
            )))
        }
    };
    if u < 2 {
        return Err(Error::invalid(format!("constellation needs at least 2 dimensions, got {u}")));
    }
    let q_bits = mq.trailing_zeros();
    let base: Vec<Complex64> = (0..r)
        .map(|label| {
            let li = label >> q_bits;
            let lq = label & (mq - 1);
            Complex64::new(pam_level(li, mi), pam_level(lq, mq))
        })
        .collect();
    let energy = base.iter().map(|z| z.norm_sqr()).sum::<f64>() / r as f64;
    let scale = energy.sqrt().recip();

    let mut data = Vec::with_capacity(u * r);
    for dim in 0..u {
        let rot = Complex64::from_polar(1.0, dim as f64 * std::f64::consts::PI / (r * u) as f64);
        for p in 0..r {
            let src = if dim % 2 == 1 { r - 1 - p } else { p };
            data.push(base[src] * scale * rot);
        }
    }
    Ok(MotherConstellation {
        dims: u,
        points: r,
        data,
    })
}
