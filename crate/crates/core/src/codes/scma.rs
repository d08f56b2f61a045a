use num_complex::Complex64;

use super::constellation::MotherConstellation;
use super::factor_graph::RotatedFactorGraph;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Per-device SCMA codebooks `S_i = V_i * Delta_i * M_c`.
#[derive(Debug, Clone)]
pub struct ScmaCodebook {
    rotated: RotatedFactorGraph,
    mother: MotherConstellation,
    /// One `K x R` matrix per device.
    codebooks: Vec<CMatrix<f64>>,
}

/// Assemble every device's codebook from the rotated factor graph and the
/// mother constellation.
pub fn build_scma_codebook(
    rotated: &RotatedFactorGraph,
    mother: &MotherConstellation,
) -> Result<ScmaCodebook> {
    let g = rotated.graph();
    let u = g
        .column_degree()
        .ok_or_else(|| Error::Infeasible("factor graph columns have unequal weight".into()))?;
    if u != mother.dims() {
        return Err(Error::mismatch("mother constellation dimensions", u, mother.dims()));
    }
    let (k, r) = (g.resources(), mother.points());
    let codebooks = (0..g.devices())
        .map(|dev| {
            let mut s = CMatrix::zeros(k, r);
            let delta = rotated.column_rotations(dev);
            for (d, &row) in g.support(dev).iter().enumerate() {
                for p in 0..r {
                    s.set(row, p, delta[d] * mother.get(d, p));
                }
            }
            s
        })
        .collect();
    Ok(ScmaCodebook {
        rotated: rotated.clone(),
        mother: mother.clone(),
        codebooks,
    })
}

impl ScmaCodebook {
    pub fn resources(&self) -> usize {
        self.rotated.graph().resources()
    }

    pub fn devices(&self) -> usize {
        self.codebooks.len()
    }

    pub fn points(&self) -> usize {
        self.mother.points()
    }

    pub fn dims(&self) -> usize {
        self.mother.dims()
    }

    pub fn rotated_graph(&self) -> &RotatedFactorGraph {
        &self.rotated
    }

    pub fn mother(&self) -> &MotherConstellation {
        &self.mother
    }

    /// `K x R` codebook of device `i`.
    pub fn codebook(&self, i: usize) -> &CMatrix<f64> {
        &self.codebooks[i]
    }

    /// Binary `K x U` mapping matrix `V_i`, row-major.
    pub fn mapping_matrix(&self, i: usize) -> Vec<u8> {
        let u = self.dims();
        let mut v = vec![0u8; self.resources() * u];
        for (d, row) in self.rotated.graph().support(i).into_iter().enumerate() {
            v[row * u + d] = 1;
        }
        v
    }

    /// Diagonal of the constellation operator `Delta_i`.
    pub fn operator(&self, i: usize) -> Vec<Complex64> {
        self.rotated.column_rotations(i)
    }

    /// Largest entrywise gap between stored codebooks and `V_i Delta_i M_c`
    /// recomputed as a full matrix product.
    pub fn identity_error(&self) -> f64 {
        let (k, u, r) = (self.resources(), self.dims(), self.points());
        let zero = Complex64::new(0.0, 0.0);
        let mut worst: f64 = 0.0;
        for i in 0..self.devices() {
            let v = self.mapping_matrix(i);
            let delta = self.operator(i);
            for row in 0..k {
                for p in 0..r {
                    let mut acc = zero;
                    for d in 0..u {
                        if v[row * u + d] == 1 {
                            acc += delta[d] * self.mother.get(d, p);
                        }
                    }
                    worst = worst.max((acc - self.codebooks[i].get(row, p)).norm());
                }
            }
        }
        worst
    }

    /// Pilot signatures: codeword `symbol` of every device as a `K x N` matrix.
    pub fn pilot_matrix(&self, symbol: usize) -> CMatrix<f64> {
        let cols: Vec<Vec<Complex64>> = self
            .codebooks
            .iter()
            .map(|s| s.column(symbol % self.points()).to_vec())
            .collect();
        CMatrix::from_columns(self.resources(), &cols).expect("codebook shapes are consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::super::{assign_phase_rotations, build_factor_graph, build_mother_constellation};
    use super::*;

    fn small() -> ScmaCodebook {
        let g = build_factor_graph(6, 8, 3).unwrap();
        let f = assign_phase_rotations(&g, 4).unwrap();
        let m = build_mother_constellation(4, 3).unwrap();
        build_scma_codebook(&f, &m).unwrap()
    }

    #[test]
    fn codebook_identity_is_exact() {
        let cb = small();
        assert_eq!(cb.identity_error(), 0.0);
    }

    #[test]
    fn nonzero_rows_follow_factor_graph() {
        let cb = small();
        for i in 0..cb.devices() {
            let s = cb.codebook(i);
            let rows: Vec<usize> = (0..6)
                .filter(|&r| (0..4).any(|p| s.get(r, p).norm() > 0.0))
                .collect();
            assert_eq!(rows, cb.rotated_graph().graph().support(i));
            assert!(cb.operator(i).iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn identity_rotations_copy_mother_rows() {
        let g = build_factor_graph(6, 8, 3).unwrap();
        let f = assign_phase_rotations(&g, 4).unwrap();
        let m = build_mother_constellation(4, 3).unwrap();
        let cb = build_scma_codebook(&f, &m).unwrap();
        // device 0 is filled first and receives rotation 1 in its first row
        let sup = g.support(0);
        assert_eq!(f.symbol(sup[0], 0), 1);
        for p in 0..4 {
            assert_eq!(cb.codebook(0).get(sup[0], p), m.get(0, p));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = build_factor_graph(6, 8, 3).unwrap();
        let f = assign_phase_rotations(&g, 4).unwrap();
        let m = build_mother_constellation(4, 2).unwrap();
        assert!(matches!(
            build_scma_codebook(&f, &m),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
