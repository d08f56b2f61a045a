//! Greedy sparse-recovery detectors: stagewise OMP and least-squares block
//! OMP, plus an exhaustive-search oracle for small instances.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{inner, lstsq, norm, CMatrix};
use crate::scalar::Scalar;

/// Output of a recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryResult<F> {
    /// Selected column indices, ascending.
    pub support: Vec<usize>,
    /// Least-squares coefficients aligned with `support`.
    pub coefficients: Vec<Complex<F>>,
    pub residual_norm: F,
    pub iterations: usize,
    /// Residual norm before the first iteration and after each one.
    pub residual_trace: Vec<F>,
    /// Some least-squares fit needed the pseudo-inverse.
    pub rank_deficient: bool,
}

impl<F: Scalar> RecoveryResult<F> {
    fn empty(y_norm: F) -> Self {
        Self {
            support: Vec::new(),
            coefficients: Vec::new(),
            residual_norm: y_norm,
            iterations: 0,
            residual_trace: vec![y_norm],
            rank_deficient: false,
        }
    }

    /// Activity decisions as a 0/1 vector of length `n`.
    pub fn indicator(&self, n: usize) -> Vec<u8> {
        let mut v = vec![0u8; n];
        for &i in &self.support {
            v[i] = 1;
        }
        v
    }
}

/// Stagewise OMP parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StompConfig {
    pub stages: usize,
    /// Threshold multiplier `t` on the residual noise estimate.
    pub threshold: f64,
    /// When set, the final support is cut to this many largest coefficients.
    pub n_known: Option<usize>,
}

impl Default for StompConfig {
    fn default() -> Self {
        Self {
            stages: 10,
            threshold: 2.0,
            n_known: None,
        }
    }
}

fn check_columns<F: Scalar>(phi: &CMatrix<F>, y: &[Complex<F>]) -> Result<Vec<F>> {
    if y.len() != phi.rows() {
        return Err(Error::mismatch("observation length", phi.rows(), y.len()));
    }
    let norms = phi.column_norms();
    if let Some(i) = norms.iter().position(|&v| v == F::zero()) {
        return Err(Error::invalid(format!("sensing column {i} is zero")));
    }
    Ok(norms)
}

fn tolerance<F: Scalar>(y_norm: F) -> F {
    F::epsilon().sqrt() * y_norm
}

struct Fit<F> {
    coefficients: Vec<Complex<F>>,
    residual_norm: F,
    residual: Vec<Complex<F>>,
    rank_deficient: bool,
}

fn fit<F: Scalar>(phi: &CMatrix<F>, y: &[Complex<F>], support: &[usize]) -> Result<Fit<F>> {
    let ls = lstsq(&phi.select_columns(support), y)?;
    Ok(Fit {
        residual_norm: norm(&ls.residual),
        coefficients: ls.coefficients,
        residual: ls.residual,
        rank_deficient: ls.rank_deficient,
    })
}

/// Stagewise orthogonal matching pursuit.
///
/// Each stage admits every column whose normalised matched-filter output
/// `|phi_i^H r| / ||phi_i||` exceeds `t * ||r|| / sqrt(K)`, then refits by
/// least squares. With a known sparsity, a stage that admits nothing while
/// the support is still short admits the strongest column instead, and the
/// final support is cut to the `n` largest coefficients and refitted.
pub fn stomp<F: Scalar>(y: &[Complex<F>], phi: &CMatrix<F>, cfg: &StompConfig) -> Result<RecoveryResult<F>> {
    if cfg.stages == 0 {
        return Err(Error::invalid("stOMP needs at least one stage"));
    }
    let col_norms = check_columns(phi, y)?;
    let y_norm = norm(y);
    let tol = tolerance(y_norm);
    if y_norm <= F::min_positive_value() {
        return Ok(RecoveryResult::empty(y_norm));
    }
    let k = F::lit(phi.rows() as f64);
    let t = F::lit(cfg.threshold);
    let mut in_support = vec![false; phi.cols()];
    let mut support: Vec<usize> = Vec::new();
    let mut r = y.to_vec();
    let mut r_norm = y_norm;
    let mut trace = vec![y_norm];
    let mut coefficients = Vec::new();
    let mut rank_deficient = false;
    let mut iterations = 0;

    for _ in 0..cfg.stages {
        if r_norm <= tol {
            break;
        }
        let sigma = r_norm / k.sqrt();
        let stats: Vec<(usize, F)> = (0..phi.cols())
            .filter(|&i| !in_support[i])
            .map(|i| (i, inner(phi.column(i), &r).norm() / col_norms[i]))
            .collect();
        let mut admitted: Vec<usize> = stats.iter().filter(|(_, s)| *s > t * sigma).map(|&(i, _)| i).collect();
        if admitted.is_empty() {
            let short = cfg.n_known.is_some_and(|n| support.len() < n);
            match stats.iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)) {
                Some(&(i, _)) if short => admitted.push(i),
                _ => break,
            }
        }
        for i in admitted {
            in_support[i] = true;
            support.push(i);
        }
        support.sort_unstable();
        let f = fit(phi, y, &support)?;
        rank_deficient |= f.rank_deficient;
        coefficients = f.coefficients;
        r = f.residual;
        // least squares over a superset cannot do worse; guard rounding
        r_norm = f.residual_norm.min(r_norm);
        trace.push(r_norm);
        iterations += 1;
    }

    if let Some(n) = cfg.n_known {
        if support.len() > n {
            let mut order: Vec<usize> = (0..support.len()).collect();
            order.sort_by(|&a, &b| {
                coefficients[b]
                    .norm()
                    .partial_cmp(&coefficients[a].norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut kept: Vec<usize> = order[..n].iter().map(|&j| support[j]).collect();
            kept.sort_unstable();
            let f = fit(phi, y, &kept)?;
            rank_deficient |= f.rank_deficient;
            support = kept;
            coefficients = f.coefficients;
            r_norm = f.residual_norm;
        }
    }
    Ok(RecoveryResult {
        support,
        coefficients,
        residual_norm: r_norm,
        iterations,
        residual_trace: trace,
        rank_deficient,
    })
}

/// Least-squares block OMP selecting exactly `n` blocks of `block_size`
/// consecutive columns, each step taking the block whose addition leaves
/// the smallest least-squares residual.
pub fn ls_bomp<F: Scalar>(
    y: &[Complex<F>],
    phi: &CMatrix<F>,
    n: usize,
    block_size: usize,
) -> Result<RecoveryResult<F>> {
    check_columns(phi, y)?;
    if block_size == 0 || phi.cols() % block_size != 0 {
        return Err(Error::invalid(format!(
            "block size {block_size} does not divide {} columns",
            phi.cols()
        )));
    }
    let blocks = phi.cols() / block_size;
    if n == 0 || n > blocks {
        return Err(Error::invalid(format!("cannot select {n} of {blocks} blocks")));
    }
    let y_norm = norm(y);
    let mut chosen = vec![false; blocks];
    let mut support: Vec<usize> = Vec::new();
    let mut trace = vec![y_norm];
    let mut r_norm = y_norm;
    let mut best_fit: Option<Fit<F>> = None;
    let mut rank_deficient = false;
    for _ in 0..n {
        let mut best: Option<(usize, Fit<F>)> = None;
        for b in (0..blocks).filter(|&b| !chosen[b]) {
            let mut trial = support.clone();
            trial.extend(b * block_size..(b + 1) * block_size);
            trial.sort_unstable();
            let f = fit(phi, y, &trial)?;
            if best.as_ref().is_none_or(|(_, g)| f.residual_norm < g.residual_norm) {
                best = Some((b, f));
            }
        }
        let (b, f) = best.expect("an unselected block remains");
        chosen[b] = true;
        support.extend(b * block_size..(b + 1) * block_size);
        support.sort_unstable();
        rank_deficient |= f.rank_deficient;
        r_norm = f.residual_norm.min(r_norm);
        trace.push(r_norm);
        best_fit = Some(f);
    }
    let f = best_fit.expect("n >= 1");
    Ok(RecoveryResult {
        support,
        coefficients: f.coefficients,
        residual_norm: r_norm,
        iterations: n,
        residual_trace: trace,
        rank_deficient,
    })
}

/// Support of size `n` with the smallest least-squares residual, by
/// enumerating every subset. Ties keep the lexicographically first subset.
pub fn exhaustive_search<F: Scalar>(y: &[Complex<F>], phi: &CMatrix<F>, n: usize) -> Result<Vec<usize>> {
    let cols = phi.cols();
    if n == 0 || n > cols {
        return Err(Error::invalid(format!("cannot choose {n} of {cols} columns")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut best: Option<(F, Vec<usize>)> = None;
    loop {
        let f = fit(phi, y, &idx)?;
        if best.as_ref().is_none_or(|(r, _)| f.residual_norm < *r) {
            best = Some((f.residual_norm, idx.clone()));
        }
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(best.expect("at least one subset").1);
            }
            i -= 1;
            if idx[i] < cols - n + i {
                idx[i] += 1;
                for j in (i + 1)..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::cn01;
    use crate::rng::seeded;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn identity(k: usize) -> CMatrix<f64> {
        let cols: Vec<Vec<Complex<f64>>> = (0..k)
            .map(|i| (0..k).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        CMatrix::from_columns(k, &cols).unwrap()
    }

    fn random_phi(k: usize, n: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = seeded(seed);
        loop {
            let data = (0..k * n).map(|_| cn01(&mut rng)).collect();
            let m = CMatrix::from_col_major(k, n, data).unwrap();
            if m.mutual_coherence() < 0.5 {
                return m;
            }
        }
    }

    #[test]
    fn orthonormal_single_column() {
        let phi = identity(5);
        let y = phi.column(2).to_vec();
        let r = stomp(&y, &phi, &StompConfig::default()).unwrap();
        assert_eq!(r.support, vec![2]);
        assert!(r.residual_norm < 1e-12);
        let b = ls_bomp(&y, &phi, 1, 1).unwrap();
        assert_eq!(b.support, vec![2]);
        assert!(b.residual_norm < 1e-12);
    }

    #[test]
    fn zero_observation_gives_empty_support() {
        let phi = identity(4);
        let r = stomp(&[c(0.0); 4], &phi, &StompConfig::default()).unwrap();
        assert!(r.support.is_empty());
    }

    #[test]
    fn two_sparse_noiseless_matches_exhaustive() {
        let phi = random_phi(8, 12, 3);
        let y: Vec<Complex<f64>> = (0..8).map(|r| phi.get(r, 1) * 2.0 + phi.get(r, 3)).collect();
        let oracle = exhaustive_search(&y, &phi, 2).unwrap();
        assert_eq!(oracle, vec![1, 3]);
        let cfg = StompConfig {
            n_known: Some(2),
            ..Default::default()
        };
        assert_eq!(stomp(&y, &phi, &cfg).unwrap().support, oracle);
        assert_eq!(ls_bomp(&y, &phi, 2, 1).unwrap().support, oracle);
    }

    #[test]
    fn ls_bomp_matches_exhaustive_small() {
        let phi = random_phi(6, 9, 8);
        let y: Vec<Complex<f64>> = (0..6).map(|r| phi.get(r, 4) * Complex::new(0.3, 1.0) + phi.get(r, 7) * -1.5).collect();
        let oracle = exhaustive_search(&y, &phi, 2).unwrap();
        assert_eq!(ls_bomp(&y, &phi, 2, 1).unwrap().support, oracle);
    }

    #[test]
    fn full_support_leaves_no_residual() {
        let phi = random_phi(4, 4, 2);
        let y = vec![c(1.0), c(-2.0), Complex::new(0.5, 0.5), c(3.0)];
        let r = ls_bomp(&y, &phi, 4, 1).unwrap();
        assert_eq!(r.support, vec![0, 1, 2, 3]);
        assert!(r.residual_norm < 1e-10);
    }

    #[test]
    fn residual_traces_never_increase() {
        let phi = random_phi(8, 12, 5);
        let mut rng = seeded(6);
        for _ in 0..50 {
            let y: Vec<Complex<f64>> = (0..8).map(|_| cn01(&mut rng)).collect();
            for tr in [
                stomp(&y, &phi, &StompConfig::default()).unwrap().residual_trace,
                ls_bomp(&y, &phi, 4, 1).unwrap().residual_trace,
            ] {
                assert!(tr.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn blocks_of_two() {
        let phi = random_phi(8, 12, 9);
        let y: Vec<Complex<f64>> = (0..8).map(|r| phi.get(r, 4) + phi.get(r, 5)).collect();
        let b = ls_bomp(&y, &phi, 1, 2).unwrap();
        assert_eq!(b.support, vec![4, 5]);
        assert!(ls_bomp(&y, &phi, 1, 5).is_err());
    }

    #[test]
    fn zero_column_rejected() {
        let mut phi = identity(3);
        phi.column_mut(1).iter_mut().for_each(|z| *z = c(0.0));
        assert!(stomp(&[c(1.0); 3], &phi, &StompConfig::default()).is_err());
    }
}
