use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mc::McEstimate;
use crate::rng::substream;

/// Which second Bonferroni sum to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum S2Form {
    /// `3 C(N,4) q4^α + 3 C(N,3) q3^α`, summing disjoint and overlapping
    /// pairs of pairs.
    #[default]
    Expanded,
    /// `3 C(N,3) [q4^α / (4(N-1)) + q3^α]`, the compact grouping.
    Compact,
}

/// Upper bound on the probability that `alpha` uniformly drawn `n`-subsets
/// of `N` devices jointly contain every unordered device pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageBound {
    pub devices: u64,
    pub active: u64,
    pub alpha: u64,
    pub s1: f64,
    pub s2: f64,
    pub delta: u64,
    /// Unclamped `1 - 2((δ-1)S1 - S2) / (δ(δ-1))`.
    pub raw: f64,
    pub bound: f64,
    pub form: S2Form,
}

/// Exact rational evaluation of [`CoverageBound`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactCoverageBound {
    pub s1: BigRational,
    pub s2: BigRational,
    pub delta: u64,
    pub raw: BigRational,
}

impl ExactCoverageBound {
    pub fn bound(&self) -> f64 {
        self.raw.to_f64().unwrap_or(f64::NAN).clamp(0.0, 1.0)
    }
}

fn check(devices: u64, active: u64, alpha: u64) -> Result<()> {
    if active < 2 || active >= devices {
        return Err(Error::invalid(format!(
            "coverage bound needs 2 <= n < N, got n = {active}, N = {devices}"
        )));
    }
    if alpha == 0 {
        return Err(Error::invalid("alpha must be at least 1"));
    }
    Ok(())
}

fn ln_binom(m: i64, k: i64) -> f64 {
    if k < 0 || m < 0 || k > m {
        return f64::NEG_INFINITY;
    }
    let k = k.min(m - k);
    (1..=k).map(|i| (((m - k + i) as f64) / i as f64).ln()).sum()
}

/// `Σ coef_i C(m, k - i) / C(N, n)` evaluated in the log domain.
fn ratio(terms: &[(f64, i64, i64)], devices: i64, active: i64) -> f64 {
    let den = ln_binom(devices, active);
    terms
        .iter()
        .map(|&(c, m, k)| c * (ln_binom(m, k) - den).exp())
        .sum()
}

/// Per-labelset miss probabilities `(p1, q4, q3)`: one pair, two disjoint
/// pairs, two pairs sharing a device.
fn miss_probabilities(devices: i64, active: i64) -> (f64, f64, f64) {
    let (nn, n) = (devices, active);
    let p1 = ratio(&[(1.0, nn - 2, n), (2.0, nn - 2, n - 1)], nn, n);
    let q4 = ratio(&[(1.0, nn - 4, n), (4.0, nn - 4, n - 1), (4.0, nn - 4, n - 2)], nn, n);
    let q3 = ratio(&[(1.0, nn - 3, n), (3.0, nn - 3, n - 1), (1.0, nn - 3, n - 2)], nn, n);
    (p1, q4, q3)
}

fn ln_sum(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// [`coverage_bound_with`] using the default second sum.
pub fn coverage_bound(devices: u64, active: u64, alpha: u64) -> Result<CoverageBound> {
    coverage_bound_with(devices, active, alpha, S2Form::default())
}

/// Log-domain evaluation, safe for large `N` and `alpha`.
pub fn coverage_bound_with(devices: u64, active: u64, alpha: u64, form: S2Form) -> Result<CoverageBound> {
    check(devices, active, alpha)?;
    let (nn, n) = (devices as i64, active as i64);
    let a = alpha as f64;
    let (p1, q4, q3) = miss_probabilities(nn, n);

    let ln_s1 = ln_binom(nn, 2) + a * p1.ln();
    let ln_s2 = match form {
        S2Form::Expanded => ln_sum(
            (3.0f64).ln() + ln_binom(nn, 4) + a * q4.ln(),
            (3.0f64).ln() + ln_binom(nn, 3) + a * q3.ln(),
        ),
        S2Form::Compact => {
            (3.0f64).ln()
                + ln_binom(nn, 3)
                + ln_sum(a * q4.ln() - (4.0 * (nn - 1) as f64).ln(), a * q3.ln())
        }
    };
    let (s1, s2) = (ln_s1.exp(), ln_s2.exp());
    if s1 == 0.0 {
        return Ok(CoverageBound {
            devices,
            active,
            alpha,
            s1,
            s2,
            delta: 2,
            raw: 1.0,
            bound: 1.0,
            form,
        });
    }
    let r = 2.0 * (ln_s2 - ln_s1).exp();
    // ratios that are integers in exact arithmetic land within rounding of one
    let fl = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) { r.round() } else { r.floor() };
    let delta = 2 + if r.is_finite() && r < 1e18 { fl as u64 } else { u64::MAX / 4 };
    let d = delta as f64;
    let raw = 1.0 - 2.0 * ((d - 1.0) * s1 - s2) / (d * (d - 1.0));
    Ok(CoverageBound {
        devices,
        active,
        alpha,
        s1,
        s2,
        delta,
        raw,
        bound: raw.clamp(0.0, 1.0),
        form,
    })
}

fn binom_exact(m: i64, k: i64) -> BigInt {
    if k < 0 || m < 0 || k > m {
        return BigInt::zero();
    }
    let k = k.min(m - k);
    let mut acc = BigInt::one();
    for i in 1..=k {
        acc = acc * BigInt::from(m - k + i) / BigInt::from(i);
    }
    acc
}

/// Exact rational evaluation; cost grows with `alpha` times the bit length
/// of `C(N, n)`.
pub fn coverage_bound_exact(devices: u64, active: u64, alpha: u64, form: S2Form) -> Result<ExactCoverageBound> {
    check(devices, active, alpha)?;
    let alpha = u32::try_from(alpha).map_err(|_| Error::invalid("alpha too large for exact evaluation"))?;
    let (nn, n) = (devices as i64, active as i64);
    let b = |m, k| binom_exact(m, k);
    let total = b(nn, n);
    let frac = |num: BigInt| BigRational::new(num, total.clone());
    let p1 = frac(b(nn - 2, n) + 2 * b(nn - 2, n - 1));
    let q4 = frac(b(nn - 4, n) + 4 * b(nn - 4, n - 1) + 4 * b(nn - 4, n - 2));
    let q3 = frac(b(nn - 3, n) + 3 * b(nn - 3, n - 1) + b(nn - 3, n - 2));
    let int = |x: BigInt| BigRational::from_integer(x);

    let s1 = int(b(nn, 2)) * num_traits::pow(p1, alpha as usize);
    let q4a = num_traits::pow(q4, alpha as usize);
    let q3a = num_traits::pow(q3, alpha as usize);
    let s2 = match form {
        S2Form::Expanded => int(3 * b(nn, 4)) * q4a + int(3 * b(nn, 3)) * q3a,
        S2Form::Compact => {
            int(3 * b(nn, 3)) * (q4a / int(BigInt::from(4 * (nn - 1))) + q3a)
        }
    };
    if s1.is_zero() {
        return Ok(ExactCoverageBound { s1, s2, delta: 2, raw: BigRational::one() });
    }
    let two = int(BigInt::from(2));
    let fl = (&two * &s2 / &s1).floor().to_integer();
    let delta = 2 + fl.to_u64().ok_or_else(|| Error::invalid("delta overflows u64"))?;
    let d = int(BigInt::from(delta));
    let one = BigRational::one();
    let raw = &one - &two * ((&d - &one) * &s1 - &s2) / (&d * (&d - &one));
    Ok(ExactCoverageBound { s1, s2, delta, raw })
}

const MC_BLOCK: u64 = 1024;
const MAX_DEVICES: u64 = 128;

/// Monte-Carlo probability that `alpha` uniform `n`-subsets cover every pair.
pub fn coverage_mc(devices: u64, active: u64, alpha: u64, trials: u64, seed: u64) -> Result<McEstimate> {
    Ok(*coverage_mc_curve(devices, active, alpha, trials, seed)?
        .last()
        .expect("alpha >= 1"))
}

/// Coverage estimates for every `α = 1..=alpha_max` from one set of paired
/// trials: each trial keeps drawing subsets and records the first `α` at
/// which all pairs are covered, so the curve is monotone by construction.
pub fn coverage_mc_curve(
    devices: u64,
    active: u64,
    alpha_max: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if trials < 10_000 {
        return Err(Error::invalid("coverage Monte-Carlo needs at least 10^4 trials"));
    }
    if devices == 0 || devices > MAX_DEVICES || active == 0 || active > devices {
        return Err(Error::invalid(format!(
            "need 1 <= n <= N <= {MAX_DEVICES}, got n = {active}, N = {devices}"
        )));
    }
    if alpha_max == 0 {
        return Err(Error::invalid("alpha must be at least 1"));
    }
    let (nn, n) = (devices as usize, active as usize);
    let pairs = nn * (nn - 1) / 2;
    let blocks = trials.div_ceil(MC_BLOCK);
    let first_hits = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = substream(seed, blk);
            let mut hits = vec![0u64; alpha_max as usize + 1];
            let count = MC_BLOCK.min(trials - blk * MC_BLOCK);
            let mut mask = vec![0u128; nn];
            for _ in 0..count {
                mask.iter_mut().for_each(|m| *m = 0);
                let mut uncovered = pairs;
                let mut hit = 0;
                if uncovered == 0 {
                    hit = 1;
                }
                let mut draw = 0;
                while hit == 0 && draw < alpha_max {
                    draw += 1;
                    let s = index::sample(&mut rng, nn, n).into_vec();
                    for (i, &a) in s.iter().enumerate() {
                        for &b in &s[i + 1..] {
                            if mask[a] & (1u128 << b) == 0 {
                                mask[a] |= 1u128 << b;
                                mask[b] |= 1u128 << a;
                                uncovered -= 1;
                            }
                        }
                    }
                    if uncovered == 0 {
                        hit = draw as usize;
                    }
                }
                hits[hit] += 1;
            }
            hits
        })
        .reduce(
            || vec![0u64; alpha_max as usize + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut acc = 0;
    Ok(first_hits[1..]
        .iter()
        .map(|&h| {
            acc += h;
            McEstimate::new(acc, trials)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subsets(nn: usize, n: usize) -> Vec<u32> {
        (0u32..1 << nn).filter(|m| m.count_ones() as usize == n).collect()
    }

    fn exact_f64(x: &BigRational) -> f64 {
        x.to_f64().unwrap()
    }

    #[test]
    fn four_choose_two_single_labelset() {
        let e = coverage_bound_exact(4, 2, 1, S2Form::Expanded).unwrap();
        assert_eq!(e.s1, BigRational::from_integer(5.into()));
        let f = coverage_bound(4, 2, 1).unwrap();
        assert!((f.s1 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bonferroni_sums_match_enumeration() {
        for (nn, n) in [(5usize, 2usize), (6, 3), (7, 2), (7, 4)] {
            let sets = subsets(nn, n);
            let miss = |s: u32, a: usize, b: usize| s & (1 << a) == 0 || s & (1 << b) == 0;
            let pairs: Vec<(usize, usize)> =
                (0..nn).flat_map(|a| (a + 1..nn).map(move |b| (a, b))).collect();
            let tot = sets.len() as f64;
            for alpha in [1u32, 3] {
                let s1: f64 = pairs
                    .iter()
                    .map(|&(a, b)| (sets.iter().filter(|&&s| miss(s, a, b)).count() as f64 / tot).powi(alpha as i32))
                    .sum();
                let mut s2 = 0.0;
                for (i, &(a, b)) in pairs.iter().enumerate() {
                    for &(c, d) in &pairs[i + 1..] {
                        let q = sets.iter().filter(|&&s| miss(s, a, b) && miss(s, c, d)).count() as f64 / tot;
                        s2 += q.powi(alpha as i32);
                    }
                }
                let e = coverage_bound_exact(nn as u64, n as u64, alpha as u64, S2Form::Expanded).unwrap();
                assert!((exact_f64(&e.s1) - s1).abs() < 1e-9 * s1.max(1.0));
                assert!((exact_f64(&e.s2) - s2).abs() < 1e-9 * s2.max(1.0), "N={nn} n={n}");
            }
        }
    }

    #[test]
    fn log_domain_matches_exact() {
        for form in [S2Form::Expanded, S2Form::Compact] {
            for nn in 5..=12u64 {
                for n in 2..=4u64.min(nn - 1) {
                    for alpha in [1, 2, 5, 10, 30, 50] {
                        let f = coverage_bound_with(nn, n, alpha, form).unwrap();
                        let e = coverage_bound_exact(nn, n, alpha, form).unwrap();
                        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-300);
                        assert!(rel(f.s1, exact_f64(&e.s1)));
                        assert!(rel(f.s2, exact_f64(&e.s2)));
                        assert_eq!(f.delta, e.delta, "N={nn} n={n} a={alpha}");
                        assert!((f.raw - exact_f64(&e.raw)).abs() < 1e-9);
                        assert!(f.delta >= 2 && f.s1 >= 0.0 && f.s2 >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn large_alpha_limit() {
        let b = coverage_bound(21, 2, 100_000).unwrap();
        assert_eq!(b.bound, 1.0);
        let b = coverage_bound(2000, 40, 500).unwrap();
        assert!(b.raw.is_finite() && (0.0..=1.0).contains(&b.bound));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(coverage_bound(5, 1, 3).is_err());
        assert!(coverage_bound(5, 5, 3).is_err());
        assert!(coverage_bound(5, 2, 0).is_err());
        assert!(coverage_mc(5, 2, 3, 100, 0).is_err());
    }

    #[test]
    fn mc_trivial_cases() {
        assert_eq!(coverage_mc(6, 3, 1, 10_000, 1).unwrap().estimate(), 0.0);
        assert_eq!(coverage_mc(6, 6, 4, 10_000, 1).unwrap().estimate(), 1.0);
    }

    #[test]
    fn mc_is_reproducible() {
        let a = coverage_mc_curve(7, 3, 10, 10_000, 5).unwrap();
        let b = coverage_mc_curve(7, 3, 10, 10_000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_dominated_by_bound() {
        let curve = coverage_mc_curve(6, 2, 30, 10_000, 77).unwrap();
        for (i, est) in curve.iter().enumerate() {
            let bound = coverage_bound(6, 2, i as u64 + 1).unwrap().bound;
            assert!(est.estimate() <= bound + 3.0 * est.adjusted_stderr(), "alpha {}", i + 1);
        }
        assert!(curve.windows(2).all(|w| w[0].estimate() <= w[1].estimate()));
    }
}
