use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::seeded;

/// Gaussian integer with components in `{-1, 0, 1}`.
pub type GaussianInt = Complex<i8>;

/// The nine spreading elements, ordered by real part then imaginary part.
pub const MUSA_ALPHABET: [GaussianInt; 9] = [
    Complex { re: -1, im: -1 },
    Complex { re: -1, im: 0 },
    Complex { re: -1, im: 1 },
    Complex { re: 0, im: -1 },
    Complex { re: 0, im: 0 },
    Complex { re: 0, im: 1 },
    Complex { re: 1, im: -1 },
    Complex { re: 1, im: 0 },
    Complex { re: 1, im: 1 },
];

/// Lazy lexicographic stream over all `9^K` sequences of length `K`; the
/// last position varies fastest.
#[derive(Debug, Clone)]
pub struct MusaSpace {
    digits: Vec<u8>,
    done: bool,
}

pub fn enumerate_musa_space(k: usize) -> MusaSpace {
    MusaSpace {
        digits: vec![0; k],
        done: k == 0,
    }
}

impl Iterator for MusaSpace {
    type Item = Vec<GaussianInt>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out = self.digits.iter().map(|&d| MUSA_ALPHABET[d as usize]).collect();
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.digits[i] < 8 {
                self.digits[i] += 1;
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

fn energy(s: &[GaussianInt]) -> i64 {
    s.iter().map(|z| (z.re as i64).pow(2) + (z.im as i64).pow(2)).sum()
}

fn inner_int(a: &[GaussianInt], b: &[GaussianInt]) -> (i64, i64) {
    a.iter().zip(b).fold((0, 0), |(re, im), (x, y)| {
        let (xr, xi, yr, yi) = (x.re as i64, x.im as i64, y.re as i64, y.im as i64);
        // conj(x) * y
        (re + xr * yr + xi * yi, im + xr * yi - xi * yr)
    })
}

/// Exact test of `|a^H b| <= rho * ||a|| * ||b||`.
///
/// Both sides are squared so the left side is an integer; the comparison
/// falls back to rational arithmetic when floating point cannot decide.
pub fn correlation_within(a: &[GaussianInt], b: &[GaussianInt], rho: f64) -> bool {
    let (re, im) = inner_int(a, b);
    let lhs = re * re + im * im;
    let nn = energy(a) * energy(b);
    let rhs = rho * rho * nn as f64;
    let l = lhs as f64;
    if l < rhs * (1.0 - 1e-9) {
        return true;
    }
    if l > rhs * (1.0 + 1e-9) {
        return false;
    }
    let r = BigRational::from_float(rho).expect("finite threshold");
    let bound = &r * &r * BigRational::from_integer(BigInt::from(nn));
    BigRational::from_integer(BigInt::from(lhs)) <= bound
}

fn normalise(s: &[GaussianInt]) -> Vec<Complex64> {
    let scale = (energy(s) as f64).sqrt().recip();
    s.iter()
        .map(|z| Complex64::new(z.re as f64 * scale, z.im as f64 * scale))
        .collect()
}

/// Selected spreading sequences, raw and unit-norm.
#[derive(Debug, Clone)]
pub struct MusaSequenceSet {
    rho: f64,
    raw: Vec<Vec<GaussianInt>>,
    columns: CMatrix<f64>,
}

impl MusaSequenceSet {
    /// Wrap explicit raw sequences (all of one length, none all-zero).
    pub fn from_raw(raw: Vec<Vec<GaussianInt>>, rho: f64) -> Result<Self> {
        let k = raw.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(Error::invalid("empty sequence set"));
        }
        for s in &raw {
            if s.len() != k {
                return Err(Error::mismatch("sequence length", k, s.len()));
            }
            if energy(s) == 0 {
                return Err(Error::invalid("all-zero spreading sequence"));
            }
            if s.iter().any(|z| z.re.abs() > 1 || z.im.abs() > 1) {
                return Err(Error::invalid("sequence entry outside the nine-element alphabet"));
            }
        }
        let cols: Vec<Vec<Complex64>> = raw.iter().map(|s| normalise(s)).collect();
        let columns = CMatrix::from_columns(k, &cols)?;
        Ok(Self { rho, raw, columns })
    }

    pub fn code_length(&self) -> usize {
        self.columns.rows()
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.rho
    }

    pub fn raw(&self) -> &[Vec<GaussianInt>] {
        &self.raw
    }

    /// Unit-norm sequences as the columns of a `K x N` matrix.
    pub fn columns(&self) -> &CMatrix<f64> {
        &self.columns
    }

    /// `N x N` row-major matrix of normalised correlation magnitudes.
    pub fn correlation_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (re, im) = inner_int(&self.raw[i], &self.raw[j]);
                let nn = (energy(&self.raw[i]) * energy(&self.raw[j])) as f64;
                out[i * n + j] = ((re * re + im * im) as f64 / nn).sqrt();
            }
        }
        out
    }

    pub fn max_cross_correlation(&self) -> f64 {
        let n = self.len();
        let c = self.correlation_matrix();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(c[i * n + j]);
                }
            }
        }
        m
    }

    /// Exact check that all distinct pairs respect `rho`.
    pub fn satisfies_threshold(&self, rho: f64) -> bool {
        let n = self.len();
        (0..n).all(|i| ((i + 1)..n).all(|j| correlation_within(&self.raw[i], &self.raw[j], rho)))
    }
}

/// Options for the greedy random selection.
#[derive(Debug, Clone)]
pub struct MusaSelection {
    pub code_length: usize,
    pub count: usize,
    pub rho: f64,
    pub seed: u64,
    /// Candidates with fewer nonzero entries are discarded (the all-zero
    /// sequence is always discarded).
    pub min_nonzero: usize,
    /// Spaces up to this size are materialised as an explicit candidate
    /// list; larger ones are sampled by rejection.
    pub explicit_limit: u64,
    /// Maximum number of rejection draws.
    pub max_draws: u64,
}

impl MusaSelection {
    pub fn new(code_length: usize, count: usize, rho: f64, seed: u64) -> Self {
        Self {
            code_length,
            count,
            rho,
            seed,
            min_nonzero: 2,
            explicit_limit: 531_441,
            max_draws: 20_000_000,
        }
    }
}

fn eligible(s: &[GaussianInt], min_nonzero: usize) -> bool {
    let nz = s.iter().filter(|z| z.re != 0 || z.im != 0).count();
    nz >= min_nonzero.max(1)
}

fn random_sequence<R: Rng>(rng: &mut R, k: usize) -> Vec<GaussianInt> {
    (0..k).map(|_| MUSA_ALPHABET[rng.random_range(0..9)]).collect()
}

/// Greedy random selection of `count` sequences whose pairwise normalised
/// correlation magnitude does not exceed `rho`.
pub fn select_musa_sequences(k: usize, count: usize, rho: f64, seed: u64) -> Result<MusaSequenceSet> {
    select_musa_sequences_with(&MusaSelection::new(k, count, rho, seed))
}

pub fn select_musa_sequences_with(opts: &MusaSelection) -> Result<MusaSequenceSet> {
    let (k, count, rho) = (opts.code_length, opts.count, opts.rho);
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {rho}")));
    }
    if k == 0 || count == 0 {
        return Err(Error::invalid("code length and count must be positive"));
    }
    let mut rng = seeded(opts.seed);
    let space = 9u64.checked_pow(k as u32);
    let mut chosen: Vec<Vec<GaussianInt>> = Vec::with_capacity(count);

    if space.is_some_and(|s| s <= opts.explicit_limit) {
        let mut candidates: Vec<Vec<GaussianInt>> = enumerate_musa_space(k)
            .filter(|s| eligible(s, opts.min_nonzero))
            .collect();
        while chosen.len() < count {
            if candidates.is_empty() {
                return Err(Error::Exhausted {
                    achieved: chosen.len(),
                    requested: count,
                });
            }
            let m = candidates.remove(rng.random_range(0..candidates.len()));
            candidates.retain(|c| correlation_within(c, &m, rho));
            chosen.push(m);
        }
    } else {
        // uniform draws from the whole space, kept only if they lie in the
        // current candidate set: the same law as picking uniformly from it
        let mut draws = 0u64;
        while chosen.len() < count {
            if draws >= opts.max_draws {
                return Err(Error::Exhausted {
                    achieved: chosen.len(),
                    requested: count,
                });
            }
            draws += 1;
            let s = random_sequence(&mut rng, k);
            if eligible(&s, opts.min_nonzero) && chosen.iter().all(|m| correlation_within(&s, m, rho)) {
                chosen.push(s);
            }
        }
    }
    MusaSequenceSet::from_raw(chosen, rho)
}

/// `count` distinct eligible sequences drawn uniformly, with no correlation
/// screening; the contrast case for the greedy selection.
pub fn random_musa_sequences(k: usize, count: usize, seed: u64) -> Result<MusaSequenceSet> {
    let mut rng = seeded(seed);
    let mut chosen: Vec<Vec<GaussianInt>> = Vec::with_capacity(count);
    let mut draws = 0u64;
    while chosen.len() < count {
        draws += 1;
        if draws > 10_000_000 {
            return Err(Error::Exhausted {
                achieved: chosen.len(),
                requested: count,
            });
        }
        let s = random_sequence(&mut rng, k);
        if eligible(&s, 2) && !chosen.contains(&s) {
            chosen.push(s);
        }
    }
    MusaSequenceSet::from_raw(chosen, 1.0)
}
