use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// Mean predicted probability; `None` for an empty bin.
    pub mean_predicted: Option<f64>,
    /// Empirical positive rate; `None` for an empty bin.
    pub frequency: Option<f64>,
}

impl CalibrationBin {
    pub fn deviation(&self) -> Option<f64> {
        Some((self.frequency? - self.mean_predicted?).abs())
    }
}

/// Reliability curve over equal-width probability bins.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationCurve {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Largest `|frequency - mean prediction|` over bins holding at least
    /// `min_count` decisions.
    pub fn max_deviation(&self, min_count: u64) -> Option<f64> {
        self.bins
            .iter()
            .filter(|b| b.count >= min_count)
            .filter_map(CalibrationBin::deviation)
            .reduce(f64::max)
    }
}

/// Bin `probabilities` into `bins` equal-width intervals (the last one
/// closed) and compare mean prediction with the positive rate.
pub fn calibration_curve(probabilities: &[f64], labels: &[u8], bins: usize) -> Result<CalibrationCurve> {
    if bins < 2 {
        return Err(Error::invalid("at least two calibration bins are required"));
    }
    if probabilities.len() != labels.len() {
        return Err(Error::mismatch("probability count", labels.len(), probabilities.len()));
    }
    let mut count = vec![0u64; bins];
    let mut sum_p = vec![0f64; bins];
    let mut pos = vec![0u64; bins];
    for (&p, &l) in probabilities.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        let b = ((p * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        sum_p[b] += p;
        pos[b] += u64::from(l != 0);
    }
    let w = 1.0 / bins as f64;
    Ok(CalibrationCurve {
        bins: (0..bins)
            .map(|b| CalibrationBin {
                lower: b as f64 * w,
                upper: if b + 1 == bins { 1.0 } else { (b + 1) as f64 * w },
                count: count[b],
                mean_predicted: (count[b] > 0).then(|| sum_p[b] / count[b] as f64),
                frequency: (count[b] > 0).then(|| pos[b] as f64 / count[b] as f64),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Beta, Distribution};

    #[test]
    fn oracle_predictor_fills_end_bins() {
        let p = [0.0, 1.0, 1.0, 0.0];
        let l = [0, 1, 1, 0];
        let c = calibration_curve(&p, &l, 10).unwrap();
        assert_eq!(c.bins[0].frequency, Some(0.0));
        assert_eq!(c.bins[9].frequency, Some(1.0));
        assert_eq!(c.bins[9].mean_predicted, Some(1.0));
        assert_eq!(c.total(), 4);
        assert!(c.bins[1..9].iter().all(|b| b.count == 0 && b.frequency.is_none()));
    }

    #[test]
    fn constant_prediction_on_diagonal() {
        let p = vec![0.3; 1000];
        let l: Vec<u8> = (0..1000).map(|i| u8::from(i % 10 < 3)).collect();
        let c = calibration_curve(&p, &l, 10).unwrap();
        let used: Vec<_> = c.bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(used.len(), 1);
        assert!(used[0].deviation().unwrap() < 1e-12);
    }

    #[test]
    fn calibrated_beta_scores_within_binomial_noise() {
        let mut rng = crate::rng::seeded(3);
        let beta = Beta::new(0.7, 1.3).unwrap();
        let n = 200_000;
        let p: Vec<f64> = (0..n).map(|_| beta.sample(&mut rng)).collect();
        let l: Vec<u8> = p.iter().map(|&x| u8::from(rng.random::<f64>() < x)).collect();
        let c = calibration_curve(&p, &l, 10).unwrap();
        for b in c.bins.iter().filter(|b| b.count > 0) {
            let m = b.mean_predicted.unwrap();
            let sigma = (m * (1.0 - m) / b.count as f64).sqrt().max(1e-12);
            assert!(b.deviation().unwrap() <= 3.0 * sigma + 1e-3, "{b:?}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(calibration_curve(&[0.5], &[1], 1).is_err());
        assert!(calibration_curve(&[1.5], &[1], 10).is_err());
    }
}
