//! Monte-Carlo proportion estimates.

/// Estimated probability from Bernoulli trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
}

impl McEstimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        Self { successes, trials }
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.successes as f64 / self.trials as f64
    }

    /// Plug-in binomial standard error `sqrt(p(1-p)/T)`.
    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.estimate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Standard error from the add-two-successes-and-failures adjusted
    /// proportion. Unlike [`stderr`](Self::stderr) it stays positive when
    /// every trial succeeds or every trial fails.
    pub fn adjusted_stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let t = self.trials as f64;
        let p = (self.successes as f64 + 2.0) / (t + 4.0);
        (p * (1.0 - p) / t).sqrt()
    }
}
