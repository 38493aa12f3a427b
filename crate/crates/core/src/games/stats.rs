//! Win-rate summaries for batches of games.

use serde::Serialize;
use statrs::distribution::{Binomial, Discrete};
use statrs::function::beta::beta_reg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WinRate {
    pub wins: u64,
    pub games: u64,
}

impl WinRate {
    pub fn rate(&self) -> f64 {
        if self.games == 0 {
            return 0.0;
        }
        self.wins as f64 / self.games as f64
    }

    /// Two-sided Clopper-Pearson interval at the given confidence level.
    pub fn clopper_pearson(&self, confidence: f64) -> (f64, f64) {
        let (k, n) = (self.wins as f64, self.games as f64);
        let alpha = 1.0 - confidence;
        let lo = if self.wins == 0 { 0.0 } else { beta_quantile(k, n - k + 1.0, alpha / 2.0) };
        let hi = if self.wins == self.games { 1.0 } else { beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0) };
        (lo, hi)
    }

    /// Exact two-sided binomial test: total mass of outcomes no likelier
    /// than the observed one under rate `p0`.
    pub fn binomial_p_value(&self, p0: f64) -> f64 {
        let d = Binomial::new(p0, self.games).unwrap();
        let observed = d.pmf(self.wins) * (1.0 + 1e-7);
        (0..=self.games).map(|i| d.pmf(i)).filter(|&p| p <= observed).sum::<f64>().min(1.0)
    }

    /// True if `p` lies in the two-sided interval at `confidence`.
    pub fn consistent_with(&self, p: f64, confidence: f64) -> bool {
        let (lo, hi) = self.clopper_pearson(confidence);
        lo <= p && p <= hi
    }
}

/// Beta(a, b) quantile by bisection on the regularized incomplete beta
/// function; statrs' own inverse stops at about 1e-5.
fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl std::fmt::Display for WinRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (lo, hi) = self.clopper_pearson(0.99);
        write!(f, "{}/{} = {:.3} (99% CI [{:.3}, {:.3}])", self.wins, self.games, self.rate(), lo, hi)
    }
}
