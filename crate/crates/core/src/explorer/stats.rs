use serde::{Deserialize, Serialize};

const Z95: f64 = 1.959_963_984_540_054;

/// Bernoulli event counts with a normal standard error and a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventStats {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl EventStats {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials, "more successes than trials");
        if trials == 0 {
            return Self {
                trials,
                successes,
                p_hat: 0.0,
                stderr: 0.0,
                wilson_lo: 0.0,
                wilson_hi: 1.0,
            };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            trials,
            successes,
            p_hat: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            wilson_lo: (center - half).max(0.0),
            wilson_hi: (center + half).min(1.0),
        }
    }

    pub fn merge(&self, other: &EventStats) -> EventStats {
        Self::from_counts(self.successes + other.successes, self.trials + other.trials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_reference_value() {
        // 8 of 10: the textbook interval is (0.4902, 0.9433)
        let s = EventStats::from_counts(8, 10);
        assert!((s.wilson_lo - 0.4902).abs() < 1e-4);
        assert!((s.wilson_hi - 0.9433).abs() < 1e-4);
        assert!((s.stderr - 0.016f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_successes_keep_a_positive_upper_end() {
        let s = EventStats::from_counts(0, 100);
        assert!(s.wilson_lo < 1e-12);
        assert!(s.wilson_hi > 0.03 && s.wilson_hi < 0.04);
    }

    #[test]
    fn merge_adds_counts() {
        let m = EventStats::from_counts(3, 10).merge(&EventStats::from_counts(7, 30));
        assert_eq!((m.successes, m.trials), (10, 40));
        assert_eq!(m.p_hat, 0.25);
    }
}
