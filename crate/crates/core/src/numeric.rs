//! Log-domain helpers shared by the spectral recursions and the bound calculators.

/// `ln(exp(a) + exp(b))` without overflow; `-inf` acts as the additive identity.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(exp(x_i)))`, returning `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Base-2 variant of [`log_add_exp`].
pub fn log2_add_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// Integer ceiling of a non-negative real, tolerant of representation noise just above an integer.
pub(crate) fn ceil_tolerant(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct_sum() {
        let a = 0.3f64.ln();
        let b = 0.5f64.ln();
        assert!((log_add_exp(a, b) - 0.8f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, b), b);
    }

    #[test]
    fn log_sum_exp_survives_huge_magnitudes() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log2_add_exp2_basic() {
        assert!((log2_add_exp2(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((log2_add_exp2(-3.0, -3.0) - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn ceil_tolerant_absorbs_float_noise() {
        assert_eq!(ceil_tolerant(2560.0000000000005), 2560);
        assert_eq!(ceil_tolerant(5804.8), 5805);
    }
}
