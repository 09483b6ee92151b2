//! Small numeric building blocks shared by the rate functionals and the
//! counting oracles: compensated summation, streaming log-sum-exp, exact and
//! logarithmic binomial/multinomial coefficients, and polynomial
//! extrapolation of a sequence to its limit.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use statrs::function::gamma::ln_gamma;

/// Neumaier-compensated sum. Keeps the running error term even when the
/// next addend is larger than the accumulated sum, which plain Kahan loses.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Streaming Neumaier accumulator for incremental sums that cannot buffer
/// their terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanAccumulator {
    sum: f64,
    comp: f64,
}

impl KahanAccumulator {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming log-sum-exp over terms given in log space. `add` folds in one
/// term, `merge` combines two accumulators, and the result is exact up to
/// rounding regardless of the order or magnitude spread of the terms.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    /// Sum of exp(term - max) over all folded terms.
    scaled: f64,
    count: u64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
            count: 0,
        }
    }

    pub fn add(&mut self, log_term: f64) {
        self.count += 1;
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.scaled += (log_term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        self.count += other.count;
        if other.scaled == 0.0 {
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    /// log of the accumulated sum; NEG_INFINITY when nothing positive was added.
    pub fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// ln C(n, k); NEG_INFINITY outside 0 <= k <= n.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64) - ln_gamma((n - k + 1) as f64)
}

/// Exact C(n, k) as a big integer, multiplicative form with early division.
pub fn big_choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Natural log of a positive big integer via its bit length and the top 53
/// significant bits, so the result is accurate to double precision even for
/// numbers vastly beyond the f64 range.
pub fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 53 {
        let v: u64 = x.try_into().expect("fits in u64");
        return (v as f64).ln();
    }
    let shift = bits - 53;
    let top: u64 = (x >> shift).try_into().expect("53 bits fit in u64");
    (top as f64).ln() + (shift as f64) * std::f64::consts::LN_2
}

/// ln of the multinomial coefficient n! / prod(counts!) where sum(counts) = n.
pub fn ln_multinomial(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut v = ln_gamma((n + 1) as f64);
    for &c in counts {
        v -= ln_gamma((c + 1) as f64);
    }
    v
}

/// Exact multinomial coefficient as a big integer, built as a product of
/// binomials over successive prefixes.
pub fn big_multinomial(counts: &[u64]) -> BigUint {
    let mut acc = BigUint::one();
    let mut seen = 0u64;
    for &c in counts {
        seen += c;
        acc *= big_choose(seen, c);
    }
    acc
}

/// ln of the Binomial(n, p) probability mass at e. Handles p = 0 and p = 1
/// exactly; NEG_INFINITY off the support.
pub fn ln_binom_pmf(n: u64, e: u64, p: f64) -> f64 {
    if e > n {
        return f64::NEG_INFINITY;
    }
    if p <= 0.0 {
        return if e == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if e == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, e) + (e as f64) * p.ln() + ((n - e) as f64) * (-p).ln_1p()
}

/// Neville polynomial extrapolation of (x_i, y_i) to x = 0. With x_i = 1/n_i
/// this is Richardson extrapolation of a sequence with a power-series error
/// in 1/n. Points must have pairwise distinct x values.
pub fn neville_at_zero(points: &[(f64, f64)]) -> f64 {
    let mut vals: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let xs: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    let m = vals.len();
    for level in 1..m {
        for i in 0..m - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            vals[i] = (xj * vals[i] - xi * vals[i + 1]) / (xj - xi);
        }
    }
    vals[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancellation_that_plain_sum_loses() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(kahan_sum(vals.iter().copied()), 2.0);
        let mut acc = KahanAccumulator::default();
        for v in vals {
            acc.add(v);
        }
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn log_sum_exp_matches_direct_computation() {
        let mut acc = LogSumExp::new();
        for t in [-3.0, 0.5, 1.25, -700.0] {
            acc.add(t);
        }
        let direct: f64 = [-3.0f64, 0.5, 1.25, -700.0]
            .iter()
            .map(|t| t.exp())
            .sum::<f64>()
            .ln();
        assert!((acc.value() - direct).abs() < 1e-12);
        assert_eq!(acc.count(), 4);
    }

    #[test]
    fn log_sum_exp_merge_agrees_with_single_stream() {
        let terms = [-1.0, 4.0, 2.5, -900.0, 3.0, f64::NEG_INFINITY];
        let mut whole = LogSumExp::new();
        for &t in &terms {
            whole.add(t);
        }
        let mut left = LogSumExp::new();
        let mut right = LogSumExp::new();
        for &t in &terms[..3] {
            left.add(t);
        }
        for &t in &terms[3..] {
            right.add(t);
        }
        left.merge(&right);
        assert_eq!(left.value(), whole.value());
        assert_eq!(left.count(), whole.count());
    }

    #[test]
    fn log_sum_exp_survives_extreme_magnitudes() {
        let mut acc = LogSumExp::new();
        acc.add(-1e308);
        acc.add(700.0);
        assert!((acc.value() - 700.0).abs() < 1e-12);
    }

    #[test]
    fn empty_log_sum_is_minus_infinity() {
        assert_eq!(LogSumExp::new().value(), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_choose_matches_exact_small_values() {
        assert_eq!(ln_choose(5, 7), f64::NEG_INFINITY);
        assert!((ln_choose(10, 3) - (120.0f64).ln()).abs() < 1e-12);
        assert_eq!(ln_choose(9, 0), 0.0);
    }

    #[test]
    fn big_choose_agrees_with_ln_choose_at_large_arguments() {
        let exact = big_choose(400, 170);
        let approx = ln_choose(400, 170);
        assert!((big_ln(&exact) - approx).abs() < 1e-9 * approx.abs());
    }

    #[test]
    fn big_ln_handles_values_beyond_f64_range() {
        let huge = BigUint::from(2u32).pow(5000) * BigUint::from(3u32);
        let expect = 5000.0 * std::f64::consts::LN_2 + 3.0f64.ln();
        assert!((big_ln(&huge) - expect).abs() < 1e-9);
        assert_eq!(big_ln(&BigUint::zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn multinomial_reduces_to_binomial() {
        assert_eq!(big_multinomial(&[3, 9]), big_choose(12, 3));
        let ln = ln_multinomial(&[3, 9]);
        assert!((ln - ln_choose(12, 3)).abs() < 1e-10);
    }

    #[test]
    fn multinomial_trinomial_example() {
        // 6! / (1! 2! 3!) = 60
        assert_eq!(big_multinomial(&[1, 2, 3]), BigUint::from(60u32));
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let n = 40;
        let p = 0.37;
        let mut acc = LogSumExp::new();
        for e in 0..=n {
            acc.add(ln_binom_pmf(n, e, p));
        }
        assert!(acc.value().abs() < 1e-12);
    }

    #[test]
    fn binomial_pmf_degenerate_probabilities() {
        assert_eq!(ln_binom_pmf(5, 0, 0.0), 0.0);
        assert_eq!(ln_binom_pmf(5, 1, 0.0), f64::NEG_INFINITY);
        assert_eq!(ln_binom_pmf(5, 5, 1.0), 0.0);
        assert_eq!(ln_binom_pmf(5, 4, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn neville_recovers_polynomial_limit_exactly() {
        // y(x) = 2 - 3x + 5x^2 sampled at four points extrapolates to y(0) = 2.
        let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125, 0.0625]
            .iter()
            .map(|&x| (x, 2.0 - 3.0 * x + 5.0 * x * x))
            .collect();
        assert!((neville_at_zero(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn neville_single_point_is_identity() {
        assert_eq!(neville_at_zero(&[(0.1, 7.5)]), 7.5);
    }
}
