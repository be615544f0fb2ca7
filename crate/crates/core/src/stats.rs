//! Small statistics helpers shared by the monitors and the validation
//! harness: exact binomial quantiles for abort thresholds and a 2x2
//! chi-square independence test for the key-secrecy property.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

/// Smallest `k` with `P(X <= k) >= prob` for `X ~ Binomial(n, p)`.
///
/// Binary search over the CDF keeps this robust for `n` up to session sizes
/// of 1e7 and extreme tail probabilities.
pub fn binomial_quantile(n: u64, p: f64, prob: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    debug_assert!((0.0..1.0).contains(&prob) || prob == 1.0);
    if p <= 0.0 {
        return 0;
    }
    let dist = Binomial::new(p, n).expect("validated binomial parameters");
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if dist.cdf(mid) >= prob {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Result of a chi-square independence test on a 2x2 contingency table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    /// Upper-tail p-value with one degree of freedom.
    pub p_value: f64,
}

/// Pearson chi-square test of independence for a 2x2 table
/// (rows: one variable, columns: the other).
pub fn chi_square_2x2(table: [[u64; 2]; 2]) -> ChiSquareTest {
    let row: [f64; 2] = [
        (table[0][0] + table[0][1]) as f64,
        (table[1][0] + table[1][1]) as f64,
    ];
    let col: [f64; 2] = [
        (table[0][0] + table[1][0]) as f64,
        (table[0][1] + table[1][1]) as f64,
    ];
    let total = row[0] + row[1];
    if total == 0.0 || row.contains(&0.0) || col.contains(&0.0) {
        // degenerate table carries no evidence of dependence
        return ChiSquareTest {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut statistic = 0.0;
    for (i, &r) in row.iter().enumerate() {
        for (j, &c) in col.iter().enumerate() {
            let expected = r * c / total;
            let observed = table[i][j] as f64;
            statistic += (observed - expected) * (observed - expected) / expected;
        }
    }
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    ChiSquareTest {
        statistic,
        p_value: 1.0 - chi.cdf(statistic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_bounds_tail_mass() {
        // P(X < k_lo) <= sig and P(X > k_hi) <= sig by construction
        let (n, p, sig) = (10_000_000u64, 1e-5, 1e-6);
        let dist = Binomial::new(p, n).unwrap();
        let k_lo = binomial_quantile(n, p, sig);
        if k_lo > 0 {
            assert!(dist.cdf(k_lo - 1) < sig);
        }
        assert!(dist.cdf(k_lo) >= sig);
        let k_hi = binomial_quantile(n, p, 1.0 - sig);
        assert!(1.0 - dist.cdf(k_hi) <= sig);
        // mean is 100; the quantiles bracket it
        assert!(k_lo < 100 && k_hi > 100);
    }

    #[test]
    fn quantile_degenerate_cases() {
        assert_eq!(binomial_quantile(1000, 0.0, 0.999999), 0);
        assert_eq!(binomial_quantile(0, 0.5, 0.9), 0);
    }

    #[test]
    fn chi_square_detects_dependence() {
        let independent = chi_square_2x2([[2500, 2500], [2500, 2500]]);
        assert!(independent.statistic < 1e-9);
        assert!(independent.p_value > 0.99);

        let dependent = chi_square_2x2([[4000, 1000], [1000, 4000]]);
        assert!(dependent.statistic > 1000.0);
        assert!(dependent.p_value < 1e-9);
    }

    #[test]
    fn chi_square_degenerate_table() {
        let t = chi_square_2x2([[0, 0], [0, 0]]);
        assert_eq!(t.p_value, 1.0);
    }
}
