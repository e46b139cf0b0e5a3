//! Kruskal–Wallis rank test and the χ² tail it needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("non-finite value in group {0}")]
    NonFinite(usize),
    #[error("all values are identical; the statistic is undefined")]
    DegenerateData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalResult {
    pub h_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Mid-ranks (1-based) of `values`, plus `Σ(t³ − t)` over tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let rank = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Kruskal–Wallis H with the standard tie correction; the p-value is the
/// upper χ² tail with `groups − 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (g, values) in groups.iter().enumerate() {
        if values.is_empty() {
            return Err(StatsError::EmptyGroup(g));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(g));
        }
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Err(StatsError::DegenerateData);
    }

    let mean_rank = (n + 1.0) / 2.0;
    let mut offset = 0;
    let mut sum = 0.0;
    for values in groups {
        let nj = values.len();
        let rbar = ranks[offset..offset + nj].iter().sum::<f64>() / nj as f64;
        sum += nj as f64 * (rbar - mean_rank).powi(2);
        offset += nj;
    }
    let h = 12.0 / (n * (n + 1.0)) * sum / correction;
    let df = groups.len() - 1;
    Ok(KruskalResult {
        h_statistic: h,
        degrees_of_freedom: df,
        p_value: chi_square_upper_tail(h, df),
    })
}

/// `P(X > x)` for `X ~ χ²(df)`.
pub fn chi_square_upper_tail(x: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
///
/// Series for `P` when `x < a + 1`, modified Lentz continued fraction for
/// `Q` otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn three_separated_groups() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let r = kruskal_wallis(&groups).unwrap();
        assert!((r.h_statistic - 7.2).abs() < 1e-12);
        assert_eq!(r.degrees_of_freedom, 2);
        assert!((r.p_value - (-3.6f64).exp()).abs() < 1e-12);
    }

    /// Exact permutation p-value: fraction of all group relabelings whose H
    /// is at least the observed one.
    fn permutation_p(groups: &[Vec<f64>]) -> f64 {
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
        let observed = kruskal_wallis(groups).unwrap().h_statistic;
        let mut counts = [0u64; 2];
        let mut assignment = vec![Vec::new(); sizes.len()];
        fn rec(
            i: usize,
            pooled: &[f64],
            sizes: &[usize],
            assignment: &mut Vec<Vec<f64>>,
            observed: f64,
            counts: &mut [u64; 2],
        ) {
            if i == pooled.len() {
                let h = kruskal_wallis(assignment).unwrap().h_statistic;
                counts[0] += 1;
                if h >= observed - 1e-9 {
                    counts[1] += 1;
                }
                return;
            }
            for g in 0..sizes.len() {
                if assignment[g].len() < sizes[g] {
                    assignment[g].push(pooled[i]);
                    rec(i + 1, pooled, sizes, assignment, observed, counts);
                    assignment[g].pop();
                }
            }
        }
        rec(0, &pooled, &sizes, &mut assignment, observed, &mut counts);
        counts[1] as f64 / counts[0] as f64
    }

    #[test]
    fn permutation_oracle_on_the_separated_fixture() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let exact = permutation_p(&groups);
        // only the 3! arrangements of the three blocks reach H = 7.2
        assert!((exact - 6.0 / 1680.0).abs() < 1e-15);
        let approx = kruskal_wallis(&groups).unwrap().p_value;
        assert!((exact - approx).abs() < 0.05);
    }

    #[test]
    fn chi_square_approximation_gap_at_small_n() {
        let mut rng = rng_from_seed(12);
        for _ in 0..30 {
            let groups: Vec<Vec<f64>> = [3usize, 3, 4]
                .iter()
                .map(|&s| (0..s).map(|_| rng.random::<f64>()).collect())
                .collect();
            let r = kruskal_wallis(&groups).unwrap();
            let exact = permutation_p(&groups);
            // at n = 10 the χ² tail runs up to ~0.05 below the exact p-value
            assert!(exact >= 1.0 / 4200.0 && exact <= 1.0);
            assert!((exact - r.p_value).abs() < 0.1, "{groups:?}: {exact} vs {}", r.p_value);
        }
    }

    #[test]
    fn ties_use_mid_ranks() {
        let (ranks, ties) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(ranks, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, 6.0);
    }

    #[test]
    fn identical_values_are_degenerate() {
        let groups = vec![vec![0.5; 3], vec![0.5; 4]];
        assert_eq!(kruskal_wallis(&groups), Err(StatsError::DegenerateData));
    }

    #[test]
    fn invalid_group_layouts() {
        assert_eq!(kruskal_wallis(&[vec![1.0]]), Err(StatsError::TooFewGroups(1)));
        assert_eq!(kruskal_wallis(&[vec![1.0], vec![]]), Err(StatsError::EmptyGroup(1)));
        assert_eq!(kruskal_wallis(&[vec![1.0], vec![f64::NAN]]), Err(StatsError::NonFinite(1)));
    }

    #[test]
    fn null_calibration() {
        let mut rng = rng_from_seed(99);
        let mut above = 0;
        for _ in 0..100 {
            let groups: Vec<Vec<f64>> =
                (0..3).map(|_| (0..60).map(|_| rng.random::<f64>()).collect()).collect();
            if kruskal_wallis(&groups).unwrap().p_value > 0.01 {
                above += 1;
            }
        }
        assert!(above >= 95, "{above}");
    }

    #[test]
    fn chi_square_closed_forms() {
        assert_eq!(chi_square_upper_tail(0.0, 3), 1.0);
        assert!((chi_square_upper_tail(2.0 * 2f64.ln(), 2) - 0.5).abs() < 1e-15);
        // even df: Q = e^{-x/2} Σ_{j<df/2} (x/2)^j / j!
        for df in [2usize, 4, 6, 10, 20] {
            for x in [0.1, 1.0, 5.0, 12.5, 40.0, 90.0] {
                let half = x / 2.0;
                let mut term = 1.0;
                let mut sum = 0.0;
                for j in 0..df / 2 {
                    if j > 0 {
                        term *= half / j as f64;
                    }
                    sum += term;
                }
                let exact = (-half).exp() * sum;
                assert!((chi_square_upper_tail(x, df) - exact).abs() < 1e-12, "df {df} x {x}");
            }
        }
    }

    #[test]
    fn chi_square_against_high_precision_values() {
        // 40-digit reference evaluations of Q(df/2, x/2)
        let cases = [
            (37.48, 5, 4.798_628_910_427_029e-7),
            (1.0, 1, 0.317_310_507_862_914_1),
            (3.5, 3, 0.320_762_120_805_639_03),
            (10.0, 7, 0.188_573_467_513_450_07),
            (0.2, 9, 0.999_999_443_250_254_3),
            (50.0, 4, 3.610_865_404_890_645_4e-10),
            (120.0, 11, 1.813_019_560_185_250_7e-20),
            (7.2, 2, 0.027_323_722_447_292_558),
            (0.5, 1, 0.479_500_122_186_953_46),
            (25.0, 15, 0.049_943_433_626_428_367),
        ];
        for (x, df, q) in cases {
            let got = chi_square_upper_tail(x, df);
            assert!((got - q).abs() < 1e-10, "x {x} df {df}: {got} vs {q}");
        }
    }

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn h_is_rank_invariant(
            a in prop::collection::vec(-100.0f64..100.0, 1..8),
            b in prop::collection::vec(-100.0f64..100.0, 1..8),
            c in prop::collection::vec(-100.0f64..100.0, 1..8),
        ) {
            let groups = vec![a, b, c];
            let transformed: Vec<Vec<f64>> =
                groups.iter().map(|g| g.iter().map(|v| (v / 50.0).exp() * 3.0 - 1.0).collect()).collect();
            match (kruskal_wallis(&groups), kruskal_wallis(&transformed)) {
                (Ok(x), Ok(y)) => prop_assert!((x.h_statistic - y.h_statistic).abs() < 1e-9),
                (Err(e), Err(f)) => prop_assert_eq!(e, f),
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn tail_is_monotone_in_x(df in 1usize..30, x in 0.0f64..200.0, dx in 0.0f64..10.0) {
            let p = chi_square_upper_tail(x, df);
            let q = chi_square_upper_tail(x + dx, df);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(q <= p + 1e-15);
        }
    }
}
