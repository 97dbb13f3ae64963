//! Exact combinatorics against brute-force enumeration oracles.

use momo::combinatorics::{
    binomial, falling_factorial, p_mj, q_jk, s_tilde, stirling2, verify_replacement_identity,
    SelectionRates,
};
use num::{BigInt, BigRational, One, Zero};
use proptest::prelude::*;

/// Counts tuples `(x_1..x_m) ∈ [N]^m` whose image contains exactly `j`
/// distinct elements of the fit part (the `N − n` lines after the first `n`).
fn count_tuples_with_j_fit(n_pop: u64, n: u64, m: u32, j: u32) -> BigInt {
    let mut count = BigInt::zero();
    let mut tuple = vec![1u64; m as usize];
    loop {
        let distinct_fit: std::collections::BTreeSet<u64> =
            tuple.iter().copied().filter(|&x| x > n).collect();
        if distinct_fit.len() == j as usize {
            count += 1;
        }
        // Odometer increment over [1, N]^m.
        let mut pos = 0;
        loop {
            if pos == tuple.len() {
                return count;
            }
            if tuple[pos] < n_pop {
                tuple[pos] += 1;
                break;
            }
            tuple[pos] = 1;
            pos += 1;
        }
    }
}

#[test]
fn p_mj_matches_tuple_enumeration() {
    for n_pop in 1..=5u64 {
        for n in 0..=n_pop {
            for m in 1..=4u32 {
                for j in 0..=m {
                    let expected = BigRational::new(
                        count_tuples_with_j_fit(n_pop, n, m, j),
                        BigInt::from(n_pop).pow(m),
                    );
                    assert_eq!(p_mj(n_pop, n, m, j), expected, "N={n_pop} n={n} m={m} j={j}");
                }
            }
        }
    }
}

#[test]
fn p_mj_frozen_values() {
    let frac = |a: i64, b: i64| {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    };
    assert_eq!(p_mj(4, 2, 2, 1), frac(10, 16));
    assert_eq!(p_mj(4, 0, 2, 2), frac(12, 16));
    assert_eq!(p_mj(4, 0, 2, 1), frac(4, 16));
}

#[test]
fn stirling2_falling_factorial_identity() {
    // x^ℓ = Σ_j S(ℓ,j)·x^{↓j}, exactly, for small ℓ and x.
    for l in 0..=6u32 {
        for x in 0..=6i64 {
            let lhs = BigInt::from(x).pow(l);
            let rhs: BigInt = (0..=l)
                .map(|j| stirling2(l, j) * falling_factorial(x, j))
                .sum();
            assert_eq!(lhs, rhs, "l={l} x={x}");
        }
    }
}

#[test]
fn binomial_matches_factorials() {
    let fact = |k: u64| -> BigInt { (1..=k).map(BigInt::from).product::<BigInt>().max(One::one()) };
    for n in 0..=10u64 {
        for k in 0..=n {
            assert_eq!(binomial(n, k) * fact(k) * fact(n - k), fact(n));
        }
        assert_eq!(binomial(n, n + 1), BigInt::zero());
    }
}

#[test]
fn q_jk_matches_subset_enumeration() {
    // q^n_{jk}: a uniform j-subset of [N] hits exactly k of the N−n fit lines.
    for n_pop in 1..=6u64 {
        for n in 0..=n_pop {
            for j in 1..=n_pop {
                let mut total = BigRational::zero();
                for k in 0..=j {
                    let count = binomial(n_pop - n, k) * binomial(n, j - k);
                    let expected = BigRational::new(count, binomial(n_pop, j));
                    assert_eq!(q_jk(n_pop, n, j, k), expected);
                    total += q_jk(n_pop, n, j, k);
                }
                assert_eq!(total, BigRational::one(), "subset probabilities sum to 1");
            }
        }
    }
}

#[test]
fn s_tilde_is_selection_mixture() {
    let s = SelectionRates::from_f64(&[0.3, 0.1, 0.25]);
    for n_pop in 2..=6u64 {
        for j in 1..=(3u32.min(n_pop as u32)) {
            let expected: BigRational = (j as usize..=s.max_order())
                .map(|m| s.rate(m) * p_mj(n_pop, 0, m as u32, j))
                .sum();
            assert_eq!(s_tilde(&s, j, n_pop), expected);
        }
    }
}

#[test]
fn replacement_identity_examples() {
    let s = SelectionRates::from_f64(&[0.3, 0.1]);
    for n_pop in 2..=6u64 {
        for n in 0..n_pop {
            for k in 1..=(n_pop - n) {
                let (ok, residual) = verify_replacement_identity(n_pop, n, k, &s);
                assert!(ok, "N={n_pop} n={n} k={k} residual {residual}");
                assert!(residual.is_zero());
            }
        }
    }
}

proptest! {
    #[test]
    fn p_mj_rows_sum_to_one(n_pop in 1u64..=8, n_frac in 0u64..=8, m in 1u32..=4) {
        let n = n_frac % (n_pop + 1);
        let total: BigRational = (0..=m).map(|j| p_mj(n_pop, n, m, j)).sum();
        prop_assert_eq!(total, BigRational::one());
    }

    #[test]
    fn p_mj_zero_outside_support(n_pop in 1u64..=8, m in 1u32..=4, j in 0u32..=6) {
        // j cannot exceed m or the number of fit lines.
        let n = n_pop; // all unfit: no fit line can be hit
        if j >= 1 {
            prop_assert_eq!(p_mj(n_pop, n, m, j), BigRational::zero());
        }
        if j > m {
            prop_assert_eq!(p_mj(n_pop, 0, m, j), BigRational::zero());
        }
    }
}
