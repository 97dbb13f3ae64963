//! Exact integer/rational kernels for the sampling probabilities used by the
//! model rates and for the with/without-replacement identity.
//!
//! Everything here is computed in arbitrary-precision arithmetic; floating
//! point only appears at API boundaries elsewhere in the crate.

use num::{BigInt, BigRational, One, Signed, Zero};

/// Per-order selection initiation rates `s_1..s_M` (index 0 holds `s_1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionRates {
    pub rates: Vec<BigRational>,
}

impl SelectionRates {
    pub fn new(rates: Vec<BigRational>) -> Self {
        assert!(
            rates.iter().all(|s| !s.is_negative()),
            "selection rates must be nonnegative"
        );
        Self { rates }
    }

    pub fn from_f64(rates: &[f64]) -> Self {
        Self::new(
            rates
                .iter()
                .map(|&s| BigRational::from_float(s).expect("finite rate"))
                .collect(),
        )
    }

    /// Truncation order `M`.
    pub fn max_order(&self) -> usize {
        self.rates.len()
    }

    /// `s_m` for 1-based `m`; zero beyond the truncation order.
    pub fn rate(&self, m: usize) -> BigRational {
        if m >= 1 && m <= self.rates.len() {
            self.rates[m - 1].clone()
        } else {
            BigRational::zero()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|s| s.is_zero())
    }
}

/// `x(x-1)…(x-j+1)`; `1` for `j = 0`.
pub fn falling_factorial(x: i64, j: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..j as i64 {
        acc *= BigInt::from(x - i);
    }
    acc
}

/// Binomial coefficient `C(n, k)` for integer `n ≥ 0`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

/// Stirling numbers of the second kind via `S(l,j) = j·S(l−1,j) + S(l−1,j−1)`.
pub fn stirling2(l: u32, j: u32) -> BigInt {
    if j > l {
        return BigInt::zero();
    }
    if l == 0 {
        return BigInt::one(); // S(0,0); j > l handled above
    }
    if j == 0 {
        return BigInt::zero();
    }
    // Row-by-row table up to l.
    let mut row = vec![BigInt::one()]; // row for l = 0: [S(0,0)]
    for cur_l in 1..=l {
        let mut next = vec![BigInt::zero(); (cur_l + 1) as usize];
        for cur_j in 1..=cur_l {
            let prev_same = row.get(cur_j as usize).cloned().unwrap_or_else(BigInt::zero);
            let prev_less = row[(cur_j - 1) as usize].clone();
            next[cur_j as usize] = BigInt::from(cur_j) * prev_same + prev_less;
        }
        row = next;
    }
    row.get(j as usize).cloned().unwrap_or_else(BigInt::zero)
}

/// Count of ordered `m`-tuples over a population of size `N` with `n`
/// distinguished ("unfit") members that use exactly `j` distinct members
/// outside the distinguished set:
/// `C^n_{mj} = (N−n)^{↓j} Σ_{ℓ=j}^{m} C(m,ℓ) S(ℓ,j) n^{m−ℓ}`.
fn c_nmj(n_pop: u64, n: u64, m: u32, j: u32) -> BigInt {
    let mut sum = BigInt::zero();
    for l in j..=m {
        sum += binomial(m as u64, l as u64)
            * stirling2(l, j)
            * BigInt::from(n).pow(m - l);
    }
    falling_factorial((n_pop - n) as i64, j) * sum
}

/// Probability `p^n_{mj}` that `m` draws with replacement from `[N]` hit
/// exactly `j` distinct lines outside a fixed `n`-subset. Out-of-range
/// `(m, j)` combinations return `0`.
pub fn p_mj(n_pop: u64, n: u64, m: u32, j: u32) -> BigRational {
    assert!(n <= n_pop, "n must not exceed N");
    if j as u64 > (m as u64).min(n_pop - n) {
        return BigRational::zero();
    }
    BigRational::new(c_nmj(n_pop, n, m, j), BigInt::from(n_pop).pow(m))
}

/// Hypergeometric probability `q^n_{jk} = C(N−n,k) C(n,j−k) / C(N,j)` that a
/// uniform `j`-subset of `[N]` contains exactly `k` lines outside a fixed
/// `n`-subset. Zero when `j − k > n`.
pub fn q_jk(n_pop: u64, n: u64, j: u64, k: u64) -> BigRational {
    assert!(n <= n_pop && j <= n_pop);
    if k > j || j - k > n || k > n_pop - n {
        return BigRational::zero();
    }
    BigRational::new(
        binomial(n_pop - n, k) * binomial(n, j - k),
        binomial(n_pop, j),
    )
}

/// Without-replacement initiation rate `s̃_j = Σ_{m=j}^{M} s_m p^0_{mj}`.
pub fn s_tilde(s: &SelectionRates, j: u32, n_pop: u64) -> BigRational {
    assert!(j >= 1 && j as u64 <= (s.max_order() as u64).min(n_pop));
    let mut acc = BigRational::zero();
    for m in j as usize..=s.max_order() {
        acc += s.rate(m) * p_mj(n_pop, 0, m as u32, j);
    }
    acc
}

/// Checks `Σ_{j=k}^{N} s̃_j q^n_{jk} = Σ_{m=k}^{M} s_m p^n_{mk}` exactly.
/// Returns the equality flag and the (signed) residual.
pub fn verify_replacement_identity(
    n_pop: u64,
    n: u64,
    k: u64,
    s: &SelectionRates,
) -> (bool, BigRational) {
    assert!(n <= n_pop && k >= 1 && k <= n_pop - n);
    let mut lhs = BigRational::zero();
    for j in k..=n_pop.min(s.max_order() as u64) {
        if j >= 1 {
            lhs += s_tilde(s, j as u32, n_pop) * q_jk(n_pop, n, j, k);
        }
    }
    let mut rhs = BigRational::zero();
    for m in k as usize..=s.max_order() {
        rhs += s.rate(m) * p_mj(n_pop, n, m as u32, k as u32);
    }
    let residual = lhs - rhs;
    (residual.is_zero(), residual)
}
