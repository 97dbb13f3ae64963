//! Matrix exponential (uniformization) against closed-form solutions.

use momo::matrix::{expm_apply, GeneratorMatrix};

const TOL: f64 = 1e-13;

#[test]
fn two_state_symmetric_closed_form() {
    // Q = [[-1, 1], [1, -1]]: e^{tQ} has entries (1 ± e^{-2t}) / 2.
    let q = GeneratorMatrix::from_rows(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
    for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let v = expm_apply(&q, t, &[1.0, 0.0], TOL);
        let e = (-2.0 * t).exp();
        assert!((v[0] - (1.0 + e) / 2.0).abs() < 1e-12, "t={t} v0={}", v[0]);
        assert!((v[1] - (1.0 - e) / 2.0).abs() < 1e-12, "t={t} v1={}", v[1]);
    }
}

#[test]
fn absorbing_chain_exponential_decay() {
    // State 1 jumps to the absorbing state 0 at rate 1:
    // P_1(still at 1 after t) = e^{-t}.
    let q = GeneratorMatrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, -1.0]]);
    for t in [0.25, 1.0, 3.0] {
        let v = expm_apply(&q, t, &[0.0, 1.0], TOL);
        assert!((v[1] - (-t).exp()).abs() < 1e-12);
        assert!(v[0].abs() < 1e-12);
    }
}

#[test]
fn constants_are_invariant() {
    let q = GeneratorMatrix::from_rows(vec![
        vec![-3.0, 1.0, 2.0],
        vec![0.5, -0.5, 0.0],
        vec![0.0, 4.0, -4.0],
    ]);
    let v = expm_apply(&q, 1.7, &[1.0, 1.0, 1.0], TOL);
    for x in v {
        assert!((x - 1.0).abs() < 1e-12, "stochastic semigroup fixes constants");
    }
}

#[test]
fn zero_time_is_identity() {
    let q = GeneratorMatrix::from_rows(vec![vec![-2.0, 2.0], vec![3.0, -3.0]]);
    let f = [0.3, -1.7];
    let v = expm_apply(&q, 0.0, &f, TOL);
    assert_eq!(v, f.to_vec());
}

#[test]
fn validate_rejects_bad_generator() {
    let q = GeneratorMatrix::from_rows(vec![vec![-1.0, 0.5], vec![1.0, -1.0]]);
    assert!(q.validate().is_err(), "row sums must vanish");
    let q = GeneratorMatrix::from_rows(vec![vec![1.0, -1.0], vec![1.0, -1.0]]);
    assert!(q.validate().is_err(), "off-diagonals must be nonnegative");
    let q = GeneratorMatrix::from_rows(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
    assert!(q.validate().is_ok());
}
