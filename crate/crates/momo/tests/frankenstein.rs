//! Frankenstein matching tables, induced R-count rates, and the messy
//! process with its permutation bookkeeping.

use momo::ancestry::{build_aig, quasi_stream};
use momo::cli::{bundled_fixture_aig, seeded_aigs, RunConfig};
use momo::combinatorics::{binomial, p_mj};
use momo::cylinder::{Cell, Cylinder};
use momo::frankenstein::{
    assemble, frankenstein_match, induced_rate_check, r_counting_rates_exact,
    run_frankenstein_on_path, run_messy, Permutation, RJump, W,
};
use momo::model::{EventStream, GraphicalEvent, ModelParams};
use momo::rational;
use num::{BigInt, BigRational, Zero};
use std::collections::{BTreeMap, BTreeSet};

fn cyl(pattern: &str) -> Cylinder {
    Cylinder::from_cells(pattern.chars().enumerate().map(|(i, ch)| {
        let cell = match ch {
            'R' => Cell::R,
            'B' => Cell::B,
            '*' => Cell::Star,
            _ => panic!("bad cell"),
        };
        (i as u32 + 1, cell)
    }))
}

fn opt(pattern: &str) -> Cylinder {
    if pattern.is_empty() {
        Cylinder::empty()
    } else {
        cyl(pattern)
    }
}

#[test]
fn permutation_algebra() {
    let id = Permutation::identity();
    let t12 = Permutation::transposition(1, 2);
    let t13 = Permutation::transposition(1, 3);
    assert!(id.is_identity());
    assert_eq!(t12.apply(1), 2);
    assert_eq!(t12.apply(2), 1);
    assert_eq!(t12.apply(7), 7);
    assert!(t12.compose(&t12).is_identity());
    assert_eq!(t12.inverse(), t12);
    // (1 2)∘(1 3) maps 3 → 1 → 2.
    let c = t12.compose(&t13);
    assert_eq!(c.apply(3), 2);
    assert_eq!(c.apply(1), 3);
    assert_eq!(c.apply(2), 1);
    assert_eq!(t13.to_cycles(), "(1 3)");
    assert_eq!(id.to_cycles(), "id");
}

struct Row {
    input: &'static str,
    cons_down: (&'static str, &'static str),
    cons_up: (&'static str, &'static str),
    flip: bool,
    down: &'static str,
    up: &'static str,
    sigma_down: &'static str,
    sigma_up: &'static str,
}

/// The matching table for an interactive event with `α=1, β=2, γ=3`:
/// constituents, cross-routing, permutations, and assembled targets.
#[test]
fn matching_table_distinct_roles() {
    let rows = vec![
        Row { input: "***", cons_down: ("**R", "**B"), cons_up: ("*R*", "*B*"),
              flip: false, down: "***", up: "***", sigma_down: "id", sigma_up: "id" },
        Row { input: "*R*", cons_down: ("*RR", "*RB"), cons_up: ("*R*", ""),
              flip: false, down: "*R*", up: "*R*", sigma_down: "id", sigma_up: "id" },
        Row { input: "**R", cons_down: ("**R", ""), cons_up: ("*RR", "*BR"),
              flip: false, down: "**R", up: "**R", sigma_down: "id", sigma_up: "id" },
        Row { input: "RRR", cons_down: ("RRR", ""), cons_up: ("RRR", ""),
              flip: false, down: "RRR", up: "RRR", sigma_down: "id", sigma_up: "id" },
        Row { input: "R**", cons_down: ("R*R", "*RB"), cons_up: ("RR*", "*BR"),
              flip: false, down: "R**", up: "R**", sigma_down: "(1 2)", sigma_up: "(1 3)" },
        Row { input: "RR*", cons_down: ("RRR", "*RB"), cons_up: ("RR*", ""),
              flip: true, down: "RRR", up: "*R*", sigma_down: "id", sigma_up: "(1 3)" },
        Row { input: "R*R", cons_down: ("R*R", ""), cons_up: ("RRR", "*BR"),
              flip: true, down: "**R", up: "RRR", sigma_down: "(1 2)", sigma_up: "id" },
    ];
    for row in rows {
        let c = cyl(row.input);
        let mo = frankenstein_match(&c, 1, 2, 3);
        assert_eq!(mo.constituents_down.0, opt(row.cons_down.0), "{} C̃↓1", row.input);
        assert_eq!(mo.constituents_down.1, opt(row.cons_down.1), "{} C̃↓2", row.input);
        assert_eq!(mo.constituents_up.0, opt(row.cons_up.0), "{} C̃↑1", row.input);
        assert_eq!(mo.constituents_up.1, opt(row.cons_up.1), "{} C̃↑2", row.input);
        assert_eq!(mo.flip, row.flip, "{} cross-routing", row.input);
        assert_eq!(mo.down, cyl(row.down), "{} Ĉ⇓", row.input);
        assert_eq!(mo.up, cyl(row.up), "{} Ĉ⇑", row.input);
        assert_eq!(mo.sigma_down.to_cycles(), row.sigma_down, "{} σ⇓", row.input);
        assert_eq!(mo.sigma_up.to_cycles(), row.sigma_up, "{} σ⇑", row.input);
    }
}

/// Same table for the degenerate event `β = γ = 2` (self-parent / self-check).
#[test]
fn matching_table_repeated_role() {
    let rows = vec![
        Row { input: "**", cons_down: ("*B", "*R"), cons_up: ("B*", "R*"),
              flip: false, down: "**", up: "**", sigma_down: "id", sigma_up: "id" },
        Row { input: "*R", cons_down: ("", "*R"), cons_up: ("BR", "RR"),
              flip: false, down: "*R", up: "*R", sigma_down: "id", sigma_up: "id" },
        Row { input: "R*", cons_down: ("", "RR"), cons_up: ("BR", "R*"),
              flip: true, down: "R*", up: "*R", sigma_down: "id", sigma_up: "id" },
        Row { input: "RR", cons_down: ("", "RR"), cons_up: ("BR", "RR"),
              flip: false, down: "RR", up: "*R", sigma_down: "id", sigma_up: "id" },
    ];
    for row in rows {
        let c = cyl(row.input);
        let mo = frankenstein_match(&c, 1, 2, 2);
        assert_eq!(mo.constituents_down.0, opt(row.cons_down.0), "{} C̃↓1", row.input);
        assert_eq!(mo.constituents_down.1, opt(row.cons_down.1), "{} C̃↓2", row.input);
        assert_eq!(mo.constituents_up.0, opt(row.cons_up.0), "{} C̃↑1", row.input);
        assert_eq!(mo.constituents_up.1, opt(row.cons_up.1), "{} C̃↑2", row.input);
        assert_eq!(mo.flip, row.flip, "{} cross-routing", row.input);
        assert_eq!(mo.down, cyl(row.down), "{} Ĉ⇓", row.input);
        assert_eq!(mo.up, cyl(row.up), "{} Ĉ⇑", row.input);
        assert_eq!(mo.sigma_down.to_cycles(), row.sigma_down, "{} σ⇓", row.input);
        assert_eq!(mo.sigma_up.to_cycles(), row.sigma_up, "{} σ⇑", row.input);
    }
}

/// R-count deltas over every R-cylinder with up to 5 cells: ±1 exactly for
/// the two cross-routing patterns, {0, −1} for the repeated-role event on
/// (R,R), zero otherwise.
#[test]
fn r_count_deltas_exhaustive() {
    for len in 3..=5usize {
        for mask in 0u32..(1 << len) {
            let pattern: String = (0..len)
                .map(|i| if mask >> i & 1 == 1 { 'R' } else { '*' })
                .collect();
            let c = cyl(&pattern);
            let n0 = c.n_r() as i64;
            let mo = frankenstein_match(&c, 1, 2, 3);
            assert!(!mo.down.is_empty() && !mo.up.is_empty());
            let d = (mo.down.n_r() as i64 - n0, mo.up.n_r() as i64 - n0);
            let head: Vec<Cell> = (1..=3).map(|l| c.cell(l)).collect();
            let expected = match (head[0], head[1], head[2]) {
                (Cell::R, Cell::R, Cell::Star) => (1, -1),
                (Cell::R, Cell::Star, Cell::R) => (-1, 1),
                _ => (0, 0),
            };
            assert_eq!(d, expected, "pattern {pattern}");
            // Repeated role β = γ = 2.
            let mo2 = frankenstein_match(&c, 1, 2, 2);
            let d2 = (mo2.down.n_r() as i64 - n0, mo2.up.n_r() as i64 - n0);
            let expected2 = match (head[0], head[1]) {
                (Cell::R, Cell::R) => (0, -1),
                _ => (0, 0),
            };
            assert_eq!(d2, expected2, "pattern {pattern} (β=γ)");
        }
    }
}

fn mixed_params(n_pop: u64) -> ModelParams {
    ModelParams {
        n_pop,
        r: 1.0,
        kappa: 0.5,
        s: vec![0.3, 0.1],
        u: 0.2,
        nu0: 0.5,
        nu1: 0.5,
    }
}

#[test]
fn induced_rates_match_r_counting_chain() {
    for np in 1..=5u64 {
        let p = mixed_params(np);
        for n in 1..=np {
            let report = induced_rate_check(&p, n);
            assert!(report.pass, "N={np} n={n}: {:?}", report.entries);
        }
    }
}

/// The R-counting chain rates written out independently:
/// `n→n+j` at `n Σ_{m≥j} s_m p^n_{mj}` for `j ≥ 2` (plus the `κ` pair term at
/// `j = 1`), `n→n−1` at `(1/N)C(n,2)(r + κ(N−n+1)/N) + uν₁n`, and the kill
/// rate `uν₀n`.
#[test]
fn r_counting_rates_formula() {
    let np = 5u64;
    let p = mixed_params(np);
    let npr = BigRational::from_integer(BigInt::from(np));
    let sel = p.selection();
    for n in 1..=np {
        let nn = BigRational::from_integer(BigInt::from(n));
        let choose2 = BigRational::from_integer(binomial(n, 2));
        let sel_term = |j: u32| -> BigRational {
            (j as usize..=sel.max_order())
                .map(|m| sel.rate(m) * p_mj(np, n, m as u32, j))
                .sum::<BigRational>()
                * &nn
        };
        let mut expected: BTreeMap<RJump, BigRational> = BTreeMap::new();
        let up1 = rational(p.kappa) / &npr * &choose2
            * BigRational::new(BigInt::from(np - n), BigInt::from(np))
            + sel_term(1);
        let down = &choose2 / &npr
            * (rational(p.r)
                + rational(p.kappa) * BigRational::new(BigInt::from(np - n + 1), BigInt::from(np)))
            + rational(p.u) * rational(p.nu1) * &nn;
        let kill = rational(p.u) * rational(p.nu0) * &nn;
        for (jump, v) in [
            (RJump::Shift(2), sel_term(2)),
            (RJump::Shift(1), up1),
            (RJump::Shift(-1), down),
            (RJump::Kill, kill),
        ] {
            if !v.is_zero() {
                expected.insert(jump, v);
            }
        }
        assert_eq!(r_counting_rates_exact(&p, n), expected, "n={n}");
    }
}

#[test]
fn messy_sum_matches_frankenstein_on_every_path() {
    let config = RunConfig::default();
    let fixtures = seeded_aigs(&config, 15, 8, 10, Some(3), true);
    for (aig, n_pop) in fixtures {
        let m = aig
            .captured
            .iter()
            .filter(|c| matches!(c.event, GraphicalEvent::InteractiveQuasi { .. }))
            .count();
        let s = Cylinder::all_r(aig.root_set.iter().copied());
        for mask in 0u32..(1 << m) {
            let w: Vec<W> = (0..m)
                .map(|k| if mask >> k & 1 == 1 { W::Up } else { W::Down })
                .collect();
            let phi = run_frankenstein_on_path(&s, &w, &aig);
            let messy = run_messy(&s, &w, &aig);
            assert_eq!(assemble(&messy), phi, "assembly recovers the Frankenstein state");
            for i in 0..=n_pop {
                let sum: BigRational = messy
                    .pairs
                    .iter()
                    .map(|(c, _)| c.probability(i, n_pop))
                    .sum();
                assert_eq!(sum, phi.probability(i, n_pop), "per-path probability");
            }
        }
    }
}

/// The bundled two-event fixture: exact messy states (cylinder, permutation)
/// per path, matching the documented construction.
#[test]
fn bundled_fixture_messy_states() {
    let aig = bundled_fixture_aig();
    let s = Cylinder::all_r([1u32, 2]);
    type PathExpect = ([W; 2], Vec<(&'static str, &'static str)>);
    let expect: Vec<PathExpect> = vec![
        ([W::Down, W::Down],
         vec![("I=[1,2,3,4]; RRRR", "id"), ("", "id"), ("", "id"), ("", "id")]),
        ([W::Down, W::Up],
         vec![("I=[1,2,3,4]; RR*R", "id"), ("I=[1,2,3,4]; *RBR", "(1 3)"),
              ("", "id"), ("", "(1 3)")]),
        ([W::Up, W::Down],
         vec![("I=[1,2,3,4]; RRR*", "id"), ("I=[1,2,3,4]; *RB*", "id"),
              ("I=[1,2,3,4]; *RRB", "(1 4)"), ("", "(1 4)")]),
        ([W::Up, W::Up],
         vec![("I=[1,2,3,4]; RR**", "id"), ("", "id"),
              ("I=[1,2,3,4]; *R*B", "(1 4)"), ("", "(1 4)")]),
    ];
    for (w, rows) in expect {
        let messy = run_messy(&s, &w, &aig);
        let got: BTreeSet<(String, String)> = messy
            .pairs
            .iter()
            .map(|(c, sig)| {
                let text = if c.is_empty() { String::new() } else { c.to_text() };
                (text, sig.to_cycles())
            })
            .collect();
        let want: BTreeSet<(String, String)> = rows
            .into_iter()
            .map(|(c, s)| (c.to_string(), s.to_string()))
            .collect();
        assert_eq!(got, want, "path {w:?}");
    }
}

/// A single-event fixture: the Frankenstein endpoints for both letters agree
/// with the matching table applied to the root cylinder.
#[test]
fn single_event_path_endpoints() {
    let stream = EventStream {
        horizon: 1.0,
        events: vec![(
            0.5,
            GraphicalEvent::InteractiveQuasi { alpha: 1, beta: 2, gamma: 3 },
        )],
    };
    let aig = build_aig(&quasi_stream(&stream), 1.0, &BTreeSet::from([1, 2]), 1.0);
    let s = Cylinder::all_r([1u32, 2]);
    let mo = frankenstein_match(&cyl("RR*"), 1, 2, 3);
    assert_eq!(run_frankenstein_on_path(&s, &[W::Down], &aig), mo.down);
    assert_eq!(run_frankenstein_on_path(&s, &[W::Up], &aig), mo.up);
}
