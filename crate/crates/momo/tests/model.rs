//! Forward model: the birth–death generator is cross-checked by aggregating
//! per-instance event rates over explicit typed configurations.

use momo::combinatorics::{binomial, s_tilde};
use momo::model::{
    apply_event_types, event_rate_table, generator_x_exact, propagate_types, sample_event_stream,
    simulate_counts, EventStream, GraphicalEvent, IndType, ModelParams,
};
use momo::rational;
use num::{BigInt, BigRational, Zero};
use std::collections::{BTreeMap, BTreeSet};

fn params(n_pop: u64) -> ModelParams {
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

fn subsets_of_size(n_pop: u64, j: usize) -> Vec<BTreeSet<u32>> {
    let lines: Vec<u32> = (1..=n_pop as u32).collect();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..j).collect();
    if j > lines.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| lines[i]).collect());
        // next combination
        let mut i = j;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < lines.len() - (j - i) {
                idx[i] += 1;
                for k in i + 1..j {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn unfit_count(types: &[IndType]) -> i64 {
    types.iter().filter(|&&t| t == IndType::Unfit).count() as i64
}

/// Aggregates every event instance's rate by the change it causes to the
/// unfit count, starting from a configuration with `n` unfit lines.
fn aggregate_instance_rates(p: &ModelParams, n: u64) -> BTreeMap<i64, BigRational> {
    let np = p.n_pop;
    let base: Vec<IndType> = (0..np)
        .map(|i| if i < n { IndType::Unfit } else { IndType::Fit })
        .collect();
    let n0 = unfit_count(&base);
    let sel = p.selection();
    let two = BigRational::from_integer(BigInt::from(2));
    let npr = BigRational::from_integer(BigInt::from(np));
    let mut agg: BTreeMap<i64, BigRational> = BTreeMap::new();
    let mut add = |event: GraphicalEvent, rate: BigRational| {
        let mut types = base.clone();
        apply_event_types(&mut types, &event);
        let delta = unfit_count(&types) - n0;
        *agg.entry(delta).or_insert_with(BigRational::zero) += rate;
    };
    let neutral_rate = rational(p.r) / (&two * &npr);
    let interactive_rate = rational(p.kappa) / (&two * &npr * &npr);
    for alpha in 1..=np as u32 {
        for beta in 1..=np as u32 {
            if beta == alpha {
                continue;
            }
            add(GraphicalEvent::Neutral { alpha, beta }, neutral_rate.clone());
            for gamma in 1..=np as u32 {
                add(
                    GraphicalEvent::Interactive { alpha, beta, gamma },
                    interactive_rate.clone(),
                );
            }
        }
    }
    for j in 1..=sel.max_order() {
        let per = s_tilde(&sel, j as u32, np) / BigRational::from_integer(binomial(np, j as u64));
        for alpha in 1..=np as u32 {
            for set in subsets_of_size(np, j) {
                if j == 1 && set.contains(&alpha) {
                    continue; // B = {α} carries no selective arrow
                }
                add(GraphicalEvent::Selective { alpha, set }, per.clone());
            }
        }
    }
    let ben = rational(p.u) * rational(p.nu0);
    let del = rational(p.u) * rational(p.nu1);
    for alpha in 1..=np as u32 {
        add(GraphicalEvent::MutBen { alpha }, ben.clone());
        add(GraphicalEvent::MutDel { alpha }, del.clone());
    }
    agg.retain(|_, v| !v.is_zero());
    agg
}

#[test]
fn generator_matches_instance_aggregation() {
    for np in 2..=5u64 {
        let p = params(np);
        let q = generator_x_exact(&p);
        for n in 0..=np {
            let agg = aggregate_instance_rates(&p, n);
            for (delta, rate) in &agg {
                match delta {
                    0 => {}
                    1 => assert_eq!(rate, &q[n as usize][n as usize + 1], "N={np} n={n} up"),
                    -1 => assert_eq!(rate, &q[n as usize][n as usize - 1], "N={np} n={n} down"),
                    other => panic!("unexpected count jump {other}"),
                }
            }
            if n < np {
                assert!(
                    agg.contains_key(&1) || q[n as usize][n as usize + 1].is_zero(),
                    "missing up-rate at n={n}"
                );
            }
            if n > 0 {
                assert!(
                    agg.contains_key(&-1) || q[n as usize][n as usize - 1].is_zero(),
                    "missing down-rate at n={n}"
                );
            }
        }
    }
}

#[test]
fn rate_table_instance_counts() {
    let p = params(5);
    let np = BigInt::from(5);
    let table = event_rate_table(&p);
    let by_kind: BTreeMap<String, (BigRational, BigInt)> = table
        .iter()
        .map(|e| (e.kind.clone(), (e.per_instance.clone(), e.instance_count.clone())))
        .collect();
    assert_eq!(by_kind["neutral"].1, &np * (&np - 1));
    assert_eq!(by_kind["interactive"].1, &np * (&np - 1) * &np);
    assert_eq!(by_kind["selective_1"].1, &np * (&np - 1));
    assert_eq!(
        by_kind["selective_2"].1,
        &np * binomial(5, 2)
    );
    assert_eq!(by_kind["mut_ben"].1, np.clone());
    assert_eq!(by_kind["mut_del"].1, np.clone());
    // Per-instance values.
    assert_eq!(by_kind["neutral"].0, rational(1.0) / rational(10.0));
    assert_eq!(by_kind["interactive"].0, rational(0.5) / rational(50.0));
    assert_eq!(by_kind["mut_ben"].0, rational(0.2) * rational(0.5));
    assert_eq!(
        by_kind["selective_2"].0,
        s_tilde(&p.selection(), 2, 5) / BigRational::from_integer(binomial(5, 2))
    );
}

#[test]
fn event_stream_is_deterministic_and_seed_sensitive() {
    let p = params(5);
    let a = sample_event_stream(&p, 2.0, 7);
    let b = sample_event_stream(&p, 2.0, 7);
    let c = sample_event_stream(&p, 2.0, 8);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_ne!(format!("{a:?}"), format!("{c:?}"));
    let mut last = 0.0;
    for (t, _) in &a.events {
        assert!(*t > last && *t <= 2.0, "event times increasing within horizon");
        last = *t;
    }
}

#[test]
fn event_stream_json_round_trip() {
    let p = params(4);
    let stream = sample_event_stream(&p, 1.5, 11);
    let text = stream.to_json_lines();
    let back = EventStream::from_json_lines(1.5, &text).expect("parse");
    assert_eq!(format!("{stream:?}"), format!("{back:?}"));
}

#[test]
fn forward_type_rules_hand_example() {
    use IndType::{Fit, Unfit};
    let stream = EventStream {
        horizon: 1.0,
        events: vec![
            // Unfit 1 reproduces into 3.
            (0.1, GraphicalEvent::Neutral { alpha: 3, beta: 1 }),
            // Interactive: 2 would copy into 4, but checker 1 is unfit: no-op.
            (0.2, GraphicalEvent::Interactive { alpha: 4, beta: 2, gamma: 1 }),
            // Interactive: 3 copies into 2, checker 4 is fit: 2 turns unfit.
            (0.3, GraphicalEvent::Interactive { alpha: 2, beta: 3, gamma: 4 }),
            // Selective: 1 is rescued by the fit member 4 of B.
            (0.4, GraphicalEvent::Selective { alpha: 1, set: BTreeSet::from([3, 4]) }),
            (0.5, GraphicalEvent::MutDel { alpha: 4 }),
        ],
    };
    let start = vec![Unfit, Fit, Fit, Fit];
    let end = propagate_types(&start, &stream);
    assert_eq!(end, vec![Fit, Unfit, Unfit, Unfit]);
}

#[test]
fn simulate_counts_deterministic_and_bounded() {
    let p = params(6);
    let a = simulate_counts(&p, 3, 2.0, 99);
    let b = simulate_counts(&p, 3, 2.0, 99);
    assert_eq!(a, b);
    assert_eq!(a.first().unwrap(), &(0.0, 3));
    assert!((a.last().unwrap().0 - 2.0).abs() < 1e-12);
    for (t, n) in &a {
        assert!(*t >= 0.0 && *t <= 2.0 + 1e-12);
        assert!(*n <= 6);
    }
    let c = simulate_counts(&p, 3, 2.0, 100);
    assert_ne!(a, c, "different seeds should give different skeletons");
}
