//! Ancestral influence graph (AIG) construction by time reversal, the
//! role-erased quasi variant, forward type maps and compatibility, and the
//! configuration processes driven by the captured events.

use crate::combinatorics::{binomial, p_mj, SelectionRates};
use crate::cylinder::{op_coal, op_ftw, op_interactive, op_mut_ben, op_mut_del, Cylinder, CylinderSet};
use crate::model::{apply_event_types, EventStream, GraphicalEvent, IndType, ModelParams};
use crate::rational;
use num::{BigInt, BigRational, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Diagnostic classification of a captured event (does not affect dynamics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaptureClass {
    Relocation,
    Coalescence,
    SelectiveBranching,
    TernaryBranching,
    PairwiseBranching,
    BinaryBranching,
    Collision,
    Mutation,
}

/// One captured event of the backward graph, at backward time `r = τ − t`.
#[derive(Debug, Clone)]
pub struct CapturedEvent {
    pub backward_time: f64,
    pub event: GraphicalEvent,
    pub class: CaptureClass,
}

/// Ancestral influence graph for a root sample, traced back over a window.
#[derive(Debug, Clone)]
pub struct Aig {
    pub root_set: BTreeSet<u32>,
    pub horizon: f64,
    /// Piecewise-constant line sets: `(backward time, set after that time)`,
    /// starting with `(0, root_set)`.
    pub snapshots: Vec<(f64, BTreeSet<u32>)>,
    /// Captured events in increasing backward time.
    pub captured: Vec<CapturedEvent>,
}

impl Aig {
    /// Line set at the end of the window (the leaves of the graph).
    pub fn leaf_set(&self) -> &BTreeSet<u32> {
        &self.snapshots.last().expect("nonempty snapshots").1
    }
}

fn classify(event: &GraphicalEvent, g: &BTreeSet<u32>) -> CaptureClass {
    match event {
        GraphicalEvent::Neutral { beta, .. } => {
            if g.contains(beta) {
                CaptureClass::Coalescence
            } else {
                CaptureClass::Relocation
            }
        }
        GraphicalEvent::Interactive { alpha, beta, gamma }
        | GraphicalEvent::InteractiveQuasi { alpha, beta, gamma } => {
            let trio: BTreeSet<u32> = [*alpha, *beta, *gamma].into_iter().collect();
            if trio.iter().all(|l| g.contains(l)) {
                CaptureClass::Collision
            } else if gamma == alpha || gamma == beta {
                CaptureClass::BinaryBranching
            } else if g.contains(beta) || g.contains(gamma) {
                CaptureClass::PairwiseBranching
            } else {
                CaptureClass::TernaryBranching
            }
        }
        GraphicalEvent::Selective { .. } => CaptureClass::SelectiveBranching,
        GraphicalEvent::MutDel { .. } | GraphicalEvent::MutBen { .. } => CaptureClass::Mutation,
    }
}

/// Builds the AIG of `root_set` by reversing `stream` at forward time `tau`
/// over the backward window `[0, t]`.
///
/// An event is captured iff its tip/mark line `α` lies in the current set;
/// captured neutral arrows relocate (`G ← (G∖{α})∪{β}`), selective events add
/// their parent set, interactive events add `{β, γ}`, mutations leave the set
/// unchanged.
pub fn build_aig(stream: &EventStream, tau: f64, root_set: &BTreeSet<u32>, t: f64) -> Aig {
    assert!(t >= 0.0 && tau <= stream.horizon + 1e-12);
    let mut g = root_set.clone();
    let mut snapshots = vec![(0.0, g.clone())];
    let mut captured = Vec::new();
    let mut window: Vec<&(f64, GraphicalEvent)> = stream
        .events
        .iter()
        .filter(|(ft, _)| *ft <= tau && tau - *ft < t)
        .collect();
    window.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite times"));
    for (ft, event) in window {
        if !g.contains(&event.alpha()) {
            continue;
        }
        let class = classify(event, &g);
        match event {
            GraphicalEvent::Neutral { alpha, beta } => {
                g.remove(alpha);
                g.insert(*beta);
            }
            GraphicalEvent::Selective { set, .. } => {
                g.extend(set.iter().copied());
            }
            GraphicalEvent::Interactive { beta, gamma, .. }
            | GraphicalEvent::InteractiveQuasi { beta, gamma, .. } => {
                g.insert(*beta);
                g.insert(*gamma);
            }
            GraphicalEvent::MutDel { .. } | GraphicalEvent::MutBen { .. } => {}
        }
        let r = tau - ft;
        captured.push(CapturedEvent {
            backward_time: r,
            event: event.clone(),
            class,
        });
        snapshots.push((r, g.clone()));
    }
    Aig {
        root_set: root_set.clone(),
        horizon: t,
        snapshots,
        captured,
    }
}

/// Line-count jump rates of the AIG at a set of size `n`:
/// `+j (j≥3)` at `n Σ_{m≥j} s_m p^n_{mj}`;
/// `+2` at `(κ/N)(n/N)C(N−n,2) + n Σ_{m≥2} s_m p^n_{m2}`;
/// `+1` at `2(κ/N)C(n,2)(N−n)/N + (κ/N)n(N−n)/N + n Σ_m s_m p^n_{m1}`;
/// `−1` at `(r/N)C(n,2)`.
pub fn aig_line_count_rates(params: &ModelParams, n: u64) -> BTreeMap<i64, BigRational> {
    assert!(n >= 1 && n <= params.n_pop);
    let np = params.n_pop;
    let npr = BigRational::from_integer(BigInt::from(np));
    let nn = BigRational::from_integer(BigInt::from(n));
    let gap = BigRational::from_integer(BigInt::from(np - n));
    let kappa = rational(params.kappa);
    let r = rational(params.r);
    let choose2 = |x: u64| BigRational::from_integer(binomial(x, 2));
    let sel = params.selection();
    let sel_sum = |j: u32| -> BigRational {
        let mut acc = BigRational::zero();
        for m in j as usize..=sel.max_order() {
            acc += sel.rate(m) * p_mj(np, n, m as u32, j);
        }
        &nn * acc
    };
    let mut rates = BTreeMap::new();
    for j in 3..=sel.max_order() as i64 {
        let v = sel_sum(j as u32);
        if !v.is_zero() {
            rates.insert(j, v);
        }
    }
    let up2 = &kappa / &npr * (&nn / &npr) * choose2(np - n) + sel_sum(2);
    let up1 = BigRational::from_integer(BigInt::from(2)) * &kappa / &npr * choose2(n) * (&gap / &npr)
        + &kappa / &npr * &nn * (&gap / &npr)
        + sel_sum(1);
    let down = &r / &npr * choose2(n);
    for (jump, v) in [(2i64, up2), (1, up1), (-1, down)] {
        if !v.is_zero() {
            rates.insert(jump, v);
        }
    }
    rates
}

/// Propagates a leaf-type configuration forward through the captured events;
/// returns the types at the root set.
pub fn forward_type_map(
    aig: &Aig,
    leaf_config: &BTreeMap<u32, IndType>,
) -> BTreeMap<u32, IndType> {
    assert_eq!(
        leaf_config.keys().copied().collect::<BTreeSet<u32>>(),
        *aig.leaf_set(),
        "leaf config must cover exactly the leaf set"
    );
    // Work over full-width vectors; lines never queried before definition by
    // construction of the graph.
    let max_line = aig
        .snapshots
        .iter()
        .flat_map(|(_, g)| g.iter().copied())
        .max()
        .unwrap_or(1);
    let mut types = vec![IndType::Unfit; max_line as usize];
    for (&l, &t) in leaf_config {
        types[(l - 1) as usize] = t;
    }
    for cap in aig.captured.iter().rev() {
        apply_event_types(&mut types, &cap.event);
    }
    aig.root_set
        .iter()
        .map(|&l| (l, types[(l - 1) as usize]))
        .collect()
}

/// Enumerates every leaf configuration whose forward image lies in `s`.
/// Refuses leaf sets larger than 20 lines.
pub fn compatible_set_bruteforce(aig: &Aig, s: &Cylinder) -> Vec<BTreeMap<u32, IndType>> {
    let leaves: Vec<u32> = aig.leaf_set().iter().copied().collect();
    assert!(leaves.len() <= 20, "leaf set too large for enumeration");
    let mut out = Vec::new();
    for mask in 0u32..(1 << leaves.len()) {
        let config: BTreeMap<u32, IndType> = leaves
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let t = if mask >> i & 1 == 1 {
                    IndType::Fit
                } else {
                    IndType::Unfit
                };
                (l, t)
            })
            .collect();
        let root = forward_type_map(aig, &config);
        if !s.is_empty() && s.contains_map(&root) {
            out.push(config);
        }
    }
    out
}

/// Erases interactive role information: `(α,β,γ) ↦ (α, β∧γ, β∨γ)` when the
/// checking line is a third party, else `(α, β, β)`.
pub fn quasi_project(event: &GraphicalEvent) -> GraphicalEvent {
    match *event {
        GraphicalEvent::Interactive { alpha, beta, gamma } => {
            if gamma != alpha && gamma != beta {
                GraphicalEvent::InteractiveQuasi {
                    alpha,
                    beta: beta.min(gamma),
                    gamma: beta.max(gamma),
                }
            } else {
                GraphicalEvent::InteractiveQuasi {
                    alpha,
                    beta,
                    gamma: beta,
                }
            }
        }
        ref other => other.clone(),
    }
}

/// Path value for the configuration process on paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum V {
    Down,
    Up,
}

impl V {
    pub fn flip(self) -> V {
        match self {
            V::Down => V::Up,
            V::Up => V::Down,
        }
    }
}

/// Reinstates roles in a quasi event according to a path value: for `β < γ`,
/// `↓` keeps `(α,β,γ)` and `↑` swaps to `(α,γ,β)`; for `β = γ`, `↓` yields the
/// self-parent form `(α,β,β)` and `↑` the self-checking form `(α,β,α)`.
pub fn lift(event: &GraphicalEvent, v: V) -> GraphicalEvent {
    match *event {
        GraphicalEvent::InteractiveQuasi { alpha, beta, gamma } => {
            if beta < gamma {
                match v {
                    V::Down => GraphicalEvent::Interactive { alpha, beta, gamma },
                    V::Up => GraphicalEvent::Interactive {
                        alpha,
                        beta: gamma,
                        gamma: beta,
                    },
                }
            } else {
                match v {
                    V::Down => GraphicalEvent::Interactive {
                        alpha,
                        beta,
                        gamma: beta,
                    },
                    V::Up => GraphicalEvent::Interactive {
                        alpha,
                        beta,
                        gamma: alpha,
                    },
                }
            }
        }
        ref other => other.clone(),
    }
}

/// Applies one (role-resolved) event's cylinder op to a single cylinder,
/// returning all output cylinders (empties retained).
pub fn apply_single(c: &Cylinder, event: &GraphicalEvent) -> CylinderSet {
    if c.is_empty() {
        let n_out = match event {
            GraphicalEvent::Interactive { .. } => 2,
            _ => 1,
        };
        return vec![Cylinder::empty(); n_out];
    }
    match event {
        GraphicalEvent::Neutral { alpha, beta } => vec![op_coal(c, *alpha, *beta)],
        GraphicalEvent::MutDel { alpha } => vec![op_mut_del(c, *alpha)],
        GraphicalEvent::MutBen { alpha } => vec![op_mut_ben(c, *alpha)],
        GraphicalEvent::Selective { alpha, set } => op_ftw(c, *alpha, set),
        GraphicalEvent::Interactive { alpha, beta, gamma } => {
            let (c1, c2) = op_interactive(c, *alpha, *beta, *gamma);
            vec![c1, c2]
        }
        GraphicalEvent::InteractiveQuasi { .. } => {
            panic!("quasi events must be lifted before the cylinder ops")
        }
    }
}

fn apply_config_event(state: CylinderSet, event: &GraphicalEvent) -> CylinderSet {
    state.iter().flat_map(|c| apply_single(c, event)).collect()
}

/// Runs the configuration process: applies the cylinder ops event-by-event to
/// the captured events of a (role-resolved) AIG, keeping empties.
pub fn run_configuration_process(s: &Cylinder, aig: &Aig) -> CylinderSet {
    let mut state = vec![s.clone()];
    for cap in &aig.captured {
        state = apply_config_event(state, &cap.event);
    }
    state
}

/// Runs the configuration process on a path: the `k`-th interactive event is
/// lifted through `v[k]` before applying the interactive op.
pub fn run_configuration_on_path(s: &Cylinder, v: &[V], aig: &Aig) -> CylinderSet {
    let mut state = vec![s.clone()];
    let mut k = 0;
    for cap in &aig.captured {
        let event = match &cap.event {
            q @ GraphicalEvent::InteractiveQuasi { .. } => {
                let vk = *v.get(k).expect("path long enough for interactive events");
                k += 1;
                lift(q, vk)
            }
            GraphicalEvent::Interactive { .. } => {
                panic!("path runs expect quasi interactive events")
            }
            other => other.clone(),
        };
        state = apply_config_event(state, &event);
    }
    state
}

/// Number of quasi interactive events captured by an AIG.
pub fn interactive_count(aig: &Aig) -> usize {
    aig.captured
        .iter()
        .filter(|c| {
            matches!(
                c.event,
                GraphicalEvent::InteractiveQuasi { .. } | GraphicalEvent::Interactive { .. }
            )
        })
        .count()
}

/// Uniformly samples an `n`-subset of `[N]` (the root sample of the theorem).
pub fn sample_root_set(n_pop: u64, n: u64, rng: &mut impl rand::Rng) -> BTreeSet<u32> {
    use rand::seq::SliceRandom;
    let mut pool: Vec<u32> = (1..=n_pop as u32).collect();
    pool.shuffle(rng);
    pool.truncate(n as usize);
    pool.into_iter().collect()
}

/// Converts every interactive event of a stream into its quasi form.
pub fn quasi_stream(stream: &EventStream) -> EventStream {
    EventStream {
        horizon: stream.horizon,
        events: stream
            .events
            .iter()
            .map(|(t, e)| (*t, quasi_project(e)))
            .collect(),
    }
}

/// Selection-rate view used by tests needing the module-level types together.
pub fn selection_of(params: &ModelParams) -> SelectionRates {
    params.selection()
}
