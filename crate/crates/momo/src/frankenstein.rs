//! The Frankenstein matching (recombining the two interactive-event output
//! cylinders across role choices into two R-cylinders), the single-cylinder
//! Frankenstein process, the R-counting rate law, and the messy bookkeeping
//! process whose permuted union assembles the Frankenstein cylinder.

use crate::ancestry::{lift, Aig, V};
use crate::combinatorics::{binomial, p_mj};
use crate::cylinder::{
    op_coal, op_ftw, op_interactive, op_mut_ben, op_mut_del, union_two, Cylinder,
};
use crate::matrix::GeneratorMatrix;
use crate::model::{GraphicalEvent, ModelParams};
use crate::{rational, to_f64};
use num::{BigInt, BigRational, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Path value of the Frankenstein process (⇓ / ⇑); `iota` identifies it with
/// the configuration-path alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum W {
    Down,
    Up,
}

impl W {
    pub fn flip(self) -> W {
        match self {
            W::Down => W::Up,
            W::Up => W::Down,
        }
    }

    /// The involution identifying ⇓ with ↓ and ⇑ with ↑.
    pub fn iota(self) -> V {
        match self {
            W::Down => V::Down,
            W::Up => V::Up,
        }
    }
}

/// Finite-support permutation of lines (identity outside the stored map).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: BTreeMap<u32, u32>,
}

impl Permutation {
    pub fn identity() -> Self {
        Permutation {
            map: BTreeMap::new(),
        }
    }

    pub fn transposition(a: u32, b: u32) -> Self {
        let mut map = BTreeMap::new();
        if a != b {
            map.insert(a, b);
            map.insert(b, a);
        }
        Permutation { map }
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, line: u32) -> u32 {
        *self.map.get(&line).unwrap_or(&line)
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            map: self.map.iter().map(|(&k, &v)| (v, k)).collect(),
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let support: BTreeSet<u32> = self
            .map
            .keys()
            .chain(other.map.keys())
            .copied()
            .collect();
        let map = support
            .into_iter()
            .map(|l| (l, self.apply(other.apply(l))))
            .filter(|(l, v)| l != v)
            .collect();
        Permutation { map }
    }

    /// Cycle notation for diagnostics, e.g. `(1 4)` or `id`.
    pub fn to_cycles(&self) -> String {
        if self.is_identity() {
            return "id".to_string();
        }
        let mut seen = BTreeSet::new();
        let mut out = String::new();
        for &start in self.map.keys() {
            if seen.contains(&start) {
                continue;
            }
            let mut cycle = vec![start];
            seen.insert(start);
            let mut cur = self.apply(start);
            while cur != start {
                cycle.push(cur);
                seen.insert(cur);
                cur = self.apply(cur);
            }
            if cycle.len() > 1 {
                out.push('(');
                out.push_str(
                    &cycle
                        .iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                );
                out.push(')');
            }
        }
        out
    }
}

/// Virtual-position map: the branch feeding the second constituent is flipped
/// iff `C_α = R` and all but one of the affected coordinates are `R`.
pub fn f_map(c: &Cylinder, alpha: u32, beta: u32, gamma: u32) -> bool {
    assert!(!c.is_empty() && c.is_r_cylinder());
    let d: BTreeSet<u32> = [alpha, beta, gamma].into_iter().collect();
    let n_r = d
        .iter()
        .filter(|&&l| c.cell(l) == crate::cylinder::Cell::R)
        .count();
    c.cell(alpha) == crate::cylinder::Cell::R && n_r == d.len() - 1
}

/// Full outcome of a Frankenstein matching step at one quasi interactive
/// event, including the raw constituents and the permutations (needed by the
/// messy process).
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    /// Ĉ⇓ and Ĉ⇑.
    pub down: Cylinder,
    pub up: Cylinder,
    /// Whether the second constituents are cross-routed between branches.
    pub flip: bool,
    /// Permutations applied to the second constituent of each target.
    pub sigma_down: Permutation,
    pub sigma_up: Permutation,
    /// Raw constituent pairs `(C̃^(v,1), C̃^(v,2))` for `v = ↓` and `v = ↑`.
    pub constituents_down: (Cylinder, Cylinder),
    pub constituents_up: (Cylinder, Cylinder),
}

fn assemble_target(
    first: &Cylinder,
    second: &Cylinder,
    sigma: &Permutation,
) -> Option<Cylinder> {
    let second = if sigma.is_identity() {
        second.clone()
    } else {
        second.relabel(|l| sigma.apply(l))
    };
    let joined = union_two(first, &second)?;
    if joined.is_r_cylinder() {
        Some(joined)
    } else {
        None
    }
}

/// Matches the four interactive-event constituents of an R-cylinder into the
/// two R-cylinders Ĉ⇓ and Ĉ⇑.
///
/// For target `v`, the pair is `(C̃^(v,1), C̃^(f(v),2))`; the permutation is
/// the identity whenever the plain union is already an R-cylinder (always for
/// `β = γ`), and otherwise the transposition `(α β)` for `⇓` / `(α γ)` for
/// `⇑` applied to the second constituent.
pub fn frankenstein_match(c: &Cylinder, alpha: u32, beta: u32, gamma: u32) -> MatchOutcome {
    assert!(beta <= gamma && beta != alpha && gamma != alpha);
    assert!(!c.is_empty() && c.is_r_cylinder(), "R-cylinder input required");
    assert!(c.index_set().contains(&alpha));
    let quasi = GraphicalEvent::InteractiveQuasi { alpha, beta, gamma };
    let run = |v: V| -> (Cylinder, Cylinder) {
        match lift(&quasi, v) {
            GraphicalEvent::Interactive {
                alpha: a,
                beta: b,
                gamma: g,
            } => op_interactive(c, a, b, g),
            _ => unreachable!(),
        }
    };
    let cons_down = run(V::Down);
    let cons_up = run(V::Up);
    let flip = f_map(c, alpha, beta, gamma);
    let build = |w: W| -> (Cylinder, Permutation) {
        let first = match w {
            W::Down => &cons_down.0,
            W::Up => &cons_up.0,
        };
        let source = if flip { w.flip() } else { w };
        let second = match source {
            W::Down => &cons_down.1,
            W::Up => &cons_up.1,
        };
        let id = Permutation::identity();
        if beta == gamma || second.is_empty() {
            let joined = assemble_target(first, second, &id)
                .expect("β=γ or empty-second matching must join plainly");
            return (joined, id);
        }
        if let Some(joined) = assemble_target(first, second, &id) {
            return (joined, id);
        }
        let sigma = match w {
            W::Down => Permutation::transposition(alpha, beta),
            W::Up => Permutation::transposition(alpha, gamma),
        };
        let joined = assemble_target(first, second, &sigma)
            .expect("permuted union must be an R-cylinder");
        (joined, sigma)
    };
    let (down, sigma_down) = build(W::Down);
    let (up, sigma_up) = build(W::Up);
    MatchOutcome {
        down,
        up,
        flip,
        sigma_down,
        sigma_up,
        constituents_down: cons_down,
        constituents_up: cons_up,
    }
}

fn frankenstein_step(phi: &Cylinder, event: &GraphicalEvent) -> Cylinder {
    if phi.is_empty() {
        return Cylinder::empty();
    }
    match event {
        GraphicalEvent::Neutral { alpha, beta } => op_coal(phi, *alpha, *beta),
        GraphicalEvent::MutDel { alpha } => op_mut_del(phi, *alpha),
        GraphicalEvent::MutBen { alpha } => op_mut_ben(phi, *alpha),
        GraphicalEvent::Selective { alpha, set } => {
            // On an R-cylinder the offspring cell is never B, so the event is
            // single-valued.
            let mut out = op_ftw(phi, *alpha, set);
            assert_eq!(out.len(), 1, "FTW is single-valued on R-cylinders");
            out.pop().unwrap()
        }
        GraphicalEvent::Interactive { .. } | GraphicalEvent::InteractiveQuasi { .. } => {
            panic!("interactive events are handled via frankenstein_match")
        }
    }
}

/// Runs the Frankenstein process on a fixed path `w` over the captured events
/// of a quasi-AIG; the state is a single R-cylinder (possibly ∅).
pub fn run_frankenstein_on_path(s: &Cylinder, w: &[W], aig: &Aig) -> Cylinder {
    assert!(s.is_r_cylinder());
    let mut phi = s.clone();
    let mut k = 0;
    for cap in &aig.captured {
        match &cap.event {
            GraphicalEvent::InteractiveQuasi { alpha, beta, gamma } => {
                let wk = *w.get(k).expect("path long enough");
                k += 1;
                if phi.is_empty() {
                    continue;
                }
                let mo = frankenstein_match(&phi, *alpha, *beta, *gamma);
                phi = match wk {
                    W::Down => mo.down,
                    W::Up => mo.up,
                };
            }
            GraphicalEvent::Interactive { .. } => {
                panic!("Frankenstein runs expect quasi interactive events")
            }
            other => phi = frankenstein_step(&phi, other),
        }
    }
    phi
}

/// Runs the Frankenstein process with an i.i.d. fair path drawn from `seed`.
pub fn run_frankenstein(s: &Cylinder, aig: &Aig, seed: u64) -> Cylinder {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_int = crate::ancestry::interactive_count(aig);
    let w: Vec<W> = (0..n_int)
        .map(|_| if rng.gen::<bool>() { W::Down } else { W::Up })
        .collect();
    run_frankenstein_on_path(s, &w, aig)
}

/// Exact rate rows of the R-counting chain on `{0..N} ∪ {Δ}`:
/// `n → n+j (j≥2)` at `n Σ_{m≥j} s_m p^n_{mj}`;
/// `n → n+1` at `(κ/N)C(n,2)(N−n)/N + n Σ_m s_m p^n_{m1}`;
/// `n → n−1` at `(1/N)C(n,2)(r + κ(N−n+1)/N) + uν₁n`;
/// `n → Δ` at `uν₀n`; `0` and `Δ` absorbing.
pub fn r_counting_rates_exact(params: &ModelParams, n: u64) -> BTreeMap<RJump, BigRational> {
    let np = params.n_pop;
    assert!(n <= np);
    let mut rates = BTreeMap::new();
    if n == 0 {
        return rates;
    }
    let npr = BigRational::from_integer(BigInt::from(np));
    let nn = BigRational::from_integer(BigInt::from(n));
    let choose2 = BigRational::from_integer(binomial(n, 2));
    let gap = BigRational::from_integer(BigInt::from(np - n));
    let kappa = rational(params.kappa);
    let sel = params.selection();
    let sel_sum = |j: u32| -> BigRational {
        let mut acc = BigRational::zero();
        for m in j as usize..=sel.max_order() {
            acc += sel.rate(m) * p_mj(np, n, m as u32, j);
        }
        &nn * acc
    };
    for j in 2..=sel.max_order() as i64 {
        let v = sel_sum(j as u32);
        if !v.is_zero() {
            rates.insert(RJump::Shift(j), v);
        }
    }
    let up1 = &kappa / &npr * &choose2 * (&gap / &npr) + sel_sum(1);
    let down = &choose2 / &npr
        * (rational(params.r)
            + &kappa * BigRational::from_integer(BigInt::from(np - n + 1)) / &npr)
        + rational(params.u) * rational(params.nu1) * &nn;
    let kill = rational(params.u) * rational(params.nu0) * &nn;
    for (jump, v) in [(RJump::Shift(1), up1), (RJump::Shift(-1), down), (RJump::Kill, kill)] {
        if !v.is_zero() {
            rates.insert(jump, v);
        }
    }
    rates
}

/// Jump of the R-counting chain: a shift of the count or absorption at Δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RJump {
    Shift(i64),
    Kill,
}

/// Generator of the R-counting chain as a dense float matrix on
/// `{0..N, Δ}` with Δ encoded as index `N+1`.
pub fn r_counting_generator(params: &ModelParams) -> GeneratorMatrix {
    let np = params.n_pop as usize;
    let dim = np + 2;
    let mut rows = vec![vec![0.0; dim]; dim];
    for (n, row) in rows.iter_mut().enumerate().take(np + 1).skip(1) {
        let mut diag = 0.0;
        for (jump, rate) in r_counting_rates_exact(params, n as u64) {
            let rate = to_f64(&rate);
            let col = match jump {
                RJump::Shift(j) => {
                    let target = n as i64 + j;
                    assert!((0..=np as i64).contains(&target));
                    target as usize
                }
                RJump::Kill => np + 1,
            };
            row[col] += rate;
            diag += rate;
        }
        row[n] = -diag;
    }
    let mut g = GeneratorMatrix::from_rows(rows);
    g.labels = (0..=np)
        .map(|i| i.to_string())
        .chain(std::iter::once("Delta".to_string()))
        .collect();
    g
}

/// One aggregated jump entry of the induced-rate report.
#[derive(Debug, Clone, Serialize)]
pub struct InducedRateEntry {
    pub jump: String,
    pub expected_rate: String,
    pub computed_rate: String,
    pub equal: bool,
}

/// Report of [`induced_rate_check`].
#[derive(Debug, Clone, Serialize)]
pub struct InducedRateReport {
    pub n_pop: u64,
    pub n: u64,
    pub entries: Vec<InducedRateEntry>,
    pub pass: bool,
}

/// Enumerates every quasi-event instance acting on a canonical R-cylinder
/// with `n` R-cells (lines `1..=n` of `[N]`), both path branches at half the
/// instance rate, aggregates the induced R-count jumps, and compares with the
/// R-counting chain row exactly.
pub fn induced_rate_check(params: &ModelParams, n: u64) -> InducedRateReport {
    let np = params.n_pop;
    assert!(n >= 1 && n <= np);
    let c = Cylinder::all_r(1..=n as u32);
    let npr = BigRational::from_integer(BigInt::from(np));
    let mut agg: BTreeMap<RJump, BigRational> = BTreeMap::new();
    let add = |jump: RJump, rate: BigRational, agg: &mut BTreeMap<RJump, BigRational>| {
        if jump != RJump::Shift(0) {
            *agg.entry(jump).or_insert_with(BigRational::zero) += rate;
        }
    };
    let jump_of = |out: &Cylinder| -> RJump {
        if out.is_empty() {
            RJump::Kill
        } else {
            RJump::Shift(out.n_r() as i64 - n as i64)
        }
    };
    // Neutral arrows (α ∈ I, β ≠ α) at r/(2N) each.
    let neutral_rate = rational(params.r) / (BigRational::from_integer(BigInt::from(2)) * &npr);
    for alpha in 1..=n as u32 {
        for beta in 1..=np as u32 {
            if beta == alpha {
                continue;
            }
            let out = op_coal(&c, alpha, beta);
            add(jump_of(&out), neutral_rate.clone(), &mut agg);
        }
    }
    // Quasi interactive instances (α ∈ I, β ≤ γ, both ≠ α), each branch at
    // κ/(2N²) (the two role orderings at κ/(2N²) each, split fairly over w).
    let int_rate = rational(params.kappa)
        / (BigRational::from_integer(BigInt::from(2)) * &npr * &npr);
    for alpha in 1..=n as u32 {
        for beta in 1..=np as u32 {
            if beta == alpha {
                continue;
            }
            for gamma in beta..=np as u32 {
                if gamma == alpha {
                    continue;
                }
                let mo = frankenstein_match(&c, alpha, beta, gamma);
                add(jump_of(&mo.down), int_rate.clone(), &mut agg);
                add(jump_of(&mo.up), int_rate.clone(), &mut agg);
            }
        }
    }
    // Selective instances (α ∈ I, B ≠ {α}) at s̃_j / C(N,j) each.
    let sel = params.selection();
    for j in 1..=params.max_sel_order() {
        let s_tilde_j = crate::combinatorics::s_tilde(&sel, j as u32, np);
        if s_tilde_j.is_zero() {
            continue;
        }
        let per_instance = s_tilde_j / BigRational::from_integer(binomial(np, j));
        for alpha in 1..=n as u32 {
            for set in subsets_of_size(np as u32, j as usize) {
                if set.len() == 1 && set.contains(&alpha) {
                    continue;
                }
                let outs = op_ftw(&c, alpha, &set);
                assert_eq!(outs.len(), 1);
                add(jump_of(&outs[0]), per_instance.clone(), &mut agg);
            }
        }
    }
    // Mutation marks on lines of I.
    let nn = BigRational::from_integer(BigInt::from(n));
    let del_rate = rational(params.u) * rational(params.nu1) * &nn;
    let ben_rate = rational(params.u) * rational(params.nu0) * &nn;
    if !del_rate.is_zero() {
        add(RJump::Shift(-1), del_rate, &mut agg);
    }
    if !ben_rate.is_zero() {
        add(RJump::Kill, ben_rate, &mut agg);
    }
    agg.retain(|_, v| !v.is_zero());
    let expected = r_counting_rates_exact(params, n);
    let jumps: BTreeSet<RJump> = agg.keys().chain(expected.keys()).copied().collect();
    let mut entries = Vec::new();
    let mut pass = true;
    for jump in jumps {
        let exp = expected.get(&jump).cloned().unwrap_or_else(BigRational::zero);
        let got = agg.get(&jump).cloned().unwrap_or_else(BigRational::zero);
        let equal = exp == got;
        pass &= equal;
        entries.push(InducedRateEntry {
            jump: match jump {
                RJump::Shift(j) => format!("{j:+}"),
                RJump::Kill => "Delta".to_string(),
            },
            expected_rate: exp.to_string(),
            computed_rate: got.to_string(),
            equal,
        });
    }
    InducedRateReport {
        n_pop: np,
        n,
        entries,
        pass,
    }
}

fn subsets_of_size(n: u32, k: usize) -> Vec<BTreeSet<u32>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: u32, n: u32, k: usize, current: &mut Vec<u32>, out: &mut Vec<BTreeSet<u32>>) {
        if current.len() == k {
            out.push(current.iter().copied().collect());
            return;
        }
        for l in start..=n {
            current.push(l);
            rec(l + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(1, n, k, &mut current, &mut out);
    out
}

/// State of the messy process: cylinder/permutation pairs plus the number of
/// interactive events consumed.
#[derive(Debug, Clone)]
pub struct MessyState {
    pub pairs: Vec<(Cylinder, Permutation)>,
    pub consumed: usize,
    /// True when a non-identity matching permutation was applied while later
    /// events remained: only then can the path-averaged configuration and
    /// Frankenstein probabilities differ for this realization (their equality
    /// in general holds in expectation over realizations, by permutation
    /// invariance of the driving Poisson process).
    pub permutation_used: bool,
}

/// Runs the messy process on path `w`: between interactive events each pair
/// evolves as the configuration process under its `σ_C⁻¹`-relabeled stream;
/// at an interactive event every pair splits into the two matching
/// constituents, the second receiving `σ_{k+1} ∘ σ_C` with `σ_{k+1}` taken
/// from the parallel Frankenstein track in original coordinates.
pub fn run_messy(s: &Cylinder, w: &[W], aig: &Aig) -> MessyState {
    assert!(s.is_r_cylinder());
    let mut phi = s.clone();
    let mut pairs: Vec<(Cylinder, Permutation)> = vec![(s.clone(), Permutation::identity())];
    let mut k = 0;
    let mut permutation_used = false;
    let total = aig.captured.len();
    for (idx, cap) in aig.captured.iter().enumerate() {
        match &cap.event {
            GraphicalEvent::InteractiveQuasi { alpha, beta, gamma } => {
                let wk = *w.get(k).expect("path long enough");
                k += 1;
                if phi.is_empty() {
                    // The Frankenstein track is dead; every pair is ∅ and
                    // simply doubles, keeping branch counts aligned.
                    assert!(pairs.iter().all(|(c, _)| c.is_empty()));
                    pairs = pairs
                        .iter()
                        .flat_map(|(_, sigma_c)| {
                            [
                                (Cylinder::empty(), sigma_c.clone()),
                                (Cylinder::empty(), sigma_c.clone()),
                            ]
                        })
                        .collect();
                    continue;
                }
                let mo = frankenstein_match(&phi, *alpha, *beta, *gamma);
                let sigma_k = match wk {
                    W::Down => mo.sigma_down.clone(),
                    W::Up => mo.sigma_up.clone(),
                };
                if !sigma_k.is_identity() && idx + 1 < total {
                    permutation_used = true;
                }
                let mut next = Vec::new();
                for (c, sigma_c) in &pairs {
                    let composed = sigma_k.compose(sigma_c);
                    if c.is_empty() {
                        next.push((Cylinder::empty(), sigma_c.clone()));
                        next.push((Cylinder::empty(), composed));
                        continue;
                    }
                    let inv = sigma_c.inverse();
                    let a = inv.apply(*alpha);
                    let b = inv.apply(*beta);
                    let g = inv.apply(*gamma);
                    let (bp, gp) = (b.min(g), b.max(g));
                    let wp = if b <= g { wk } else { wk.flip() };
                    let v1 = wp.iota();
                    let v2 = if mo.flip { v1.flip() } else { v1 };
                    let quasi = GraphicalEvent::InteractiveQuasi {
                        alpha: a,
                        beta: bp,
                        gamma: gp,
                    };
                    let first = match lift(&quasi, v1) {
                        GraphicalEvent::Interactive { alpha, beta, gamma } => {
                            op_interactive(c, alpha, beta, gamma).0
                        }
                        _ => unreachable!(),
                    };
                    let second = match lift(&quasi, v2) {
                        GraphicalEvent::Interactive { alpha, beta, gamma } => {
                            op_interactive(c, alpha, beta, gamma).1
                        }
                        _ => unreachable!(),
                    };
                    next.push((first, sigma_c.clone()));
                    next.push((second, composed));
                }
                pairs = next;
                phi = match wk {
                    W::Down => mo.down,
                    W::Up => mo.up,
                };
            }
            GraphicalEvent::Interactive { .. } => {
                panic!("messy runs expect quasi interactive events")
            }
            other => {
                phi = frankenstein_step(&phi, other);
                let mut next = Vec::new();
                for (c, sigma_c) in &pairs {
                    if c.is_empty() {
                        next.push((Cylinder::empty(), sigma_c.clone()));
                        continue;
                    }
                    let inv = sigma_c.inverse();
                    let relabeled = relabel_event(other, &inv);
                    for out in crate::ancestry::apply_single(c, &relabeled) {
                        next.push((out, sigma_c.clone()));
                    }
                }
                pairs = next;
            }
        }
    }
    MessyState {
        pairs,
        consumed: k,
        permutation_used,
    }
}

fn relabel_event(event: &GraphicalEvent, perm: &Permutation) -> GraphicalEvent {
    match event {
        GraphicalEvent::Neutral { alpha, beta } => GraphicalEvent::Neutral {
            alpha: perm.apply(*alpha),
            beta: perm.apply(*beta),
        },
        GraphicalEvent::Selective { alpha, set } => GraphicalEvent::Selective {
            alpha: perm.apply(*alpha),
            set: set.iter().map(|&l| perm.apply(l)).collect(),
        },
        GraphicalEvent::MutDel { alpha } => GraphicalEvent::MutDel {
            alpha: perm.apply(*alpha),
        },
        GraphicalEvent::MutBen { alpha } => GraphicalEvent::MutBen {
            alpha: perm.apply(*alpha),
        },
        GraphicalEvent::Interactive { alpha, beta, gamma } => GraphicalEvent::Interactive {
            alpha: perm.apply(*alpha),
            beta: perm.apply(*beta),
            gamma: perm.apply(*gamma),
        },
        GraphicalEvent::InteractiveQuasi { alpha, beta, gamma } => {
            let (a, b, g) = (perm.apply(*alpha), perm.apply(*beta), perm.apply(*gamma));
            GraphicalEvent::InteractiveQuasi {
                alpha: a,
                beta: b.min(g),
                gamma: b.max(g),
            }
        }
    }
}

/// Union of the permuted pair cylinders; must be a single R-cylinder.
pub fn assemble(state: &MessyState) -> Cylinder {
    let permuted: Vec<Cylinder> = state
        .pairs
        .iter()
        .filter(|(c, _)| !c.is_empty())
        .map(|(c, sigma)| c.relabel(|l| sigma.apply(l)))
        .collect();
    if permuted.is_empty() {
        return Cylinder::empty();
    }
    let index = permuted[0].index_set().clone();
    for c in &permuted {
        assert_eq!(
            *c.index_set(),
            index,
            "permuted constituents must share the index set"
        );
    }
    let lines: Vec<u32> = index.iter().copied().collect();
    assert!(lines.len() <= 22, "assembly enumeration bound exceeded");
    let mut member_count: u64 = 0;
    let mut always_r: BTreeMap<u32, bool> = lines.iter().map(|&l| (l, true)).collect();
    let mut always_b: BTreeMap<u32, bool> = lines.iter().map(|&l| (l, true)).collect();
    let mut multiplicity_ok = true;
    for mask in 0u64..(1 << lines.len()) {
        let config: BTreeMap<u32, crate::model::IndType> = lines
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let t = if mask >> i & 1 == 1 {
                    crate::model::IndType::Fit
                } else {
                    crate::model::IndType::Unfit
                };
                (l, t)
            })
            .collect();
        let hits = permuted.iter().filter(|c| c.contains_map(&config)).count();
        if hits > 1 {
            multiplicity_ok = false;
        }
        if hits > 0 {
            member_count += 1;
            for (&l, t) in &config {
                if *t == crate::model::IndType::Fit {
                    always_r.insert(l, false);
                } else {
                    always_b.insert(l, false);
                }
            }
        }
    }
    assert!(multiplicity_ok, "permuted constituents must be disjoint");
    if member_count == 0 {
        return Cylinder::empty();
    }
    let candidate = Cylinder::from_cells(lines.iter().map(|&l| {
        let cell = if always_r[&l] {
            crate::cylinder::Cell::R
        } else if always_b[&l] {
            crate::cylinder::Cell::B
        } else {
            crate::cylinder::Cell::Star
        };
        (l, cell)
    }));
    let (n_r, n_b, n_star) = candidate.n_counts();
    let _ = (n_r, n_b);
    assert_eq!(
        member_count,
        1u64 << n_star,
        "messy union is not a single cylinder"
    );
    assert!(candidate.is_r_cylinder(), "assembled cylinder must be an R-cylinder");
    candidate
}
