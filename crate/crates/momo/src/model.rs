//! Model parameters, the marked Poisson event stream of the graphical
//! representation, forward type propagation, and the forward counting chain.

use crate::combinatorics::{s_tilde, SelectionRates};
use crate::matrix::GeneratorMatrix;
use crate::{rational, to_f64};
use num::{BigInt, BigRational, One, Zero};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("malformed event record: {0}")]
    BadEvent(String),
}

/// Parameters of the size-`N` Moran model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    /// Population size.
    pub n_pop: u64,
    /// Non-interactive neutral reproduction rate.
    pub r: f64,
    /// Interactive neutral reproduction rate.
    pub kappa: f64,
    /// Per-order selection initiation rates `s_1..s_M`.
    pub s: Vec<f64>,
    /// Total mutation rate.
    pub u: f64,
    /// Probability that a mutation is beneficial.
    pub nu0: f64,
    /// Probability that a mutation is deleterious.
    pub nu1: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.n_pop >= 1
            && self.r >= 0.0
            && self.kappa >= 0.0
            && self.u >= 0.0
            && self.s.iter().all(|&x| x >= 0.0)
            && self.nu0 >= 0.0
            && self.nu1 >= 0.0
            && (self.nu0 + self.nu1 - 1.0).abs() < 1e-12;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn selection(&self) -> SelectionRates {
        SelectionRates::from_f64(&self.s)
    }

    /// Maximum selection order usable at this population size.
    pub fn max_sel_order(&self) -> u64 {
        (self.s.len() as u64).min(self.n_pop)
    }
}

/// A single mark of the graphical representation. Lines are 1-based in `[N]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GraphicalEvent {
    /// Neutral reproduction arrow: `beta` replaces `alpha`.
    Neutral { alpha: u32, beta: u32 },
    /// Interactive neutral arrow gated by checking line `gamma`.
    Interactive { alpha: u32, beta: u32, gamma: u32 },
    /// Role-erased interactive event with `beta <= gamma`.
    InteractiveQuasi { alpha: u32, beta: u32, gamma: u32 },
    /// Selective (fittest-type-wins) event with potential-parent set `set`.
    Selective { alpha: u32, set: BTreeSet<u32> },
    /// Deleterious mutation mark on `alpha`.
    MutDel { alpha: u32 },
    /// Beneficial mutation mark on `alpha`.
    MutBen { alpha: u32 },
}

impl GraphicalEvent {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GraphicalEvent::Neutral { .. } => "neutral",
            GraphicalEvent::Interactive { .. } => "interactive",
            GraphicalEvent::InteractiveQuasi { .. } => "interactive_quasi",
            GraphicalEvent::Selective { .. } => "selective",
            GraphicalEvent::MutDel { .. } => "mut_del",
            GraphicalEvent::MutBen { .. } => "mut_ben",
        }
    }

    /// The line at the arrow tip / mutation mark.
    pub fn alpha(&self) -> u32 {
        match *self {
            GraphicalEvent::Neutral { alpha, .. }
            | GraphicalEvent::Interactive { alpha, .. }
            | GraphicalEvent::InteractiveQuasi { alpha, .. }
            | GraphicalEvent::Selective { alpha, .. }
            | GraphicalEvent::MutDel { alpha }
            | GraphicalEvent::MutBen { alpha } => alpha,
        }
    }
}

/// Time-ordered realization of the marked Poisson process on `(0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub horizon: f64,
    pub events: Vec<(f64, GraphicalEvent)>,
}

/// Flat record used for the line-oriented JSON serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: String,
    pub alpha: u32,
    pub beta: Option<u32>,
    pub gamma: Option<u32>,
    pub set: Option<Vec<u32>>,
}

impl EventRecord {
    pub fn from_event(t: f64, e: &GraphicalEvent) -> Self {
        let (beta, gamma, set) = match e {
            GraphicalEvent::Neutral { beta, .. } => (Some(*beta), None, None),
            GraphicalEvent::Interactive { beta, gamma, .. }
            | GraphicalEvent::InteractiveQuasi { beta, gamma, .. } => {
                (Some(*beta), Some(*gamma), None)
            }
            GraphicalEvent::Selective { set, .. } => {
                (None, None, Some(set.iter().copied().collect()))
            }
            GraphicalEvent::MutDel { .. } | GraphicalEvent::MutBen { .. } => (None, None, None),
        };
        EventRecord {
            t,
            kind: e.kind_name().to_string(),
            alpha: e.alpha(),
            beta,
            gamma,
            set,
        }
    }

    pub fn to_event(&self) -> Result<(f64, GraphicalEvent), ModelError> {
        let missing = |f: &str| ModelError::BadEvent(format!("{}: missing {f}", self.kind));
        let e = match self.kind.as_str() {
            "neutral" => GraphicalEvent::Neutral {
                alpha: self.alpha,
                beta: self.beta.ok_or_else(|| missing("beta"))?,
            },
            "interactive" => GraphicalEvent::Interactive {
                alpha: self.alpha,
                beta: self.beta.ok_or_else(|| missing("beta"))?,
                gamma: self.gamma.ok_or_else(|| missing("gamma"))?,
            },
            "interactive_quasi" => GraphicalEvent::InteractiveQuasi {
                alpha: self.alpha,
                beta: self.beta.ok_or_else(|| missing("beta"))?,
                gamma: self.gamma.ok_or_else(|| missing("gamma"))?,
            },
            "selective" => GraphicalEvent::Selective {
                alpha: self.alpha,
                set: self
                    .set
                    .as_ref()
                    .ok_or_else(|| missing("set"))?
                    .iter()
                    .copied()
                    .collect(),
            },
            "mut_del" => GraphicalEvent::MutDel { alpha: self.alpha },
            "mut_ben" => GraphicalEvent::MutBen { alpha: self.alpha },
            other => return Err(ModelError::BadEvent(format!("unknown kind {other}"))),
        };
        Ok((self.t, e))
    }
}

impl EventStream {
    /// Serializes to line-oriented JSON records.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (t, e) in &self.events {
            out.push_str(&serde_json::to_string(&EventRecord::from_event(*t, e)).unwrap());
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(horizon: f64, text: &str) -> Result<Self, ModelError> {
        let mut events = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EventRecord = serde_json::from_str(line)
                .map_err(|e| ModelError::BadEvent(e.to_string()))?;
            events.push(rec.to_event()?);
        }
        Ok(EventStream { horizon, events })
    }
}

/// One aggregate category of event instances with its per-instance rate.
#[derive(Debug, Clone)]
pub struct RateEntry {
    pub kind: String,
    pub per_instance: BigRational,
    pub instance_count: BigInt,
}

impl RateEntry {
    pub fn total(&self) -> BigRational {
        self.per_instance.clone() * BigRational::from_integer(self.instance_count.clone())
    }
}

/// Per-instance rates of the Poisson intensity, grouped by category.
///
/// Neutral arrows `(α,β)` with `β≠α` each carry `r/(2N)`; interactive triples
/// `(α,β,γ)` with `β≠α` each carry `κ/(2N²)`; selective pairs `(α,B)` with
/// `|B|=j`, `B≠{α}` each carry `s̃_j/C(N,j)`; mutation marks carry `uν₀`
/// (beneficial) and `uν₁` (deleterious) per line.
pub fn event_rate_table(params: &ModelParams) -> Vec<RateEntry> {
    let n = params.n_pop;
    let nr = BigInt::from(n);
    let sel = params.selection();
    let mut out = Vec::new();
    out.push(RateEntry {
        kind: "neutral".into(),
        per_instance: rational(params.r) / BigRational::from_integer(2 * &nr),
        instance_count: &nr * (&nr - 1),
    });
    out.push(RateEntry {
        kind: "interactive".into(),
        per_instance: rational(params.kappa) / BigRational::from_integer(2 * &nr * &nr),
        instance_count: &nr * (&nr - 1) * &nr,
    });
    for j in 1..=params.max_sel_order() {
        let choose = crate::combinatorics::binomial(n, j);
        let count = if j == 1 {
            // B = {α} is excluded.
            &nr * (&nr - 1)
        } else {
            &nr * &choose
        };
        out.push(RateEntry {
            kind: format!("selective_{j}"),
            per_instance: s_tilde(&sel, j as u32, n) / BigRational::from_integer(choose),
            instance_count: count,
        });
    }
    out.push(RateEntry {
        kind: "mut_ben".into(),
        per_instance: rational(params.u) * rational(params.nu0),
        instance_count: nr.clone(),
    });
    out.push(RateEntry {
        kind: "mut_del".into(),
        per_instance: rational(params.u) * rational(params.nu1),
        instance_count: nr,
    });
    out
}

fn draw_distinct_pair(rng: &mut impl Rng, n: u64) -> (u32, u32) {
    let d = Uniform::new_inclusive(1, n as u32);
    let a = d.sample(rng);
    loop {
        let b = d.sample(rng);
        if b != a {
            return (a, b);
        }
    }
}

fn draw_subset(rng: &mut impl Rng, n: u64, j: u64) -> BTreeSet<u32> {
    let mut pool: Vec<u32> = (1..=n as u32).collect();
    pool.shuffle(rng);
    pool.truncate(j as usize);
    pool.into_iter().collect()
}

/// Samples a realization of the marked Poisson process on `(0, T]`.
///
/// Randomness order per event: exponential waiting time, categorical mark
/// category, then uniform instance coordinates.
pub fn sample_event_stream(params: &ModelParams, horizon: f64, seed: u64) -> EventStream {
    params.validate().expect("valid params");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let table = event_rate_table(params);
    let totals: Vec<f64> = table.iter().map(|e| to_f64(&e.total())).collect();
    let total_rate: f64 = totals.iter().sum();
    let mut events = Vec::new();
    let n = params.n_pop;
    if total_rate <= 0.0 {
        return EventStream { horizon, events };
    }
    let mut t = 0.0f64;
    loop {
        t += -rng.gen::<f64>().ln() / total_rate;
        if t > horizon {
            break;
        }
        let mut pick = rng.gen::<f64>() * total_rate;
        let mut idx = 0;
        for (i, w) in totals.iter().enumerate() {
            if pick < *w {
                idx = i;
                break;
            }
            pick -= w;
            idx = i;
        }
        let kind = table[idx].kind.as_str();
        let line = Uniform::new_inclusive(1, n as u32);
        let event = match kind {
            "neutral" => {
                let (alpha, beta) = draw_distinct_pair(&mut rng, n);
                GraphicalEvent::Neutral { alpha, beta }
            }
            "interactive" => {
                let (alpha, beta) = draw_distinct_pair(&mut rng, n);
                let gamma = line.sample(&mut rng);
                GraphicalEvent::Interactive { alpha, beta, gamma }
            }
            "mut_ben" => GraphicalEvent::MutBen {
                alpha: line.sample(&mut rng),
            },
            "mut_del" => GraphicalEvent::MutDel {
                alpha: line.sample(&mut rng),
            },
            sel => {
                let j: u64 = sel
                    .strip_prefix("selective_")
                    .expect("selective kind")
                    .parse()
                    .expect("order");
                if j == 1 {
                    let (alpha, beta) = draw_distinct_pair(&mut rng, n);
                    GraphicalEvent::Selective {
                        alpha,
                        set: BTreeSet::from([beta]),
                    }
                } else {
                    let alpha = line.sample(&mut rng);
                    GraphicalEvent::Selective {
                        alpha,
                        set: draw_subset(&mut rng, n, j),
                    }
                }
            }
        };
        events.push((t, event));
    }
    EventStream { horizon, events }
}

/// Individual type: `Unfit` is red (counted by the forward chain), `Fit` is blue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndType {
    Unfit,
    Fit,
}

/// Types of all `N` individuals, indexed by line − 1.
pub type TypeConfig = Vec<IndType>;

/// Applies a single event's forward type-propagation rule in place.
pub fn apply_event_types(types: &mut TypeConfig, event: &GraphicalEvent) {
    let ix = |l: u32| (l - 1) as usize;
    match event {
        GraphicalEvent::Neutral { alpha, beta } => types[ix(*alpha)] = types[ix(*beta)],
        GraphicalEvent::Interactive { alpha, beta, gamma } => {
            if types[ix(*gamma)] == IndType::Fit {
                types[ix(*alpha)] = types[ix(*beta)];
            }
        }
        GraphicalEvent::Selective { alpha, set } => {
            if set.iter().any(|&l| types[ix(l)] == IndType::Fit) {
                types[ix(*alpha)] = IndType::Fit;
            }
        }
        GraphicalEvent::MutDel { alpha } => types[ix(*alpha)] = IndType::Unfit,
        GraphicalEvent::MutBen { alpha } => types[ix(*alpha)] = IndType::Fit,
        GraphicalEvent::InteractiveQuasi { .. } => {
            panic!("quasi events carry no forward type rule; lift them first")
        }
    }
}

/// Propagates types forward through the whole stream.
pub fn propagate_types(config0: &TypeConfig, stream: &EventStream) -> TypeConfig {
    let mut types = config0.clone();
    for (_, e) in &stream.events {
        apply_event_types(&mut types, e);
    }
    types
}

fn x_up_rate(params: &ModelParams, n: u64) -> f64 {
    let (nn, np) = (n as f64, params.n_pop as f64);
    let gap = np - nn;
    params.r / 2.0 * gap * (nn / np)
        + params.kappa / 2.0 * gap * (nn / np) * (gap / np)
        + gap * params.u * params.nu1
}

fn x_down_rate(params: &ModelParams, n: u64) -> f64 {
    let (nn, np) = (n as f64, params.n_pop as f64);
    let gap = np - nn;
    let mut sel = 0.0;
    for (m, &s) in params.s.iter().enumerate() {
        sel += s * nn * (1.0 - (nn / np).powi(m as i32 + 1));
    }
    params.r / 2.0 * nn * (gap / np)
        + params.kappa / 2.0 * nn * (gap / np) * (gap / np)
        + nn * params.u * params.nu0
        + sel
}

/// Gillespie simulation of the unfit-count chain; returns the jump skeleton
/// `(time, count)` starting with `(0, i0)` and ending at the horizon state.
pub fn simulate_counts(
    params: &ModelParams,
    i0: u64,
    horizon: f64,
    seed: u64,
) -> Vec<(f64, u64)> {
    assert!(i0 <= params.n_pop);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut traj = vec![(0.0, i0)];
    let (mut t, mut n) = (0.0f64, i0);
    loop {
        let (up, down) = (x_up_rate(params, n), x_down_rate(params, n));
        let total = up + down;
        if total <= 0.0 {
            break;
        }
        t += -rng.gen::<f64>().ln() / total;
        if t > horizon {
            break;
        }
        if rng.gen::<f64>() * total < up {
            n += 1;
        } else {
            n -= 1;
        }
        traj.push((t, n));
    }
    traj.push((horizon, n));
    traj
}

/// Exact tridiagonal rate matrix of the forward chain on `{0..N}`.
pub fn generator_x_exact(params: &ModelParams) -> Vec<Vec<BigRational>> {
    let np = params.n_pop;
    let dim = np as usize + 1;
    let npr = BigRational::from_integer(BigInt::from(np));
    let (r, kappa) = (rational(params.r), rational(params.kappa));
    let u = rational(params.u);
    let (nu0, nu1) = (rational(params.nu0), rational(params.nu1));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let sel = params.selection();
    let mut q = vec![vec![BigRational::zero(); dim]; dim];
    for n in 0..=np {
        let nn = BigRational::from_integer(BigInt::from(n));
        let gap = BigRational::from_integer(BigInt::from(np - n));
        let x = &nn / &npr;
        let y = &gap / &npr;
        if n < np {
            let up = &half * &r * &gap * &x + &half * &kappa * &gap * &x * &y + &gap * &u * &nu1;
            q[n as usize][n as usize + 1] = up;
        }
        if n > 0 {
            let mut down =
                &half * &r * &nn * &y + &half * &kappa * &nn * &y * &y + &nn * &u * &nu0;
            for m in 1..=sel.max_order() {
                let mut xm = BigRational::one();
                for _ in 0..m {
                    xm *= &x;
                }
                down += sel.rate(m) * &nn * (BigRational::one() - xm);
            }
            q[n as usize][n as usize - 1] = down;
        }
        let row_off: BigRational = (0..dim)
            .filter(|&j| j != n as usize)
            .map(|j| q[n as usize][j].clone())
            .sum();
        q[n as usize][n as usize] = -row_off;
    }
    q
}

/// Forward-chain generator as a dense float matrix (for `expm_apply`).
pub fn generator_x(params: &ModelParams) -> GeneratorMatrix {
    let q = generator_x_exact(params);
    GeneratorMatrix::from_rows(
        q.iter()
            .map(|row| row.iter().map(to_f64).collect())
            .collect(),
    )
}
