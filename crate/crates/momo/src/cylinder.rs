//! Cylinder sets over line configurations and the five backward transition
//! families (coalescence, the two mutations, fittest-type-wins, interactive).
//!
//! A cylinder constrains the types of the lines in its index set cell-by-cell
//! (`R` = unfit, `B` = fit, `*` = unconstrained); lines outside the index set
//! are implicitly unconstrained (the `C*` extension). The canonical empty
//! cylinder represents the impossible constraint.

use crate::combinatorics::falling_factorial;
use crate::model::{IndType, TypeConfig};
use num::{BigRational, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cell {
    R,
    B,
    Star,
}

impl Cell {
    /// Intersection of two cells; `None` encodes the empty intersection.
    pub fn meet(self, other: Cell) -> Option<Cell> {
        match (self, other) {
            (Cell::Star, c) | (c, Cell::Star) => Some(c),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }

    /// Smallest cell containing both (used when joining two cylinders).
    pub fn join(self, other: Cell) -> Cell {
        if self == other {
            self
        } else {
            Cell::Star
        }
    }

    pub fn matches(self, t: IndType) -> bool {
        match self {
            Cell::R => t == IndType::Unfit,
            Cell::B => t == IndType::Fit,
            Cell::Star => true,
        }
    }
}

/// A cylinder over an index set of lines. Only non-`*` cells are stored; the
/// empty cylinder is canonical (no index set, no cells).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cylinder {
    empty: bool,
    index_set: BTreeSet<u32>,
    cells: BTreeMap<u32, Cell>,
}

impl Cylinder {
    /// The empty cylinder ∅.
    pub fn empty() -> Self {
        Cylinder {
            empty: true,
            index_set: BTreeSet::new(),
            cells: BTreeMap::new(),
        }
    }

    /// All-`*` cylinder over `index_set`.
    pub fn full(index_set: impl IntoIterator<Item = u32>) -> Self {
        Cylinder {
            empty: false,
            index_set: index_set.into_iter().collect(),
            cells: BTreeMap::new(),
        }
    }

    /// All-`R` cylinder over `index_set`.
    pub fn all_r(index_set: impl IntoIterator<Item = u32>) -> Self {
        let index_set: BTreeSet<u32> = index_set.into_iter().collect();
        let cells = index_set.iter().map(|&l| (l, Cell::R)).collect();
        Cylinder {
            empty: false,
            index_set,
            cells,
        }
    }

    pub fn from_cells(cells: impl IntoIterator<Item = (u32, Cell)>) -> Self {
        let mut c = Cylinder::full([]);
        for (l, cell) in cells {
            c.index_set.insert(l);
            if cell != Cell::Star {
                c.cells.insert(l, cell);
            }
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn index_set(&self) -> &BTreeSet<u32> {
        assert!(!self.empty, "empty cylinder has no index set");
        &self.index_set
    }

    /// Cell at `line`, applying the `C*` extension outside the index set.
    pub fn cell(&self, line: u32) -> Cell {
        assert!(!self.empty, "empty cylinder has no cells");
        self.cells.get(&line).copied().unwrap_or(Cell::Star)
    }

    /// `true` iff every cell is `R` or `*`.
    pub fn is_r_cylinder(&self) -> bool {
        self.empty || self.cells.values().all(|&c| c != Cell::B)
    }

    fn set_cell(&mut self, line: u32, cell: Cell) {
        self.index_set.insert(line);
        if cell == Cell::Star {
            self.cells.remove(&line);
        } else {
            self.cells.insert(line, cell);
        }
    }

    fn with_cell(mut self, line: u32, cell: Option<Cell>) -> Cylinder {
        match cell {
            None => Cylinder::empty(),
            Some(c) => {
                self.set_cell(line, c);
                self
            }
        }
    }

    fn extend_index(&mut self, lines: impl IntoIterator<Item = u32>) {
        self.index_set.extend(lines);
    }

    /// Cell counts `(n_R, n_B, n_Star)` over the index set.
    pub fn n_counts(&self) -> (u64, u64, u64) {
        assert!(!self.empty, "counts undefined for the empty cylinder");
        let n_r = self.cells.values().filter(|&&c| c == Cell::R).count() as u64;
        let n_b = self.cells.values().filter(|&&c| c == Cell::B).count() as u64;
        (n_r, n_b, self.index_set.len() as u64 - n_r - n_b)
    }

    /// Number of `R` cells.
    pub fn n_r(&self) -> u64 {
        if self.empty {
            0
        } else {
            self.n_counts().0
        }
    }

    /// `P(Γ^(i) ∈ C)` when the `N` lines carry `i` unfit types placed uniformly
    /// without replacement: `i^{↓n_R}(N−i)^{↓n_B}/N^{↓(n_R+n_B)}`. Star cells
    /// marginalize away; the empty cylinder has probability 0.
    pub fn probability(&self, i: u64, n_pop: u64) -> BigRational {
        assert!(i <= n_pop);
        if self.empty {
            return BigRational::zero();
        }
        let (n_r, n_b, _) = self.n_counts();
        if n_r + n_b > n_pop {
            return BigRational::zero();
        }
        let num = falling_factorial(i as i64, n_r as u32)
            * falling_factorial((n_pop - i) as i64, n_b as u32);
        let den = falling_factorial(n_pop as i64, (n_r + n_b) as u32);
        if num <= num::BigInt::zero() {
            return BigRational::zero();
        }
        BigRational::new(num, den)
    }

    /// Membership of a full type configuration (lines 1..=N, index 0-based).
    pub fn contains(&self, config: &TypeConfig) -> bool {
        if self.empty {
            return false;
        }
        self.index_set
            .iter()
            .all(|&l| self.cell(l).matches(config[(l - 1) as usize]))
    }

    /// Membership of a partial configuration given as a line → type map.
    pub fn contains_map(&self, config: &BTreeMap<u32, IndType>) -> bool {
        if self.empty {
            return false;
        }
        self.index_set
            .iter()
            .all(|&l| self.cell(l).matches(config[&l]))
    }

    /// Relabels lines through a bijection.
    pub fn relabel(&self, map: impl Fn(u32) -> u32) -> Cylinder {
        if self.empty {
            return Cylinder::empty();
        }
        let mut out = Cylinder::full([]);
        for &l in &self.index_set {
            out.set_cell(map(l), self.cell(l));
        }
        out
    }

    /// Text form `I=[1,2,4]; R*B` (cells listed in index order).
    pub fn to_text(&self) -> String {
        if self.empty {
            return "EMPTY".to_string();
        }
        let idx: Vec<String> = self.index_set.iter().map(|l| l.to_string()).collect();
        let cells: String = self
            .index_set
            .iter()
            .map(|&l| match self.cell(l) {
                Cell::R => 'R',
                Cell::B => 'B',
                Cell::Star => '*',
            })
            .collect();
        format!("I=[{}]; {}", idx.join(","), cells)
    }

    pub fn parse_text(text: &str) -> Option<Cylinder> {
        let text = text.trim();
        if text == "EMPTY" {
            return Some(Cylinder::empty());
        }
        let rest = text.strip_prefix("I=[")?;
        let (idx_part, cells_part) = rest.split_once("];")?;
        let lines: Vec<u32> = if idx_part.trim().is_empty() {
            Vec::new()
        } else {
            idx_part
                .split(',')
                .map(|s| s.trim().parse().ok())
                .collect::<Option<_>>()?
        };
        let cells: Vec<Cell> = cells_part
            .trim()
            .chars()
            .map(|c| match c {
                'R' => Some(Cell::R),
                'B' => Some(Cell::B),
                '*' => Some(Cell::Star),
                _ => None,
            })
            .collect::<Option<_>>()?;
        if lines.len() != cells.len() {
            return None;
        }
        // The index set is sorted in the text form; reject unsorted input to
        // guarantee an exact round-trip.
        if lines.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        Some(Cylinder::from_cells(lines.into_iter().zip(cells)))
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// A finite collection of cylinders (pairwise disjoint in intended use;
/// empties are retained deliberately).
pub type CylinderSet = Vec<Cylinder>;

/// Coalescence: line `α` receives its type from line `β`; the new cell at `β`
/// is `C_α ∩ C*_β` and `α` leaves the index set.
pub fn op_coal(c: &Cylinder, alpha: u32, beta: u32) -> Cylinder {
    if c.is_empty() {
        return Cylinder::empty();
    }
    assert!(c.index_set.contains(&alpha) && beta != alpha);
    let meet = c.cell(alpha).meet(c.cell(beta));
    let mut out = c.clone();
    out.index_set.remove(&alpha);
    out.cells.remove(&alpha);
    out.with_cell(beta, meet)
}

/// Deleterious mutation on `α`: a `B` cell kills the cylinder, otherwise the
/// cell becomes `*`.
pub fn op_mut_del(c: &Cylinder, alpha: u32) -> Cylinder {
    if c.is_empty() {
        return Cylinder::empty();
    }
    assert!(c.index_set.contains(&alpha));
    if c.cell(alpha) == Cell::B {
        Cylinder::empty()
    } else {
        c.clone().with_cell(alpha, Some(Cell::Star))
    }
}

/// Beneficial mutation on `α`: symmetric to [`op_mut_del`] with `R`.
pub fn op_mut_ben(c: &Cylinder, alpha: u32) -> Cylinder {
    if c.is_empty() {
        return Cylinder::empty();
    }
    assert!(c.index_set.contains(&alpha));
    if c.cell(alpha) == Cell::R {
        Cylinder::empty()
    } else {
        c.clone().with_cell(alpha, Some(Cell::Star))
    }
}

/// Fittest-type-wins event with offspring `α` and potential-parent set `B`.
///
/// If `C_α ≠ B` a single cylinder results (every line of `B ∪ {α}` meets
/// `C_α`). If `C_α = B` and some other incumbent parent line is already `B`,
/// the constraint is void on the rest (`α` and the new lines become `*`).
/// Otherwise the event decomposes by the position of the first fit parent:
/// unconstrained incumbent lines first, then new lines, then `α` itself; lines
/// before the chosen one become `R`, the chosen one `B`, later ones unchanged.
pub fn op_ftw(c: &Cylinder, alpha: u32, set: &BTreeSet<u32>) -> CylinderSet {
    if c.is_empty() {
        return vec![Cylinder::empty()];
    }
    assert!(c.index_set.contains(&alpha));
    assert!(!(set.len() == 1 && set.contains(&alpha)), "B must differ from {{α}}");
    let c_alpha = c.cell(alpha);
    if c_alpha != Cell::B {
        let mut out = c.clone();
        out.extend_index(set.iter().copied());
        for &l in set.iter().chain(std::iter::once(&alpha)) {
            match c_alpha.meet(out.cell(l)) {
                None => return vec![Cylinder::empty()],
                Some(cell) => out.set_cell(l, cell),
            }
        }
        return vec![out];
    }
    // C_α = B. Incumbent parent lines are those of B already in the index set.
    let incumbents: Vec<u32> = set
        .iter()
        .copied()
        .filter(|&l| c.index_set.contains(&l) && l != alpha)
        .collect();
    let newcomers: Vec<u32> = set
        .iter()
        .copied()
        .filter(|&l| !c.index_set.contains(&l))
        .collect();
    if incumbents.iter().any(|&l| c.cell(l) == Cell::B) {
        // Some incumbent parent is already required fit: no extra constraint.
        let mut out = c.clone();
        out.extend_index(set.iter().copied());
        out.set_cell(alpha, Cell::Star);
        return vec![out];
    }
    // First-fit decomposition over the candidate lines that may carry the B.
    let mut candidates: Vec<u32> = incumbents
        .iter()
        .copied()
        .filter(|&l| c.cell(l) == Cell::Star)
        .collect();
    candidates.extend(newcomers.iter().copied());
    candidates.push(alpha);
    let mut out = Vec::new();
    for (k, &chosen) in candidates.iter().enumerate() {
        let mut cyl = c.clone();
        cyl.extend_index(set.iter().copied());
        // α's old B cell constrained the post-event type; its pre-event type
        // is free unless α itself is the designated first fit parent.
        cyl.set_cell(alpha, Cell::Star);
        for &earlier in &candidates[..k] {
            match cyl.cell(earlier).meet(Cell::R) {
                None => unreachable!("candidate cells are * or B-at-α"),
                Some(cell) => cyl.set_cell(earlier, cell),
            }
        }
        match cyl.cell(chosen).meet(Cell::B) {
            None => cyl = Cylinder::empty(),
            Some(cell) => cyl.set_cell(chosen, cell),
        }
        out.push(cyl);
    }
    out
}

/// Interactive neutral arrow from `β` to `α` checked by `γ`; returns the
/// ordered constituent pair `(C̃¹, C̃²)` on `I ∪ {β, γ}`.
///
/// For `γ ∉ {α, β}`: `C̃¹` pins `γ` unfit (nothing happened); `C̃²` has the
/// event happen (`α` free, `β` carries `C_α`, `γ` fit). The `γ = α` and
/// `γ = β` self-checking variants follow the same preimage logic; `ψ_R` maps
/// `R ↦ ∅` and everything else to `*`.
pub fn op_interactive(c: &Cylinder, alpha: u32, beta: u32, gamma: u32) -> (Cylinder, Cylinder) {
    if c.is_empty() {
        return (Cylinder::empty(), Cylinder::empty());
    }
    assert!(c.index_set.contains(&alpha) && beta != alpha);
    let c_alpha = c.cell(alpha);
    let extend = |mut cyl: Cylinder| {
        if !cyl.is_empty() {
            cyl.extend_index([beta, gamma]);
        }
        cyl
    };
    let (c1, c2) = if gamma != alpha && gamma != beta {
        let c1 = c.clone().with_cell(gamma, Cell::R.meet(c.cell(gamma)));
        let c2 = c
            .clone()
            .with_cell(alpha, Some(Cell::Star))
            .with_cell(beta, c_alpha.meet(c.cell(beta)));
        let c2 = if c2.is_empty() {
            c2
        } else {
            c2.with_cell(gamma, Cell::B.meet(c.cell(gamma)))
        };
        (c1, c2)
    } else if gamma == alpha {
        let c1 = c
            .clone()
            .with_cell(alpha, Some(Cell::B))
            .with_cell(beta, c_alpha.meet(c.cell(beta)));
        let c2 = c.clone().with_cell(alpha, Cell::R.meet(c_alpha));
        (c1, c2)
    } else {
        // γ = β: the offspring checks its own parent.
        let psi_r = match c_alpha {
            Cell::R => None,
            _ => Some(Cell::Star),
        };
        let c1 = match psi_r {
            None => Cylinder::empty(),
            Some(cell) => c
                .clone()
                .with_cell(alpha, Some(cell))
                .with_cell(beta, Cell::B.meet(c.cell(beta))),
        };
        let c2 = c.clone().with_cell(beta, Cell::R.meet(c.cell(beta)));
        (c1, c2)
    };
    (extend(c1), extend(c2))
}

/// Union of two cylinders over the same index set, when the union is itself a
/// cylinder: containment one way, or a difference in exactly one coordinate.
pub fn union_two(a: &Cylinder, b: &Cylinder) -> Option<Cylinder> {
    if a.is_empty() {
        return Some(b.clone());
    }
    if b.is_empty() {
        return Some(a.clone());
    }
    assert_eq!(a.index_set, b.index_set, "union over a common index set");
    let contains = |outer: &Cylinder, inner: &Cylinder| {
        outer
            .index_set
            .iter()
            .all(|&l| inner.cell(l).meet(outer.cell(l)) == Some(inner.cell(l)))
    };
    if contains(a, b) {
        return Some(a.clone());
    }
    if contains(b, a) {
        return Some(b.clone());
    }
    let diff: Vec<u32> = a
        .index_set
        .iter()
        .copied()
        .filter(|&l| a.cell(l) != b.cell(l))
        .collect();
    if diff.len() != 1 {
        return None;
    }
    let l = diff[0];
    // Coordinate-wise union at the single differing coordinate is exact only
    // if the two cells tile the whole type space there (R ∪ B); anything else
    // with one not containing the other cannot happen after the containment
    // checks above.
    let joined = a.cell(l).join(b.cell(l));
    if a.cell(l).meet(b.cell(l)).is_some() {
        return None; // overlapping but distinct (one contains the other handled above)
    }
    Some(a.clone().with_cell(l, Some(joined)))
}
