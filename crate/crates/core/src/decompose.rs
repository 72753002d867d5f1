//! Superlevel sets `Ω_k = {T̄(fσ) > 2^k}`, their Whitney decompositions, the
//! sets `E_k(Q)`, the maximum principle, principal cubes, neighbor
//! families, the classification of Whitney cubes and occurrence counts.
//!
//! Whitney cubes of a set `Ω` are the maximal dyadic cubes `Q` with
//! `Q^(1) ⊆ Ω`. Dyadic cubes are either nested or disjoint, so maximal
//! cubes are unique and pairwise disjoint; no tie-breaking is involved. We
//! find them as the children of the maximal grid cubes `P ⊆ Ω` (a cube `Q`
//! is maximal exactly when `P = Q^(1) ⊆ Ω` and `P^(1) ⊄ Ω`). Virtual
//! ancestors are never inside `Ω` and a finest cell may be such a `P`, so
//! Whitney cubes have levels `1..=D+1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellSet, CubeId, DyadicGrid, StepFunction, Weight};
use crate::instance::Instance;
use crate::operators::{
    canonical_sequence, lq_norm, member_averages, pow_abs, tbar_values, BSequence,
};
use crate::par;

/// Relative slack for floating-point comparisons of exact identities.
pub const EXACT_TOLERANCE: f64 = 1e-10;

/// The part of a cube lying in a set of cells: `cube ∩ ⋃ cells`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Piece {
    pub cube: CubeId,
    /// Cells of `cube` that belong to the piece.
    pub cells: Vec<usize>,
    /// Portion of each listed cell covered by the piece.
    pub fraction: f64,
}

impl Piece {
    pub fn new(grid: &DyadicGrid, cube: &CubeId, set: &CellSet) -> Self {
        let cover = grid.cover(cube);
        Piece {
            cube: cube.clone(),
            cells: cover
                .cells
                .into_iter()
                .filter(|&c| set.contains(c))
                .collect(),
            fraction: cover.fraction,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn mass(&self, mu: &StepFunction) -> f64 {
        let h = mu.grid().cell_measure();
        self.cells.iter().map(|&c| mu.value(c)).sum::<f64>() * h * self.fraction
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhitneyFamily {
    pub k: Option<i32>,
    pub cubes: Vec<CubeId>,
    #[serde(skip)]
    pub omega: CellSet,
}

/// Whitney decomposition of a set of finest cells.
pub fn whitney(grid: &DyadicGrid, omega: &CellSet) -> Result<WhitneyFamily> {
    grid.check_same_cells(omega.grid())?;
    let mut cubes = Vec::new();
    for p in grid.grid_cubes() {
        if omega.contains_cube(&p) && !omega.contains_cube(&p.parent()) {
            cubes.extend(p.children());
        }
    }
    cubes.sort();
    Ok(WhitneyFamily {
        k: None,
        cubes,
        omega: omega.clone(),
    })
}

/// Outcome of the structural checks on a Whitney family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhitneyCheck {
    pub disjoint: bool,
    pub exact_union: bool,
    /// `Q^(1) ⊆ Ω` for every cube.
    pub parent_inside: bool,
    /// `Q^(2) ∩ Ω^c ≠ ∅` for every cube.
    pub grandparent_escapes: bool,
    /// `max_x Σ_Q 1_{Q^(1)}(x)`, zero off `Ω` by `parent_inside`.
    pub max_parent_overlap: usize,
    /// `max_Q #{Q' : Q' ∩ Q^(1) ≠ ∅}`.
    pub max_crowd: usize,
    pub overlap_bound: usize,
}

impl WhitneyCheck {
    pub fn pass(&self) -> bool {
        self.disjoint
            && self.exact_union
            && self.parent_inside
            && self.grandparent_escapes
            && self.max_parent_overlap <= self.overlap_bound
            && self.max_crowd <= self.overlap_bound
    }
}

/// Bound used for parent overlap and crowding: `2^{d+1}` (4 on the line).
pub fn overlap_bound(dimension: usize) -> usize {
    1 << (dimension + 1)
}

fn meets_complement(omega: &CellSet, cube: &CubeId) -> bool {
    !omega.contains_cube(cube)
}

impl WhitneyFamily {
    pub fn check(&self) -> WhitneyCheck {
        let grid = *self.omega.grid();
        // coverage in units of the smallest Whitney cube, per cell
        let mut coverage = vec![0.0f64; grid.num_cells()];
        let mut overlap = vec![0usize; grid.num_cells()];
        let mut parent_inside = true;
        let mut grandparent_escapes = true;
        for q in &self.cubes {
            let cover = grid.cover(q);
            for &c in &cover.cells {
                coverage[c] += cover.fraction;
            }
            let parent = q.parent();
            for c in grid.cover(&parent).cells {
                overlap[c] += 1;
            }
            parent_inside &= self.omega.contains_cube(&parent);
            grandparent_escapes &= meets_complement(&self.omega, &parent.parent());
        }
        let disjoint = coverage.iter().all(|&v| v <= 1.0) && pairwise_disjoint(&self.cubes);
        let exact_union = coverage.iter().enumerate().all(|(c, &v)| {
            if self.omega.contains(c) {
                v == 1.0
            } else {
                v == 0.0
            }
        });
        let max_crowd = self
            .cubes
            .iter()
            .map(|q| {
                let parent = q.parent();
                self.cubes.iter().filter(|o| o.intersects(&parent)).count()
            })
            .max()
            .unwrap_or(0);
        WhitneyCheck {
            disjoint,
            exact_union,
            parent_inside,
            grandparent_escapes,
            max_parent_overlap: overlap.into_iter().max().unwrap_or(0),
            max_crowd,
            overlap_bound: overlap_bound(grid.dimension()),
        }
    }
}

fn pairwise_disjoint(cubes: &[CubeId]) -> bool {
    cubes
        .iter()
        .enumerate()
        .all(|(i, a)| cubes[i + 1..].iter().all(|b| !a.intersects(b)))
}

/// `⌊log₂ x⌋` for `x > 0`, corrected against exact powers of two.
fn floor_log2(x: f64) -> i32 {
    let mut k = x.log2().floor() as i32;
    while 2f64.powi(k + 1) <= x {
        k += 1;
    }
    while 2f64.powi(k) > x {
        k -= 1;
    }
    k
}

/// `⌈log₂ x⌉` for `x > 0`.
fn ceil_log2(x: f64) -> i32 {
    let k = floor_log2(x);
    if 2f64.powi(k) == x {
        k
    } else {
        k + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    pub k: i32,
    pub omega: CellSet,
    pub family: WhitneyFamily,
}

/// Superlevel sets of `T̄(fσ)` with their Whitney families.
///
/// `window` is `[⌊log₂ min₊ T̄⌋ - 1, ⌈log₂ max T̄⌉]`; below it `Ω_k` is the
/// support of `T̄`, above it `Ω_k` is empty. Families are kept for
/// `k ∈ [kmin - 2, kmax + 3]`, the range that the `E_k` sets and the
/// classification of levels `kmin - 2 ..= kmax` read.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSets {
    pub tbar: StepFunction,
    pub window: Option<(i32, i32)>,
    families: BTreeMap<i32, WhitneyFamily>,
}

impl LevelSets {
    /// Levels of the window, in increasing `k`.
    pub fn levels(&self) -> Vec<LevelSet> {
        let Some((lo, hi)) = self.window else {
            return Vec::new();
        };
        (lo..=hi)
            .map(|k| LevelSet {
                k,
                omega: self.omega(k),
                family: self.families[&k].clone(),
            })
            .collect()
    }

    pub fn omega(&self, k: i32) -> CellSet {
        let threshold = 2f64.powi(k);
        CellSet::from_cells(
            *self.tbar.grid(),
            (0..self.tbar.values().len()).filter(|&c| self.tbar.value(c) > threshold),
        )
    }

    /// Whitney family of `Ω_k` for `k` in the stored range.
    pub fn family(&self, k: i32) -> Option<&WhitneyFamily> {
        self.families.get(&k)
    }

    /// Levels `k` whose `E_k` sets can be non-empty, plus the two above.
    pub fn analysis_levels(&self) -> Vec<i32> {
        match self.window {
            Some((lo, hi)) => (lo - 2..=hi).collect(),
            None => Vec::new(),
        }
    }

    pub fn stored_levels(&self) -> Vec<i32> {
        self.families.keys().copied().collect()
    }
}

pub fn level_sets(inst: &Instance, f: &StepFunction) -> Result<LevelSets> {
    inst.check_function(f)?;
    if !f.is_nonnegative() {
        return Err(Error::Precondition("level sets need f >= 0".into()));
    }
    let grid = *inst.grid();
    let tbar = StepFunction::new(grid, tbar_values(inst, f.values(), inst.q()))?;
    let positive: Vec<f64> = tbar.values().iter().copied().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return Ok(LevelSets {
            tbar,
            window: None,
            families: BTreeMap::new(),
        });
    }
    let min = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let max = positive.iter().copied().fold(0.0, f64::max);
    let window = (floor_log2(min) - 1, ceil_log2(max));
    let mut sets = LevelSets {
        tbar,
        window: Some(window),
        families: BTreeMap::new(),
    };
    let ks: Vec<i32> = (window.0 - 2..=window.1 + 3).collect();
    let families = par::map(&ks, |&k| {
        whitney(&grid, &sets.omega(k)).map(|mut fam| {
            fam.k = Some(k);
            fam
        })
    });
    for (k, fam) in ks.into_iter().zip(families) {
        sets.families.insert(k, fam?);
    }
    Ok(sets)
}

/// `Q ∈ 𝒬_k, Q' ∈ 𝒬_l, Q ⊊ Q' ⇒ k > l` over all stored levels.
pub fn nested_check(levels: &LevelSets) -> bool {
    let fams: Vec<&WhitneyFamily> = levels.families.values().collect();
    fams.iter().all(|a| {
        fams.iter().all(|b| {
            let (ka, kb) = (a.k.unwrap_or(0), b.k.unwrap_or(0));
            ka > kb
                || a.cubes
                    .iter()
                    .all(|q| b.cubes.iter().all(|big| !big.strictly_contains(q)))
        })
    })
}

/// `E_k(Q) = Q ∩ (Ω_{k+2} − Ω_{k+3})` for every `Q ∈ 𝒬_k`.
pub fn ek_sets(levels: &LevelSets, k: i32) -> BTreeMap<CubeId, Piece> {
    let grid = *levels.tbar.grid();
    let band = levels.omega(k + 2).difference(&levels.omega(k + 3));
    levels
        .family(k)
        .map(|fam| {
            fam.cubes
                .iter()
                .map(|q| (q.clone(), Piece::new(&grid, q, &band)))
                .collect()
        })
        .unwrap_or_default()
}

/// `⋃_Q E_k(Q) = Ω_{k+2} − Ω_{k+3}` with every `E_k(Q) ⊆ Q`, checked by
/// per-cell coverage.
pub fn ek_identity_check(levels: &LevelSets, k: i32) -> bool {
    let grid = *levels.tbar.grid();
    let band = levels.omega(k + 2).difference(&levels.omega(k + 3));
    let mut coverage = vec![0.0f64; grid.num_cells()];
    for (q, piece) in ek_sets(levels, k) {
        let inside = grid.cover(&q).cells;
        for &c in &piece.cells {
            if inside.binary_search(&c).is_err() {
                return false;
            }
            coverage[c] += piece.fraction;
        }
    }
    coverage
        .iter()
        .enumerate()
        .all(|(c, &v)| if band.contains(c) { v == 1.0 } else { v == 0.0 })
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + EXACT_TOLERANCE)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxPrincipleCheck {
    /// `max_{x∈Q} T̄^out_{Q^(1)}(1_{Q^(2)} fσ)(x)`
    pub out_val_max: f64,
    /// `max_{x∈Q} T̄(1_{(Q^(2))^c} fσ)(x)`
    pub far_val_max: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Evaluates `T̄` restricted to members accepted by `keep` with `f` masked to
/// `mask`, at the cells of `cube`, and returns the maximum.
fn masked_envelope_max(
    inst: &Instance,
    f: &[f64],
    mask: impl Fn(usize) -> bool,
    keep: impl Fn(&CubeId) -> bool,
    cube: &CubeId,
) -> f64 {
    let g: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(c, &v)| if mask(c) { v } else { 0.0 })
        .collect();
    let avgs = member_averages(inst, &g, inst.sigma().values());
    let members = inst.members();
    let q = inst.q();
    inst.grid()
        .cover(cube)
        .cells
        .iter()
        .map(|&c| {
            let terms = inst
                .cell_members(c)
                .iter()
                .filter(|&&m| keep(&members[m].cube))
                .map(|&m| members[m].tau * avgs[m]);
            lq_norm(terms, q)
        })
        .fold(0.0, f64::max)
}

pub fn max_principle_check(
    inst: &Instance,
    f: &StepFunction,
    levels: &LevelSets,
    k: i32,
    cube: &CubeId,
) -> Result<MaxPrincipleCheck> {
    let in_family = levels
        .family(k)
        .is_some_and(|fam| fam.cubes.binary_search(cube).is_ok());
    if !in_family {
        return Err(Error::Precondition(format!(
            "{cube} is not a Whitney cube of level {k}"
        )));
    }
    let grid = inst.grid();
    let parent = cube.parent();
    let grand = parent.parent();
    let grand_cells = CellSet::from_cells(*grid, grid.cover(&grand).cells);
    let out_val_max = masked_envelope_max(
        inst,
        f.values(),
        |c| grand_cells.contains(c),
        |r| r.strictly_contains(&parent),
        cube,
    );
    let far_val_max = masked_envelope_max(
        inst,
        f.values(),
        |c| !grand_cells.contains(c),
        |_| true,
        cube,
    );
    let bound = 2f64.powi(k);
    Ok(MaxPrincipleCheck {
        out_val_max,
        far_val_max,
        bound,
        pass: within(out_val_max, bound) && within(far_val_max, bound),
    })
}

/// Smallest value of `T̄^in_{Q^(1)}(1_{Q^(1)} fσ)` over `E_k(Q)` divided by
/// `2^k`; at least 1 when the lower bound on `E_k(Q)` holds. `None` when
/// `E_k(Q)` is empty.
pub fn inner_lower_bound_ratio(
    inst: &Instance,
    f: &StepFunction,
    k: i32,
    piece: &Piece,
) -> Option<f64> {
    if piece.is_empty() {
        return None;
    }
    let parent = piece.cube.parent();
    let grid = inst.grid();
    let parent_cells = CellSet::from_cells(*grid, grid.cover(&parent).cells);
    let g: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(c, &v)| if parent_cells.contains(c) { v } else { 0.0 })
        .collect();
    let avgs = member_averages(inst, &g, inst.sigma().values());
    let members = inst.members();
    let q = inst.q();
    let bound = 2f64.powi(k);
    Some(
        piece
            .cells
            .iter()
            .map(|&c| {
                let terms = inst
                    .cell_members(c)
                    .iter()
                    .filter(|&&m| parent.contains(&members[m].cube))
                    .map(|&m| members[m].tau * avgs[m]);
                lq_norm(terms, q) / bound
            })
            .fold(f64::INFINITY, f64::min),
    )
}

/// Cube-keyed maps are written as `[cube, value]` pairs (JSON keys must be
/// strings).
fn pairs<V: Serialize, S: serde::Serializer>(
    map: &BTreeMap<CubeId, V>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(map.iter())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoronaFamily {
    pub principal_cubes: Vec<CubeId>,
    /// Minimal principal cube containing each input cube.
    #[serde(serialize_with = "pairs")]
    pub gamma: BTreeMap<CubeId, CubeId>,
}

/// `𝔼^σ_Q f`, including virtual refinement cubes.
pub fn sigma_average(inst: &Instance, f: &StepFunction, cube: &CubeId) -> f64 {
    let cover = inst.grid().cover(cube);
    let sigma = inst.sigma().values();
    let (num, den) = cover.cells.iter().fold((0.0, 0.0), |(n, d), &c| {
        (n + f.value(c) * sigma[c], d + sigma[c])
    });
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Principal cubes: scanning coarse to fine, a cube is principal when no
/// principal cube contains it or when its `σ`-average exceeds twice that
/// of its minimal principal ancestor.
pub fn corona(
    inst: &Instance,
    f: &StepFunction,
    input: impl IntoIterator<Item = CubeId>,
) -> Result<CoronaFamily> {
    inst.check_function(f)?;
    if !f.is_nonnegative() {
        return Err(Error::Precondition("corona needs f >= 0".into()));
    }
    let mut cubes: Vec<CubeId> = input
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    cubes.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.index.cmp(&b.index)));
    let mut principal: Vec<(CubeId, f64)> = Vec::new();
    let mut gamma = BTreeMap::new();
    for q in cubes {
        let avg = sigma_average(inst, f, &q);
        let ancestor = principal
            .iter()
            .filter(|(g, _)| g.contains(&q))
            .max_by_key(|(g, _)| g.level)
            .cloned();
        match ancestor {
            Some((g, g_avg)) if avg <= 2.0 * g_avg => {
                gamma.insert(q, g);
            }
            _ => {
                gamma.insert(q.clone(), q.clone());
                principal.push((q, avg));
            }
        }
    }
    let mut principal_cubes: Vec<CubeId> = principal.into_iter().map(|(g, _)| g).collect();
    principal_cubes.sort();
    Ok(CoronaFamily {
        principal_cubes,
        gamma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoronaCheck {
    /// Every input cube has `Γ(Q) ∈ 𝒢`, `Q ⊆ Γ(Q)`, `𝔼_Q ≤ 2𝔼_{Γ(Q)}`.
    pub control: bool,
    /// Nested principal cubes `G ⊊ G'` have `2𝔼_{G'} < 𝔼_G`.
    pub growth: bool,
    /// `Γ(Q)` is the minimal principal cube containing `Q`.
    pub minimal: bool,
}

impl CoronaCheck {
    pub fn pass(&self) -> bool {
        self.control && self.growth && self.minimal
    }
}

pub fn corona_check(inst: &Instance, f: &StepFunction, family: &CoronaFamily) -> CoronaCheck {
    let principal: BTreeSet<&CubeId> = family.principal_cubes.iter().collect();
    let avg = |q: &CubeId| sigma_average(inst, f, q);
    let control = family
        .gamma
        .iter()
        .all(|(q, g)| principal.contains(g) && g.contains(q) && avg(q) <= 2.0 * avg(g));
    let growth = family.principal_cubes.iter().all(|g| {
        family
            .principal_cubes
            .iter()
            .filter(|big| big.strictly_contains(g))
            .all(|big| 2.0 * avg(big) < avg(g))
    });
    let minimal = family.gamma.iter().all(|(q, g)| {
        !family
            .principal_cubes
            .iter()
            .any(|other| other.contains(q) && g.strictly_contains(other))
    });
    CoronaCheck {
        control,
        growth,
        minimal,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarlesonSum {
    /// `Σ_{G∈𝒢} σ(G) (𝔼^σ_G f)^r`
    pub lhs: f64,
    /// `∫ f^r σ`
    pub rhs: f64,
}

pub fn corona_carleson_sum(
    inst: &Instance,
    f: &StepFunction,
    family: &CoronaFamily,
) -> CarlesonSum {
    let r = inst.r();
    let sigma = inst.sigma();
    let lhs = family
        .principal_cubes
        .iter()
        .map(|g| {
            let cover = inst.grid().cover(g);
            let mass: f64 = cover.cells.iter().map(|&c| sigma.value(c)).sum::<f64>()
                * inst.cell_measure()
                * cover.fraction;
            mass * pow_abs(sigma_average(inst, f, g), r)
        })
        .sum();
    let rhs = f
        .values()
        .iter()
        .zip(sigma.values())
        .map(|(&v, &s)| pow_abs(v, r) * s)
        .sum::<f64>()
        * inst.cell_measure();
    CarlesonSum { lhs, rhs }
}

/// `2^r (r')^r`.
pub fn corona_constant(r: f64) -> f64 {
    let rc = r / (r - 1.0);
    (2.0 * rc).powf(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborFamilies {
    /// `{Q' ∈ 𝒬_k : Q' ∩ Q^(1) ≠ ∅}`
    pub n_k: Vec<CubeId>,
    /// `{R ∈ 𝒬_{k+3} : Q^(1) ∩ R ≠ ∅}`
    pub r_k: Vec<CubeId>,
    /// Every `R ∈ R_k` is strictly inside `Q^(1)`.
    pub inside_parent: bool,
    /// `⋃ R_k ⊇ Q^(1) ∩ Ω_{k+3}`.
    pub covers: bool,
    /// `⋃ R_k ⊆ Q^(1) ∩ Ω_{k+3}`.
    pub contained: bool,
}

impl NeighborFamilies {
    pub fn union_identity(&self) -> bool {
        self.covers && self.contained
    }
}

pub fn neighbor_families(levels: &LevelSets, k: i32, cube: &CubeId) -> NeighborFamilies {
    let grid = *levels.tbar.grid();
    let parent = cube.parent();
    let empty: Vec<CubeId> = Vec::new();
    let same = levels.family(k).map_or(&empty, |f| &f.cubes);
    let upper = levels.family(k + 3).map_or(&empty, |f| &f.cubes);
    let n_k: Vec<CubeId> = same
        .iter()
        .filter(|q| q.intersects(&parent))
        .cloned()
        .collect();
    let r_k: Vec<CubeId> = upper
        .iter()
        .filter(|r| r.intersects(&parent))
        .cloned()
        .collect();
    let inside_parent = r_k.iter().all(|r| parent.strictly_contains(r));
    let target = levels
        .omega(k + 3)
        .intersection(&CellSet::from_cells(grid, grid.cover(&parent).cells));
    let mut coverage = vec![0.0f64; grid.num_cells()];
    let mut outside = false;
    for r in &r_k {
        let cover = grid.cover(r);
        outside |= !parent.contains(r);
        for &c in &cover.cells {
            coverage[c] += cover.fraction;
        }
    }
    let covers = target.iter().all(|c| coverage[c] == 1.0);
    let contained = !outside
        && coverage
            .iter()
            .enumerate()
            .all(|(c, &v)| v == 0.0 || (target.contains(c) && v <= 1.0));
    NeighborFamilies {
        n_k,
        r_k,
        inside_parent,
        covers,
        contained,
    }
}

/// `U({a_P 1_E w})` at every cell, for a piece `E`.
fn dual_on_piece(inst: &Instance, a: &BSequence, piece: &Piece) -> Vec<f64> {
    let w = inst.w().values();
    let h = inst.cell_measure();
    let mut out = vec![0.0; inst.num_cells()];
    if piece.is_empty() {
        return out;
    }
    for member in inst.members() {
        let Some(comp) = a.family.get(&member.cube) else {
            continue;
        };
        let mass: f64 = piece
            .cells
            .iter()
            .filter(|c| member.cells.binary_search(c).is_ok())
            .map(|&c| comp.value(c) * w[c])
            .sum::<f64>()
            * h
            * piece.fraction;
        if mass == 0.0 {
            continue;
        }
        let term = member.tau * mass / member.measure;
        for &c in &member.cells {
            out[c] += term;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstancyCheck {
    pub values: Vec<f64>,
    pub constant: bool,
}

/// Values of `x ↦ U({a_P 1_{E_k(Q)∩P} w})(x)` on the cells of `R`.
pub fn dual_constancy_check(
    inst: &Instance,
    a: &BSequence,
    piece: &Piece,
    r: &CubeId,
) -> ConstancyCheck {
    let v = dual_on_piece(inst, a, piece);
    let values: Vec<f64> = inst.grid().cover(r).cells.iter().map(|&c| v[c]).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let constant = values.is_empty() || hi - lo <= EXACT_TOLERANCE * hi.abs();
    ConstancyCheck { values, constant }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeClass {
    pub cube: CubeId,
    /// 1, 2 or 3.
    pub class: u8,
    pub alpha: f64,
    pub beta: f64,
    /// `w(E_k(Q)) / w(Q)`
    pub e_fraction: f64,
    /// `|α + β − ∫_{E_k(Q)} ⟨T(1_{Q^(1)} fσ), a⟩ w|`, relative.
    pub pairing_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifiedLevel {
    pub k: i32,
    pub eta: f64,
    pub cubes: Vec<CubeClass>,
    #[serde(serialize_with = "pairs")]
    pub e_k: BTreeMap<CubeId, Piece>,
}

impl ClassifiedLevel {
    pub fn class(&self, n: u8) -> Vec<CubeId> {
        self.cubes
            .iter()
            .filter(|c| c.class == n)
            .map(|c| c.cube.clone())
            .collect()
    }
}

fn piece_mass(piece: &Piece, mu: &Weight) -> f64 {
    piece.mass(mu.as_step())
}

pub fn classify_cubes(
    inst: &Instance,
    f: &StepFunction,
    a: &BSequence,
    levels: &LevelSets,
    k: i32,
    eta: f64,
) -> Result<ClassifiedLevel> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Precondition(format!(
            "eta must lie in (0,1), got {eta}"
        )));
    }
    let grid = *inst.grid();
    let e_k = ek_sets(levels, k);
    let upper = levels.omega(k + 3);
    let sigma = inst.sigma().values();
    let h = inst.cell_measure();
    let members = inst.members();
    let entries: Vec<(&CubeId, &Piece)> = e_k.iter().collect();
    let cubes = par::map(&entries, |&(q, piece)| {
        let whole = Piece::new(&grid, q, &CellSet::full(grid));
        let wq = piece_mass(&whole, inst.w());
        let we = piece_mass(piece, inst.w());
        let v = dual_on_piece(inst, a, piece);
        let parent = q.parent();
        let (mut alpha, mut beta) = (0.0, 0.0);
        for c in grid.cover(&parent).cells {
            let term = f.value(c) * v[c] * sigma[c] * h;
            if upper.contains(c) {
                beta += term;
            } else {
                alpha += term;
            }
        }
        // ∫_E ⟨T(1_{Q^(1)} fσ), a⟩ w
        let parent_cells = CellSet::from_cells(grid, grid.cover(&parent).cells);
        let g: Vec<f64> = (0..grid.num_cells())
            .map(|c| {
                if parent_cells.contains(c) {
                    f.value(c)
                } else {
                    0.0
                }
            })
            .collect();
        let avgs = member_averages(inst, &g, sigma);
        let w = inst.w().values();
        let mut pairing = 0.0;
        for &c in &piece.cells {
            for &m in inst.cell_members(c) {
                let av = a
                    .family
                    .get(&members[m].cube)
                    .map_or(0.0, |comp| comp.value(c));
                pairing += members[m].tau * avgs[m] * av * w[c] * h * piece.fraction;
            }
        }
        let scale = pairing.abs().max((alpha + beta).abs());
        let pairing_error = if scale > 0.0 {
            (alpha + beta - pairing).abs() / scale
        } else {
            0.0
        };
        let class = if we <= eta * wq {
            1
        } else if alpha > beta {
            2
        } else {
            3
        };
        CubeClass {
            cube: q.clone(),
            class,
            alpha,
            beta,
            e_fraction: we / wq,
            pairing_error,
        }
    });
    Ok(ClassifiedLevel { k, eta, cubes, e_k })
}

/// `C_occ = 6 + ⌈1/η⌉`.
pub fn occurrence_bound(eta: f64) -> usize {
    6 + (1.0 / eta).ceil() as usize
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Occurrences {
    /// `c(R) = #{k : R ∈ R_k(Q) for some Q ∈ 𝒬_k^3}`.
    #[serde(serialize_with = "pairs")]
    pub counts: BTreeMap<CubeId, usize>,
    /// Number of pairs `(k, Q)` with `Q ∈ 𝒬_k^3` and `R ∈ R_k(Q)`.
    #[serde(serialize_with = "pairs")]
    pub pair_counts: BTreeMap<CubeId, usize>,
}

impl Occurrences {
    pub fn max_count(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }
}

pub fn occurrence_count(levels: &LevelSets, classified: &[ClassifiedLevel]) -> Occurrences {
    let mut ks: BTreeMap<CubeId, BTreeSet<i32>> = BTreeMap::new();
    let mut pairs: BTreeMap<CubeId, usize> = BTreeMap::new();
    for level in classified {
        for q in level.class(3) {
            for r in neighbor_families(levels, level.k, &q).r_k {
                ks.entry(r.clone()).or_default().insert(level.k);
                *pairs.entry(r).or_default() += 1;
            }
        }
    }
    Occurrences {
        counts: ks.into_iter().map(|(r, s)| (r, s.len())).collect(),
        pair_counts: pairs,
    }
}

/// Every computation of this module for one test function.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub levels: LevelSets,
    pub sequence: BSequence,
    pub classified: Vec<ClassifiedLevel>,
    pub occurrences: Occurrences,
}

pub fn decompose(inst: &Instance, f: &StepFunction, eta: f64) -> Result<Decomposition> {
    let levels = level_sets(inst, f)?;
    let sequence = canonical_sequence(inst, f)?;
    let classified = levels
        .analysis_levels()
        .into_iter()
        .map(|k| classify_cubes(inst, f, &sequence, &levels, k, eta))
        .collect::<Result<Vec<_>>>()?;
    let occurrences = occurrence_count(&levels, &classified);
    Ok(Decomposition {
        levels,
        sequence,
        classified,
        occurrences,
    })
}

impl Decomposition {
    /// Input cubes of the corona construction for residue class `m`:
    /// `⋃_{k ≡ m mod 3} 𝒬_k` over the analysis levels.
    pub fn corona_input(&self, m: i32) -> Vec<CubeId> {
        let mut out = BTreeSet::new();
        for k in self.levels.analysis_levels() {
            if k.rem_euclid(3) == m {
                if let Some(fam) = self.levels.family(k) {
                    out.extend(fam.cubes.iter().cloned());
                }
            }
        }
        out.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{i1, i2};

    fn d1(depth: u32) -> DyadicGrid {
        DyadicGrid::new(1, depth).unwrap()
    }

    fn cube(level: i32, i: u64) -> CubeId {
        CubeId::new(level, vec![i])
    }

    #[test]
    fn whitney_examples() {
        let g = d1(2);
        let half = CellSet::from_cube(g, &cube(1, 0));
        let fam = whitney(&g, &half).unwrap();
        assert_eq!(fam.cubes, vec![cube(2, 0), cube(2, 1)]);
        assert!(fam.check().pass());

        let single = CellSet::from_cells(g, [2]);
        let fam = whitney(&g, &single).unwrap();
        assert_eq!(fam.cubes, vec![cube(3, 4), cube(3, 5)]);
        assert!(fam.check().pass());

        let fam = whitney(&g, &CellSet::full(g)).unwrap();
        assert_eq!(fam.cubes, vec![cube(1, 0), cube(1, 1)]);
        let check = fam.check();
        assert!(check.pass());
        assert_eq!(check.max_parent_overlap, 2);
        assert_eq!(check.max_crowd, 2);

        assert!(whitney(&g, &CellSet::empty(g)).unwrap().cubes.is_empty());
    }

    #[test]
    fn whitney_two_dimensional() {
        let g = DyadicGrid::new(2, 2).unwrap();
        let fam = whitney(&g, &CellSet::from_cells(g, [0, 1, 5])).unwrap();
        let check = fam.check();
        assert!(check.pass(), "{check:?}");
        assert_eq!(fam.cubes.len(), 12);
    }

    #[test]
    fn level_set_examples() {
        let inst = i1();
        let one = StepFunction::constant(*inst.grid(), 1.0);
        let ls = level_sets(&inst, &one).unwrap();
        assert_eq!(ls.window, Some((-1, 0)));
        assert!(ls.omega(-1).is_full() && ls.omega(-3).is_full());
        assert!(ls.omega(0).is_empty());
        assert_eq!(ls.family(-1).unwrap().cubes, vec![cube(1, 0), cube(1, 1)]);
        assert!(nested_check(&ls));

        let zero = level_sets(&inst.scale_tau(0.0).unwrap(), &one).unwrap();
        assert!(zero.levels().is_empty());

        let inst = i2();
        let ls = level_sets(&inst, &StepFunction::constant(*inst.grid(), 1.0)).unwrap();
        assert!(ls.omega(0).is_full() && ls.omega(-1).is_full());
        assert!(ls.omega(1).is_empty());
    }

    #[test]
    fn ek_examples() {
        let inst = i1();
        let ls = level_sets(&inst, &StepFunction::constant(*inst.grid(), 1.0)).unwrap();
        let e = ek_sets(&ls, -3);
        for (q, piece) in &e {
            assert_eq!(piece.cells, inst.grid().cover(q).cells);
        }
        assert!(ek_identity_check(&ls, -3));
        assert!(ek_sets(&ls, -1).values().all(Piece::is_empty));

        let inst = i2();
        let ls = level_sets(&inst, &StepFunction::constant(*inst.grid(), 1.0)).unwrap();
        let e = ek_sets(&ls, -2);
        assert_eq!(e.len(), 2);
        for (q, piece) in &e {
            assert_eq!(piece.cells, inst.grid().cover(q).cells);
        }
    }

    #[test]
    fn max_principle_on_i2() {
        let inst = i2();
        let f = StepFunction::constant(*inst.grid(), 1.0);
        let ls = level_sets(&inst, &f).unwrap();
        for q in &ls.family(0).unwrap().cubes {
            assert!(max_principle_check(&inst, &f, &ls, 0, q).unwrap().pass);
        }
        assert!(max_principle_check(&inst, &f, &ls, 0, &cube(2, 0)).is_err());
    }

    #[test]
    fn max_principle_root_only_and_local_support() {
        let inst = i1();
        let f = StepFunction::new(*inst.grid(), vec![3.0, 0.5]).unwrap();
        let ls = level_sets(&inst, &f).unwrap();
        for k in ls.analysis_levels() {
            for q in &ls.family(k).unwrap().cubes {
                let chk = max_principle_check(&inst, &f, &ls, k, q).unwrap();
                assert_eq!(chk.out_val_max, 0.0);
                assert!(chk.pass);
            }
        }
    }

    #[test]
    fn reports_serialize() {
        let inst = i2();
        let f = StepFunction::constant(*inst.grid(), 1.0);
        let d = decompose(&inst, &f, 0.01).unwrap();
        let text = serde_json::to_string(&d.classified).unwrap();
        assert!(text.contains("\"e_k\":[["));
        serde_json::to_string(&d.occurrences).unwrap();
        let input: Vec<CubeId> = inst.members().iter().map(|m| m.cube.clone()).collect();
        serde_json::to_string(&corona(&inst, &f, input).unwrap()).unwrap();
    }

    #[test]
    fn corona_examples() {
        let g = d1(2);
        let inst = i2();
        let all = g.grid_cubes();
        let one = StepFunction::constant(g, 1.0);
        let fam = corona(&inst, &one, all.clone()).unwrap();
        assert_eq!(fam.principal_cubes, vec![CubeId::root(1)]);
        assert!(fam.gamma.values().all(|v| *v == CubeId::root(1)));

        let spike = StepFunction::new(g, vec![8.0, 0.0, 0.0, 0.0]).unwrap();
        let fam = corona(&inst, &spike, all.clone()).unwrap();
        // 𝔼 over [0,1/2) is 4 = 2·2, not strictly larger, so [0,1/2) is not principal
        assert_eq!(fam.principal_cubes, vec![CubeId::root(1), cube(2, 0)]);
        assert!(corona_check(&inst, &spike, &fam).pass());
        let sum = corona_carleson_sum(&inst, &spike, &fam);
        assert_eq!((sum.lhs, sum.rhs), (20.0, 16.0));

        let manual = CoronaFamily {
            principal_cubes: vec![CubeId::root(1), cube(1, 0), cube(2, 0)],
            gamma: BTreeMap::new(),
        };
        let sum = corona_carleson_sum(&inst, &spike, &manual);
        assert_eq!((sum.lhs, sum.rhs), (28.0, 16.0));
        assert!(sum.lhs / sum.rhs <= corona_constant(2.0));

        let fam = corona(&inst, &spike, vec![cube(1, 1)]).unwrap();
        assert_eq!(fam.principal_cubes, vec![cube(1, 1)]);
        assert_eq!(fam.gamma[&cube(1, 1)], cube(1, 1));
        assert!(corona(&inst, &spike, Vec::new())
            .unwrap()
            .principal_cubes
            .is_empty());
    }

    #[test]
    fn neighbor_examples() {
        let inst = i2();
        let f = StepFunction::new(*inst.grid(), vec![8.0, 0.0, 0.0, 1.0]).unwrap();
        let d = decompose(&inst, &f, 0.01).unwrap();
        let mut populated = 0;
        for k in d.levels.analysis_levels() {
            for q in &d.levels.family(k).unwrap().cubes {
                let nb = neighbor_families(&d.levels, k, q);
                assert!(nb.union_identity() && nb.inside_parent);
                assert!(nb.n_k.len() <= 4 && nb.n_k.contains(q));
                populated += nb.r_k.len();
                let e = &d.classified.iter().find(|c| c.k == k).unwrap().e_k[q];
                for r in &nb.r_k {
                    assert!(dual_constancy_check(&inst, &d.sequence, e, r).constant);
                }
            }
        }
        assert!(populated > 0);
        let top = d.levels.window.unwrap().1;
        for q in &d.levels.family(top).unwrap().cubes {
            assert!(neighbor_families(&d.levels, top, q).r_k.is_empty());
        }
    }

    #[test]
    fn classification_examples() {
        let inst = i1();
        let f = StepFunction::constant(*inst.grid(), 1.0);
        let d = decompose(&inst, &f, 0.01).unwrap();
        let level = d.classified.iter().find(|c| c.k == -3).unwrap();
        assert_eq!(level.class(2).len(), 2);
        for c in &level.cubes {
            assert_eq!(c.beta, 0.0);
            assert!(c.pairing_error < 1e-12);
        }
        let level = d.classified.iter().find(|c| c.k == -1).unwrap();
        assert_eq!(level.class(1).len(), level.cubes.len());
        assert!(classify_cubes(&inst, &f, &d.sequence, &d.levels, -1, 1.0).is_err());
    }

    #[test]
    fn occurrence_examples() {
        let inst = i2().scale_tau(0.0).unwrap();
        let f = StepFunction::constant(*inst.grid(), 1.0);
        let d = decompose(&inst, &f, 0.01).unwrap();
        assert_eq!(d.occurrences.max_count(), 0);
        assert_eq!(occurrence_bound(0.01), 106);
        assert_eq!(occurrence_bound(0.1), 16);
    }

    #[test]
    fn log2_rounding() {
        assert_eq!(floor_log2(1.0), 0);
        assert_eq!(floor_log2(3f64.sqrt()), 0);
        assert_eq!(ceil_log2(3f64.sqrt()), 1);
        assert_eq!(ceil_log2(4.0), 2);
        assert_eq!(floor_log2(0.25), -2);
        assert_eq!(floor_log2(0.2), -3);
    }
}
