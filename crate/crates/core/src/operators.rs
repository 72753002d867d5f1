//! The vector-valued averaging operator `T`, its pointwise `ℓ^q` envelope
//! `T̄`, the dual `U`, the canonical unit sequence `a_f`, and the dyadic
//! maximal function.
//!
//! For a collection `𝒬` with coefficients `τ`,
//!
//! ```text
//! T(fσ)   = { τ_Q 𝔼_Q(fσ) 1_Q }_{Q ∈ 𝒬}
//! T̄(fσ)  = ( Σ_Q |τ_Q 𝔼_Q(fσ) 1_Q|^q )^{1/q}
//! U({g_Q w}) = Σ_Q τ_Q 𝔼_Q(g_Q w) 1_Q
//! ```
//!
//! where `𝔼_Q` is the Lebesgue average over `Q`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellSet, CubeId, DyadicGrid, StepFunction, Weight};
use crate::instance::Instance;

/// Cube-indexed family `{g_Q}` with `supp g_Q ⊆ Q`. Missing keys are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentFamily {
    grid: DyadicGrid,
    components: BTreeMap<CubeId, StepFunction>,
}

impl ComponentFamily {
    pub fn empty(grid: DyadicGrid) -> Self {
        Self {
            grid,
            components: BTreeMap::new(),
        }
    }

    pub fn new(
        grid: DyadicGrid,
        components: impl IntoIterator<Item = (CubeId, StepFunction)>,
    ) -> Result<Self> {
        let mut family = Self::empty(grid);
        for (cube, g) in components {
            family.insert(cube, g)?;
        }
        Ok(family)
    }

    /// Adds a component, checking that it lives on the grid and vanishes
    /// outside its cube.
    pub fn insert(&mut self, cube: CubeId, g: StepFunction) -> Result<()> {
        self.grid.check_same_cells(g.grid())?;
        self.grid.validate(&cube)?;
        let inside = CellSet::from_cube(self.grid, &cube);
        if let Some(c) = (0..g.values().len()).find(|&c| !inside.contains(c) && g.value(c) != 0.0) {
            return Err(Error::Precondition(format!(
                "component for {cube} is nonzero at cell {c} outside its cube"
            )));
        }
        self.components.insert(cube, g);
        Ok(())
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn get(&self, cube: &CubeId) -> Option<&StepFunction> {
        self.components.get(cube)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CubeId, &StepFunction)> {
        self.components.iter()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Pointwise `ℓ^s` norm of the components.
    pub fn pointwise_norm(&self, s: f64) -> StepFunction {
        let mut acc = vec![0.0; self.grid.num_cells()];
        for g in self.components.values() {
            for (a, &v) in acc.iter_mut().zip(g.values()) {
                *a += pow_abs(v, s);
            }
        }
        StepFunction::new(
            self.grid,
            acc.into_iter().map(|a| a.powf(1.0 / s)).collect(),
        )
        .expect("finite norms")
    }

    /// Restricts every component to the cells of `cells`.
    pub fn masked(&self, cells: &CellSet) -> ComponentFamily {
        ComponentFamily {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|(q, g)| (q.clone(), g.masked(cells)))
                .collect(),
        }
    }

    pub fn to_json_value(&self) -> ComponentFamilyJson {
        ComponentFamilyJson {
            components: self
                .components
                .iter()
                .map(|(cube, g)| ComponentJson {
                    cube: cube.clone(),
                    values: self
                        .grid
                        .cover(cube)
                        .cells
                        .iter()
                        .map(|&c| g.value(c))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_json_value(grid: DyadicGrid, raw: ComponentFamilyJson) -> Result<Self> {
        let mut family = Self::empty(grid);
        for comp in raw.components {
            grid.validate(&comp.cube)?;
            let cells = grid.cover(&comp.cube).cells;
            if cells.len() != comp.values.len() {
                return Err(Error::Structural(format!(
                    "component for {} has {} values, cube holds {} cells",
                    comp.cube,
                    comp.values.len(),
                    cells.len()
                )));
            }
            let mut values = vec![0.0; grid.num_cells()];
            for (&c, v) in cells.iter().zip(comp.values) {
                values[c] = v;
            }
            family.insert(comp.cube, StepFunction::new(grid, values)?)?;
        }
        Ok(family)
    }
}

/// Wire format: values are listed only for the cells inside each cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentFamilyJson {
    pub components: Vec<ComponentJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentJson {
    pub cube: CubeId,
    pub values: Vec<f64>,
}

/// A family whose pointwise `ℓ^{q'}` norm is 1 on `support` and at most 1
/// elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct BSequence {
    pub family: ComponentFamily,
    pub support: CellSet,
}

impl BSequence {
    /// Largest deviation of the pointwise `ℓ^{q'}` norm from 1 on the
    /// support, and largest excess over 1 off it.
    pub fn normalization_error(&self, q_conj: f64) -> f64 {
        let norms = self.family.pointwise_norm(q_conj);
        norms
            .values()
            .iter()
            .enumerate()
            .map(|(c, &n)| {
                if self.support.contains(c) {
                    (n - 1.0).abs()
                } else {
                    (n - 1.0).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn pow_abs(v: f64, s: f64) -> f64 {
    if s == 1.0 {
        v.abs()
    } else if s == 2.0 {
        v * v
    } else {
        v.abs().powf(s)
    }
}

/// `𝔼_R(f μ)` for every member `R`, with `f` and `μ` given cellwise.
pub(crate) fn member_averages(inst: &Instance, f: &[f64], mu: &[f64]) -> Vec<f64> {
    let h = inst.cell_measure();
    inst.members()
        .iter()
        .map(|m| m.cells.iter().map(|&c| f[c] * mu[c]).sum::<f64>() * h / m.measure)
        .collect()
}

/// `(Σ |t|^q)^{1/q}`, scaled by the largest term so tiny values do not
/// underflow; a plain sum for `q = 1`.
pub(crate) fn lq_norm<I>(terms: I, q: f64) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    if q == 1.0 {
        return terms.map(f64::abs).sum();
    }
    let top = terms.clone().map(f64::abs).fold(0.0, f64::max);
    if top == 0.0 || !top.is_finite() {
        return top;
    }
    top * terms
        .map(|t| pow_abs(t / top, q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Pointwise `(Σ_{R ∋ x, keep(R)} |τ_R avg_R|^q)^{1/q}`.
pub(crate) fn envelope(
    inst: &Instance,
    averages: &[f64],
    q: f64,
    keep: impl Fn(usize) -> bool,
) -> Vec<f64> {
    let members = inst.members();
    (0..inst.num_cells())
        .map(|c| {
            let terms = inst
                .cell_members(c)
                .iter()
                .filter(|&&m| keep(m))
                .map(|&m| members[m].tau * averages[m]);
            lq_norm(terms, q)
        })
        .collect()
}

/// `T̄(fσ)` evaluated with an explicit exponent (q = 1 gives the linear
/// operator `Σ τ_Q 𝔼_Q(fσ) 1_Q` for non-negative `f`).
pub(crate) fn tbar_values(inst: &Instance, f: &[f64], q: f64) -> Vec<f64> {
    let avgs = member_averages(inst, f, inst.sigma().values());
    envelope(inst, &avgs, q, |_| true)
}

pub fn apply_t(inst: &Instance, f: &StepFunction) -> Result<ComponentFamily> {
    inst.check_function(f)?;
    let avgs = member_averages(inst, f.values(), inst.sigma().values());
    let grid = *inst.grid();
    let mut family = ComponentFamily::empty(grid);
    for (m, member) in inst.members().iter().enumerate() {
        let mut values = vec![0.0; grid.num_cells()];
        for &c in &member.cells {
            values[c] = avgs[m] * member.tau;
        }
        family
            .components
            .insert(member.cube.clone(), StepFunction::new(grid, values)?);
    }
    Ok(family)
}

pub fn apply_tbar(inst: &Instance, f: &StepFunction) -> Result<StepFunction> {
    inst.check_function(f)?;
    StepFunction::new(*inst.grid(), tbar_values(inst, f.values(), inst.q()))
}

/// `U({g_Q w})`; the weight `w` is applied here, `g` is the raw family.
pub fn apply_u(inst: &Instance, g: &ComponentFamily) -> Result<StepFunction> {
    inst.grid().check_same_cells(g.grid())?;
    let h = inst.cell_measure();
    let w = inst.w().values();
    let mut out = vec![0.0; inst.num_cells()];
    for (cube, comp) in g.iter() {
        let m = inst.member_index(cube).ok_or_else(|| {
            Error::Precondition(format!("component {cube} is not in the collection"))
        })?;
        let member = &inst.members()[m];
        let avg = member
            .cells
            .iter()
            .map(|&c| comp.value(c) * w[c])
            .sum::<f64>()
            * h
            / member.measure;
        for &c in &member.cells {
            out[c] += member.tau * avg;
        }
    }
    StepFunction::new(*inst.grid(), out)
}

/// `T̄^in_Q` (terms with `R ⊆ Q`) and `T̄^out_Q` (terms with `R ⊋ Q`).
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub inside: StepFunction,
    pub outside: StepFunction,
}

pub fn apply_tbar_split(inst: &Instance, f: &StepFunction, cube: &CubeId) -> Result<Split> {
    inst.check_function(f)?;
    inst.grid().validate(cube)?;
    let avgs = member_averages(inst, f.values(), inst.sigma().values());
    let members = inst.members();
    let q = inst.q();
    let inside = envelope(inst, &avgs, q, |m| cube.contains(&members[m].cube));
    let outside = envelope(inst, &avgs, q, |m| members[m].cube.strictly_contains(cube));
    Ok(Split {
        inside: StepFunction::new(*inst.grid(), inside)?,
        outside: StepFunction::new(*inst.grid(), outside)?,
    })
}

/// `a_f`: components `(τ_Q 𝔼_Q(fσ))^{q-1} 1_Q · T̄(fσ)^{-(q-1)}`, zero where
/// `T̄(fσ)` vanishes. The normalizer exponent `-q/q' = -(q-1)` makes the
/// pointwise `ℓ^{q'}` norm exactly 1 on `{T̄(fσ) > 0}`.
pub fn canonical_sequence(inst: &Instance, f: &StepFunction) -> Result<BSequence> {
    inst.check_function(f)?;
    if !f.is_nonnegative() {
        return Err(Error::Precondition(
            "canonical sequence needs f >= 0".into(),
        ));
    }
    let q = inst.q();
    let avgs = member_averages(inst, f.values(), inst.sigma().values());
    let tbar = envelope(inst, &avgs, q, |_| true);
    let grid = *inst.grid();
    let mut family = ComponentFamily::empty(grid);
    for (m, member) in inst.members().iter().enumerate() {
        let x = member.tau * avgs[m];
        let mut values = vec![0.0; grid.num_cells()];
        for &c in &member.cells {
            if tbar[c] > 0.0 {
                values[c] = (x / tbar[c]).powf(q - 1.0);
            }
        }
        family
            .components
            .insert(member.cube.clone(), StepFunction::new(grid, values)?);
    }
    let support = CellSet::from_cells(grid, (0..grid.num_cells()).filter(|&c| tbar[c] > 0.0));
    Ok(BSequence { family, support })
}

/// Dyadic maximal function `M_ω g(x) = sup_{x ∈ Q} 𝔼_Q^ω |g|` over the grid
/// cubes of levels `0..=D`.
pub fn maximal_function(g: &StepFunction, omega: &Weight) -> Result<StepFunction> {
    g.grid().check_same_cells(omega.grid())?;
    let grid = *g.grid();
    let mut best = vec![0.0f64; grid.num_cells()];
    for cube in grid.grid_cubes() {
        let cells = grid.cover(&cube).cells;
        let (num, den) = cells.iter().fold((0.0, 0.0), |(n, d), &c| {
            (n + g.value(c).abs() * omega.value(c), d + omega.value(c))
        });
        let avg = num / den;
        for &c in &cells {
            best[c] = best[c].max(avg);
        }
    }
    StepFunction::new(grid, best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualityPair {
    /// `∫ ⟨T(fσ), g⟩ w`
    pub lhs: f64,
    /// `∫ U({g_Q w}) f σ`
    pub rhs: f64,
}

pub fn duality_pair(inst: &Instance, f: &StepFunction, g: &ComponentFamily) -> Result<DualityPair> {
    let t = apply_t(inst, f)?;
    let h = inst.cell_measure();
    let w = inst.w().values();
    let mut lhs = 0.0;
    for (cube, comp) in g.iter() {
        let tq = t.get(cube).ok_or_else(|| {
            Error::Precondition(format!("component {cube} is not in the collection"))
        })?;
        lhs += (0..inst.num_cells())
            .map(|c| tq.value(c) * comp.value(c) * w[c])
            .sum::<f64>()
            * h;
    }
    let u = apply_u(inst, g)?;
    let sigma = inst.sigma().values();
    let rhs = (0..inst.num_cells())
        .map(|c| u.value(c) * f.value(c) * sigma[c])
        .sum::<f64>()
        * h;
    Ok(DualityPair { lhs, rhs })
}

/// `‖g‖_{L^s(μ)}` for a cellwise function.
pub fn lp_norm(g: &StepFunction, mu: &StepFunction, s: f64) -> f64 {
    let h = g.grid().cell_measure();
    let total: f64 = g
        .values()
        .iter()
        .zip(mu.values())
        .map(|(&v, &m)| pow_abs(v, s) * m)
        .sum::<f64>()
        * h;
    total.powf(1.0 / s)
}

/// `‖{g_Q}‖_{L^{s}_{ℓ^{t}}(μ)}`.
pub fn mixed_norm(g: &ComponentFamily, mu: &StepFunction, s: f64, t: f64) -> f64 {
    lp_norm(&g.pointwise_norm(t), mu, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Exponents;
    use crate::testkit::{i0, i1, i2};

    fn sf(inst: &Instance, v: &[f64]) -> StepFunction {
        StepFunction::new(*inst.grid(), v.to_vec()).unwrap()
    }

    fn assert_all(f: &StepFunction, expected: &[f64]) {
        assert_eq!(f.values().len(), expected.len());
        for (a, b) in f.values().iter().zip(expected) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn t_single_cube() {
        let inst = i0();
        let t = apply_t(&inst, &sf(&inst, &[1.0])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(&CubeId::root(1)).unwrap().values(), &[1.0]);

        let inst = i1();
        let t = apply_t(&inst, &sf(&inst, &[2.0, 0.0])).unwrap();
        assert_all(t.get(&CubeId::root(1)).unwrap(), &[1.0, 1.0]);
        let t = apply_t(&inst, &StepFunction::zeros(*inst.grid())).unwrap();
        assert_all(t.get(&CubeId::root(1)).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn tbar_examples() {
        let inst = i2();
        let one = StepFunction::constant(*inst.grid(), 1.0);
        assert_all(&apply_tbar(&inst, &one).unwrap(), &[3f64.sqrt(); 4]);

        let inst = i1();
        assert_all(
            &apply_tbar(&inst, &sf(&inst, &[2.0, 0.0])).unwrap(),
            &[1.0, 1.0],
        );

        let two = i1()
            .with_collection(vec![(CubeId::root(1), 1.0), (CubeId::new(1, vec![0]), 1.0)])
            .unwrap();
        let two = Instance::new(
            *two.grid(),
            Weight::lebesgue(*two.grid()),
            two.w().clone(),
            *two.exponents(),
            two.members().iter().map(|m| (m.cube.clone(), m.tau)),
        )
        .unwrap();
        assert_all(
            &apply_tbar(&two, &sf(&two, &[2.0, 0.0])).unwrap(),
            &[5f64.sqrt(), 1.0],
        );
    }

    #[test]
    fn u_examples() {
        let inst = i1();
        let root = CubeId::root(1);
        let g = ComponentFamily::new(
            *inst.grid(),
            [(root, StepFunction::constant(*inst.grid(), 1.0))],
        )
        .unwrap();
        assert_all(&apply_u(&inst, &g).unwrap(), &[2.5, 2.5]);
        assert_all(
            &apply_u(&inst, &ComponentFamily::empty(*inst.grid())).unwrap(),
            &[0.0, 0.0],
        );

        let inst = i2();
        let g = all_ones(&inst);
        assert_eq!(apply_u(&inst, &g).unwrap().value(0), 3.0);
    }

    fn all_ones(inst: &Instance) -> ComponentFamily {
        let grid = *inst.grid();
        ComponentFamily::new(
            grid,
            inst.members().iter().map(|m| {
                (
                    m.cube.clone(),
                    StepFunction::indicator(grid, &m.cube).unwrap(),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn split_examples() {
        let inst = i2();
        let one = StepFunction::constant(*inst.grid(), 1.0);
        let s = apply_tbar_split(&inst, &one, &CubeId::new(1, vec![0])).unwrap();
        let r2 = 2f64.sqrt();
        assert_all(&s.inside, &[r2, r2, 0.0, 0.0]);
        assert_all(&s.outside, &[1.0; 4]);

        let inst = i0();
        let one = StepFunction::constant(*inst.grid(), 1.0);
        let s = apply_tbar_split(&inst, &one, &CubeId::root(1)).unwrap();
        assert_eq!(s.inside, apply_tbar(&inst, &one).unwrap());
        assert_all(&s.outside, &[0.0]);

        let inst = i1().with_collection(vec![(CubeId::root(1), 1.0)]).unwrap();
        let one = StepFunction::constant(*inst.grid(), 1.0);
        let s = apply_tbar_split(&inst, &one, &CubeId::new(1, vec![1])).unwrap();
        assert_all(&s.inside, &[0.0, 0.0]);
        assert_all(&s.outside, &[1.0, 1.0]);
    }

    #[test]
    fn canonical_sequence_examples() {
        let inst = i0();
        let a = canonical_sequence(&inst, &StepFunction::constant(*inst.grid(), 1.0)).unwrap();
        assert_eq!(a.family.get(&CubeId::root(1)).unwrap().values(), &[1.0]);

        // q = 2, two equal terms: each component is 2^{-1/2}
        let grid = DyadicGrid::new(1, 1).unwrap();
        let one = Weight::lebesgue(grid);
        let inst = Instance::new(
            grid,
            one.clone(),
            one,
            Exponents::new(2.0, 2.0, 2.0).unwrap(),
            vec![(CubeId::root(1), 1.0), (CubeId::new(1, vec![0]), 2.0)],
        )
        .unwrap();
        // root term (0.5+1.5)/2 = 1, child term 2·0.5 = 1
        let f = StepFunction::new(grid, vec![0.5, 1.5]).unwrap();
        let a = canonical_sequence(&inst, &f).unwrap();
        let expect = 0.5f64.sqrt();
        assert!((a.family.get(&CubeId::root(1)).unwrap().value(0) - expect).abs() < 1e-15);
        assert!((a.family.get(&CubeId::new(1, vec![0])).unwrap().value(0) - expect).abs() < 1e-15);

        let inst = i2();
        let a = canonical_sequence(&inst, &StepFunction::constant(*inst.grid(), 1.0)).unwrap();
        for (_, comp) in a.family.iter() {
            for &v in comp.values() {
                assert!(v == 0.0 || (v - 3f64.sqrt().recip()).abs() < 1e-15);
            }
        }
        assert!(a.normalization_error(2.0) < 1e-15);
    }

    #[test]
    fn canonical_sequence_vanishes_off_support() {
        let inst = i2()
            .with_collection(vec![(CubeId::new(1, vec![0]), 1.0)])
            .unwrap();
        let a = canonical_sequence(&inst, &StepFunction::constant(*inst.grid(), 1.0)).unwrap();
        assert_eq!(a.support.iter().collect::<Vec<_>>(), vec![0, 1]);
        assert!(a.normalization_error(2.0) < 1e-15);
    }

    #[test]
    fn maximal_function_examples() {
        let grid = DyadicGrid::new(1, 1).unwrap();
        let one = Weight::lebesgue(grid);
        let m = maximal_function(&StepFunction::new(grid, vec![4.0, 0.0]).unwrap(), &one).unwrap();
        assert_eq!(m.values(), &[4.0, 2.0]);
        let m = maximal_function(&StepFunction::constant(grid, -3.0), &one).unwrap();
        assert_eq!(m.values(), &[3.0, 3.0]);
        let grid = DyadicGrid::new(1, 2).unwrap();
        let m = maximal_function(
            &StepFunction::new(grid, vec![8.0, 0.0, 0.0, 0.0]).unwrap(),
            &Weight::lebesgue(grid),
        )
        .unwrap();
        assert_eq!(m.values(), &[8.0, 4.0, 2.0, 2.0]);
    }

    #[test]
    fn duality_examples() {
        let inst = i1();
        let grid = *inst.grid();
        let one = StepFunction::constant(grid, 1.0);
        let g = ComponentFamily::new(grid, [(CubeId::root(1), one.clone())]).unwrap();
        let pair = duality_pair(&inst, &one, &g).unwrap();
        assert_eq!(pair.lhs, 2.5);
        assert_eq!(pair.rhs, 2.5);
        let pair = duality_pair(&inst, &one, &ComponentFamily::empty(grid)).unwrap();
        assert_eq!((pair.lhs, pair.rhs), (0.0, 0.0));

        // oracle: direct double sum over cubes × cells of 𝔼_Q(σ)·τ·w·|cell|
        let inst = i2();
        let grid = *inst.grid();
        let one = StepFunction::constant(grid, 1.0);
        let g = all_ones(&inst);
        let h = grid.cell_measure();
        let mut oracle = 0.0;
        for m in inst.members() {
            for c in 0..grid.num_cells() {
                if m.cells.contains(&c) {
                    oracle += 1.0 * m.tau * 1.0 * inst.w().value(c) * h;
                }
            }
        }
        assert_eq!(oracle, 3.0);
        let pair = duality_pair(&inst, &one, &g).unwrap();
        assert!((pair.lhs - oracle).abs() < 1e-12);
        assert!((pair.rhs - oracle).abs() < 1e-12);
    }

    #[test]
    fn component_outside_cube_is_rejected() {
        let grid = DyadicGrid::new(1, 1).unwrap();
        let err = ComponentFamily::new(
            grid,
            [(CubeId::new(1, vec![0]), StepFunction::constant(grid, 1.0))],
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn component_json_lists_cells_inside_cube() {
        let inst = i2();
        let g = all_ones(&inst);
        let raw = g.to_json_value();
        let leaf = raw
            .components
            .iter()
            .find(|c| c.cube == CubeId::new(2, vec![3]))
            .unwrap();
        assert_eq!(leaf.values, vec![1.0]);
        let text = serde_json::to_string(&raw).unwrap();
        let back =
            ComponentFamily::from_json_value(*inst.grid(), serde_json::from_str(&text).unwrap())
                .unwrap();
        assert_eq!(back, g);
    }
}
