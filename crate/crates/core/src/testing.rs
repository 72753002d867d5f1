//! The testing constants
//!
//! ```text
//! ℒ* = sup_Q σ(Q)^{-p/r} ∫_Q T̄(1_Q σ)^p w
//! ℒ  = sup_Q sup_{a ∈ B} w(Q)^{-r'/p'} ∫_Q U({1_{Q∩R} a_R w})^{r'} σ
//! ```
//!
//! with the outer sup over grid cubes of levels `0..=D`, together with the
//! `q = 1` constants for the linear operator `R(fσ) = Σ τ_Q 𝔼_Q(fσ) 1_Q`
//! and the Carleson constant of the case `r = q = p`.
//!
//! The inner sup in `ℒ` maximizes a convex function of `a`, so it is attained
//! at a sequence that is the Hölder-dual of its own gradient. The gradient
//! with respect to `a_R(y)` is `w_y |y| c_R` for a per-member number `c_R`,
//! hence every candidate is determined by a direction vector `c` indexed by
//! the members meeting `Q`:
//!
//! ```text
//! a_R(y) = c_R^{q-1} / (Σ_{R' ∋ y} c_{R'}^q)^{1/q'}
//! ```
//!
//! The optimizer iterates `c ← gradient(a(c))`, which never decreases the
//! objective. The oracle searches the simplex of directions exhaustively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellSet, CubeId, StepFunction};
use crate::instance::Instance;
use crate::operators::{member_averages, pow_abs, BSequence, ComponentFamily};
use crate::par;
use crate::simplex;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub seed: u64,
    /// Random starts per cube, in addition to the canonical and uniform ones.
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative improvement below which an ascent run stops.
    pub tolerance: f64,
    /// Also run the exhaustive direction-grid search.
    pub oracle: bool,
    /// Point budget of the oracle grid per cube.
    pub oracle_budget: u128,
    /// Upper bound on the oracle grid resolution.
    pub oracle_resolution: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            max_iters: 500,
            tolerance: 1e-13,
            oracle: false,
            oracle_budget: 200_000,
            oracle_resolution: 64,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OptimizerTrace {
    pub iterations: usize,
    pub objective_values: Vec<f64>,
    pub converged: bool,
}

/// Best value found for one outer cube. `direction` is indexed like
/// [`Instance::members`] and is empty for `ℒ*`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeOptimum {
    pub cube: CubeId,
    pub value: f64,
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestingReport {
    pub value: f64,
    pub witness_cube: CubeId,
    pub witness_sequence: Option<BSequence>,
    pub trace: OptimizerTrace,
    pub lower_bound_only: bool,
    pub per_cube: Vec<CubeOptimum>,
}

impl TestingReport {
    pub fn cube(&self, cube: &CubeId) -> Option<&CubeOptimum> {
        self.per_cube.iter().find(|c| &c.cube == cube)
    }
}

fn best_of(per_cube: &[CubeOptimum]) -> usize {
    // first maximum in cube order
    let mut best = 0;
    for (i, c) in per_cube.iter().enumerate() {
        if c.value > per_cube[best].value {
            best = i;
        }
    }
    best
}

/// `σ(Q)^{-p/r} ∫_Q T̄_s(1_Q σ)^p w` with envelope exponent `s`.
fn direct_testing(inst: &Instance, cube: &CubeId, s: f64) -> f64 {
    let grid = inst.grid();
    let cells = grid.cover(cube).cells;
    let sigma = inst.sigma().values();
    let w = inst.w().values();
    let mut f = vec![0.0; inst.num_cells()];
    for &c in &cells {
        f[c] = 1.0;
    }
    let avgs = member_averages(inst, &f, sigma);
    let members = inst.members();
    let h = inst.cell_measure();
    let integral: f64 = cells
        .iter()
        .map(|&c| {
            let t: f64 = inst
                .cell_members(c)
                .iter()
                .map(|&m| pow_abs(members[m].tau * avgs[m], s))
                .sum();
            t.powf(inst.p() / s) * w[c]
        })
        .sum::<f64>()
        * h;
    let mass: f64 = cells.iter().map(|&c| sigma[c]).sum::<f64>() * h;
    integral / mass.powf(inst.p() / inst.r())
}

/// `ℒ*` by exact enumeration of the grid cubes.
pub fn compute_l_star(inst: &Instance) -> TestingReport {
    let cubes = inst.grid().grid_cubes();
    let per_cube: Vec<CubeOptimum> = par::map(&cubes, |q| CubeOptimum {
        cube: q.clone(),
        value: direct_testing(inst, q, inst.q()),
        direction: Vec::new(),
    });
    let best = best_of(&per_cube);
    TestingReport {
        value: per_cube[best].value,
        witness_cube: per_cube[best].cube.clone(),
        witness_sequence: None,
        trace: OptimizerTrace {
            iterations: 0,
            objective_values: Vec::new(),
            converged: true,
        },
        lower_bound_only: false,
        per_cube,
    }
}

/// The inner problem of `ℒ` for a fixed outer cube `Q`.
pub(crate) struct DualProblem<'a> {
    inst: &'a Instance,
    /// Cells of `Q`.
    cells: Vec<usize>,
    /// Instance member indices meeting `Q`.
    locals: Vec<usize>,
    /// For each cell of `Q`, positions into `locals` of members containing it.
    cell_locals: Vec<Vec<usize>>,
    /// `w(Q)^{-r'/p'}`
    normalizer: f64,
}

impl<'a> DualProblem<'a> {
    pub(crate) fn new(inst: &'a Instance, cube: &CubeId) -> Self {
        let cells = inst.grid().cover(cube).cells;
        let locals: Vec<usize> = inst
            .members()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.cube.intersects(cube))
            .map(|(i, _)| i)
            .collect();
        let cell_locals = cells
            .iter()
            .map(|&c| {
                inst.cell_members(c)
                    .iter()
                    .map(|m| locals.binary_search(m).expect("member meets the cube"))
                    .collect()
            })
            .collect();
        let w = inst.w().values();
        let wq: f64 = cells.iter().map(|&c| w[c]).sum::<f64>() * inst.cell_measure();
        let e = inst.exponents();
        Self {
            inst,
            cells,
            locals,
            cell_locals,
            normalizer: wq.powf(-e.r_conj / e.p_conj),
        }
    }

    pub(crate) fn dimension(&self) -> usize {
        self.locals.len()
    }

    /// Sequence values `a_R(y)` for the cells of `Q`, aligned with
    /// `cell_locals`.
    fn sequence(&self, c: &[f64]) -> Vec<Vec<f64>> {
        let q = self.inst.q();
        let qc = self.inst.exponents().q_conj;
        self.cell_locals
            .iter()
            .map(|locs| {
                let total: f64 = locs.iter().map(|&l| pow_abs(c[l], q)).sum();
                if total <= 0.0 {
                    return vec![0.0; locs.len()];
                }
                let norm = total.powf(1.0 / qc);
                locs.iter()
                    .map(|&l| pow_abs(c[l], q - 1.0) / norm)
                    .collect()
            })
            .collect()
    }

    /// `U({1_{Q∩R} a_R w})` on the cells of `Q`.
    fn dual_values(&self, a: &[Vec<f64>]) -> Vec<f64> {
        let members = self.inst.members();
        let w = self.inst.w().values();
        let h = self.inst.cell_measure();
        let mut mass = vec![0.0; self.locals.len()];
        for ((&cell, locs), vals) in self.cells.iter().zip(&self.cell_locals).zip(a) {
            for (&l, &v) in locs.iter().zip(vals) {
                mass[l] += v * w[cell] * h;
            }
        }
        let coeff: Vec<f64> = self
            .locals
            .iter()
            .zip(&mass)
            .map(|(&m, &a)| members[m].tau * a / members[m].measure)
            .collect();
        self.cell_locals
            .iter()
            .map(|locs| locs.iter().map(|&l| coeff[l]).sum())
            .collect()
    }

    fn objective_of_dual(&self, u: &[f64]) -> f64 {
        let sigma = self.inst.sigma().values();
        let rc = self.inst.exponents().r_conj;
        let integral: f64 = self
            .cells
            .iter()
            .zip(u)
            .map(|(&c, &v)| pow_abs(v, rc) * sigma[c])
            .sum::<f64>()
            * self.inst.cell_measure();
        integral * self.normalizer
    }

    /// Normalized objective at the sequence induced by direction `c`.
    pub(crate) fn objective(&self, c: &[f64]) -> f64 {
        self.objective_of_dual(&self.dual_values(&self.sequence(c)))
    }

    /// Gradient direction at the sequence induced by `c`, scaled to max 1,
    /// together with the objective there.
    fn step(&self, c: &[f64]) -> (Vec<f64>, f64) {
        let u = self.dual_values(&self.sequence(c));
        let value = self.objective_of_dual(&u);
        let members = self.inst.members();
        let sigma = self.inst.sigma().values();
        let rc = self.inst.exponents().r_conj;
        let mut grad = vec![0.0; self.locals.len()];
        for ((&cell, locs), &v) in self.cells.iter().zip(&self.cell_locals).zip(&u) {
            let g = pow_abs(v, rc - 1.0) * sigma[cell];
            for &l in locs {
                grad[l] += g;
            }
        }
        for (g, &m) in grad.iter_mut().zip(&self.locals) {
            *g *= members[m].tau / members[m].measure;
        }
        let top = grad.iter().cloned().fold(0.0, f64::max);
        if top > 0.0 {
            grad.iter_mut().for_each(|g| *g /= top);
        }
        (grad, value)
    }

    /// Direction of the canonical warm start `a_{1_Q}`.
    fn canonical_direction(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.inst.num_cells()];
        for &c in &self.cells {
            f[c] = 1.0;
        }
        let avgs = member_averages(self.inst, &f, self.inst.sigma().values());
        let members = self.inst.members();
        self.locals
            .iter()
            .map(|&m| members[m].tau * avgs[m])
            .collect()
    }

    /// Monotone fixed-point ascent from `start`; returns the best direction,
    /// its value and the trace.
    fn ascend(
        &self,
        start: Vec<f64>,
        max_iters: usize,
        tol: f64,
    ) -> (Vec<f64>, f64, OptimizerTrace) {
        let mut c = start;
        let mut trace = OptimizerTrace::default();
        let (mut next, mut value) = self.step(&c);
        trace.objective_values.push(value);
        for _ in 0..max_iters {
            let (after, next_value) = self.step(&next);
            trace.iterations += 1;
            trace.objective_values.push(next_value);
            if next_value < value {
                // rounding noise; keep the better point
                trace.converged = true;
                break;
            }
            let gain = next_value - value;
            c = next;
            next = after;
            value = next_value;
            if gain <= tol * value.abs().max(f64::MIN_POSITIVE) {
                trace.converged = true;
                break;
            }
        }
        (c, value, trace)
    }

    /// Exhaustive grid over the simplex of directions followed by a
    /// pattern-search polish of the best few grid points.
    pub(crate) fn oracle(&self, resolution_cap: u32, budget: u128) -> (Vec<f64>, f64) {
        let m = self.dimension();
        if m == 0 {
            return (Vec::new(), 0.0);
        }
        let n = simplex::resolution_for_budget(m, resolution_cap, budget);
        let keep = 4;
        let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
        simplex::for_each_point(n, m, |x| {
            let v = self.objective(x);
            if top.len() < keep || v > top[top.len() - 1].0 {
                top.push((v, x.to_vec()));
                top.sort_by(|a, b| b.0.total_cmp(&a.0));
                top.truncate(keep);
            }
        });
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for (_, x) in top {
            let (x, v) = simplex::polish(&x, 1.0 / n as f64, 1e-10, 200_000, |y| self.objective(y));
            if v > best.1 {
                best = (x, v);
            }
        }
        best
    }

    /// Expands a local direction to one indexed by all members.
    fn expand(&self, local: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.inst.members().len()];
        for (&m, &v) in self.locals.iter().zip(local) {
            out[m] = v;
        }
        out
    }

    fn restrict(&self, direction: &[f64]) -> Vec<f64> {
        self.locals.iter().map(|&m| direction[m]).collect()
    }
}

struct CubeRun {
    optimum: CubeOptimum,
    trace: OptimizerTrace,
    used_oracle: bool,
}

fn solve_cube(inst: &Instance, cube: &CubeId, ordinal: u64, config: &OptimizerConfig) -> CubeRun {
    let problem = DualProblem::new(inst, cube);
    let m = problem.dimension();
    let mut starts = vec![problem.canonical_direction(), vec![1.0; m]];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(ordinal);
    for _ in 0..config.restarts {
        starts.push((0..m).map(|_| rng.random::<f64>()).collect());
    }
    let mut best: Option<(Vec<f64>, f64, OptimizerTrace)> = None;
    for start in starts {
        let run = problem.ascend(start, config.max_iters, config.tolerance);
        if best.as_ref().is_none_or(|b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (mut direction, mut value, trace) = best.expect("at least two starts");
    let used_oracle = config.oracle && inst.num_cells() <= 16;
    if used_oracle {
        let (x, v) = problem.oracle(config.oracle_resolution, config.oracle_budget);
        if v > value {
            // let the fixed-point iteration finish what the grid found
            let (x, v, _) = problem.ascend(x, config.max_iters, config.tolerance);
            direction = x;
            value = v;
        }
    }
    CubeRun {
        optimum: CubeOptimum {
            cube: cube.clone(),
            value,
            direction: problem.expand(&direction),
        },
        trace,
        used_oracle,
    }
}

/// `ℒ` by per-cube multi-start ascent, optionally backed by the oracle.
pub fn compute_l(inst: &Instance, config: &OptimizerConfig) -> TestingReport {
    let cubes: Vec<(u64, CubeId)> = inst
        .grid()
        .grid_cubes()
        .into_iter()
        .enumerate()
        .map(|(i, q)| (i as u64, q))
        .collect();
    let runs = par::map(&cubes, |(i, q)| solve_cube(inst, q, *i, config));
    let per_cube: Vec<CubeOptimum> = runs.iter().map(|r| r.optimum.clone()).collect();
    let best = best_of(&per_cube);
    let mut trace = runs[best].trace.clone();
    trace.converged = runs.iter().all(|r| r.trace.converged);
    let witness_cube = per_cube[best].cube.clone();
    let witness_sequence = Some(dual_sequence(
        inst,
        &witness_cube,
        &per_cube[best].direction,
    ));
    TestingReport {
        value: per_cube[best].value,
        witness_cube,
        witness_sequence,
        trace,
        lower_bound_only: !runs.iter().all(|r| r.used_oracle),
        per_cube,
    }
}

/// The sequence `{1_Q a_R}` induced by a member-indexed direction.
pub fn dual_sequence(inst: &Instance, cube: &CubeId, direction: &[f64]) -> BSequence {
    let problem = DualProblem::new(inst, cube);
    let a = problem.sequence(&problem.restrict(direction));
    let grid = *inst.grid();
    let mut values = vec![vec![0.0; grid.num_cells()]; problem.dimension()];
    let mut support = CellSet::empty(grid);
    for ((&cell, locs), vals) in problem.cells.iter().zip(&problem.cell_locals).zip(&a) {
        if vals.iter().any(|&v| v > 0.0) {
            support.insert(cell);
        }
        for (&l, &v) in locs.iter().zip(vals) {
            values[l][cell] = v;
        }
    }
    let family = ComponentFamily::new(
        grid,
        problem.locals.iter().zip(values).map(|(&m, v)| {
            (
                inst.members()[m].cube.clone(),
                StepFunction::new(grid, v).expect("finite sequence"),
            )
        }),
    )
    .expect("components supported in their cubes");
    BSequence { family, support }
}

/// `U({1_Q a_R w})` on all cells for the sequence induced by `direction`;
/// zero outside the members meeting `Q`.
pub fn dual_test_function(inst: &Instance, cube: &CubeId, direction: &[f64]) -> StepFunction {
    let seq = dual_sequence(inst, cube, direction);
    crate::operators::apply_u(inst, &seq.family).expect("members of the instance")
}

/// Value of the inner objective of `ℒ` at the sequence induced by a
/// member-indexed direction.
pub fn dual_objective(inst: &Instance, cube: &CubeId, direction: &[f64]) -> f64 {
    let problem = DualProblem::new(inst, cube);
    problem.objective(&problem.restrict(direction))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsuConstants {
    /// `sup_K w(K)^{-1/p'} ‖1_K R(1_K w)‖_{L^{r'}(σ)}`
    pub dual_constant: f64,
    /// `sup_K σ(K)^{-1/r} ‖1_K R(1_K σ)‖_{L^p(w)}`
    pub direct_constant: f64,
}

/// Testing constants of the linear operator `R(fσ) = Σ τ_Q 𝔼_Q(fσ) 1_Q`.
/// The instance exponent `q` is ignored.
pub fn lsu_constants(inst: &Instance) -> LsuConstants {
    let e = inst.exponents();
    let cubes = inst.grid().grid_cubes();
    let per_cube = par::map(&cubes, |k| {
        let direct = direct_testing(inst, k, 1.0).powf(1.0 / e.p);
        let dual = linear_dual_testing(inst, k);
        (dual, direct)
    });
    let (dual_constant, direct_constant) = per_cube
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (d, t)| (a.max(d), b.max(t)));
    LsuConstants {
        dual_constant,
        direct_constant,
    }
}

/// `w(K)^{-1/p'} ‖1_K R(1_K w)‖_{L^{r'}(σ)}`.
pub(crate) fn linear_dual_testing(inst: &Instance, cube: &CubeId) -> f64 {
    let e = inst.exponents();
    let values = linear_dual_values(inst, cube);
    let cells = inst.grid().cover(cube).cells;
    let h = inst.cell_measure();
    let sigma = inst.sigma().values();
    let w = inst.w().values();
    let norm = (cells
        .iter()
        .map(|&c| pow_abs(values[c], e.r_conj) * sigma[c])
        .sum::<f64>()
        * h)
        .powf(1.0 / e.r_conj);
    let wk: f64 = cells.iter().map(|&c| w[c]).sum::<f64>() * h;
    norm / wk.powf(1.0 / e.p_conj)
}

/// `R(1_K w)` on all cells.
pub(crate) fn linear_dual_values(inst: &Instance, cube: &CubeId) -> Vec<f64> {
    let mut f = vec![0.0; inst.num_cells()];
    for c in inst.grid().cover(cube).cells {
        f[c] = 1.0;
    }
    let avgs = member_averages(inst, &f, inst.w().values());
    let members = inst.members();
    (0..inst.num_cells())
        .map(|c| {
            inst.cell_members(c)
                .iter()
                .map(|&m| members[m].tau * avgs[m])
                .sum()
        })
        .collect()
}

/// `sup_Q σ(Q)^{-1} Σ_{R ⊆ Q, R ∈ 𝒬} w(R) σ(R)^p τ_R^p / |R|^p`; requires
/// `r = q = p`.
pub fn carleson_constant(inst: &Instance) -> Result<f64> {
    let e = inst.exponents();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !close(e.r, e.p) {
        return Err(Error::Precondition(format!(
            "carleson constant needs r = p (r={}, p={})",
            e.r, e.p
        )));
    }
    if !close(e.q, e.p) {
        return Err(Error::Precondition(format!(
            "carleson constant needs q = p (q={}, p={})",
            e.q, e.p
        )));
    }
    let sigma = inst.sigma();
    let w = inst.w();
    let terms: Vec<(CubeId, f64)> = inst
        .members()
        .iter()
        .map(|m| {
            let t = w.mass(&m.cube) * pow_abs(sigma.mass(&m.cube) * m.tau / m.measure, e.p);
            (m.cube.clone(), t)
        })
        .collect();
    let cubes = inst.grid().grid_cubes();
    let values = par::map(&cubes, |q| {
        let sum: f64 = terms
            .iter()
            .filter(|(r, _)| q.contains(r))
            .map(|(_, t)| t)
            .sum();
        sum / sigma.mass(q)
    });
    Ok(values.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DyadicGrid, Weight};
    use crate::instance::Exponents;
    use crate::testkit::{i0, i1, i2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn l_star_reference_values() {
        let r = compute_l_star(&i0());
        assert!(close(r.value, 1.0, 1e-12));
        assert_eq!(r.witness_cube, CubeId::root(1));
        let r = compute_l_star(&i1());
        assert!(close(r.value, 2.5, 1e-12));
        assert_eq!(r.witness_cube, CubeId::root(1));
        let r = compute_l_star(&i2());
        assert!(close(r.value, 3.0, 1e-12));
        assert_eq!(r.witness_cube, CubeId::root(1));
        let finest = r.cube(&CubeId::new(2, vec![0])).unwrap();
        // 𝔼 over the root, the half and the quarter of 1_{[0,1/4)}: 1/4, 1/2, 1
        let expected = (0.0625 + 0.25 + 1.0) * 0.25 / 0.25;
        assert!(close(finest.value, expected, 1e-12));
        assert!(close(expected, 1.3125, 1e-15));
    }

    #[test]
    fn l_single_cube_closed_forms() {
        let cfg = OptimizerConfig::default();
        let r = compute_l(&i0(), &cfg);
        assert!(close(r.value, 1.0, 1e-12));
        let r = compute_l(&i1(), &cfg);
        assert!(close(r.value, 2.5, 1e-12));
        assert!(r.trace.converged);
        let seq = r.witness_sequence.unwrap();
        assert!(seq.normalization_error(2.0) < 1e-12);
    }

    #[test]
    fn l_ascent_matches_oracle_on_i2() {
        let inst = i2();
        let plain = compute_l(&inst, &OptimizerConfig::default());
        let oracle = compute_l(
            &inst,
            &OptimizerConfig {
                oracle: true,
                ..OptimizerConfig::default()
            },
        );
        assert!(!oracle.lower_bound_only);
        assert!(plain.lower_bound_only);
        assert!(
            close(plain.value, oracle.value, 1e-9),
            "{} vs {}",
            plain.value,
            oracle.value
        );
        // the constant sequence 3^{-1/2} on the root already gives (3·3^{-1/2})^2 = 3
        assert!(oracle.value >= 3.0 - 1e-12);
    }

    #[test]
    fn l_objective_matches_operator_evaluation() {
        let inst = i2();
        let report = compute_l(&inst, &OptimizerConfig::default());
        for opt in &report.per_cube {
            let u = dual_test_function(&inst, &opt.cube, &opt.direction);
            let cells = inst.grid().cover(&opt.cube).cells;
            let integral: f64 =
                cells.iter().map(|&c| u.value(c).powi(2)).sum::<f64>() * inst.cell_measure();
            let wq = inst.w().mass(&opt.cube);
            assert!(close(integral / wq, opt.value, 1e-12));
            assert!(close(
                dual_objective(&inst, &opt.cube, &opt.direction),
                opt.value,
                1e-12
            ));
        }
    }

    #[test]
    fn lsu_reference_values() {
        let c = lsu_constants(&i0());
        assert!(close(c.direct_constant, 1.0, 1e-12) && close(c.dual_constant, 1.0, 1e-12));
        let c = lsu_constants(&i1());
        assert!(close(c.direct_constant, 2.5f64.sqrt(), 1e-12));
        assert!(close(c.dual_constant, 2.5f64.sqrt(), 1e-12));
        let zero = i2().scale_tau(0.0).unwrap();
        let c = lsu_constants(&zero);
        assert_eq!((c.direct_constant, c.dual_constant), (0.0, 0.0));
    }

    #[test]
    fn carleson_reference_values() {
        assert!(close(carleson_constant(&i0()).unwrap(), 1.0, 1e-12));
        assert!(close(carleson_constant(&i1()).unwrap(), 2.5, 1e-12));
        assert!(close(carleson_constant(&i2()).unwrap(), 3.0, 1e-12));
        let bad = i1()
            .with_exponents(Exponents::new(3.0, 2.0, 3.0).unwrap())
            .unwrap();
        match carleson_constant(&bad) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("r = p")),
            other => panic!("unexpected {other:?}"),
        }
        let bad = i1()
            .with_exponents(Exponents::new(2.0, 2.0, 3.0).unwrap())
            .unwrap();
        match carleson_constant(&bad) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("q = p")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_coefficients_give_zero_constants() {
        let inst = i2().scale_tau(0.0).unwrap();
        assert_eq!(compute_l_star(&inst).value, 0.0);
        assert_eq!(compute_l(&inst, &OptimizerConfig::default()).value, 0.0);
    }

    #[test]
    fn asymmetric_weights_need_ascent() {
        // two nested cubes with unequal weights; the uniform start is not optimal
        let grid = DyadicGrid::new(1, 2).unwrap();
        let inst = Instance::new(
            grid,
            Weight::new(grid, vec![1.0, 3.0, 0.5, 2.0]).unwrap(),
            Weight::new(grid, vec![5.0, 0.2, 1.0, 1.0]).unwrap(),
            Exponents::new(3.0, 1.5, 2.5).unwrap(),
            vec![
                (CubeId::root(1), 1.0),
                (CubeId::new(1, vec![0]), 2.0),
                (CubeId::new(2, vec![1]), 0.7),
            ],
        )
        .unwrap();
        let plain = compute_l(&inst, &OptimizerConfig::default());
        let oracle = compute_l(
            &inst,
            &OptimizerConfig {
                oracle: true,
                ..OptimizerConfig::default()
            },
        );
        assert!(
            close(plain.value, oracle.value, 1e-9),
            "{} vs {}",
            plain.value,
            oracle.value
        );
    }
}
