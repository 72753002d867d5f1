//! Instance generation, the per-instance verification suite and sweeps.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decompose::{
    self, corona, corona_carleson_sum, corona_check, decompose, dual_constancy_check,
    ek_identity_check, inner_lower_bound_ratio, max_principle_check, neighbor_families,
    nested_check,
};
use crate::error::{Error, Result};
use crate::grid::{CubeId, DyadicGrid, StepFunction, Weight};
use crate::instance::{Exponents, Instance, InstanceJson};
use crate::norm::{
    linear_opnorm_ascent, opnorm_ascent, opnorm_bruteforce, opnorm_bruteforce_for,
    strengthened_testing_check, testing_scale, weak_type_check, AscentConfig, Method, OperatorKind,
    BRUTEFORCE_MAX_CELLS,
};
use crate::operators::{apply_t, apply_tbar, canonical_sequence, duality_pair, ComponentFamily};
use crate::par;
use crate::suite::SuiteConstants;
use crate::testing::{
    carleson_constant, compute_l, compute_l_star, lsu_constants, OptimizerConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProfile {
    Uniform,
    Lognormal,
    Spiky,
    NearDegenerate,
}

impl FromStr for WeightProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "lognormal" => Ok(Self::Lognormal),
            "spiky" => Ok(Self::Spiky),
            "near_degenerate" | "near-degenerate" => Ok(Self::NearDegenerate),
            _ => Err(Error::InvalidInstance(format!(
                "unknown weight profile {s:?} (uniform, lognormal, spiky, near_degenerate)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub seed: u64,
    pub count: usize,
    /// Inclusive range of grid depths.
    pub depth_range: [u32; 2],
    pub dimension: usize,
    /// `(p, r, q)` tuples; instance `i` uses entry `i mod len`.
    pub exponent_grid: Vec<[f64; 3]>,
    pub weight_profile: WeightProfile,
    pub eta: f64,
    /// Probability that a grid cube belongs to the collection.
    pub density: f64,
    /// Instances up to this depth are also measured by brute force.
    pub oracle_max_depth: u32,
    pub bruteforce_resolution: u32,
    pub weak_trials: usize,
    /// Fill the `runtime_ms` column (makes the output run-dependent).
    pub timing: bool,
    /// Directory for replay files of failing instances (none written when
    /// absent).
    pub replay_dir: Option<String>,
    pub constants: SuiteConstants,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            count: 200,
            depth_range: [0, 4],
            dimension: 1,
            exponent_grid: vec![
                [2.0, 2.0, 2.0],
                [3.0, 2.0, 2.0],
                [2.5, 1.5, 3.0],
                [4.0, 4.0, 4.0],
            ],
            weight_profile: WeightProfile::Lognormal,
            eta: 0.01,
            density: 0.7,
            oracle_max_depth: 2,
            bruteforce_resolution: 10,
            weak_trials: 16,
            timing: false,
            replay_dir: None,
            constants: SuiteConstants::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.depth_range[0] > self.depth_range[1] {
            return bad(format!("empty depth range {:?}", self.depth_range));
        }
        if !(1..=2).contains(&self.dimension) {
            return bad(format!("dimension must be 1 or 2, got {}", self.dimension));
        }
        if self.exponent_grid.is_empty() {
            return bad("exponent grid is empty".into());
        }
        for &[p, r, q] in &self.exponent_grid {
            Exponents::new(p, r, q)?;
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0,1), got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad(format!("density must lie in [0,1], got {}", self.density));
        }
        Ok(())
    }

    /// Per-instance seed for optimizers and random trials.
    pub fn instance_seed(&self, index: u64) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index
    }
}

fn profile_values(profile: WeightProfile, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match profile {
        WeightProfile::Uniform => (0..n).map(|_| rng.random_range(0.5..=2.0)).collect(),
        WeightProfile::Lognormal => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z.exp()
            })
            .collect(),
        WeightProfile::Spiky => {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
            let top = v.iter().copied().fold(0.0, f64::max);
            let spike = rng.random_range(0..n);
            v[spike] = 1e3 * top;
            v
        }
        WeightProfile::NearDegenerate => {
            let mut v: Vec<f64> = (0..n)
                .map(|_| 10f64.powf(rng.random_range(-3.0..=3.0)))
                .collect();
            if n >= 2 {
                let lo = rng.random_range(0..n);
                let mut hi = rng.random_range(0..n - 1);
                if hi >= lo {
                    hi += 1;
                }
                v[lo] = 1e-3;
                v[hi] = 1e3;
            }
            v
        }
    }
}

/// Deterministic instance number `index` of a sweep.
pub fn gen_instance(config: &SweepConfig, index: u64) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let depth = rng.random_range(config.depth_range[0]..=config.depth_range[1]);
    let grid = DyadicGrid::new(config.dimension, depth)?;
    let [p, r, q] = config.exponent_grid[(index % config.exponent_grid.len() as u64) as usize];
    let n = grid.num_cells();
    let sigma = Weight::new(grid, profile_values(config.weight_profile, n, &mut rng))?;
    let w = Weight::new(grid, profile_values(config.weight_profile, n, &mut rng))?;
    let mut collection = Vec::new();
    for cube in grid.grid_cubes() {
        if rng.random_bool(config.density) {
            let z: f64 = StandardNormal.sample(&mut rng);
            collection.push((cube, z.abs()));
        }
    }
    Instance::new(grid, sigma, w, Exponents::new(p, r, q)?, collection)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub eta: f64,
    pub seed: u64,
    pub weak_trials: usize,
    pub adjoint_trials: usize,
    /// Run the brute-force norm search when the grid has at most this many
    /// cells (never above the brute-force guard).
    pub oracle_max_cells: usize,
    pub bruteforce_resolution: u32,
    pub constants: SuiteConstants,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            eta: 0.01,
            seed: 0,
            weak_trials: 16,
            adjoint_trials: 8,
            oracle_max_cells: BRUTEFORCE_MAX_CELLS,
            bruteforce_resolution: 10,
            constants: SuiteConstants::default(),
        }
    }
}

/// One line of the verification table. `observed` is the worst value seen
/// (a ratio, an error or a violation count) and `bound` its threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub bound: f64,
    pub cases: usize,
}

/// Location of a failed exact check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: String,
    pub test_function: String,
    pub k: Option<i32>,
    pub cube: Option<CubeId>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub l: f64,
    pub l_star: f64,
    pub l_witness: CubeId,
    pub l_star_witness: CubeId,
    pub opnorm_lb: f64,
    pub opnorm_method: Method,
    /// `max{ℒ^{1/r'}, ℒ*^{1/p}}`
    pub testing_scale: f64,
    pub ratio: f64,
    pub upper_cert: f64,
    pub max_occurrence: usize,
    pub items: Vec<CheckItem>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub test_functions: Vec<(String, Vec<f64>)>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn failed_items(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| !i.pass)
            .map(|i| i.name.as_str())
            .collect()
    }

    /// Plain-text table, one check per line.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self.items.iter().map(|i| i.name.len()).max().unwrap_or(0);
        for item in &self.items {
            let _ = writeln!(
                out,
                "{:<width$}  {}  observed={:<12.6e} bound={:<12.6e} cases={}",
                item.name,
                if item.pass { "PASS" } else { "FAIL" },
                item.observed,
                item.bound,
                item.cases,
            );
        }
        out
    }
}

/// Everything needed to rerun a failing verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub instance: InstanceJson,
    pub options: VerifyOptions,
    pub test_functions: Vec<(String, Vec<f64>)>,
    pub failures: Vec<Failure>,
}

pub fn replay(inst: &Instance, options: &VerifyOptions, report: &VerifyReport) -> Replay {
    Replay {
        instance: inst.to_json_value(),
        options: options.clone(),
        test_functions: report.test_functions.clone(),
        failures: report.failures.clone(),
    }
}

/// Running worst case per check, in insertion order.
struct Tally {
    items: Vec<CheckItem>,
    failures: Vec<Failure>,
}

/// How an observation is compared to its bound.
#[derive(Clone, Copy)]
enum Sense {
    AtMost,
    AtLeast,
}

impl Tally {
    fn new() -> Self {
        Self {
            items: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn item(&mut self, name: &str, bound: f64, sense: Sense) -> &mut CheckItem {
        if let Some(i) = self.items.iter().position(|i| i.name == name) {
            return &mut self.items[i];
        }
        self.items.push(CheckItem {
            name: name.to_string(),
            pass: true,
            observed: match sense {
                Sense::AtMost => 0.0,
                Sense::AtLeast => f64::INFINITY,
            },
            bound,
            cases: 0,
        });
        self.items.last_mut().expect("just pushed")
    }

    fn ratio(&mut self, name: &str, value: f64, bound: f64, sense: Sense) -> bool {
        let item = self.item(name, bound, sense);
        item.cases += 1;
        let ok = match sense {
            Sense::AtMost => value <= bound,
            Sense::AtLeast => value >= bound,
        };
        item.observed = match sense {
            Sense::AtMost => item.observed.max(value),
            Sense::AtLeast => item.observed.min(value),
        };
        item.pass &= ok;
        ok
    }

    /// A boolean check; `observed` counts violations.
    fn flag(&mut self, name: &str, ok: bool, failure: impl FnOnce() -> Failure) {
        let item = self.item(name, 0.0, Sense::AtMost);
        item.cases += 1;
        if !ok {
            item.observed += 1.0;
            item.pass = false;
            self.failures.push(failure());
        }
    }

    fn fail(&mut self, failure: Failure) {
        self.failures.push(failure);
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn random_nonneg(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z.abs()
        })
        .collect()
}

/// Zeroes entries below `1e-100 · max`: power iterations drive some cells
/// towards subnormal values, where relative precision is lost.
fn flush_tiny(values: &[f64]) -> Vec<f64> {
    let top = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| if v < 1e-100 * top { 0.0 } else { v })
        .collect()
}

/// Runs every check of the suite on one instance.
pub fn run_verify(inst: &Instance, opts: &VerifyOptions) -> Result<VerifyReport> {
    if !(opts.eta > 0.0 && opts.eta < 1.0) {
        return Err(Error::Precondition(format!(
            "eta must lie in (0,1), got {}",
            opts.eta
        )));
    }
    let e = *inst.exponents();
    let grid = *inst.grid();
    let n = grid.num_cells();
    let c = &opts.constants;
    let tol = c.exact_tolerance;
    let mut t = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // testing constants and norm
    let l_star = compute_l_star(inst);
    let l = compute_l(
        inst,
        &OptimizerConfig {
            seed: opts.seed,
            ..OptimizerConfig::default()
        },
    );
    let ascent = opnorm_ascent(
        inst,
        &AscentConfig {
            seed: opts.seed,
            upper_constant: Some(c.c_eq),
            ..AscentConfig::default()
        },
        Some(&l),
        Some(&l_star),
    );
    let brute = if n <= opts.oracle_max_cells.min(BRUTEFORCE_MAX_CELLS) {
        Some(opnorm_bruteforce(inst, opts.bruteforce_resolution)?)
    } else {
        None
    };
    let mut best = ascent.clone();
    if let Some(b) = &brute {
        t.ratio(
            "norm_oracle_agreement",
            rel_err(b.lower_bound, ascent.lower_bound),
            1e-4,
            Sense::AtMost,
        );
        if b.lower_bound > best.lower_bound {
            best = NormChoice::take(b, &ascent);
        }
    }
    let lb = best.lower_bound;
    let scale = testing_scale(inst, l.value, l_star.value);
    let ratio = if scale > 0.0 {
        lb / scale
    } else if lb > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    t.ratio(
        "necessity_direct",
        safe_ratio(l_star.value.powf(1.0 / e.p), lb),
        1.0 + c.direct_necessity_tolerance,
        Sense::AtMost,
    );
    t.ratio(
        "necessity_dual",
        safe_ratio(l.value.powf(1.0 / e.r_conj), lb),
        1.0 + c.dual_necessity_tolerance,
        Sense::AtMost,
    );
    t.ratio("equivalence_upper", ratio, c.c_eq, Sense::AtMost);

    if let Ok(carl) = carleson_constant(inst) {
        let lbp = lb.powf(e.p);
        t.ratio(
            "carleson_lower",
            safe_ratio(carl, lbp),
            1.0 + c.direct_necessity_tolerance,
            Sense::AtMost,
        );
        t.ratio(
            "carleson_upper",
            safe_ratio(lbp, carl),
            SuiteConstants::c_carleson(e.p),
            Sense::AtMost,
        );
    }

    let lsu = lsu_constants(inst);
    let linear = linear_opnorm_ascent(
        inst,
        &AscentConfig {
            seed: opts.seed,
            ..AscentConfig::default()
        },
    );
    let linear = if brute.is_some() {
        let b = opnorm_bruteforce_for(inst, OperatorKind::Linear, opts.bruteforce_resolution)?;
        if b.lower_bound > linear.lower_bound {
            b
        } else {
            linear
        }
    } else {
        linear
    };
    let lsu_max = lsu.direct_constant.max(lsu.dual_constant);
    t.ratio(
        "lsu_necessity",
        safe_ratio(lsu_max, linear.lower_bound),
        1.0 + c.dual_necessity_tolerance,
        Sense::AtMost,
    );
    t.ratio(
        "lsu_equivalence",
        safe_ratio(linear.lower_bound, lsu_max),
        c.c_lsu,
        Sense::AtMost,
    );

    let weak = weak_type_check(
        inst,
        l.value,
        l_star.value,
        opts.weak_trials,
        opts.seed,
        c.c_weak,
    );
    t.ratio("weak_type_dual", weak.dual_ratio, c.c_weak, Sense::AtMost);
    t.ratio(
        "weak_type_direct",
        weak.direct_ratio,
        c.c_weak,
        Sense::AtMost,
    );
    let strong = strengthened_testing_check(inst, &l, &l_star, c.c_strengthened);
    t.ratio(
        "strengthened_direct",
        strong.direct_ratio,
        c.c_strengthened,
        Sense::AtMost,
    );
    t.ratio(
        "strengthened_dual",
        strong.dual_ratio,
        c.c_strengthened,
        Sense::AtMost,
    );

    // adjointness on random pairs
    for trial in 0..opts.adjoint_trials {
        let f = StepFunction::new(grid, random_nonneg(n, &mut rng))?;
        let g = ComponentFamily::new(
            grid,
            inst.members()
                .iter()
                .map(|m| {
                    let mut v = vec![0.0; n];
                    for &cell in &m.cells {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v[cell] = z;
                    }
                    StepFunction::new(grid, v).map(|s| (m.cube.clone(), s))
                })
                .collect::<Result<Vec<_>>>()?,
        )?;
        let pair = duality_pair(inst, &f, &g)?;
        let err =
            (pair.lhs - pair.rhs).abs() / pair.lhs.abs().max(pair.rhs.abs()).max(f64::MIN_POSITIVE);
        if !t.ratio("adjointness", err, tol, Sense::AtMost) {
            t.fail(Failure {
                check: "adjointness".into(),
                test_function: format!("random trial {trial}"),
                k: None,
                cube: None,
                detail: format!("lhs={} rhs={}", pair.lhs, pair.rhs),
            });
        }
    }

    let test_functions = vec![
        ("one".to_string(), vec![1.0; n]),
        (
            "norm_witness".to_string(),
            flush_tiny(best.witness_f.values()),
        ),
        ("random".to_string(), random_nonneg(n, &mut rng)),
    ];
    let mut max_occurrence = 0;
    for (name, values) in &test_functions {
        let f = StepFunction::new(grid, values.clone())?;
        max_occurrence = max_occurrence.max(check_function(inst, &f, name, opts, &mut t)?);
    }

    Ok(VerifyReport {
        l: l.value,
        l_star: l_star.value,
        l_witness: l.witness_cube.clone(),
        l_star_witness: l_star.witness_cube.clone(),
        opnorm_lb: lb,
        opnorm_method: best.method,
        testing_scale: scale,
        ratio,
        upper_cert: c.c_eq * scale,
        max_occurrence,
        items: t.items,
        failures: t.failures,
        test_functions,
    })
}

/// Picks the brute-force estimate while keeping the ascent's upper bound.
struct NormChoice;

impl NormChoice {
    fn take(
        brute: &crate::norm::NormEstimate,
        ascent: &crate::norm::NormEstimate,
    ) -> crate::norm::NormEstimate {
        crate::norm::NormEstimate {
            upper_bound: ascent.upper_bound,
            ..brute.clone()
        }
    }
}

/// Checks tied to a test function: the canonical sequence and every
/// decomposition. Returns the largest occurrence count.
fn check_function(
    inst: &Instance,
    f: &StepFunction,
    name: &str,
    opts: &VerifyOptions,
    t: &mut Tally,
) -> Result<usize> {
    let tol = opts.constants.exact_tolerance;
    let e = *inst.exponents();
    let here = |check: &str, k: Option<i32>, cube: Option<&CubeId>, detail: String| Failure {
        check: check.to_string(),
        test_function: name.to_string(),
        k,
        cube: cube.cloned(),
        detail,
    };

    // a_f lies in B and attains Hölder equality
    let a = canonical_sequence(inst, f)?;
    let norm_err = a.normalization_error(e.q_conj);
    if !t.ratio("canonical_normalization", norm_err, tol, Sense::AtMost) {
        t.fail(here(
            "canonical_normalization",
            None,
            None,
            format!("error {norm_err}"),
        ));
    }
    let tf = apply_t(inst, f)?;
    let tbar = apply_tbar(inst, f)?;
    let mut holder_err = 0.0f64;
    for cell in 0..inst.num_cells() {
        let pairing: f64 = tf
            .iter()
            .map(|(q, comp)| comp.value(cell) * a.family.get(q).map_or(0.0, |x| x.value(cell)))
            .sum();
        holder_err = holder_err.max(rel_err(pairing, tbar.value(cell)));
    }
    t.ratio("canonical_pairing", holder_err, tol, Sense::AtMost);

    let d = decompose(inst, f, opts.eta)?;
    let levels = &d.levels;
    for k in levels.stored_levels() {
        let fam = levels.family(k).expect("stored level");
        let chk = fam.check();
        t.flag("whitney", chk.pass(), || {
            here("whitney", Some(k), None, format!("{chk:?}"))
        });
    }
    t.flag("whitney_nested", nested_check(levels), || {
        here(
            "whitney_nested",
            None,
            None,
            "strict inclusion without larger k".into(),
        )
    });
    let bound = decompose::overlap_bound(inst.grid().dimension()) as f64;
    for level in &d.classified {
        let k = level.k;
        t.flag("ek_identity", ek_identity_check(levels, k), || {
            here(
                "ek_identity",
                Some(k),
                None,
                "union of E_k(Q) differs from the band".into(),
            )
        });
        for class in &level.cubes {
            let q = &class.cube;
            let mp = max_principle_check(inst, f, levels, k, q)?;
            t.flag("max_principle", mp.pass, || {
                here("max_principle", Some(k), Some(q), format!("{mp:?}"))
            });
            if let Some(ratio) = inner_lower_bound_ratio(inst, f, k, &level.e_k[q]) {
                if !t.ratio("inner_lower_bound", ratio, 1.0 - tol, Sense::AtLeast) {
                    t.fail(here(
                        "inner_lower_bound",
                        Some(k),
                        Some(q),
                        format!("ratio {ratio}"),
                    ));
                }
            }
            let nb = neighbor_families(levels, k, q);
            t.flag(
                "rcubes_union",
                nb.union_identity() && nb.inside_parent,
                || here("rcubes_union", Some(k), Some(q), format!("{nb:?}")),
            );
            t.ratio("crowd", nb.n_k.len() as f64, bound, Sense::AtMost);
            for r in &nb.r_k {
                let cc = dual_constancy_check(inst, &d.sequence, &level.e_k[q], r);
                t.flag("dual_constancy", cc.constant, || {
                    here(
                        "dual_constancy",
                        Some(k),
                        Some(q),
                        format!("R={r} values={:?}", cc.values),
                    )
                });
            }
            if !t.ratio(
                "alpha_beta_pairing",
                class.pairing_error,
                tol,
                Sense::AtMost,
            ) {
                t.fail(here(
                    "alpha_beta_pairing",
                    Some(k),
                    Some(q),
                    format!("{class:?}"),
                ));
            }
        }
    }
    let mut c_corona_ratio = 0.0f64;
    for m in 0..3 {
        let family = corona(inst, f, d.corona_input(m))?;
        let chk = corona_check(inst, f, &family);
        t.flag("corona", chk.pass(), || {
            here("corona", None, None, format!("residue {m}: {chk:?}"))
        });
        let sum = corona_carleson_sum(inst, f, &family);
        c_corona_ratio = c_corona_ratio.max(safe_ratio(sum.lhs, sum.rhs));
    }
    t.ratio(
        "corona_carleson",
        c_corona_ratio,
        SuiteConstants::c_corona(e.r),
        Sense::AtMost,
    );
    let occ = d.occurrences.max_count();
    t.ratio(
        "occurrence",
        occ as f64,
        SuiteConstants::c_occ(opts.eta) as f64,
        Sense::AtMost,
    );
    Ok(occ)
}

/// One row of the sweep CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub instance_id: u64,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub depth: u32,
    pub l: f64,
    pub l_star: f64,
    pub opnorm_lb: f64,
    pub upper_cert: f64,
    pub ratio: f64,
    pub max_cr: usize,
    pub lemma_flags: String,
    pub runtime_ms: Option<u128>,
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "instance_id",
    "p",
    "r",
    "q",
    "depth",
    "L",
    "L_star",
    "opnorm_lb",
    "upper_cert",
    "ratio",
    "max_cR",
    "lemma_flags",
    "runtime_ms",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepSummary {
    pub count: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub max_occurrence: usize,
    pub failures: usize,
}

/// `lemma_flags` value: `ok`, or the failed checks separated by `|`.
fn flags(report: &VerifyReport) -> String {
    let failed = report.failed_items();
    if failed.is_empty() {
        "ok".into()
    } else {
        failed.join("|")
    }
}

pub fn verify_options_for(config: &SweepConfig, inst: &Instance, index: u64) -> VerifyOptions {
    VerifyOptions {
        eta: config.eta,
        seed: config.instance_seed(index),
        weak_trials: config.weak_trials,
        oracle_max_cells: if inst.grid().depth() <= config.oracle_max_depth {
            BRUTEFORCE_MAX_CELLS
        } else {
            0
        },
        bruteforce_resolution: config.bruteforce_resolution,
        constants: config.constants.clone(),
        ..VerifyOptions::default()
    }
}

/// Generates and verifies one sweep instance; the replay is present when a
/// check failed.
pub fn sweep_row(config: &SweepConfig, index: u64) -> (SweepRow, Option<Replay>) {
    let start = config.timing.then(Instant::now);
    let outcome = gen_instance(config, index).and_then(|inst| {
        let opts = verify_options_for(config, &inst, index);
        run_verify(&inst, &opts).map(|rep| {
            let replay = (!rep.pass()).then(|| replay(&inst, &opts, &rep));
            (inst, rep, replay)
        })
    });
    let elapsed = start.map(|s| s.elapsed().as_millis());
    match outcome {
        Ok((inst, rep, replay)) => (
            SweepRow {
                instance_id: index,
                p: inst.p(),
                r: inst.r(),
                q: inst.q(),
                depth: inst.grid().depth(),
                l: rep.l,
                l_star: rep.l_star,
                opnorm_lb: rep.opnorm_lb,
                upper_cert: rep.upper_cert,
                ratio: rep.ratio,
                max_cr: rep.max_occurrence,
                lemma_flags: flags(&rep),
                runtime_ms: elapsed,
            },
            replay,
        ),
        Err(err) => (
            SweepRow {
                instance_id: index,
                p: f64::NAN,
                r: f64::NAN,
                q: f64::NAN,
                depth: 0,
                l: f64::NAN,
                l_star: f64::NAN,
                opnorm_lb: f64::NAN,
                upper_cert: f64::NAN,
                ratio: f64::NAN,
                max_cr: 0,
                lemma_flags: format!("error: {}", err.to_string().replace([',', '\n'], ";")),
                runtime_ms: elapsed,
            },
            None,
        ),
    }
}

/// Shortest round-trip form, with `-0` printed as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn csv_record(row: &SweepRow) -> Vec<String> {
    vec![
        row.instance_id.to_string(),
        num(row.p),
        num(row.r),
        num(row.q),
        row.depth.to_string(),
        num(row.l),
        num(row.l_star),
        num(row.opnorm_lb),
        num(row.upper_cert),
        num(row.ratio),
        row.max_cr.to_string(),
        row.lemma_flags.clone(),
        row.runtime_ms.map(|v| v.to_string()).unwrap_or_default(),
    ]
}

fn write_replay(dir: &Path, id: u64, replay: &Replay) -> Result<()> {
    let io =
        |e: std::io::Error| Error::Structural(format!("writing replay to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let text = serde_json::to_string_pretty(replay)? + "\n";
    std::fs::write(dir.join(format!("replay-{id}.json")), text).map_err(io)
}

/// Runs the sweep and writes the CSV (header, rows in index order, then
/// `#` footer lines).
pub fn run_sweep(config: &SweepConfig, out: impl Write) -> Result<SweepSummary> {
    config.validate()?;
    let indices: Vec<u64> = (0..config.count as u64).collect();
    let results = par::map(&indices, |&i| sweep_row(config, i));
    if let Some(dir) = &config.replay_dir {
        for (row, replay) in &results {
            if let Some(replay) = replay {
                write_replay(Path::new(dir), row.instance_id, replay)?;
            }
        }
    }
    let rows: Vec<SweepRow> = results.into_iter().map(|(row, _)| row).collect();
    let mut writer = csv::WriterBuilder::new().from_writer(out);
    let io = |e: csv::Error| Error::Structural(format!("writing CSV: {e}"));
    writer.write_record(SWEEP_COLUMNS).map_err(io)?;
    let mut summary = SweepSummary {
        count: rows.len(),
        min_ratio: if rows.is_empty() { 0.0 } else { f64::INFINITY },
        ..SweepSummary::default()
    };
    for row in &rows {
        writer.write_record(csv_record(row)).map_err(io)?;
        if row.ratio.is_finite() {
            summary.max_ratio = summary.max_ratio.max(row.ratio);
            summary.min_ratio = summary.min_ratio.min(row.ratio);
        }
        summary.max_occurrence = summary.max_occurrence.max(row.max_cr);
        if row.lemma_flags != "ok" {
            summary.failures += 1;
        }
    }
    let mut out = writer
        .into_inner()
        .map_err(|e| Error::Structural(format!("writing CSV: {}", e.error())))?;
    let footer = format!(
        "# count={} max_ratio={} min_ratio={} max_cR={} failures={}\n",
        summary.count,
        summary.max_ratio,
        summary.min_ratio,
        summary.max_occurrence,
        summary.failures
    );
    out.write_all(footer.as_bytes())
        .map_err(|e| Error::Structural(format!("writing CSV: {e}")))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{i0, i1, i2};

    #[test]
    fn generation_is_deterministic() {
        let cfg = SweepConfig::default();
        let a = gen_instance(&cfg, 0).unwrap().to_json();
        let b = gen_instance(&cfg, 0).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, gen_instance(&cfg, 1).unwrap().to_json());
    }

    #[test]
    fn depth_zero_collection() {
        let cfg = SweepConfig {
            depth_range: [0, 0],
            ..SweepConfig::default()
        };
        for i in 0..10 {
            let inst = gen_instance(&cfg, i).unwrap();
            assert!(inst.members().iter().all(|m| m.cube == CubeId::root(1)));
        }
    }

    #[test]
    fn profiles() {
        for (profile, spread) in [
            (WeightProfile::Spiky, 1e3),
            (WeightProfile::NearDegenerate, 1e6),
        ] {
            let cfg = SweepConfig {
                depth_range: [1, 3],
                weight_profile: profile,
                ..SweepConfig::default()
            };
            for i in 0..10 {
                let inst = gen_instance(&cfg, i).unwrap();
                for wt in [inst.sigma(), inst.w()] {
                    assert!(wt.max() / wt.min() >= spread * (1.0 - 1e-12));
                }
            }
        }
        let cfg = SweepConfig {
            weight_profile: WeightProfile::Uniform,
            ..SweepConfig::default()
        };
        let inst = gen_instance(&cfg, 3).unwrap();
        assert!(inst.sigma().min() >= 0.5 && inst.sigma().max() <= 2.0);
        assert!("near-degenerate".parse::<WeightProfile>().is_ok());
        assert!("flat".parse::<WeightProfile>().is_err());
    }

    #[test]
    fn reference_instances_pass() {
        for inst in [i0(), i1(), i2(), i2().scale_tau(0.0).unwrap()] {
            let rep = run_verify(&inst, &VerifyOptions::default()).unwrap();
            assert!(rep.pass(), "{}", rep.table());
            assert!(rep.failures.is_empty());
        }
    }

    #[test]
    fn single_cube_necessity_is_tight() {
        let rep = run_verify(&i1(), &VerifyOptions::default()).unwrap();
        for name in ["necessity_direct", "necessity_dual"] {
            let item = rep.items.iter().find(|i| i.name == name).unwrap();
            assert!(
                (item.observed - 1.0).abs() < 1e-9,
                "{name}: {}",
                item.observed
            );
        }
    }

    #[test]
    fn empty_sweep_has_header_and_footer() {
        let cfg = SweepConfig {
            count: 0,
            ..SweepConfig::default()
        };
        let mut buf = Vec::new();
        run_sweep(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], SWEEP_COLUMNS.join(","));
        assert!(lines[1].starts_with("# count=0"));
    }
}
