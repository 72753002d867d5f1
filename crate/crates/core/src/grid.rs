//! Finite dyadic grids over `[0,1)^d`, their cubes, and step functions
//! constant on the finest cells.
//!
//! A grid of depth `D` has `2^{dD}` finest cells of side `2^{-D}`. Around
//! the unit cube sit `padding_up` levels of virtual ancestors
//! (`[0,2)^d`, `[0,4)^d`, ...) that carry no mass, and below the finest
//! level sit `padding_down` levels of virtual refinement on which every
//! step function is still constant.
//!
//! Cubes are labelled by `(level, index)`: a cube of level `l` is the
//! product of `[index_i 2^{-l}, (index_i + 1) 2^{-l})`. For `l >= 0` the
//! index satisfies `index_i < 2^l`; the virtual ancestors (`l < 0`) all have
//! index zero and contain the unit cube.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of finest cells a grid may have.
pub const MAX_CELLS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicGrid {
    dimension: usize,
    depth: u32,
    padding_up: u32,
    padding_down: u32,
}

impl DyadicGrid {
    pub const DEFAULT_PADDING: u32 = 2;

    pub fn new(dimension: usize, depth: u32) -> Result<Self> {
        Self::with_padding(
            dimension,
            depth,
            Self::DEFAULT_PADDING,
            Self::DEFAULT_PADDING,
        )
    }

    pub fn with_padding(
        dimension: usize,
        depth: u32,
        padding_up: u32,
        padding_down: u32,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidInstance("dimension must be positive".into()));
        }
        if padding_up < 2 || padding_down < 2 {
            return Err(Error::InvalidInstance(format!(
                "padding must be at least 2 levels (got up={padding_up}, down={padding_down})"
            )));
        }
        let bits = dimension as u64 * depth as u64;
        if bits > MAX_CELLS.trailing_zeros() as u64 {
            return Err(Error::InvalidInstance(format!(
                "grid with dimension {dimension} and depth {depth} exceeds {MAX_CELLS} cells"
            )));
        }
        Ok(Self {
            dimension,
            depth,
            padding_up,
            padding_down,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn padding_up(&self) -> u32 {
        self.padding_up
    }

    pub fn padding_down(&self) -> u32 {
        self.padding_down
    }

    pub fn num_cells(&self) -> usize {
        1usize << (self.dimension as u32 * self.depth)
    }

    /// Lebesgue measure of one finest cell.
    pub fn cell_measure(&self) -> f64 {
        (-((self.dimension as u32 * self.depth) as f64)).exp2()
    }

    pub fn min_level(&self) -> i32 {
        -(self.padding_up as i32)
    }

    pub fn max_level(&self) -> i32 {
        (self.depth + self.padding_down) as i32
    }

    /// Two grids carry the same cell arrays when dimension and depth agree;
    /// padding only affects which virtual cubes are addressable.
    pub fn same_cells(&self, other: &DyadicGrid) -> bool {
        self.dimension == other.dimension && self.depth == other.depth
    }

    pub fn check_same_cells(&self, other: &DyadicGrid) -> Result<()> {
        if self.same_cells(other) {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "grid d={} D={} vs grid d={} D={}",
                self.dimension, self.depth, other.dimension, other.depth
            )))
        }
    }

    pub fn root(&self) -> CubeId {
        CubeId::root(self.dimension)
    }

    pub fn validate(&self, cube: &CubeId) -> Result<()> {
        let range_err = || Error::Range {
            cube: cube.clone(),
            min_level: self.min_level(),
            max_level: self.max_level(),
        };
        if cube.index.len() != self.dimension {
            return Err(Error::Structural(format!(
                "cube {cube} has {} coordinates, grid has dimension {}",
                cube.index.len(),
                self.dimension
            )));
        }
        if cube.level < self.min_level() || cube.level > self.max_level() {
            return Err(range_err());
        }
        if cube.level < 0 {
            if cube.index.iter().any(|&i| i != 0) {
                return Err(range_err());
            }
        } else {
            let side = 1u64 << cube.level;
            if cube.index.iter().any(|&i| i >= side) {
                return Err(range_err());
            }
        }
        Ok(())
    }

    /// Linear position of a finest cell (lexicographic, first coordinate
    /// most significant).
    pub fn cell_index(&self, coords: &[u64]) -> usize {
        coords
            .iter()
            .fold(0usize, |acc, &c| (acc << self.depth) | c as usize)
    }

    pub fn cell_coords(&self, cell: usize) -> Vec<u64> {
        let mask = (1usize << self.depth) - 1;
        let mut coords = vec![0u64; self.dimension];
        let mut rest = cell;
        for slot in coords.iter_mut().rev() {
            *slot = (rest & mask) as u64;
            rest >>= self.depth;
        }
        coords
    }

    pub fn cell_cube(&self, cell: usize) -> CubeId {
        CubeId::new(self.depth as i32, self.cell_coords(cell))
    }

    /// Finest cells meeting `cube` together with the fraction of each cell
    /// that the cube occupies (1 unless the cube is a virtual refinement).
    pub fn cover(&self, cube: &CubeId) -> Cover {
        let depth = self.depth as i32;
        if cube.level <= 0 {
            return Cover {
                cells: (0..self.num_cells()).collect(),
                fraction: 1.0,
            };
        }
        if cube.level > depth {
            let shift = (cube.level - depth) as u32;
            let coords: Vec<u64> = cube.index.iter().map(|&i| i >> shift).collect();
            let fraction = (-((self.dimension as u32 * shift) as f64)).exp2();
            return Cover {
                cells: vec![self.cell_index(&coords)],
                fraction,
            };
        }
        let span = 1u64 << (depth - cube.level);
        let mut cells = Vec::with_capacity((span as usize).pow(self.dimension as u32));
        let mut coords: Vec<u64> = cube.index.iter().map(|&i| i * span).collect();
        let base = coords.clone();
        loop {
            cells.push(self.cell_index(&coords));
            // odometer over the sub-box, last coordinate fastest
            let mut axis = self.dimension;
            loop {
                if axis == 0 {
                    cells.sort_unstable();
                    return Cover {
                        cells,
                        fraction: 1.0,
                    };
                }
                axis -= 1;
                coords[axis] += 1;
                if coords[axis] < base[axis] + span {
                    break;
                }
                coords[axis] = base[axis];
            }
        }
    }

    /// All cubes of the grid proper (levels `0..=D`), coarse to fine.
    pub fn grid_cubes(&self) -> Vec<CubeId> {
        (0..=self.depth as i32)
            .flat_map(|level| self.cubes_at_level(level))
            .collect()
    }

    /// Cubes of level `0 <= level <= D + padding_down` in lexicographic order.
    pub fn cubes_at_level(&self, level: i32) -> Vec<CubeId> {
        assert!(level >= 0, "only non-negative levels are enumerable");
        let side = 1u64 << level;
        let count = (side as usize).pow(self.dimension as u32);
        (0..count)
            .map(|mut n| {
                let mut index = vec![0u64; self.dimension];
                for slot in index.iter_mut().rev() {
                    *slot = (n as u64) % side;
                    n /= side as usize;
                }
                CubeId::new(level, index)
            })
            .collect()
    }

    pub fn cube_geometry(&self, cube: &CubeId) -> Result<CubeGeometry> {
        self.validate(cube)?;
        let parent = cube.parent();
        let parent = self.validate(&parent).is_ok().then_some(parent);
        let children = if cube.level < self.max_level() {
            cube.children()
        } else {
            Vec::new()
        };
        Ok(CubeGeometry {
            parent,
            children,
            measure: cube.lebesgue_measure(),
        })
    }
}

/// Parent, children and Lebesgue measure of a cube.
///
/// `parent` is `None` for the topmost virtual ancestor and `children` is
/// empty on the deepest refinement level. A virtual ancestor lists only
/// its child that contains the unit cube: the other children lie outside
/// `[0,1)^d` where every function of the grid vanishes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeGeometry {
    pub parent: Option<CubeId>,
    pub children: Vec<CubeId>,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub cells: Vec<usize>,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    pub level: i32,
    pub index: Vec<u64>,
}

impl CubeId {
    pub fn new(level: i32, index: Vec<u64>) -> Self {
        Self { level, index }
    }

    pub fn root(dimension: usize) -> Self {
        Self::new(0, vec![0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    pub fn parent(&self) -> CubeId {
        self.ancestor(1)
    }

    /// `Q^{(j)}`, the `j`-th dyadic ancestor.
    pub fn ancestor(&self, generations: u32) -> CubeId {
        let level = self.level - generations as i32;
        let index = if level <= 0 || self.level <= 0 {
            vec![0; self.dimension()]
        } else {
            self.index.iter().map(|&i| i >> generations).collect()
        };
        CubeId::new(level, index)
    }

    pub fn children(&self) -> Vec<CubeId> {
        let d = self.dimension();
        if self.level < 0 {
            return vec![CubeId::new(self.level + 1, vec![0; d])];
        }
        (0..1usize << d)
            .map(|bits| {
                let index = self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(axis, &i)| 2 * i + ((bits >> (d - 1 - axis)) & 1) as u64)
                    .collect();
                CubeId::new(self.level + 1, index)
            })
            .collect()
    }

    /// Non-strict inclusion `other ⊆ self`.
    pub fn contains(&self, other: &CubeId) -> bool {
        if other.level < self.level {
            return false;
        }
        if self.level < 0 {
            return true;
        }
        if other.level < 0 {
            return false;
        }
        let shift = (other.level - self.level) as u32;
        self.index
            .iter()
            .zip(&other.index)
            .all(|(&mine, &theirs)| theirs >> shift == mine)
    }

    pub fn strictly_contains(&self, other: &CubeId) -> bool {
        self.level < other.level && self.contains(other)
    }

    /// Dyadic cubes intersect exactly when one contains the other.
    pub fn intersects(&self, other: &CubeId) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// `2^{-d·level}`.
    pub fn lebesgue_measure(&self) -> f64 {
        (-(self.level as f64) * self.dimension() as f64).exp2()
    }

    /// True for cubes inside `[0,1)^d`.
    pub fn in_unit_cube(&self) -> bool {
        self.level >= 0
    }
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}{:?}", self.level, self.index)
    }
}

/// A set of finest cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSet {
    grid: DyadicGrid,
    bits: Vec<bool>,
}

impl CellSet {
    pub fn empty(grid: DyadicGrid) -> Self {
        Self {
            grid,
            bits: vec![false; grid.num_cells()],
        }
    }

    pub fn full(grid: DyadicGrid) -> Self {
        Self {
            grid,
            bits: vec![true; grid.num_cells()],
        }
    }

    pub fn from_cells(grid: DyadicGrid, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(grid);
        for c in cells {
            set.bits[c] = true;
        }
        set
    }

    /// Cells meeting `cube`.
    pub fn from_cube(grid: DyadicGrid, cube: &CubeId) -> Self {
        Self::from_cells(grid, grid.cover(cube).cells)
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.bits[cell]
    }

    pub fn insert(&mut self, cell: usize) {
        self.bits[cell] = true;
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.bits
    }

    fn zip_with(&self, other: &CellSet, op: impl Fn(bool, bool) -> bool) -> CellSet {
        CellSet {
            grid: self.grid,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> CellSet {
        CellSet {
            grid: self.grid,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Whether every point of `cube` lies in the set. Virtual ancestors are
    /// never contained: they have mass outside `[0,1)^d`.
    pub fn contains_cube(&self, cube: &CubeId) -> bool {
        cube.level >= 0 && self.grid.cover(cube).cells.iter().all(|&c| self.bits[c])
    }

    /// Whether `cube` meets the set.
    pub fn meets_cube(&self, cube: &CubeId) -> bool {
        self.grid.cover(cube).cells.iter().any(|&c| self.bits[c])
    }
}

/// A real function on `[0,1)^d`, constant on each finest cell and zero
/// outside the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    grid: DyadicGrid,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Structural(format!(
                "step function has {} values, grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "step function value {bad} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: DyadicGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.num_cells()],
        }
    }

    pub fn zeros(grid: DyadicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// `1_Q` for a cube of level at most `D`.
    pub fn indicator(grid: DyadicGrid, cube: &CubeId) -> Result<Self> {
        grid.validate(cube)?;
        if cube.level > grid.depth() as i32 {
            return Err(Error::Precondition(format!(
                "indicator of {cube} is finer than the grid cells"
            )));
        }
        Ok(Self::indicator_of_cells(&CellSet::from_cube(grid, cube)))
    }

    pub fn indicator_of_cells(cells: &CellSet) -> Self {
        Self {
            grid: *cells.grid(),
            values: cells
                .as_bools()
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// Evaluate at a point of `ℝ^d`.
    pub fn eval(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.grid.dimension());
        if point.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return 0.0;
        }
        let side = (1u64 << self.grid.depth()) as f64;
        let coords: Vec<u64> = point.iter().map(|&x| (x * side).floor() as u64).collect();
        self.values[self.grid.cell_index(&coords)]
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
    }

    pub fn abs(&self) -> StepFunction {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> StepFunction {
        self.map(|v| c * v)
    }

    pub fn zip_with(
        &self,
        other: &StepFunction,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<StepFunction> {
        self.grid.check_same_cells(&other.grid)?;
        Ok(StepFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// `1_S · f`.
    pub fn masked(&self, cells: &CellSet) -> StepFunction {
        StepFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(cells.as_bools())
                .map(|(&v, &keep)| if keep { v } else { 0.0 })
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}

/// A strictly positive step function.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight(StepFunction);

impl Weight {
    pub fn new(grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        Self::from_step(StepFunction::new(grid, values)?)
    }

    pub fn from_step(f: StepFunction) -> Result<Self> {
        if let Some(bad) = f.values().iter().find(|&&v| v <= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "weights must be strictly positive, found {bad}"
            )));
        }
        Ok(Self(f))
    }

    /// Lebesgue measure as a weight.
    pub fn lebesgue(grid: DyadicGrid) -> Self {
        Self(StepFunction::constant(grid, 1.0))
    }

    pub fn as_step(&self) -> &StepFunction {
        &self.0
    }

    /// `ω(Q)`.
    pub fn mass(&self, cube: &CubeId) -> f64 {
        let one = StepFunction::constant(*self.0.grid(), 1.0);
        integrate_unchecked(&one, &self.0, Region::Cube(cube))
    }
}

impl std::ops::Deref for Weight {
    type Target = StepFunction;

    fn deref(&self) -> &StepFunction {
        &self.0
    }
}

/// Region of integration.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    Whole,
    Cube(&'a CubeId),
    Cells(&'a CellSet),
    /// `Q ∩ S` for a cube `Q` and a cell set `S`.
    CubeAndCells(&'a CubeId, &'a CellSet),
}

/// `∫_region f μ dx`, an exact finite sum over finest cells.
pub fn integrate(f: &StepFunction, mu: &StepFunction, region: Region<'_>) -> Result<f64> {
    f.grid().check_same_cells(mu.grid())?;
    if let Region::Cells(s) | Region::CubeAndCells(_, s) = region {
        f.grid().check_same_cells(s.grid())?;
    }
    Ok(integrate_unchecked(f, mu, region))
}

fn integrate_unchecked(f: &StepFunction, mu: &StepFunction, region: Region<'_>) -> f64 {
    let grid = f.grid();
    let h = grid.cell_measure();
    let term = |c: usize| f.values[c] * mu.values[c];
    match region {
        Region::Whole => {
            f.values
                .iter()
                .zip(&mu.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * h
        }
        Region::Cells(s) => s.iter().map(term).sum::<f64>() * h,
        Region::Cube(q) => {
            let cover = grid.cover(q);
            cover.cells.iter().map(|&c| term(c)).sum::<f64>() * h * cover.fraction
        }
        Region::CubeAndCells(q, s) => {
            let cover = grid.cover(q);
            cover
                .cells
                .iter()
                .filter(|&&c| s.contains(c))
                .map(|&c| term(c))
                .sum::<f64>()
                * h
                * cover.fraction
        }
    }
}

/// `𝔼_Q(g) = |Q|^{-1} ∫_Q g`. Virtual ancestors keep their full Lebesgue
/// measure, so the zero extension dilutes their averages.
pub fn average_lebesgue(g: &StepFunction, cube: &CubeId) -> Result<f64> {
    g.grid().validate(cube)?;
    let one = StepFunction::constant(*g.grid(), 1.0);
    Ok(integrate_unchecked(g, &one, Region::Cube(cube)) / cube.lebesgue_measure())
}

/// Result of a weighted average; `null_mass` flags `ω(Q) = 0`, in which case
/// `value` is 0 by convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedAverage {
    pub value: f64,
    pub null_mass: bool,
}

/// `𝔼_Q^ω(g) = ω(Q)^{-1} ∫_Q g ω`.
pub fn average_weighted(
    g: &StepFunction,
    omega: &Weight,
    cube: &CubeId,
) -> Result<WeightedAverage> {
    g.grid().check_same_cells(omega.grid())?;
    g.grid().validate(cube)?;
    let mass = omega.mass(cube);
    if mass <= 0.0 {
        return Ok(WeightedAverage {
            value: 0.0,
            null_mass: true,
        });
    }
    Ok(WeightedAverage {
        value: integrate_unchecked(g, omega, Region::Cube(cube)) / mass,
        null_mass: false,
    })
}

/// `{g > λ}` as a set of finest cells.
pub fn superlevel_set(g: &StepFunction, lambda: f64) -> CellSet {
    CellSet {
        grid: *g.grid(),
        bits: g.values().iter().map(|&v| v > lambda).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, depth: u32) -> DyadicGrid {
        DyadicGrid::new(d, depth).unwrap()
    }

    fn sf(g: DyadicGrid, v: &[f64]) -> StepFunction {
        StepFunction::new(g, v.to_vec()).unwrap()
    }

    #[test]
    fn root_geometry_in_one_dimension() {
        let g = grid(1, 0);
        let geo = g.cube_geometry(&g.root()).unwrap();
        assert_eq!(geo.parent, Some(CubeId::new(-1, vec![0])));
        assert_eq!(
            geo.children,
            vec![CubeId::new(1, vec![0]), CubeId::new(1, vec![1])]
        );
        assert_eq!(geo.measure, 1.0);
    }

    #[test]
    fn quarter_interval_geometry() {
        let g = grid(1, 2);
        let geo = g.cube_geometry(&CubeId::new(2, vec![1])).unwrap();
        assert_eq!(geo.parent, Some(CubeId::new(1, vec![0])));
        assert_eq!(geo.measure, 0.25);
    }

    #[test]
    fn square_root_has_four_children() {
        let g = grid(2, 1);
        let geo = g.cube_geometry(&g.root()).unwrap();
        assert_eq!(geo.children.len(), 4);
        assert_eq!(geo.measure, 1.0);
        for child in &geo.children {
            assert!(g.root().strictly_contains(child));
        }
    }

    #[test]
    fn geometry_rejects_levels_outside_padding() {
        let g = grid(1, 1);
        assert!(matches!(
            g.cube_geometry(&CubeId::new(-3, vec![0])),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            g.cube_geometry(&CubeId::new(4, vec![0])),
            Err(Error::Range { .. })
        ));
        assert!(g.cube_geometry(&CubeId::new(1, vec![2])).is_err());
        // edges of the padded range have no parent / no children
        assert_eq!(
            g.cube_geometry(&CubeId::new(-2, vec![0])).unwrap().parent,
            None
        );
        assert!(g
            .cube_geometry(&CubeId::new(3, vec![7]))
            .unwrap()
            .children
            .is_empty());
    }

    #[test]
    fn integrate_examples() {
        let g = grid(1, 1);
        let one = StepFunction::constant(g, 1.0);
        let root = g.root();
        assert_eq!(
            integrate(&sf(g, &[1.0, 3.0]), &one, Region::Cube(&root)).unwrap(),
            2.0
        );
        let mu = sf(g, &[4.0, 1.0]);
        assert_eq!(integrate(&one, &mu, Region::Cube(&root)).unwrap(), 2.5);
        assert_eq!(
            integrate(&StepFunction::zeros(g), &mu, Region::Whole).unwrap(),
            0.0
        );
    }

    #[test]
    fn integrate_rejects_mismatched_grids() {
        let f = StepFunction::constant(grid(1, 1), 1.0);
        let mu = StepFunction::constant(grid(1, 2), 1.0);
        assert!(matches!(
            integrate(&f, &mu, Region::Whole),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn lebesgue_averages() {
        let g = grid(1, 1);
        let f = sf(g, &[2.0, 0.0]);
        assert_eq!(average_lebesgue(&f, &g.root()).unwrap(), 1.0);
        assert_eq!(average_lebesgue(&f, &CubeId::new(1, vec![0])).unwrap(), 2.0);
        assert_eq!(
            average_lebesgue(&f, &CubeId::new(-1, vec![0])).unwrap(),
            0.5
        );
    }

    #[test]
    fn weighted_averages() {
        let g = grid(1, 1);
        let one = Weight::lebesgue(g);
        let root = g.root();
        let avg = average_weighted(&sf(g, &[4.0, 0.0]), &one, &root).unwrap();
        assert_eq!(avg.value, 2.0);
        assert!(!avg.null_mass);
        let omega = Weight::new(g, vec![3.0, 1.0]).unwrap();
        assert_eq!(
            average_weighted(&sf(g, &[1.0, 3.0]), &omega, &root)
                .unwrap()
                .value,
            1.5
        );
        let c = StepFunction::constant(g, 7.25);
        for q in g.grid_cubes() {
            assert_eq!(average_weighted(&c, &omega, &q).unwrap().value, 7.25);
        }
    }

    #[test]
    fn superlevel_examples() {
        let g = grid(1, 1);
        let f = sf(g, &[2.0, 1.0]);
        assert_eq!(superlevel_set(&f, 1.5).iter().collect::<Vec<_>>(), vec![0]);
        assert!(superlevel_set(&f, 0.5).is_full());
        assert!(superlevel_set(&f, 2.0).is_empty());
    }

    #[test]
    fn cover_of_refinement_cube_is_a_cell_fraction() {
        let g = grid(2, 1);
        let cover = g.cover(&CubeId::new(3, vec![5, 1]));
        assert_eq!(cover.cells, vec![g.cell_index(&[1, 0])]);
        assert_eq!(cover.fraction, 1.0 / 16.0);
        assert_eq!(g.cover(&CubeId::new(1, vec![1, 0])).cells, vec![2]);
    }

    #[test]
    fn cell_order_is_lexicographic() {
        let g = grid(2, 2);
        assert_eq!(g.cell_index(&[0, 3]), 3);
        assert_eq!(g.cell_index(&[1, 0]), 4);
        assert_eq!(g.cell_coords(13), vec![3, 1]);
        let q = CubeId::new(1, vec![0, 1]);
        assert_eq!(g.cover(&q).cells, vec![2, 3, 6, 7]);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(Weight::new(grid(1, 1), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn eval_at_points() {
        let g = grid(1, 2);
        let f = sf(g, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.eval(&[0.3]), 2.0);
        assert_eq!(f.eval(&[1.2]), 0.0);
        assert_eq!(f.eval(&[-0.1]), 0.0);
    }
}
