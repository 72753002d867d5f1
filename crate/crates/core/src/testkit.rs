//! Small reference instances used throughout the tests and examples.
//!
//! * `i0`: d=1, D=0, σ=w≡1, 𝒬={root}, τ=1, p=r=q=2
//! * `i1`: d=1, D=1, σ≡1, w=(4,1), 𝒬={root}, τ=1, p=r=q=2
//! * `i2`: d=1, D=2, σ=w≡1, 𝒬 = all 7 cubes, τ≡1, p=r=q=2

use crate::grid::{CubeId, DyadicGrid, Weight};
use crate::instance::{Exponents, Instance};

fn square() -> Exponents {
    Exponents::new(2.0, 2.0, 2.0).expect("valid exponents")
}

pub fn i0() -> Instance {
    let grid = DyadicGrid::new(1, 0).expect("grid");
    let one = Weight::lebesgue(grid);
    Instance::new(
        grid,
        one.clone(),
        one,
        square(),
        vec![(CubeId::root(1), 1.0)],
    )
    .expect("instance")
}

pub fn i1() -> Instance {
    let grid = DyadicGrid::new(1, 1).expect("grid");
    Instance::new(
        grid,
        Weight::lebesgue(grid),
        Weight::new(grid, vec![4.0, 1.0]).expect("weight"),
        square(),
        vec![(CubeId::root(1), 1.0)],
    )
    .expect("instance")
}

pub fn i2() -> Instance {
    let grid = DyadicGrid::new(1, 2).expect("grid");
    let one = Weight::lebesgue(grid);
    Instance::new(
        grid,
        one.clone(),
        one,
        square(),
        grid.grid_cubes().into_iter().map(|q| (q, 1.0)),
    )
    .expect("instance")
}
