//! Problem instances: a grid, two weights, exponents and the coefficient
//! family `τ` over a collection of cubes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CubeId, DyadicGrid, StepFunction, Weight};

/// Hölder conjugate `x' = x/(x-1)`.
pub fn conjugate(x: f64) -> f64 {
    x / (x - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub p_conj: f64,
    pub r_conj: f64,
    pub q_conj: f64,
}

impl Exponents {
    pub fn new(p: f64, r: f64, q: f64) -> Result<Self> {
        let ok = p.is_finite() && r.is_finite() && q.is_finite() && 1.0 < r && r <= p && 1.0 < q;
        if !ok {
            return Err(Error::InvalidInstance(format!(
                "exponents must satisfy 1 < r <= p < inf and 1 < q < inf (p={p}, r={r}, q={q})"
            )));
        }
        Ok(Self {
            p,
            r,
            q,
            p_conj: conjugate(p),
            r_conj: conjugate(r),
            q_conj: conjugate(q),
        })
    }
}

/// A cube of the collection with its coefficient and cached geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub cube: CubeId,
    pub tau: f64,
    /// Finest cells inside the cube, ascending.
    pub cells: Vec<usize>,
    /// Lebesgue measure `|Q|`.
    pub measure: f64,
}

#[derive(Clone, Debug)]
pub struct Instance {
    grid: DyadicGrid,
    sigma: Weight,
    w: Weight,
    exponents: Exponents,
    members: Vec<Member>,
    cell_members: Vec<Vec<usize>>,
}

impl Instance {
    pub fn new(
        grid: DyadicGrid,
        sigma: Weight,
        w: Weight,
        exponents: Exponents,
        collection: impl IntoIterator<Item = (CubeId, f64)>,
    ) -> Result<Self> {
        grid.check_same_cells(sigma.grid())?;
        grid.check_same_cells(w.grid())?;
        let mut taus = BTreeMap::new();
        for (cube, tau) in collection {
            grid.validate(&cube)?;
            if cube.level < 0 || cube.level > grid.depth() as i32 {
                return Err(Error::InvalidInstance(format!(
                    "collection cube {cube} must have level in 0..={}",
                    grid.depth()
                )));
            }
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "tau for {cube} must be finite and non-negative, got {tau}"
                )));
            }
            if taus.insert(cube.clone(), tau).is_some() {
                return Err(Error::InvalidInstance(format!("duplicate cube {cube}")));
            }
        }
        let members: Vec<Member> = taus
            .into_iter()
            .map(|(cube, tau)| Member {
                cells: grid.cover(&cube).cells,
                measure: cube.lebesgue_measure(),
                cube,
                tau,
            })
            .collect();
        let mut cell_members = vec![Vec::new(); grid.num_cells()];
        for (m, member) in members.iter().enumerate() {
            for &c in &member.cells {
                cell_members[c].push(m);
            }
        }
        Ok(Self {
            grid,
            sigma,
            w,
            exponents,
            members,
            cell_members,
        })
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn sigma(&self) -> &Weight {
        &self.sigma
    }

    pub fn w(&self) -> &Weight {
        &self.w
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn p(&self) -> f64 {
        self.exponents.p
    }

    pub fn r(&self) -> f64 {
        self.exponents.r
    }

    pub fn q(&self) -> f64 {
        self.exponents.q
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    /// Indices into [`Instance::members`] of the cubes containing `cell`.
    pub fn cell_members(&self, cell: usize) -> &[usize] {
        &self.cell_members[cell]
    }

    pub fn member_index(&self, cube: &CubeId) -> Option<usize> {
        self.members.binary_search_by(|m| m.cube.cmp(cube)).ok()
    }

    pub fn tau(&self, cube: &CubeId) -> Option<f64> {
        self.member_index(cube).map(|i| self.members[i].tau)
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn cell_measure(&self) -> f64 {
        self.grid.cell_measure()
    }

    pub fn check_function(&self, f: &StepFunction) -> Result<()> {
        self.grid.check_same_cells(f.grid())
    }

    /// Same instance with every `τ` multiplied by `c`.
    pub fn scale_tau(&self, c: f64) -> Result<Self> {
        self.with_collection(self.members.iter().map(|m| (m.cube.clone(), c * m.tau)))
    }

    pub fn with_collection(
        &self,
        collection: impl IntoIterator<Item = (CubeId, f64)>,
    ) -> Result<Self> {
        Self::new(
            self.grid,
            self.sigma.clone(),
            self.w.clone(),
            self.exponents,
            collection,
        )
    }

    pub fn with_exponents(&self, exponents: Exponents) -> Result<Self> {
        Self::new(
            self.grid,
            self.sigma.clone(),
            self.w.clone(),
            exponents,
            self.members.iter().map(|m| (m.cube.clone(), m.tau)),
        )
    }

    pub fn with_padding(&self, padding_up: u32, padding_down: u32) -> Result<Self> {
        let grid = DyadicGrid::with_padding(
            self.grid.dimension(),
            self.grid.depth(),
            padding_up,
            padding_down,
        )?;
        Self::new(
            grid,
            Weight::new(grid, self.sigma.values().to_vec())?,
            Weight::new(grid, self.w.values().to_vec())?,
            self.exponents,
            self.members.iter().map(|m| (m.cube.clone(), m.tau)),
        )
    }

    pub fn to_json_value(&self) -> InstanceJson {
        InstanceJson {
            dimension: self.grid.dimension(),
            depth: self.grid.depth(),
            p: self.exponents.p,
            r: self.exponents.r,
            q: self.exponents.q,
            sigma: self.sigma.values().to_vec(),
            w: self.w.values().to_vec(),
            cubes: self
                .members
                .iter()
                .map(|m| CubeJson {
                    level: m.cube.level,
                    index: m.cube.index.clone(),
                    tau: m.tau,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("instance serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        raw.into_instance()
    }
}

/// Wire format of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub dimension: usize,
    pub depth: u32,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub sigma: Vec<f64>,
    pub w: Vec<f64>,
    pub cubes: Vec<CubeJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeJson {
    pub level: i32,
    pub index: Vec<u64>,
    pub tau: f64,
}

impl InstanceJson {
    pub fn into_instance(self) -> Result<Instance> {
        let grid = DyadicGrid::new(self.dimension, self.depth)?;
        Instance::new(
            grid,
            Weight::new(grid, self.sigma)?,
            Weight::new(grid, self.w)?,
            Exponents::new(self.p, self.r, self.q)?,
            self.cubes
                .into_iter()
                .map(|c| (CubeId::new(c.level, c.index), c.tau)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugates() {
        let e = Exponents::new(4.0, 1.5, 2.0).unwrap();
        assert_eq!(e.p_conj, 4.0 / 3.0);
        assert_eq!(e.r_conj, 3.0);
        assert_eq!(e.q_conj, 2.0);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(Exponents::new(2.0, 3.0, 2.0).is_err());
        assert!(Exponents::new(2.0, 1.0, 2.0).is_err());
        assert!(Exponents::new(2.0, 2.0, 1.0).is_err());
        assert!(Exponents::new(f64::INFINITY, 2.0, 2.0).is_err());
    }

    #[test]
    fn rejects_virtual_and_duplicate_cubes() {
        let grid = DyadicGrid::new(1, 1).unwrap();
        let one = Weight::lebesgue(grid);
        let e = Exponents::new(2.0, 2.0, 2.0).unwrap();
        let make =
            |cubes: Vec<(CubeId, f64)>| Instance::new(grid, one.clone(), one.clone(), e, cubes);
        assert!(make(vec![(CubeId::new(2, vec![0]), 1.0)]).is_err());
        assert!(make(vec![(CubeId::new(-1, vec![0]), 1.0)]).is_err());
        assert!(make(vec![(CubeId::new(0, vec![0]), -1.0)]).is_err());
        assert!(make(vec![
            (CubeId::new(0, vec![0]), 1.0),
            (CubeId::new(0, vec![0]), 2.0)
        ])
        .is_err());
        assert!(make(vec![(CubeId::new(1, vec![1]), 1.0)]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"dimension":1,"depth":1,"p":3.0,"r":2.0,"q":2.5,
            "sigma":[1.0,0.5],"w":[4.0,1.0],
            "cubes":[{"level":1,"index":[1],"tau":0.25},{"level":0,"index":[0],"tau":1.0}]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.members().len(), 2);
        assert_eq!(inst.tau(&CubeId::new(1, vec![1])), Some(0.25));
        let again = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(again.to_json(), inst.to_json());
    }
}
