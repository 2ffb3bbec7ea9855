//! Discretized control space.
//!
//! A [`CellPartition`] is a finite family of disjoint cells, each carrying its
//! control mass and the time `tau` at which it enters the increasing family
//! `Z_t`. A [`Resolution`] reads those times forward or reversed; it induces
//! the strict total order used for adaptedness everywhere downstream.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub mass: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    cells: Vec<Cell>,
    total_mass: f64,
    // position of each cell when sorted by increasing tau
    forward_rank: Vec<usize>,
    // cell ids sorted by increasing tau
    forward_order: Vec<usize>,
    min_gap: f64,
}

impl CellPartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn mass(&self, id: usize) -> f64 {
        self.cells[id].mass
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.mass)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Smallest positive spacing of the stamps, including the spacing of the
    /// earliest stamp from zero.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn check_id(&self, id: usize) -> Result<()> {
        if id < self.cells.len() {
            Ok(())
        } else {
            Err(Error::CellOutOfRange { id, len: self.cells.len() })
        }
    }

    pub fn to_spec(&self) -> PartitionSpec {
        PartitionSpec {
            cells: self.cells.iter().map(|c| CellSpec { mass: c.mass, tau: c.tau }).collect(),
        }
    }
}

/// Builds a partition from `(mass, tau)` pairs; ids follow input order.
pub fn build_partition(spec: &[(f64, f64)]) -> Result<CellPartition> {
    if spec.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let mut cells = Vec::with_capacity(spec.len());
    let mut total_mass = 0.0;
    for (id, &(mass, tau)) in spec.iter().enumerate() {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NonPositiveMass { index: id, mass });
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::TauOutOfRange { index: id, tau });
        }
        total_mass += mass;
        cells.push(Cell { id, mass, tau });
    }

    let mut forward_order: Vec<usize> = (0..cells.len()).collect();
    forward_order.sort_by(|&a, &b| cells[a].tau.total_cmp(&cells[b].tau));
    let mut min_gap = cells[forward_order[0]].tau;
    for w in forward_order.windows(2) {
        let (a, b) = (cells[w[0]], cells[w[1]]);
        if a.tau == b.tau {
            return Err(Error::DuplicateTau { first: a.id.min(b.id), second: a.id.max(b.id), tau: a.tau });
        }
        min_gap = min_gap.min(b.tau - a.tau);
    }
    let mut forward_rank = vec![0; cells.len()];
    for (rank, &id) in forward_order.iter().enumerate() {
        forward_rank[id] = rank;
    }

    Ok(CellPartition { cells, total_mass, forward_rank, forward_order, min_gap })
}

/// `n` cells of equal mass with stamps `1/n, 2/n, ..., 1`.
pub fn uniform_partition(n: usize, mass: f64) -> Result<CellPartition> {
    let spec: Vec<(f64, f64)> = (1..=n).map(|j| (mass, j as f64 / n as f64)).collect();
    build_partition(&spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reversed,
}

#[derive(Debug, Clone)]
pub struct Resolution {
    partition: Arc<CellPartition>,
    direction: Direction,
}

impl Resolution {
    pub fn new(partition: Arc<CellPartition>, direction: Direction) -> Self {
        Self { partition, direction }
    }

    pub fn forward(partition: Arc<CellPartition>) -> Self {
        Self::new(partition, Direction::Forward)
    }

    pub fn reversed(partition: Arc<CellPartition>) -> Self {
        Self::new(partition, Direction::Reversed)
    }

    pub fn partition(&self) -> &Arc<CellPartition> {
        &self.partition
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Entry time of a cell under this resolution. Reversal maps
    /// `tau -> 1 - tau + min_gap`, which keeps every stamp in `(0, 1]` and
    /// maps a uniform grid onto itself.
    pub fn effective_tau(&self, id: usize) -> f64 {
        let tau = self.partition.cells[id].tau;
        match self.direction {
            Direction::Forward => tau,
            Direction::Reversed => (1.0 - tau + self.partition.min_gap).min(1.0),
        }
    }

    /// Position of the cell in the total order (0 = earliest).
    pub fn rank(&self, id: usize) -> usize {
        let r = self.partition.forward_rank[id];
        match self.direction {
            Direction::Forward => r,
            Direction::Reversed => self.partition.len() - 1 - r,
        }
    }

    /// Cell ids listed from earliest to latest.
    pub fn ordered_cells(&self) -> Vec<usize> {
        let mut ids = self.partition.forward_order.clone();
        if self.direction == Direction::Reversed {
            ids.reverse();
        }
        ids
    }

    /// Ids of the cells making up `Z_t`, in increasing id order.
    pub fn time_slice(&self, t: f64) -> Result<Vec<usize>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok((0..self.partition.len()).filter(|&c| self.in_slice(c, t)).collect())
    }

    pub fn in_slice(&self, id: usize, t: f64) -> bool {
        t >= 1.0 || self.effective_tau(id) <= t
    }

    /// Strict order `a ≺ b`. Compared by rank, so stamps that collide after
    /// the reversal's rounding still order correctly.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.rank(a) < self.rank(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub mass: f64,
    pub tau: f64,
}

/// `{"cells":[{"mass":1.0,"tau":0.5}, ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub cells: Vec<CellSpec>,
}

impl PartitionSpec {
    pub fn build(&self) -> Result<CellPartition> {
        let pairs: Vec<(f64, f64)> = self.cells.iter().map(|c| (c.mass, c.tau)).collect();
        build_partition(&pairs)
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { path: origin.to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Arc<CellPartition> {
        Arc::new(build_partition(&[(1.0, 0.7), (2.0, 0.2), (0.5, 0.45)]).unwrap())
    }

    #[test]
    fn single_cell() {
        let p = build_partition(&[(1.0, 0.5)]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.total_mass(), 1.0);
    }

    #[test]
    fn additive_total_mass() {
        let p = uniform_partition(17, 1.0).unwrap();
        assert_eq!(p.total_mass(), 17.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(build_partition(&[(1.0, 0.3), (1.0, 0.3)]), Err(Error::DuplicateTau { .. })));
        assert!(matches!(build_partition(&[(0.0, 0.3)]), Err(Error::NonPositiveMass { .. })));
        assert!(matches!(build_partition(&[(-1.0, 0.3)]), Err(Error::NonPositiveMass { .. })));
        assert!(matches!(build_partition(&[(1.0, 0.0)]), Err(Error::TauOutOfRange { .. })));
        assert!(matches!(build_partition(&[(1.0, 1.5)]), Err(Error::TauOutOfRange { .. })));
        assert!(matches!(build_partition(&[]), Err(Error::EmptyPartition)));
    }

    #[test]
    fn slices_at_endpoints() {
        let p = three();
        for dir in [Direction::Forward, Direction::Reversed] {
            let r = Resolution::new(p.clone(), dir);
            assert!(r.time_slice(0.0).unwrap().is_empty());
            assert_eq!(r.time_slice(1.0).unwrap(), vec![0, 1, 2]);
        }
        assert!(Resolution::forward(p).time_slice(1.01).is_err());
    }

    #[test]
    fn slice_by_definition() {
        let p = Arc::new(build_partition(&[(1.0, 0.2), (1.0, 0.7)]).unwrap());
        assert_eq!(Resolution::forward(p).time_slice(0.5).unwrap(), vec![0]);
    }

    #[test]
    fn precedes_basics() {
        let p = Arc::new(build_partition(&[(1.0, 0.2), (1.0, 0.7)]).unwrap());
        let r = Resolution::forward(p);
        assert!(!r.precedes(0, 0));
        assert!(r.precedes(0, 1));
        assert!(!r.precedes(1, 0));
    }

    #[test]
    fn reversal_flips_every_pair() {
        let p = three();
        let fwd = Resolution::forward(p.clone());
        let rev = Resolution::reversed(p);
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_eq!(fwd.precedes(a, b), rev.precedes(b, a));
                    assert_ne!(fwd.precedes(a, b), rev.precedes(a, b));
                }
            }
        }
        assert_eq!(fwd.ordered_cells(), vec![1, 2, 0]);
        assert_eq!(rev.ordered_cells(), vec![0, 2, 1]);
    }

    #[test]
    fn reversed_uniform_grid_maps_onto_itself() {
        let p = Arc::new(uniform_partition(8, 0.125).unwrap());
        let rev = Resolution::reversed(p);
        for c in 0..8 {
            let expect = (8 - c) as f64 / 8.0;
            assert!((rev.effective_tau(c) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = PartitionSpec::from_json(r#"{"cells":[{"mass":1.0,"tau":0.5},{"mass":2.5,"tau":1.0}]}"#, "inline").unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.total_mass(), 3.5);
        assert_eq!(p.to_spec(), spec);
    }
}
