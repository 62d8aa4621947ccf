//! Binary obstacle maps built from a panoramic point cloud.
//!
//! Points are binned into the polar grid keeping the highest elevation per
//! cell. Each ray is then walked outward from the agent's foot and a cell is
//! an obstacle when the elevation change into it, per metre of radial travel,
//! exceeds the slope threshold. Steps up and drops are treated alike.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{Cell, LocalPoint, RadialGrid};

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 1.0;
pub const DEFAULT_ELEVATION_BAND: (f64, f64) = (-2.0, 2.0);

/// A point in the agent frame; `z` is elevation relative to the agent's foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<CloudPoint>) -> Self {
        Self { points }
    }

    pub fn push(&mut self, x: f64, y: f64, z: f64) {
        self.points.push(CloudPoint { x, y, z });
    }
}

/// Highest point per cell; `None` where no point landed.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    pub grid: RadialGrid,
    cells: Vec<Option<f64>>,
}

impl ElevationGrid {
    pub fn unknown(grid: RadialGrid) -> Self {
        Self {
            grid,
            cells: vec![None; grid.len()],
        }
    }

    pub fn get(&self, c: Cell) -> Option<f64> {
        self.cells[self.grid.index(c)]
    }

    pub fn is_known(&self, c: Cell) -> bool {
        self.get(c).is_some()
    }

    /// Raises the cell to `z` if `z` is higher than what it holds.
    pub fn raise(&mut self, c: Cell, z: f64) {
        let slot = &mut self.cells[self.grid.index(c)];
        *slot = Some(slot.map_or(z, |e| e.max(z)));
    }

    pub fn set(&mut self, c: Cell, z: Option<f64>) {
        let i = self.grid.index(c);
        self.cells[i] = z;
    }

    /// Builds a grid whose ray `a` holds `profile` (shorter profiles leave the
    /// tail unknown).
    pub fn from_profiles(grid: RadialGrid, profiles: &[(usize, Vec<Option<f64>>)]) -> Self {
        let mut eg = Self::unknown(grid);
        for (a, profile) in profiles {
            for (j, z) in profile.iter().enumerate().take(grid.num_radii) {
                eg.set(Cell::new(*a, j), *z);
            }
        }
        eg
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            cells: self.cells.iter().map(|c| c.map(|z| z * factor)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMap {
    pub grid: RadialGrid,
    occupied: Vec<bool>,
}

impl ObstacleMap {
    pub fn empty(grid: RadialGrid) -> Self {
        Self {
            grid,
            occupied: vec![false; grid.len()],
        }
    }

    pub fn from_flags(grid: RadialGrid, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "raster has {} cells, grid needs {}",
                occupied.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, occupied })
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[self.grid.index(c)]
    }

    pub fn set(&mut self, c: Cell, occupied: bool) {
        let i = self.grid.index(c);
        self.occupied[i] = occupied;
    }

    pub fn flags(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Smallest radial index on ray `a` that is occupied.
    pub fn first_obstacle_index(&self, a: usize) -> Option<usize> {
        (0..self.grid.num_radii).find(|&j| self.is_occupied(Cell::new(a, j)))
    }

    /// True when nothing occupied lies on the ray at or before `c`.
    pub fn is_linearly_reachable(&self, c: Cell) -> bool {
        self.first_obstacle_index(c.a).is_none_or(|j| c.j < j)
    }

    /// Shifts every ray by `bins` angle bins counterclockwise.
    pub fn rotated(&self, bins: usize) -> Self {
        let mut out = Self::empty(self.grid);
        for c in self.grid.cells() {
            if self.is_occupied(c) {
                out.set(Cell::new((c.a + bins) % self.grid.num_angles, c.j), true);
            }
        }
        out
    }

    /// Input features for the learned predictor: one row of radial flags per
    /// angle bin.
    pub fn as_features(&self) -> Vec<f64> {
        self.occupied.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect()
    }

    /// Text rendering with one row per radial ring (nearest first) and one
    /// column per angle bin; `#` marks obstacles.
    pub fn ascii(&self) -> String {
        let mut s = String::new();
        for j in 0..self.grid.num_radii {
            for a in 0..self.grid.num_angles {
                s.push(if self.is_occupied(Cell::new(a, j)) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

/// Projects a cloud onto the polar grid, keeping the highest point per cell.
/// Points outside the elevation band or beyond max range are dropped.
pub fn bin_points(grid: &RadialGrid, cloud: &PointCloud, band: (f64, f64)) -> ElevationGrid {
    let mut eg = ElevationGrid::unknown(*grid);
    for p in &cloud.points {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            continue;
        }
        if p.z < band.0 || p.z > band.1 {
            continue;
        }
        if let Ok(c) = grid.local_to_cell(LocalPoint::new(p.x, p.y)) {
            eg.raise(c, p.z);
        }
    }
    eg
}

/// Per-cell radial gradient magnitude, `|e(a,j) - e(a,j-1)| / radial_step`.
/// Unknown cells carry the last known elevation of their ray; the ray starts
/// at elevation 0 (the agent's foot).
pub fn radial_gradients(eg: &ElevationGrid) -> Vec<f64> {
    let grid = eg.grid;
    let mut out = vec![0.0; grid.len()];
    for a in 0..grid.num_angles {
        let mut prev = 0.0;
        for j in 0..grid.num_radii {
            let c = Cell::new(a, j);
            let e = eg.get(c).unwrap_or(prev);
            out[grid.index(c)] = (e - prev).abs() / grid.radial_step;
            prev = e;
        }
    }
    out
}

pub fn gradient_filter(eg: &ElevationGrid, slope_threshold: f64) -> ObstacleMap {
    let occupied = radial_gradients(eg)
        .into_iter()
        .map(|g| g > slope_threshold)
        .collect();
    ObstacleMap {
        grid: eg.grid,
        occupied,
    }
}

/// Full point cloud to obstacle map conversion.
pub fn obstacle_map_from_cloud(
    grid: &RadialGrid,
    cloud: &PointCloud,
    band: (f64, f64),
    slope_threshold: f64,
) -> ObstacleMap {
    gradient_filter(&bin_points(grid, cloud, band), slope_threshold)
}

#[derive(Serialize, Deserialize)]
struct Raster<T> {
    grid: RadialGrid,
    /// Angle-major: index `a * num_radii + j`.
    data: Vec<T>,
}

impl Serialize for ObstacleMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Raster {
            grid: self.grid,
            data: self.occupied.iter().map(|&o| o as u8).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObstacleMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = Raster::<u8>::deserialize(d)?;
        ObstacleMap::from_flags(r.grid, r.data.into_iter().map(|v| v != 0).collect())
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for ElevationGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Raster {
            grid: self.grid,
            data: self.cells.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ElevationGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = Raster::<Option<f64>>::deserialize(d)?;
        if r.data.len() != r.grid.len() {
            return Err(serde::de::Error::custom("elevation raster size mismatch"));
        }
        Ok(Self {
            grid: r.grid,
            cells: r.data,
        })
    }
}
