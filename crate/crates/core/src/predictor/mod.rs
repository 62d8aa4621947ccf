//! Waypoint prediction on the polar grid.
//!
//! A predictor turns an [`ObstacleMap`] into a score per cell, cells beyond
//! the first obstacle of each ray are masked out, and greedy non-maximum
//! suppression picks up to `k` well separated peaks. Two scorers are
//! provided: [`geometric_predict`], which needs no training, and the learned
//! [`PredictorModel`].

mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use model::{ModelConfig, PredictorModel};
pub use train::{train, TrainConfig, TrainReport, TrainingExample};

use crate::error::{Error, Result};
use crate::obstacle::ObstacleMap;
use crate::radial::{Cell, LocalPoint, RadialGrid};

/// Per-cell score or logit. Masked cells hold `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn filled(grid: RadialGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "heatmap has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn get(&self, c: Cell) -> f64 {
        self.values[self.grid.index(c)]
    }

    pub fn set(&mut self, c: Cell, v: f64) {
        let i = self.grid.index(c);
        self.values[i] = v;
    }

    pub fn is_masked(&self, c: Cell) -> bool {
        self.get(c) == f64::NEG_INFINITY
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub cell: Cell,
    pub local: LocalPoint,
    pub score: f64,
}

/// Selected waypoints, highest score first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaypointSet {
    pub waypoints: Vec<Waypoint>,
}

impl WaypointSet {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub k: usize,
    /// Metres, measured between cell centres in the agent frame.
    pub nms_radius: f64,
    pub min_score: f64,
    /// Apply the linear-reachability mask. Disabled only for ablations.
    pub mask: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            k: 5,
            nms_radius: 1.0,
            min_score: 0.25,
            mask: true,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("predictor k must be at least 1".into()));
        }
        if !(self.nms_radius > 0.0) {
            return Err(Error::InvalidConfig("nms_radius must be positive".into()));
        }
        if self.min_score.is_nan() {
            return Err(Error::InvalidConfig("min_score must be a number".into()));
        }
        Ok(())
    }
}

/// Masks every cell at or beyond the first obstacle of its ray, and every
/// occupied cell.
pub fn reachability_mask(map: &ObstacleMap, logits: &Heatmap) -> Result<Heatmap> {
    if map.grid != logits.grid {
        return Err(Error::GridMismatch("obstacle map and heatmap grids differ".into()));
    }
    let grid = map.grid;
    let mut out = logits.clone();
    for a in 0..grid.num_angles {
        let first = map.first_obstacle_index(a).unwrap_or(grid.num_radii);
        for j in 0..grid.num_radii {
            let c = Cell::new(a, j);
            if j >= first || map.is_occupied(c) {
                out.set(c, f64::NEG_INFINITY);
            }
        }
    }
    Ok(out)
}

/// Greedy non-maximum suppression. Among equal scores the cell nearest the
/// heading (bin 0) in angle wins, then the smaller angle index.
pub fn nms_select(masked: &Heatmap, k: usize, nms_radius: f64, min_score: f64) -> WaypointSet {
    let grid = masked.grid;
    let mut order: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let v = masked.values[i];
            v.is_finite() && v >= min_score
        })
        .collect();
    let offset = |i: usize| grid.angle_bin_distance(grid.cell_at(i).a, 0);
    order.sort_by(|&x, &y| {
        masked.values[y]
            .total_cmp(&masked.values[x])
            .then(offset(x).cmp(&offset(y)))
            .then(x.cmp(&y))
    });

    let mut picked: Vec<Waypoint> = Vec::with_capacity(k);
    for i in order {
        if picked.len() >= k {
            break;
        }
        let cell = grid.cell_at(i);
        let local = grid
            .cell_center_local(cell)
            .expect("cell index comes from the grid");
        if picked.iter().any(|w| w.local.distance(&local) < nms_radius) {
            continue;
        }
        picked.push(Waypoint {
            cell,
            local,
            score: masked.values[i],
        });
    }
    WaypointSet { waypoints: picked }
}

/// Scores used by [`geometric_predict`] before masking: on each ray only the
/// farthest usable free cell is a candidate, scored by its range. With the
/// mask enabled "usable" means before the first obstacle; without it, any
/// free cell.
pub fn geometric_scores(map: &ObstacleMap, mask: bool) -> Heatmap {
    let grid = map.grid;
    let mut h = Heatmap::filled(grid, f64::NEG_INFINITY);
    for a in 0..grid.num_angles {
        let limit = if mask {
            map.first_obstacle_index(a).unwrap_or(grid.num_radii)
        } else {
            grid.num_radii
        };
        if let Some(j) = (0..limit).rev().find(|&j| !map.is_occupied(Cell::new(a, j))) {
            h.set(Cell::new(a, j), (j as f64 + 0.5) * grid.radial_step);
        }
    }
    h
}

/// Training-free predictor preferring the longest clear ray segments.
pub fn geometric_predict(map: &ObstacleMap, cfg: &PredictorConfig) -> WaypointSet {
    let scores = geometric_scores(map, cfg.mask);
    let scores = if cfg.mask {
        reachability_mask(map, &scores).expect("same grid")
    } else {
        scores
    };
    nms_select(&scores, cfg.k, cfg.nms_radius, cfg.min_score)
}

/// Learned predictor: model logits, optional mask, then NMS.
pub fn model_waypoints(
    model: &PredictorModel,
    map: &ObstacleMap,
    cfg: &PredictorConfig,
) -> Result<WaypointSet> {
    let logits = model.predict(map)?;
    let logits = if cfg.mask {
        reachability_mask(map, &logits)?
    } else {
        logits
    };
    Ok(nms_select(&logits, cfg.k, cfg.nms_radius, cfg.min_score))
}

/// Ground-truth heatmap: an unnormalised Gaussian of peak 1 centred on each
/// neighbour's cell, `sigma` bins wide along both axes, wrapping in angle.
pub fn make_target_heatmap(grid: &RadialGrid, neighbors: &[LocalPoint], sigma: f64) -> Result<Heatmap> {
    let mut h = Heatmap::filled(*grid, 0.0);
    let centers = neighbors
        .iter()
        .map(|p| grid.local_to_cell(*p))
        .collect::<Result<Vec<_>>>()?;
    let denom = 2.0 * sigma * sigma;
    for c in grid.cells() {
        let mut v = 0.0;
        for n in &centers {
            let da = grid.angle_bin_distance(c.a, n.a) as f64;
            let dj = c.j as f64 - n.j as f64;
            v += (-(da * da + dj * dj) / denom).exp();
        }
        h.set(c, v);
    }
    Ok(h)
}
