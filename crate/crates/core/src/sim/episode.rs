use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geodesic::resample_polyline;
use super::{DistanceField, MotionMode, World};
use crate::error::{Error, Result};
use crate::radial::{signed_bearing, Point2, Pose};

pub const GT_PATH_SPACING: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructionStyle {
    /// Every region along the path with the turn taken there.
    #[default]
    StepByStep,
    /// Only the destination region.
    Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeSpec {
    pub min_distance: f64,
    pub max_distance: f64,
    pub max_attempts: usize,
    pub style: InstructionStyle,
    pub mode: MotionMode,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            min_distance: 4.0,
            max_distance: 12.0,
            max_attempts: 500,
            style: InstructionStyle::StepByStep,
            mode: MotionMode::Sliding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    /// Identifies the world the episode was generated in.
    pub world_id: String,
    pub start: Pose,
    pub goal: Point2,
    pub instruction: String,
    /// Reference path from start to goal, resampled every 0.25 m.
    pub gt_path: Vec<Point2>,
    pub geodesic_distance: f64,
    pub mode: MotionMode,
}

/// Picks a start and goal whose geodesic separation lies in the spec's range
/// and describes the shortest path between them.
pub fn generate_episode(world: &World, seed: u64, spec: &EpisodeSpec) -> Result<Episode> {
    if !(spec.min_distance >= 0.0 && spec.min_distance <= spec.max_distance) {
        return Err(Error::InfeasibleSpec("episode distance range is empty".into()));
    }
    let cells: Vec<(usize, usize)> = world.walkable_cells().collect();
    if cells.is_empty() {
        return Err(Error::InfeasibleSpec("world has no walkable cells".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..spec.max_attempts {
        let (gx, gy) = cells[rng.random_range(0..cells.len())];
        let (sx, sy) = cells[rng.random_range(0..cells.len())];
        let (goal, start) = (world.cell_center(gx, gy), world.cell_center(sx, sy));
        let heading = 15.0 * rng.random_range(0..24) as f64;
        if start == goal {
            continue;
        }
        let Some(field) = DistanceField::new(world, goal) else {
            continue;
        };
        let d = field.distance(world, start);
        if !(d >= spec.min_distance && d <= spec.max_distance) {
            continue;
        }
        let Some(cells_path) = field.path_to_source(world, start) else {
            continue;
        };
        let gt_path = resample_polyline(&cells_path, GT_PATH_SPACING);
        return Ok(Episode {
            id: format!("ep-{seed}"),
            world_id: String::new(),
            start: Pose::new(start.x, start.y, heading),
            goal,
            instruction: render_instruction(world, &gt_path, spec.style),
            gt_path,
            geodesic_distance: d,
            mode: spec.mode,
        });
    }
    Err(Error::InfeasibleSpec(format!(
        "no start/goal pair {}-{} m apart found in {} attempts",
        spec.min_distance, spec.max_distance, spec.max_attempts
    )))
}

/// Consecutive runs of region tags along a path, as (tag, first index, last index).
pub fn region_sequence(world: &World, path: &[Point2]) -> Vec<(String, usize, usize)> {
    let mut out: Vec<(String, usize, usize)> = Vec::new();
    for (i, p) in path.iter().enumerate() {
        let Some(tag) = world.tag_at(*p) else { continue };
        match out.last_mut() {
            Some(last) if last.0 == tag => last.2 = i,
            _ => out.push((tag.to_string(), i, i)),
        }
    }
    out
}

fn heading_between(path: &[Point2], i: usize, j: usize) -> Option<f64> {
    let (a, b) = (path[i], path[j.min(path.len() - 1)]);
    (a.distance(&b) > 1e-9).then(|| (b.y - a.y).atan2(b.x - a.x).to_degrees())
}

/// Turn taken while crossing `path[lo..=hi]`, judged from the direction of
/// travel a few samples before and after.
fn turn_word(path: &[Point2], lo: usize, hi: usize) -> Option<&'static str> {
    let reach = 4;
    let before = heading_between(path, lo.saturating_sub(reach), lo.max(1).min(path.len() - 1))?;
    let after = heading_between(path, hi, hi + reach)?;
    let delta = signed_bearing(after - before);
    if delta > 45.0 {
        Some("left")
    } else if delta < -45.0 {
        Some("right")
    } else {
        None
    }
}

fn render_instruction(world: &World, path: &[Point2], style: InstructionStyle) -> String {
    let regions = region_sequence(world, path);
    let Some(last) = regions.last() else {
        return "Walk to the goal and stop.".into();
    };
    if style == InstructionStyle::Goal || regions.len() == 1 {
        return format!("Go to the {} and stop there.", last.0);
    }
    let mut parts = Vec::new();
    for (k, (tag, lo, hi)) in regions.iter().enumerate() {
        let phrase = if k == 0 {
            format!("walk out of the {tag}")
        } else if k + 1 == regions.len() {
            format!("stop in the {tag}")
        } else {
            match turn_word(path, *lo, *hi) {
                Some(dir) => format!("turn {dir} at the {tag}"),
                None => format!("walk through the {tag}"),
            }
        };
        parts.push(phrase);
    }
    let mut text = parts.join(", ");
    text[..1].make_ascii_uppercase();
    text.push('.');
    text
}
