//! Deterministic 2.5-D heightfield simulator: panoramic range sensing, agent
//! kinematics, procedural worlds, ground-truth graphs and episodes.

mod episode;
mod generate;
mod geodesic;
mod world;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use episode::{generate_episode, region_sequence, Episode, EpisodeSpec, InstructionStyle, GT_PATH_SPACING};
pub use generate::{
    generate_world, sample_gt_graph, GtGraph, Terrain, WorldSpec, GT_EDGE_MAX, MIN_CORRIDOR_WIDTH, STAIR_RISER, STAIR_TREAD,
};
pub use geodesic::{resample_polyline, DistanceField};
pub use world::{Rect, Region, World, WorldBuilder, DEFAULT_RESOLUTION, TRAVERSAL_SPAN};

use crate::obstacle::PointCloud;
use crate::planner::LowLevelAction;
use crate::radial::{local_to_world, LocalPoint, Point2, Pose, RadialGrid};

pub const FORWARD_STEP: f64 = 0.25;
pub const TURN_STEP: f64 = 15.0;

/// Agent state: planar pose; elevation comes from the heightfield.
pub type AgentState = Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionMode {
    /// Blocked motion slides along the obstacle.
    #[default]
    Sliding,
    /// Blocked motion leaves the agent where it was.
    NoSliding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Spacing of samples along each ray, metres.
    pub sample_step: f64,
    /// Standard deviation of additive elevation noise, metres.
    pub noise_std: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            sample_step: DEFAULT_RESOLUTION,
            noise_std: 0.0,
        }
    }
}

/// Samples the heightfield along every bearing of the grid, out to its max
/// range. Point elevations are relative to the agent's foot.
pub fn panoramic_scan<R: Rng + ?Sized>(
    world: &World,
    agent: &AgentState,
    grid: &RadialGrid,
    cfg: &ScanConfig,
    rng: &mut R,
) -> PointCloud {
    let foot = world.elevation_at(agent.position());
    let noise = (cfg.noise_std > 0.0).then(|| Normal::new(0.0, cfg.noise_std).expect("positive std"));
    let samples = (grid.max_range / cfg.sample_step + 1e-9).floor() as usize;
    let mut cloud = PointCloud::default();
    for a in 0..grid.num_angles {
        let bearing = ((a as f64 + 0.5) * grid.angle_step).to_radians();
        let (s, c) = bearing.sin_cos();
        for i in 1..=samples {
            let r = i as f64 * cfg.sample_step;
            let local = LocalPoint::new(r * c, r * s);
            let mut z = world.elevation_at(local_to_world(agent, local)) - foot;
            if let Some(n) = &noise {
                z += n.sample(rng);
            }
            cloud.push(local.x, local.y, z);
        }
    }
    cloud
}

/// Applies one low-level action. Returns the new state and whether forward
/// motion was blocked.
pub fn step(world: &World, agent: &AgentState, action: LowLevelAction, mode: MotionMode) -> (AgentState, bool) {
    match action {
        LowLevelAction::Stop => (*agent, false),
        LowLevelAction::TurnLeft => (Pose::new(agent.x, agent.y, agent.heading + TURN_STEP), false),
        LowLevelAction::TurnRight => (Pose::new(agent.x, agent.y, agent.heading - TURN_STEP), false),
        LowLevelAction::Forward => {
            let from = agent.position();
            let (s, c) = agent.heading.to_radians().sin_cos();
            let to = Point2::new(from.x + FORWARD_STEP * c, from.y + FORWARD_STEP * s);
            let Some(hit) = world.first_blocked(from, to) else {
                return (Pose { x: to.x, y: to.y, ..*agent }, false);
            };
            if mode == MotionMode::NoSliding {
                return (*agent, true);
            }
            let Some(n) = world.uphill_normal(hit) else {
                return (*agent, true);
            };
            let (dx, dy) = (to.x - from.x, to.y - from.y);
            let along = dx * n.x + dy * n.y;
            let slide = Point2::new(from.x + dx - along * n.x, from.y + dy - along * n.y);
            if slide.distance(&from) > 1e-9 && world.segment_clear(from, slide) {
                (Pose { x: slide.x, y: slide.y, ..*agent }, true)
            } else {
                (*agent, true)
            }
        }
    }
}
