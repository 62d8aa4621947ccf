use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DistanceField, Rect, World, WorldBuilder, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::obstacle::DEFAULT_SLOPE_THRESHOLD;
use crate::radial::Point2;

pub const MIN_CORRIDOR_WIDTH: f64 = 0.8;
pub const STAIR_RISER: f64 = 0.17;
pub const STAIR_TREAD: f64 = 0.25;
const MARGIN: f64 = 0.5;

const ROOM_NAMES: [&str; 10] = [
    "living room",
    "kitchen",
    "bedroom",
    "bathroom",
    "office",
    "dining room",
    "hallway",
    "study",
    "laundry room",
    "entryway",
];

/// Elevation change between the last column of rooms and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terrain {
    #[default]
    Flat,
    /// Raised last column reached by stairs (riser 0.17 m, tread 0.25 m).
    Stairs,
    /// Raised last column reached by a constant-slope ramp.
    Ramp,
}

/// Procedural floor plan: a grid of rooms joined by corridors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub rows: usize,
    pub cols: usize,
    pub room_min: f64,
    pub room_max: f64,
    /// Minimum gap between neighbouring rooms, spanned by corridors.
    pub corridor_length: f64,
    pub corridor_width: f64,
    pub wall_height: f64,
    /// Chance of joining two neighbouring rooms beyond the spanning tree.
    pub extra_connection_prob: f64,
    pub terrain: Terrain,
    pub stair_steps: usize,
    pub ramp_slope: f64,
    /// Boxes placed per room, 0.5 m tall.
    pub clutter_per_room: usize,
    pub resolution: f64,
    pub slope_threshold: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 2,
            room_min: 3.5,
            room_max: 5.5,
            corridor_length: 1.5,
            corridor_width: 1.0,
            wall_height: 0.8,
            extra_connection_prob: 0.3,
            terrain: Terrain::Flat,
            stair_steps: 4,
            ramp_slope: 0.5,
            clutter_per_room: 1,
            resolution: DEFAULT_RESOLUTION,
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.rows == 0 || self.cols == 0 {
            return bad("at least one room is required".into());
        }
        if !(self.room_min >= 2.0 && self.room_min <= self.room_max) {
            return bad(format!("room size range [{}, {}] is invalid", self.room_min, self.room_max));
        }
        if !(self.corridor_width >= MIN_CORRIDOR_WIDTH) {
            return bad(format!(
                "corridor width {} m is below the {MIN_CORRIDOR_WIDTH} m minimum",
                self.corridor_width
            ));
        }
        if self.corridor_width >= self.room_min {
            return bad("corridors must be narrower than rooms".into());
        }
        if !(self.corridor_length >= 0.5) {
            return bad("corridor length must be at least 0.5 m".into());
        }
        if !(self.wall_height > self.slope_threshold * super::TRAVERSAL_SPAN) {
            return bad("walls must be too steep to climb".into());
        }
        if !(self.resolution > 0.0 && self.resolution <= 0.1) {
            return bad("resolution must be in (0, 0.1] m".into());
        }
        if !(0.0..=1.0).contains(&self.extra_connection_prob) {
            return bad("extra_connection_prob must be a probability".into());
        }
        match self.terrain {
            Terrain::Flat => {}
            Terrain::Stairs | Terrain::Ramp if self.cols < 2 => {
                return bad("raised terrain needs at least two columns of rooms".into());
            }
            Terrain::Stairs => {
                if self.stair_steps == 0 || self.stair_steps as f64 * STAIR_TREAD > self.corridor_length {
                    return bad("the stair flight does not fit in the corridor".into());
                }
                if STAIR_RISER > self.slope_threshold * super::TRAVERSAL_SPAN {
                    return bad("stair risers would be obstacles at this slope threshold".into());
                }
            }
            Terrain::Ramp => {
                if !(self.ramp_slope > 0.0 && self.ramp_slope <= self.slope_threshold) {
                    return bad("ramp slope must be positive and climbable".into());
                }
                if self.rise() / self.ramp_slope > self.corridor_length {
                    return bad("the ramp does not fit in the corridor".into());
                }
            }
        }
        Ok(())
    }

    /// Floor height of the raised column.
    pub fn rise(&self) -> f64 {
        match self.terrain {
            Terrain::Flat => 0.0,
            Terrain::Stairs | Terrain::Ramp => self.stair_steps as f64 * STAIR_RISER,
        }
    }

    fn pitch(&self) -> f64 {
        self.room_max + self.corridor_length
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Builds a world from `spec`. Same seed, same heightfield.
pub fn generate_world(seed: u64, spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = spec.pitch();
    let size_x = spec.cols as f64 * pitch + 2.0 * MARGIN;
    let size_y = spec.rows as f64 * pitch + 2.0 * MARGIN;
    let rise = spec.rise();
    let solid = rise + spec.wall_height;
    let floor_of = |c: usize| if c + 1 == spec.cols { rise } else { 0.0 };

    let mut names: Vec<&str> = ROOM_NAMES.to_vec();
    names.shuffle(&mut rng);
    let n_rooms = spec.rows * spec.cols;
    let mut rooms = Vec::with_capacity(n_rooms);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let cx = MARGIN + pitch * (c as f64 + 0.5);
            let cy = MARGIN + pitch * (r as f64 + 0.5);
            let w = rng.random_range(spec.room_min..=spec.room_max);
            let h = rng.random_range(spec.room_min..=spec.room_max);
            rooms.push(Rect::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0));
        }
    }
    let room_name = |i: usize| -> String {
        let base = names[i % names.len()];
        if i < names.len() {
            base.to_string()
        } else {
            format!("{base} {}", i / names.len() + 1)
        }
    };

    // Spanning tree over the room grid plus random extra links.
    let mut links: Vec<(usize, usize)> = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let i = r * spec.cols + c;
            if c + 1 < spec.cols {
                links.push((i, i + 1));
            }
            if r + 1 < spec.rows {
                links.push((i, i + spec.cols));
            }
        }
    }
    links.shuffle(&mut rng);
    let mut parent: Vec<usize> = (0..n_rooms).collect();
    let mut chosen = Vec::new();
    for &(a, b) in &links {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            chosen.push((a, b));
        } else if rng.random_bool(spec.extra_connection_prob) {
            chosen.push((a, b));
        }
    }
    chosen.sort_unstable();

    let mut b = WorldBuilder::new(size_x, size_y, spec.resolution, solid);
    let mut doorways = Vec::new();
    let mut ramps = Vec::new();
    let mut corridors = Vec::new();
    for (i, room) in rooms.iter().enumerate() {
        b.fill(*room, floor_of(i % spec.cols));
    }
    let half = spec.corridor_width / 2.0;
    let door = 0.5;
    for &(a, bi) in &chosen {
        let (ra, rb) = (rooms[a], rooms[bi]);
        let col = a % spec.cols;
        if bi == a + 1 {
            let cy = ra.center().y;
            let rect = Rect::new(ra.x1 - 0.05, cy - half, rb.x0 + 0.05, cy + half);
            let base = floor_of(col);
            let top = floor_of(col + 1);
            b.fill(rect, base);
            if top > base {
                let end = rb.x0;
                match spec.terrain {
                    Terrain::Stairs => {
                        let start = end - spec.stair_steps as f64 * STAIR_TREAD;
                        let steps = spec.stair_steps as f64;
                        b.fill_with(Rect::new(start, cy - half, end + 0.05, cy + half), |p| {
                            base + (((p.x - start) / STAIR_TREAD).floor() + 1.0).min(steps) * STAIR_RISER
                        });
                        ramps.push((Rect::new(start, cy - half, end, cy + half), "staircase"));
                    }
                    Terrain::Ramp => {
                        let len = (top - base) / spec.ramp_slope;
                        let start = end - len;
                        b.fill_with(Rect::new(start, cy - half, end + 0.05, cy + half), |p| {
                            base + ((p.x - start) * spec.ramp_slope).clamp(0.0, top - base)
                        });
                        ramps.push((Rect::new(start, cy - half, end, cy + half), "ramp"));
                    }
                    Terrain::Flat => {}
                }
            }
            doorways.push(Rect::new(ra.x1 - door, cy - half, ra.x1 + door, cy + half));
            doorways.push(Rect::new(rb.x0 - door, cy - half, rb.x0 + door, cy + half));
            corridors.push(rect);
        } else {
            let cx = ra.center().x;
            let rect = Rect::new(cx - half, ra.y1 - 0.05, cx + half, rb.y0 + 0.05);
            b.fill(rect, floor_of(col));
            doorways.push(Rect::new(cx - half, ra.y1 - door, cx + half, ra.y1 + door));
            doorways.push(Rect::new(cx - half, rb.y0 - door, cx + half, rb.y0 + door));
            corridors.push(rect);
        }
    }

    // Clutter sits in a room corner, clear of walls and of the room centre.
    let clearance = 0.9;
    for (i, room) in rooms.iter().enumerate() {
        for _ in 0..spec.clutter_per_room {
            let s = rng.random_range(0.4..=0.8);
            let left = rng.random_bool(0.5);
            let low = rng.random_bool(0.5);
            let x0 = if left { room.x0 + clearance } else { room.x1 - clearance - s };
            let y0 = if low { room.y0 + clearance } else { room.y1 - clearance - s };
            b.fill(Rect::new(x0, y0, x0 + s, y0 + s), floor_of(i % spec.cols) + 0.5);
        }
    }

    for d in doorways {
        b.tag(d, "doorway");
    }
    for (r, tag) in ramps {
        b.tag(r, tag);
    }
    for c in corridors {
        b.tag(c, "corridor");
    }
    for (i, room) in rooms.iter().enumerate() {
        b.tag(*room, room_name(i));
    }

    let mut world = b.build()?.with_slope_threshold(spec.slope_threshold);
    let anchors: Vec<Point2> = rooms.iter().map(|r| r.center()).collect();
    let field = DistanceField::new(&world, anchors[0])
        .ok_or_else(|| Error::InfeasibleSpec("room centre is not walkable".into()))?;
    for (i, p) in anchors.iter().enumerate() {
        if !field.distance(&world, *p).is_finite() {
            return Err(Error::InfeasibleSpec(format!("room {i} is not connected")));
        }
    }
    // Flat wall tops pass the slope test but cannot be reached.
    world.restrict_walkable(|ix, iy| field.cell_distance(ix, iy).is_finite());
    Ok(world)
}

/// Ground-truth navigation graph over a world's free space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtGraph {
    pub nodes: Vec<Point2>,
    pub edges: Vec<(usize, usize)>,
    /// Ascending neighbour ids per node.
    pub neighbors: Vec<Vec<usize>>,
}

pub const GT_EDGE_MAX: f64 = 3.0;

/// Poisson-disc sampling over walkable cells (visited in random order,
/// accepted when at least `spacing` from every accepted node), stopping at
/// `max_nodes`. Edges join nodes at most 3 m apart whose straight segment is
/// traversable.
pub fn sample_gt_graph(world: &World, seed: u64, spacing: f64, max_nodes: usize) -> GtGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<(usize, usize)> = world.walkable_cells().collect();
    cells.shuffle(&mut rng);
    let mut nodes: Vec<Point2> = Vec::new();
    for (x, y) in cells {
        if nodes.len() >= max_nodes {
            break;
        }
        let p = world.cell_center(x, y);
        if nodes.iter().all(|q| q.distance(&p) >= spacing) {
            nodes.push(p);
        }
    }
    let mut edges = Vec::new();
    let mut neighbors = vec![Vec::new(); nodes.len()];
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let (a, b) = (nodes[i], nodes[j]);
            if a.distance(&b) <= GT_EDGE_MAX && world.segment_clear(a, b) && world.segment_clear(b, a) {
                edges.push((i, j));
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    GtGraph { nodes, edges, neighbors }
}
