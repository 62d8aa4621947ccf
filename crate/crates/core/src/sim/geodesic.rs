use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::World;
use crate::radial::Point2;

/// How far a query point may be from the walkable set and still be snapped
/// onto it (the walkable set keeps a traversal span away from walls).
const SNAP_RADIUS: f64 = 0.6;

/// Shortest walkable-path distances from one source, computed with
/// 8-connected Dijkstra over the heightfield cells.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    dist: Vec<f64>,
    source: (usize, usize),
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

impl DistanceField {
    /// `None` when `source` is not near any walkable cell.
    pub fn new(world: &World, source: Point2) -> Option<Self> {
        let (sx, sy) = world.snap_to_walkable(source, SNAP_RADIUS)?;
        let (w, h) = world.dims();
        let res = world.resolution();
        let mut dist = vec![f64::INFINITY; w * h];
        let mut heap = BinaryHeap::new();
        let start = world.index(sx, sy);
        dist[start] = 0.0;
        heap.push(Item(0.0, start));
        while let Some(Item(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !world.is_walkable_cell(nx, ny) {
                    continue;
                }
                if dx != 0
                    && dy != 0
                    && !(world.is_walkable_cell(x as usize, ny) && world.is_walkable_cell(nx, y as usize))
                {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { res * std::f64::consts::SQRT_2 } else { res };
                let j = world.index(nx, ny);
                if d + step < dist[j] {
                    dist[j] = d + step;
                    heap.push(Item(d + step, j));
                }
            }
        }
        Some(Self {
            width: w,
            dist,
            source: (sx, sy),
        })
    }

    /// Geodesic distance from the source to `p`, plus the straight hop from
    /// `p` to the walkable cell it snaps to. Infinite if unreachable.
    pub fn distance(&self, world: &World, p: Point2) -> f64 {
        match world.snap_to_walkable(p, SNAP_RADIUS) {
            Some((x, y)) => self.dist[y * self.width + x] + world.cell_center(x, y).distance(&p),
            None => f64::INFINITY,
        }
    }

    pub fn cell_distance(&self, ix: usize, iy: usize) -> f64 {
        self.dist[iy * self.width + ix]
    }

    pub fn source_cell(&self) -> (usize, usize) {
        self.source
    }

    /// Steepest-descent walk from `p` back to the source, as cell centres
    /// (starting at `p`'s cell, ending at the source).
    pub fn path_to_source(&self, world: &World, p: Point2) -> Option<Vec<Point2>> {
        let (mut x, mut y) = world.snap_to_walkable(p, SNAP_RADIUS)?;
        if !self.cell_distance(x, y).is_finite() {
            return None;
        }
        let (w, h) = world.dims();
        let mut out = vec![world.cell_center(x, y)];
        while (x, y) != self.source {
            let mut best = (x, y);
            let mut best_d = self.cell_distance(x, y);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let d = self.cell_distance(nx as usize, ny as usize);
                if d < best_d {
                    best = (nx as usize, ny as usize);
                    best_d = d;
                }
            }
            if best == (x, y) {
                return None;
            }
            (x, y) = best;
            out.push(world.cell_center(x, y));
        }
        Some(out)
    }
}

/// Resamples a polyline at fixed arc-length spacing, keeping both ends.
pub fn resample_polyline(points: &[Point2], spacing: f64) -> Vec<Point2> {
    let Some(&first) = points.first() else {
        return Vec::new();
    };
    let mut out = vec![first];
    let mut carried = 0.0;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let seg = a.distance(&b);
        if seg == 0.0 {
            continue;
        }
        let mut s = spacing - carried;
        while s <= seg + 1e-12 {
            let t = s / seg;
            out.push(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
            s += spacing;
        }
        carried = seg - (s - spacing);
    }
    let last = *points.last().unwrap();
    if out.last().is_none_or(|p| p.distance(&last) > 1e-9) {
        out.push(last);
    }
    out
}
