use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obstacle::DEFAULT_SLOPE_THRESHOLD;
use crate::radial::Point2;

pub const DEFAULT_RESOLUTION: f64 = 0.05;
/// Horizontal span over which elevation changes are compared, matching the
/// obstacle map's radial step.
pub const TRAVERSAL_SPAN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x < self.x1 && p.y >= self.y0 && p.y < self.y1
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub rect: Rect,
    pub tag: String,
}

/// Regular heightfield. Cell `(ix, iy)` is centred at
/// `origin + (ix, iy) * resolution`; lookups use the nearest cell.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    origin: Point2,
    resolution: f64,
    width: usize,
    height: usize,
    elevation: Vec<f64>,
    outside: f64,
    slope_threshold: f64,
    regions: Vec<Region>,
    walkable: Vec<bool>,
}

impl World {
    pub fn from_heightfield(
        origin: Point2,
        resolution: f64,
        width: usize,
        height: usize,
        elevation: Vec<f64>,
        regions: Vec<Region>,
    ) -> Result<Self> {
        if !(resolution > 0.0) || width == 0 || height == 0 {
            return Err(Error::InvalidConfig("heightfield needs positive resolution and size".into()));
        }
        if elevation.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "heightfield has {} cells, expected {}",
                elevation.len(),
                width * height
            )));
        }
        if elevation.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidConfig("heightfield holds non-finite elevations".into()));
        }
        let outside = elevation.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut world = Self {
            origin,
            resolution,
            width,
            height,
            elevation,
            outside,
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            regions,
            walkable: Vec::new(),
        };
        world.walkable = world.compute_walkable();
        Ok(world)
    }

    /// Changes the slope used by motion and walkability checks.
    pub fn with_slope_threshold(mut self, slope: f64) -> Self {
        self.slope_threshold = slope;
        self.walkable = self.compute_walkable();
        self
    }

    /// Clears the walkable flag of every cell rejected by `keep`.
    pub fn restrict_walkable(&mut self, keep: impl Fn(usize, usize) -> bool) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let i = self.index(ix, iy);
                if self.walkable[i] && !keep(ix, iy) {
                    self.walkable[i] = false;
                }
            }
        }
    }

    pub fn slope_threshold(&self) -> f64 {
        self.slope_threshold
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevation
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).round();
        let fy = ((p.y - self.origin.y) / self.resolution).round();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + ix as f64 * self.resolution,
            self.origin.y + iy as f64 * self.resolution,
        )
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn in_bounds(&self, p: Point2) -> bool {
        self.cell_of(p).is_some()
    }

    /// Elevation at `p`; outside the extent the world is as high as its
    /// highest cell.
    pub fn elevation_at(&self, p: Point2) -> f64 {
        match self.cell_of(p) {
            Some((ix, iy)) => self.elevation[self.index(ix, iy)],
            None => self.outside,
        }
    }

    pub fn tag_at(&self, p: Point2) -> Option<&str> {
        self.regions.iter().find(|r| r.rect.contains(p)).map(|r| r.tag.as_str())
    }

    pub fn is_walkable_cell(&self, ix: usize, iy: usize) -> bool {
        self.walkable[self.index(ix, iy)]
    }

    pub fn is_walkable(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|(ix, iy)| self.is_walkable_cell(ix, iy))
    }

    pub fn walkable_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |iy| (0..self.width).map(move |ix| (ix, iy)))
            .filter(move |&(ix, iy)| self.is_walkable_cell(ix, iy))
    }

    /// A cell is walkable when no cell within the traversal span differs
    /// from it by more than `slope · span` in elevation.
    fn compute_walkable(&self) -> Vec<bool> {
        let r = (TRAVERSAL_SPAN / self.resolution).round() as isize;
        let limit = self.slope_threshold * TRAVERSAL_SPAN + 1e-9;
        let mut out = vec![false; self.elevation.len()];
        for iy in 0..self.height as isize {
            for ix in 0..self.width as isize {
                let e = self.elevation[self.index(ix as usize, iy as usize)];
                let mut ok = true;
                'scan: for dy in -r..=r {
                    for dx in -r..=r {
                        if dx * dx + dy * dy > r * r {
                            continue;
                        }
                        let (nx, ny) = (ix + dx, iy + dy);
                        let other = if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                            self.outside
                        } else {
                            self.elevation[self.index(nx as usize, ny as usize)]
                        };
                        if (other - e).abs() > limit {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
                out[self.index(ix as usize, iy as usize)] = ok;
            }
        }
        out
    }

    /// First sample along the straight segment `from → to` where the
    /// elevation change over the preceding traversal span exceeds the slope
    /// threshold. Samples are spaced at the heightfield resolution; leaving
    /// the world counts as blocked.
    pub fn first_blocked(&self, from: Point2, to: Point2) -> Option<Point2> {
        let len = from.distance(&to);
        if len == 0.0 {
            return None;
        }
        let n = (len / self.resolution).ceil() as usize;
        let at = |s: f64| {
            let t = (s / len).clamp(0.0, 1.0);
            Point2::new(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y))
        };
        for i in 1..=n {
            let s = (i as f64 * self.resolution).min(len);
            let p = at(s);
            if !self.in_bounds(p) {
                return Some(p);
            }
            let back = self.elevation_at(at((s - TRAVERSAL_SPAN).max(0.0)));
            if (self.elevation_at(p) - back).abs() / TRAVERSAL_SPAN > self.slope_threshold {
                return Some(p);
            }
        }
        None
    }

    pub fn segment_clear(&self, from: Point2, to: Point2) -> bool {
        self.first_blocked(from, to).is_none()
    }

    /// Unit vector pointing up the local elevation gradient, from central
    /// differences over two cells either side.
    pub fn uphill_normal(&self, p: Point2) -> Option<Point2> {
        let h = 2.0 * self.resolution;
        let gx = self.elevation_at(Point2::new(p.x + h, p.y)) - self.elevation_at(Point2::new(p.x - h, p.y));
        let gy = self.elevation_at(Point2::new(p.x, p.y + h)) - self.elevation_at(Point2::new(p.x, p.y - h));
        let n = gx.hypot(gy);
        (n > 1e-9).then(|| Point2::new(gx / n, gy / n))
    }

    /// Nearest walkable cell centre within `max_dist` of `p`.
    pub fn snap_to_walkable(&self, p: Point2, max_dist: f64) -> Option<(usize, usize)> {
        let rings = (max_dist / self.resolution).ceil() as isize;
        let cx = ((p.x - self.origin.x) / self.resolution).round() as isize;
        let cy = ((p.y - self.origin.y) / self.resolution).round() as isize;
        let mut best: Option<((usize, usize), f64)> = None;
        for dy in -rings..=rings {
            for dx in -rings..=rings {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                if !self.is_walkable_cell(x, y) {
                    continue;
                }
                let d = self.cell_center(x, y).distance(&p);
                if d <= max_dist && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some(((x, y), d));
                }
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Incremental heightfield construction from axis-aligned rectangles.
#[derive(Debug, Clone)]
pub struct WorldBuilder {
    origin: Point2,
    resolution: f64,
    width: usize,
    height: usize,
    elevation: Vec<f64>,
    regions: Vec<Region>,
}

impl WorldBuilder {
    /// Extent `[0, size_x) × [0, size_y)` metres, filled with `base`.
    pub fn new(size_x: f64, size_y: f64, resolution: f64, base: f64) -> Self {
        let width = (size_x / resolution).round() as usize;
        let height = (size_y / resolution).round() as usize;
        Self {
            origin: Point2::new(0.5 * resolution, 0.5 * resolution),
            resolution,
            width,
            height,
            elevation: vec![base; width * height],
            regions: Vec::new(),
        }
    }

    fn cells_in(&self, rect: &Rect) -> impl Iterator<Item = (usize, usize, Point2)> + '_ {
        let rect = *rect;
        (0..self.height).flat_map(move |iy| {
            (0..self.width).filter_map(move |ix| {
                let p = Point2::new(
                    self.origin.x + ix as f64 * self.resolution,
                    self.origin.y + iy as f64 * self.resolution,
                );
                rect.contains(p).then_some((ix, iy, p))
            })
        })
    }

    /// Sets every cell centre inside `rect` to `z`.
    pub fn fill(&mut self, rect: Rect, z: f64) -> &mut Self {
        self.fill_with(rect, |_| z)
    }

    pub fn fill_with(&mut self, rect: Rect, f: impl Fn(Point2) -> f64) -> &mut Self {
        let cells: Vec<(usize, usize, Point2)> = self.cells_in(&rect).collect();
        for (ix, iy, p) in cells {
            self.elevation[iy * self.width + ix] = f(p);
        }
        self
    }

    pub fn tag(&mut self, rect: Rect, tag: impl Into<String>) -> &mut Self {
        self.regions.push(Region { rect, tag: tag.into() });
        self
    }

    pub fn build(&self) -> Result<World> {
        World::from_heightfield(
            self.origin,
            self.resolution,
            self.width,
            self.height,
            self.elevation.clone(),
            self.regions.clone(),
        )
    }
}
