//! Agent-centred polar discretisation shared by obstacle maps, heatmaps and
//! waypoint targets.
//!
//! Bearings are measured in degrees counterclockwise from the agent heading
//! and always normalised to `[0, 360)`. The local frame has `x` pointing
//! forward and `y` pointing left, so a bearing of 90° is directly to the left.
//!
//! Radial bin `j` covers the half-open interval `(j·step, (j+1)·step]`; a range
//! of exactly zero belongs to bin 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// Polar raster geometry. Defaults to 120 bearings of 3° by 12 rings of 0.25 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadialGrid {
    pub num_angles: usize,
    pub num_radii: usize,
    pub angle_step: f64,
    pub radial_step: f64,
    pub max_range: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self {
            num_angles: 120,
            num_radii: 12,
            angle_step: 3.0,
            radial_step: 0.25,
            max_range: 3.0,
        }
    }
}

/// Index into a [`RadialGrid`]: `a` is the angle bin, `j` the radial bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub a: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(a: usize, j: usize) -> Self {
        Self { a, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    /// Degrees counterclockwise from the agent heading, in `[0, 360)`.
    pub bearing: f64,
    /// Metres.
    pub range: f64,
}

/// Point in the agent frame: `x` forward, `y` left, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

/// Point in the world's horizontal plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Planar agent pose. `heading` is in degrees, counterclockwise from world +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl LocalPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_polar(self) -> PolarPoint {
        PolarPoint {
            bearing: normalize_bearing(self.y.atan2(self.x).to_degrees()),
            range: self.x.hypot(self.y),
        }
    }

    pub fn distance(&self, other: &LocalPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl PolarPoint {
    pub fn new(bearing: f64, range: f64) -> Self {
        Self {
            bearing: normalize_bearing(bearing),
            range,
        }
    }

    pub fn to_local(self) -> LocalPoint {
        let rad = self.bearing.to_radians();
        LocalPoint {
            x: self.range * rad.cos(),
            y: self.range * rad.sin(),
        }
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_bearing(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Wraps any angle in degrees into `[0, 360)`.
pub fn normalize_bearing(deg: f64) -> f64 {
    let b = deg.rem_euclid(360.0);
    // rem_euclid can round tiny negatives up to exactly 360.
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Wraps an angle in degrees into `(-180, 180]`; positive means to the left.
pub fn signed_bearing(deg: f64) -> f64 {
    let b = normalize_bearing(deg);
    if b > 180.0 {
        b - 360.0
    } else {
        b
    }
}

/// Rigid transform from the agent frame into the world frame.
pub fn local_to_world(pose: &Pose, p: LocalPoint) -> Point2 {
    let (s, c) = pose.heading.to_radians().sin_cos();
    Point2 {
        x: pose.x + c * p.x - s * p.y,
        y: pose.y + s * p.x + c * p.y,
    }
}

/// Inverse of [`local_to_world`].
pub fn world_to_local(pose: &Pose, p: Point2) -> LocalPoint {
    let (s, c) = pose.heading.to_radians().sin_cos();
    let dx = p.x - pose.x;
    let dy = p.y - pose.y;
    LocalPoint {
        x: c * dx + s * dy,
        y: -s * dx + c * dy,
    }
}

impl RadialGrid {
    pub fn validate(&self) -> Result<()> {
        if self.num_angles == 0 || self.num_radii == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        if !(self.angle_step > 0.0 && self.radial_step > 0.0 && self.max_range > 0.0) {
            return Err(Error::InvalidConfig("grid steps and range must be positive".into()));
        }
        if (self.num_angles as f64 * self.angle_step - 360.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "{} angle bins of {}° do not cover 360°",
                self.num_angles, self.angle_step
            )));
        }
        if (self.num_radii as f64 * self.radial_step - self.max_range).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "{} radial bins of {} m do not reach max range {} m",
                self.num_radii, self.radial_step, self.max_range
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.num_angles * self.num_radii
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.a < self.num_angles && c.j < self.num_radii
    }

    /// Row-major (angle-major) flat index.
    pub fn index(&self, c: Cell) -> usize {
        c.a * self.num_radii + c.j
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.num_radii, index % self.num_radii)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_angles).flat_map(move |a| (0..self.num_radii).map(move |j| Cell::new(a, j)))
    }

    fn check(&self, c: Cell) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::CellOutOfBounds {
                cell: c,
                num_angles: self.num_angles,
                num_radii: self.num_radii,
            })
        }
    }

    pub fn cell_center(&self, c: Cell) -> Result<PolarPoint> {
        self.check(c)?;
        Ok(PolarPoint {
            bearing: (c.a as f64 + 0.5) * self.angle_step,
            range: (c.j as f64 + 0.5) * self.radial_step,
        })
    }

    pub fn cell_center_local(&self, c: Cell) -> Result<LocalPoint> {
        Ok(self.cell_center(c)?.to_local())
    }

    pub fn angle_bin(&self, bearing: f64) -> usize {
        let b = normalize_bearing(bearing);
        ((b / self.angle_step).floor() as usize) % self.num_angles
    }

    pub fn radial_bin(&self, range: f64) -> Result<usize> {
        if range > self.max_range + EPS {
            return Err(Error::OutOfRange {
                range,
                max_range: self.max_range,
            });
        }
        let j = (range / self.radial_step - EPS).ceil() - 1.0;
        Ok((j.max(0.0) as usize).min(self.num_radii - 1))
    }

    pub fn point_to_cell(&self, p: PolarPoint) -> Result<Cell> {
        Ok(Cell::new(self.angle_bin(p.bearing), self.radial_bin(p.range)?))
    }

    pub fn local_to_cell(&self, p: LocalPoint) -> Result<Cell> {
        self.point_to_cell(p.to_polar())
    }

    /// Angular distance between two angle bins, in bins, wrapping around.
    pub fn angle_bin_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b) % self.num_angles;
        d.min(self.num_angles - d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn default_grid_is_valid() {
        let g = RadialGrid::default();
        g.validate().unwrap();
        assert_eq!(g.len(), 1440);
    }

    #[test]
    fn inconsistent_grid_rejected() {
        let g = RadialGrid {
            num_angles: 100,
            ..RadialGrid::default()
        };
        assert!(g.validate().is_err());
        let g = RadialGrid {
            max_range: 2.0,
            ..RadialGrid::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn cell_centers() {
        let g = RadialGrid::default();
        let p = g.cell_center(Cell::new(0, 0)).unwrap();
        assert!(close(p.bearing, 1.5) && close(p.range, 0.125));
        let p = g.cell_center(Cell::new(60, 11)).unwrap();
        assert!(close(p.bearing, 181.5) && close(p.range, 2.875));
        let p = g.cell_center(Cell::new(119, 0)).unwrap();
        assert!(close(p.bearing, 358.5) && close(p.range, 0.125));
        assert!(matches!(
            g.cell_center(Cell::new(120, 0)),
            Err(Error::CellOutOfBounds { .. })
        ));
        assert!(g.cell_center(Cell::new(0, 12)).is_err());
    }

    #[test]
    fn point_to_cell_examples() {
        let g = RadialGrid::default();
        assert_eq!(g.point_to_cell(PolarPoint::new(0.0, 1.0)).unwrap(), Cell::new(0, 3));
        assert_eq!(g.point_to_cell(PolarPoint::new(359.9, 0.1)).unwrap(), Cell::new(119, 0));
        assert_eq!(g.point_to_cell(PolarPoint::new(10.0, 0.0)).unwrap(), Cell::new(3, 0));
        assert_eq!(g.point_to_cell(PolarPoint::new(0.0, 3.0)).unwrap(), Cell::new(0, 11));
        assert!(matches!(
            g.point_to_cell(PolarPoint::new(0.0, 3.1)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn half_open_boundaries() {
        let g = RadialGrid::default();
        for j in 0..12 {
            let upper = (j + 1) as f64 * 0.25;
            assert_eq!(g.radial_bin(upper).unwrap(), j, "upper edge of bin {j}");
            if j < 11 {
                assert_eq!(g.radial_bin(upper + 1e-6).unwrap(), j + 1);
            }
        }
    }

    #[test]
    fn round_trip_all_cells() {
        let g = RadialGrid::default();
        for c in g.cells() {
            let p = g.cell_center(c).unwrap();
            assert_eq!(g.point_to_cell(p).unwrap(), c);
            assert_eq!(g.local_to_cell(p.to_local()).unwrap(), c);
            assert_eq!(g.cell_at(g.index(c)), c);
        }
    }

    #[test]
    fn transforms() {
        let w = local_to_world(&Pose::new(0.0, 0.0, 0.0), LocalPoint::new(1.0, 0.0));
        assert!(close(w.x, 1.0) && close(w.y, 0.0));
        let w = local_to_world(&Pose::new(0.0, 0.0, 90.0), LocalPoint::new(1.0, 0.0));
        assert!(close(w.x, 0.0) && close(w.y, 1.0));
        let w = local_to_world(&Pose::new(2.0, 3.0, 180.0), LocalPoint::new(1.0, 0.0));
        assert!(close(w.x, 1.0) && close(w.y, 3.0));
    }

    #[test]
    fn bearings_normalised() {
        assert_eq!(normalize_bearing(-1e-18), 0.0);
        assert!(close(normalize_bearing(-90.0), 270.0));
        assert!(close(normalize_bearing(720.5), 0.5));
        assert!(close(signed_bearing(270.0), -90.0));
        assert!(close(signed_bearing(180.0), 180.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn world_local_inverse(
                x in -50.0f64..50.0, y in -50.0f64..50.0, h in -720.0f64..720.0,
                px in -10.0f64..10.0, py in -10.0f64..10.0,
            ) {
                let pose = Pose::new(x, y, h);
                let p = LocalPoint::new(px, py);
                let back = world_to_local(&pose, local_to_world(&pose, p));
                prop_assert!((back.x - px).abs() < 1e-9 && (back.y - py).abs() < 1e-9);
            }

            #[test]
            fn bearing_in_range(deg in -1e6f64..1e6) {
                let b = normalize_bearing(deg);
                prop_assert!((0.0..360.0).contains(&b));
                let p = LocalPoint::new(deg.cos(), deg.sin()).to_polar();
                prop_assert!((0.0..360.0).contains(&p.bearing));
            }
        }
    }
}
