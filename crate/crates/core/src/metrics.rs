//! Navigation and waypoint-prediction metrics, and their aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obstacle::ObstacleMap;
use crate::predictor::{Heatmap, WaypointSet};
use crate::radial::{LocalPoint, Point2};

pub const DEFAULT_SUCCESS_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavMetrics {
    /// Geodesic distance from the stop position to the goal, metres.
    pub ne: f64,
    pub sr: bool,
    pub osr: bool,
    pub spl: f64,
    pub ndtw: f64,
    pub collision_rate: f64,
    pub path_length: f64,
}

pub fn path_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Dynamic time warping cost with Euclidean point distance, no window.
pub fn dtw(a: &[Point2], b: &[Point2]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for p in a {
        cur[0] = f64::INFINITY;
        for (j, q) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = p.distance(q) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// `exp(-DTW / (|reference| · radius))`.
pub fn ndtw(trajectory: &[Point2], reference: &[Point2], radius: f64) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    (-dtw(trajectory, reference) / (reference.len() as f64 * radius)).exp()
}

/// `success · L / max(P, L)`.
pub fn spl(success: bool, shortest: f64, travelled: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let denom = travelled.max(shortest);
    if denom <= 0.0 {
        1.0
    } else {
        shortest / denom
    }
}

/// Episode metrics. `trajectory` starts at the start pose and ends at the
/// stop pose; `goal_distance` is the geodesic distance to the goal.
pub fn nav_metrics(
    trajectory: &[Point2],
    gt_path: &[Point2],
    shortest: f64,
    goal_distance: impl Fn(Point2) -> f64,
    collisions: usize,
    forward_count: usize,
    success_radius: f64,
) -> Result<NavMetrics> {
    let stop = *trajectory
        .last()
        .ok_or_else(|| Error::InvalidConfig("empty trajectory".into()))?;
    let ne = goal_distance(stop);
    let sr = ne <= success_radius;
    let osr = trajectory.iter().any(|p| goal_distance(*p) <= success_radius);
    let travelled = path_length(trajectory);
    Ok(NavMetrics {
        ne,
        sr,
        osr,
        spl: spl(sr, shortest, travelled),
        ndtw: ndtw(trajectory, gt_path, success_radius),
        collision_rate: if forward_count == 0 {
            0.0
        } else {
            collisions as f64 / forward_count as f64
        },
        path_length: travelled,
    })
}

fn directed(a: &[LocalPoint], b: &[LocalPoint]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for p in a {
        let d = b.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min);
        sum += d;
        max = max.max(d);
    }
    (sum / a.len() as f64, max)
}

/// Symmetric Chamfer distance: the mean of both directed mean
/// nearest-neighbour distances. `None` if either set is empty.
pub fn chamfer(a: &[LocalPoint], b: &[LocalPoint]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some(0.5 * (directed(a, b).0 + directed(b, a).0))
}

/// Hausdorff distance: the larger directed maximum nearest-neighbour
/// distance. `None` if either set is empty.
pub fn hausdorff(a: &[LocalPoint], b: &[LocalPoint]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some(directed(a, b).1.max(directed(b, a).1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointMetrics {
    pub predicted: usize,
    pub ground_truth: usize,
    /// `| |predicted| - |ground truth| |`.
    pub delta: f64,
    /// Percent of predictions on free, linearly reachable cells of the true
    /// map. `None` without predictions.
    pub pct_open: Option<f64>,
    /// Mean ground-truth heatmap value at the predicted cells.
    pub avg_score: Option<f64>,
    pub d_c: Option<f64>,
    pub d_h: Option<f64>,
}

pub fn waypoint_metrics(
    predicted: &WaypointSet,
    gt_neighbors: &[LocalPoint],
    gt_heatmap: &Heatmap,
    truth: &ObstacleMap,
) -> WaypointMetrics {
    let n = predicted.len();
    let pts: Vec<LocalPoint> = predicted.iter().map(|w| w.local).collect();
    let (pct_open, avg_score) = if n == 0 {
        (None, None)
    } else {
        let open = predicted
            .iter()
            .filter(|w| !truth.is_occupied(w.cell) && truth.is_linearly_reachable(w.cell))
            .count();
        let score: f64 = predicted.iter().map(|w| gt_heatmap.get(w.cell)).sum();
        (Some(100.0 * open as f64 / n as f64), Some(score / n as f64))
    };
    WaypointMetrics {
        predicted: n,
        ground_truth: gt_neighbors.len(),
        delta: (n as f64 - gt_neighbors.len() as f64).abs(),
        pct_open,
        avg_score,
        d_c: chamfer(&pts, gt_neighbors),
        d_h: hausdorff(&pts, gt_neighbors),
    }
}

/// One finished episode, as collected for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavRecord {
    pub episode_id: String,
    pub seed: u64,
    pub metrics: NavMetrics,
}

/// Means over episodes; rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavSummary {
    pub episodes: usize,
    pub ne: f64,
    pub osr: f64,
    pub sr: f64,
    pub spl: f64,
    pub ndtw: f64,
    pub collision_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavReport {
    pub overall: NavSummary,
    pub per_seed: BTreeMap<u64, NavSummary>,
}

fn summarize(ms: &[&NavMetrics]) -> NavSummary {
    let n = ms.len() as f64;
    let mean = |f: &dyn Fn(&NavMetrics) -> f64| ms.iter().map(|m| f(m)).sum::<f64>() / n;
    NavSummary {
        episodes: ms.len(),
        ne: mean(&|m| m.ne),
        osr: 100.0 * mean(&|m| f64::from(u8::from(m.osr))),
        sr: 100.0 * mean(&|m| f64::from(u8::from(m.sr))),
        spl: 100.0 * mean(&|m| m.spl),
        ndtw: 100.0 * mean(&|m| m.ndtw),
        collision_rate: 100.0 * mean(&|m| m.collision_rate),
    }
}

pub fn aggregate(records: &[NavRecord]) -> Result<NavReport> {
    if records.is_empty() {
        return Err(Error::EmptyReports);
    }
    let all: Vec<&NavMetrics> = records.iter().map(|r| &r.metrics).collect();
    let mut groups: BTreeMap<u64, Vec<&NavMetrics>> = BTreeMap::new();
    for r in records {
        groups.entry(r.seed).or_default().push(&r.metrics);
    }
    Ok(NavReport {
        overall: summarize(&all),
        per_seed: groups.into_iter().map(|(k, v)| (k, summarize(&v))).collect(),
    })
}

pub const NAV_CSV_HEADER: &str = "group,episodes,ne,osr,sr,spl,ndtw,collision_rate";

fn nav_row(group: &str, s: &NavSummary) -> [String; 8] {
    [
        group.to_string(),
        s.episodes.to_string(),
        format!("{:.3}", s.ne),
        format!("{:.2}", s.osr),
        format!("{:.2}", s.sr),
        format!("{:.2}", s.spl),
        format!("{:.2}", s.ndtw),
        format!("{:.2}", s.collision_rate),
    ]
}

impl NavReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{NAV_CSV_HEADER}\n");
        s.push_str(&nav_row("all", &self.overall).join(","));
        s.push('\n');
        for (seed, sum) in &self.per_seed {
            s.push_str(&nav_row(&format!("seed-{seed}"), sum).join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut rows = vec![NAV_CSV_HEADER.split(',').map(str::to_string).collect::<Vec<_>>()];
        rows.push(nav_row("all", &self.overall).to_vec());
        for (seed, sum) in &self.per_seed {
            rows.push(nav_row(&format!("seed-{seed}"), sum).to_vec());
        }
        render_table(&rows)
    }
}

/// Left-aligned first column, right-aligned numbers.
pub fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSummary {
    pub examples: usize,
    pub delta: f64,
    pub pct_open: Option<f64>,
    pub avg_score: Option<f64>,
    pub d_c: Option<f64>,
    pub d_h: Option<f64>,
    /// Examples contributing to the distance means (non-empty predictions).
    pub distance_count: usize,
}

fn mean_some(xs: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let v: Vec<f64> = xs.flatten().collect();
    if v.is_empty() {
        (None, 0)
    } else {
        (Some(v.iter().sum::<f64>() / v.len() as f64), v.len())
    }
}

pub fn aggregate_waypoints(ms: &[WaypointMetrics]) -> Result<WaypointSummary> {
    if ms.is_empty() {
        return Err(Error::EmptyReports);
    }
    let (d_c, distance_count) = mean_some(ms.iter().map(|m| m.d_c));
    Ok(WaypointSummary {
        examples: ms.len(),
        delta: ms.iter().map(|m| m.delta).sum::<f64>() / ms.len() as f64,
        pct_open: mean_some(ms.iter().map(|m| m.pct_open)).0,
        avg_score: mean_some(ms.iter().map(|m| m.avg_score)).0,
        d_c,
        d_h: mean_some(ms.iter().map(|m| m.d_h)).0,
        distance_count,
    })
}
