//! Command implementations behind the `vlnce` binary. Each command reads a
//! [`RunConfig`], writes its artifacts under `output_dir` and records a
//! manifest of what it wrote.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PlannerKind, PredictorKind, RunConfig};
use crate::dataset::{generate_dataset, read_jsonl, write_jsonl, Dataset, NodeRecord, DATA_VERSION};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, aggregate_waypoints, render_table, waypoint_metrics, NavReport, NavSummary, WaypointSummary,
};
use crate::obstacle::obstacle_map_from_cloud;
use crate::pipeline::{run_episodes, EpisodeResult, WaypointSource};
use crate::planner::LlmClient;
use crate::predictor::{geometric_predict, make_target_heatmap, model_waypoints, train, PredictorModel, TrainReport};
use crate::radial::Point2;
use crate::sim::{panoramic_scan, region_sequence, World};

pub const STEPS_FILE: &str = "steps.jsonl";
pub const RESULTS_FILE: &str = "episodes.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub data_version: u32,
    /// Output path (relative to `output_dir`) to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `manifest-<command>.json` into the output directory.
pub fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[PathBuf]) -> Result<Manifest> {
    let mut hashes = BTreeMap::new();
    for p in outputs {
        let rel = p.strip_prefix(&cfg.output_dir).unwrap_or(p);
        hashes.insert(rel.to_string_lossy().replace('\\', "/"), sha256_file(p)?);
    }
    let m = Manifest {
        tool: "vlnce".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        data_version: DATA_VERSION,
        outputs: hashes,
    };
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(
        cfg.output_dir.join(format!("manifest-{command}.json")),
        serde_json::to_string_pretty(&m)? + "\n",
    )?;
    Ok(m)
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join("config.toml");
    std::fs::write(&p, cfg.to_toml())?;
    Ok(p)
}

fn data_files(dir: &Path) -> Vec<PathBuf> {
    use crate::dataset::*;
    [WORLDS_FILE, GRAPHS_FILE, TRAIN_FILE, HELDOUT_FILE, EPISODES_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}

pub fn gen_data(cfg: &RunConfig) -> Result<Dataset> {
    let data = generate_dataset(cfg)?;
    let dir = cfg.data_dir();
    data.save(&dir)?;
    let mut outputs = data_files(&dir);
    outputs.push(write_config(cfg, &cfg.output_dir)?);
    write_manifest(cfg, "gen-data", &outputs)?;
    log::info!(
        "wrote {} worlds, {} training and {} held-out examples, {} episodes to {}",
        data.worlds.len(),
        data.train.len(),
        data.heldout.len(),
        data.episodes.len(),
        dir.display()
    );
    Ok(data)
}

pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let dir = cfg.data_dir();
    if !dir.join(crate::dataset::WORLDS_FILE).exists() {
        return Err(Error::MissingData(dir));
    }
    Dataset::load(&dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub checkpoint: PathBuf,
}

pub fn train_predictor(cfg: &RunConfig) -> Result<TrainOutcome> {
    let data = load_data(cfg)?;
    let examples = data
        .train
        .iter()
        .map(|r| r.to_example(cfg.predictor.sigma))
        .collect::<Result<Vec<_>>>()?;
    let mut model = PredictorModel::new(cfg.grid, cfg.predictor.model)?;
    let report = train(&mut model, &examples, &cfg.train)?;
    let path = cfg.checkpoint_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    model.save(&path)?;
    let report_path = cfg.output_dir.join("train_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    write_manifest(cfg, "train", &[path.clone(), report_path])?;
    Ok(TrainOutcome {
        report,
        checkpoint: path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointEval {
    /// Predictor name and its summary over the held-out split.
    pub rows: Vec<(String, WaypointSummary)>,
}

const WAYPOINT_HEADER: [&str; 7] = ["predictor", "examples", "delta", "pct_open", "avg_score", "d_c", "d_h"];

impl WaypointEval {
    fn cells(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        let mut rows = vec![WAYPOINT_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for (name, s) in &self.rows {
            rows.push(vec![
                name.clone(),
                s.examples.to_string(),
                format!("{:.3}", s.delta),
                opt(s.pct_open, 2),
                opt(s.avg_score, 4),
                opt(s.d_c, 3),
                opt(s.d_h, 3),
            ]);
        }
        rows
    }

    pub fn to_table(&self) -> String {
        render_table(&self.cells())
    }

    pub fn to_csv(&self) -> String {
        self.cells().iter().map(|r| r.join(",") + "\n").collect()
    }

    pub fn get(&self, name: &str) -> Option<&WaypointSummary> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

fn summarize_predictions(
    cfg: &RunConfig,
    records: &[NodeRecord],
    predict: impl Fn(&NodeRecord) -> Result<crate::predictor::WaypointSet>,
) -> Result<WaypointSummary> {
    let ms = records
        .iter()
        .map(|r| {
            let ws = predict(r)?;
            let target = make_target_heatmap(&cfg.grid, &r.neighbors, cfg.predictor.sigma)?;
            Ok(waypoint_metrics(&ws, &r.neighbors, &target, r.truth_map()))
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_waypoints(&ms)
}

/// Scores the geometric predictor, the freshly initialised model and, when a
/// checkpoint exists, the trained model on the held-out split.
pub fn eval_waypoints(cfg: &RunConfig) -> Result<WaypointEval> {
    let data = load_data(cfg)?;
    if data.heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let geo = cfg.predictor.geometric_config();
    let mc = cfg.predictor.model_config();
    let mut rows = vec![(
        "geometric".to_string(),
        summarize_predictions(cfg, &data.heldout, |r| Ok(geometric_predict(&r.map, &geo)))?,
    )];
    let untrained = PredictorModel::new(cfg.grid, cfg.predictor.model)?;
    rows.push((
        "untrained".to_string(),
        summarize_predictions(cfg, &data.heldout, |r| model_waypoints(&untrained, &r.map, &mc))?,
    ));
    let ck = cfg.checkpoint_path();
    if ck.exists() {
        let trained = PredictorModel::load(&ck)?;
        rows.push((
            "trained".to_string(),
            summarize_predictions(cfg, &data.heldout, |r| model_waypoints(&trained, &r.map, &mc))?,
        ));
    } else {
        log::warn!("no checkpoint at {}; skipping the trained model", ck.display());
    }
    let eval = WaypointEval { rows };
    let json = cfg.output_dir.join("waypoint_eval.json");
    let csv = cfg.output_dir.join("waypoint_eval.csv");
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(&json, serde_json::to_string_pretty(&eval)? + "\n")?;
    std::fs::write(&csv, eval.to_csv())?;
    write_manifest(cfg, "eval-waypoints", &[json, csv])?;
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub results: Vec<EpisodeResult>,
    pub report: NavReport,
}

impl RunOutcome {
    pub fn mean_revisits(&self) -> f64 {
        self.results.iter().map(|r| r.revisits as f64).sum::<f64>() / self.results.len().max(1) as f64
    }
}

fn llm_client(cfg: &RunConfig) -> Result<Option<Arc<LlmClient>>> {
    if cfg.planner.kind != PlannerKind::Llm {
        return Ok(None);
    }
    let mut llm = cfg.planner.llm.clone();
    if llm.cache_path.is_none() {
        llm.cache_path = Some(cfg.output_dir.join("llm_cache.jsonl"));
    }
    Ok(Some(Arc::new(LlmClient::new(llm)?)))
}

/// Runs all episodes into `output_dir/runs/<label>`, replacing any earlier
/// run with that label.
pub fn run(cfg: &RunConfig, label: &str) -> Result<RunOutcome> {
    let data = load_data(cfg)?;
    run_with_data(cfg, &data, &cfg.output_dir.join("runs").join(label))
}

pub fn run_with_data(cfg: &RunConfig, data: &Dataset, dir: &Path) -> Result<RunOutcome> {
    if data.episodes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictor = WaypointSource::from_config(cfg)?;
    let llm = llm_client(cfg)?;
    std::fs::create_dir_all(dir)?;
    let steps = dir.join(STEPS_FILE);
    if steps.exists() {
        std::fs::remove_file(&steps)?;
    }
    let results = run_episodes(cfg, data, &predictor, llm, Some(&steps))?;
    let report = aggregate(&results.iter().map(EpisodeResult::record).collect::<Vec<_>>())?;
    let res_path = dir.join(RESULTS_FILE);
    write_jsonl(&res_path, &results)?;
    let json = dir.join("metrics.json");
    std::fs::write(&json, serde_json::to_string_pretty(&report)? + "\n")?;
    let csv = dir.join("metrics.csv");
    std::fs::write(&csv, report.to_csv())?;
    let config = write_config(cfg, dir)?;
    let label = dir.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned());
    write_manifest(cfg, &format!("run-{label}"), &[steps, res_path, json, csv, config])?;
    let flagged = results.iter().filter(|r| r.error.is_some()).count();
    if flagged > 0 {
        log::warn!("{flagged} episodes ended with a planner error");
    }
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        results,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub summary: NavSummary,
    pub revisits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn get(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    fn cells(&self) -> Vec<Vec<String>> {
        let mut out = vec![[
            "variant",
            "sr",
            "d_sr",
            "spl",
            "d_spl",
            "ndtw",
            "d_ndtw",
            "collision_rate",
            "d_collision",
            "revisits",
            "d_revisits",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
        let Some(base) = self.rows.first() else {
            return out;
        };
        for r in &self.rows {
            let (s, b) = (&r.summary, &base.summary);
            out.push(vec![
                r.variant.clone(),
                format!("{:.2}", s.sr),
                format!("{:+.2}", s.sr - b.sr),
                format!("{:.2}", s.spl),
                format!("{:+.2}", s.spl - b.spl),
                format!("{:.2}", s.ndtw),
                format!("{:+.2}", s.ndtw - b.ndtw),
                format!("{:.2}", s.collision_rate),
                format!("{:+.2}", s.collision_rate - b.collision_rate),
                format!("{:.3}", r.revisits),
                format!("{:+.3}", r.revisits - base.revisits),
            ]);
        }
        out
    }

    pub fn to_table(&self) -> String {
        render_table(&self.cells())
    }

    pub fn to_csv(&self) -> String {
        self.cells().iter().map(|r| r.join(",") + "\n").collect()
    }
}

/// Baseline plus one run per removed component. Deltas are relative to the
/// baseline row.
pub fn ablate(cfg: &RunConfig) -> Result<AblationReport> {
    let data = load_data(cfg)?;
    let mut variants: Vec<(&str, RunConfig)> = vec![("baseline", cfg.clone())];
    let mut v = cfg.clone();
    v.prompt.visit_info = false;
    variants.push(("no-visit-info", v));
    let mut v = cfg.clone();
    v.prompt.graph = false;
    variants.push(("no-graph", v));
    let mut v = cfg.clone();
    v.predictor.mask = false;
    variants.push(("no-mask", v));

    let mut rows = Vec::new();
    for (name, vcfg) in variants {
        let out = run_with_data(&vcfg, &data, &cfg.output_dir.join("ablation").join(name))?;
        rows.push(AblationRow {
            variant: name.to_string(),
            summary: out.report.overall.clone(),
            revisits: out.mean_revisits(),
        });
    }
    let report = AblationReport { rows };
    let csv = cfg.output_dir.join("ablation.csv");
    std::fs::write(&csv, report.to_csv())?;
    write_manifest(cfg, "ablate", &[csv])?;
    Ok(report)
}

/// Aggregates the episode results of one or more run directories.
pub fn report(dirs: &[PathBuf]) -> Result<NavReport> {
    let mut records = Vec::new();
    for d in dirs {
        let p = d.join(RESULTS_FILE);
        if !p.exists() {
            return Err(Error::MissingData(p));
        }
        let results: Vec<EpisodeResult> = read_jsonl(&p)?;
        records.extend(results.iter().map(EpisodeResult::record));
    }
    aggregate(&records)
}

/// Top-down view at 0.25 m per character: `#` raised and blocked, `.`
/// walkable, `,` blocked floor; `S` and `G` mark the given points.
pub fn world_ascii(world: &World, marks: &[(Point2, char)]) -> String {
    let step = 0.25;
    let (w, h) = world.dims();
    let res = world.resolution();
    let origin = world.origin();
    let cols = ((w as f64 * res) / step).ceil() as usize;
    let rows = ((h as f64 * res) / step).ceil() as usize;
    let floor = world.walkable_cells().map(|(x, y)| world.elevations()[world.index(x, y)]).fold(f64::INFINITY, f64::min);
    let mut out = String::new();
    for r in (0..rows).rev() {
        for c in 0..cols {
            let p = Point2::new(origin.x + (c as f64 + 0.5) * step, origin.y + (r as f64 + 0.5) * step);
            let mark = marks
                .iter()
                .find(|(m, _)| (m.x - p.x).abs() <= step / 2.0 && (m.y - p.y).abs() <= step / 2.0);
            out.push(match mark {
                Some((_, ch)) => *ch,
                None if world.is_walkable(p) => '.',
                None if world.elevation_at(p) > floor + 0.5 => '#',
                None => ',',
            });
        }
        out.push('\n');
    }
    out
}

/// Human-readable description of one episode: instruction, endpoints,
/// region sequence, top-down map and the obstacle map seen at the start.
pub fn inspect_episode(cfg: &RunConfig, id: &str) -> Result<String> {
    use rand::SeedableRng;
    let data = load_data(cfg)?;
    let ep = data
        .episodes
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::InvalidConfig(format!("no episode {id}")))?;
    let world = data
        .world(&ep.world_id)
        .ok_or_else(|| Error::InvalidConfig(format!("no world {}", ep.world_id)))?
        .build()?;
    let mut s = String::new();
    let _ = writeln!(s, "episode {} in world {}", ep.id, ep.world_id);
    let _ = writeln!(s, "instruction: {}", ep.instruction);
    let _ = writeln!(
        s,
        "start ({:.2}, {:.2}) heading {:.0}; goal ({:.2}, {:.2}); geodesic {:.2} m",
        ep.start.x, ep.start.y, ep.start.heading, ep.goal.x, ep.goal.y, ep.geodesic_distance
    );
    let regions: Vec<String> = region_sequence(&world, &ep.gt_path).into_iter().map(|(t, ..)| t).collect();
    let _ = writeln!(s, "regions: {}", regions.join(" -> "));
    s.push('\n');
    s.push_str(&world_ascii(&world, &[(ep.start.position(), 'S'), (ep.goal, 'G')]));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let cloud = panoramic_scan(&world, &ep.start, &cfg.grid, &cfg.sim.scan, &mut rng);
    let map = obstacle_map_from_cloud(&cfg.grid, &cloud, cfg.obstacle.elevation_band, cfg.obstacle.slope_threshold);
    let _ = writeln!(s, "\nobstacle map at the start (rows are range bins, columns angle bins):");
    s.push_str(&map.ascii());
    if cfg.predictor.kind == PredictorKind::Geometric {
        let _ = writeln!(s, "\nwaypoints:");
        for w in geometric_predict(&map, &cfg.predictor.geometric_config()).iter() {
            let p = w.local.to_polar();
            let _ = writeln!(s, "  bin {:>3} range {:.3} m bearing {:>6.1}", w.cell.a, p.range, p.bearing);
        }
    }
    Ok(s)
}
