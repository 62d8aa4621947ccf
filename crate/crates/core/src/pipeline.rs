//! Episode loop: scan, map, predict, grow the graph, prompt the planner and
//! walk to the chosen place until it stops or a budget runs out.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PlannerKind, PredictorKind, RunConfig};
use crate::dataset::{derive_seed, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{nav_metrics, NavMetrics, NavRecord};
use crate::obstacle::{obstacle_map_from_cloud, ObstacleMap};
use crate::planner::{
    check_decision, navigate_to, Decision, GreedyPlanner, LlmClient, LlmPlanner, OraclePlanner, PlannerPolicy,
    ScriptedTextPlanner,
};
use crate::predictor::{geometric_predict, model_waypoints, PredictorConfig, PredictorModel, WaypointSet};
use crate::prompting::{serialize_context, Action, PromptContext};
use crate::radial::{local_to_world, Point2, Pose};
use crate::sim::{panoramic_scan, DistanceField, Episode, World};
use crate::topograph::{NodeId, Point3, ScoredPoint, TopoGraph, UpdateOutcome};

/// Episodes run concurrently per chunk; logs are written after each chunk.
const LOG_CHUNK: usize = 8;

#[derive(Debug, Clone)]
pub enum WaypointSource {
    Geometric(PredictorConfig),
    Model(Arc<PredictorModel>, PredictorConfig),
}

impl WaypointSource {
    /// Loads the checkpoint when the config asks for the learned predictor.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.predictor.kind {
            PredictorKind::Geometric => Self::Geometric(cfg.predictor.geometric_config()),
            PredictorKind::Model => {
                let model = PredictorModel::load(&cfg.checkpoint_path())?;
                if *model.grid() != cfg.grid {
                    return Err(Error::GridMismatch("checkpoint grid differs from the configured grid".into()));
                }
                Self::Model(Arc::new(model), cfg.predictor.model_config())
            }
        })
    }

    pub fn predict(&self, map: &ObstacleMap) -> Result<WaypointSet> {
        match self {
            Self::Geometric(c) => Ok(geometric_predict(map, c)),
            Self::Model(m, c) => model_waypoints(m, map, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndReason {
    Stopped,
    /// Planner stop issued after an unusable reply.
    Flagged,
    StepBudget,
    ActionBudget,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub episode: String,
    pub step: usize,
    pub node: NodeId,
    pub pose: Pose,
    /// New options found at this step; `None` on a revisit.
    pub expanded: Option<usize>,
    pub graph_nodes: usize,
    pub prompt: String,
    pub decision: Decision,
    pub actions: usize,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: String,
    pub world_id: String,
    pub seed: u64,
    pub metrics: NavMetrics,
    pub end: EndReason,
    pub error: Option<String>,
    pub planner_steps: usize,
    pub actions: usize,
    pub collisions: usize,
    pub forward_count: usize,
    pub revisits: usize,
    pub graph_nodes: usize,
    /// Agent positions, start first, consecutive duplicates removed.
    pub trajectory: Vec<Point2>,
}

impl EpisodeResult {
    pub fn record(&self) -> NavRecord {
        NavRecord {
            episode_id: self.episode_id.clone(),
            seed: self.seed,
            metrics: self.metrics,
        }
    }
}

/// Planner for one episode. The oracle measures geodesic distance to the
/// goal through `field`.
pub fn make_planner<'a>(
    kind: PlannerKind,
    cfg: &RunConfig,
    ep: &Episode,
    world: &'a World,
    field: &'a DistanceField,
    llm: Option<&Arc<LlmClient>>,
) -> Result<Box<dyn PlannerPolicy + 'a>> {
    Ok(match kind {
        PlannerKind::Oracle => Box::new(OraclePlanner::with_distance(
            ep.goal,
            cfg.success_radius,
            move |p: Point2| field.distance(world, p),
        )),
        PlannerKind::Greedy => Box::new(GreedyPlanner),
        PlannerKind::Scripted => Box::new(ScriptedTextPlanner),
        PlannerKind::Llm => {
            let client = llm.ok_or_else(|| Error::InvalidConfig("llm planner needs a client".into()))?;
            Box::new(LlmPlanner::new(Arc::clone(client)))
        }
    })
}

struct Walk {
    pose: Pose,
    positions: Vec<Point2>,
    actions: usize,
    collisions: usize,
    forward_count: usize,
}

/// Runs one episode. Planner and navigation failures end the episode and
/// are reported in the result rather than returned as errors.
pub fn run_episode(
    world: &World,
    ep: &Episode,
    field: &DistanceField,
    planner: &mut dyn PlannerPolicy,
    predictor: &WaypointSource,
    cfg: &RunConfig,
    log: &mut Vec<StepLog>,
) -> Result<EpisodeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "nav-scan", &[episode_key(&ep.id)]));
    let start = ep.start.position();
    let mut graph = TopoGraph::new(Point3::new(start.x, start.y, world.elevation_at(start)));
    let mut current: NodeId = 0;
    let mut visited_path = vec![current];
    let mut walk = Walk {
        pose: ep.start,
        positions: vec![start],
        actions: 0,
        collisions: 0,
        forward_count: 0,
    };
    let mut revisits = 0;
    let mut steps = 0;
    let mut end = EndReason::StepBudget;
    let mut error = None;

    while steps < cfg.budget.planner_steps {
        let pose = walk.pose;
        let mut predict_err = None;
        let outcome = graph.update(current, cfg.merge_threshold, || {
            let cloud = panoramic_scan(world, &pose, &cfg.grid, &cfg.sim.scan, &mut rng);
            let map =
                obstacle_map_from_cloud(&cfg.grid, &cloud, cfg.obstacle.elevation_band, cfg.obstacle.slope_threshold);
            match predictor.predict(&map) {
                Ok(ws) => ws
                    .iter()
                    .map(|w| {
                        let p = local_to_world(&pose, w.local);
                        ScoredPoint {
                            position: Point3::new(p.x, p.y, world.elevation_at(p)),
                            score: w.score,
                        }
                    })
                    .collect(),
                Err(e) => {
                    predict_err = Some(e);
                    Vec::new()
                }
            }
        })?;
        if let Some(e) = predict_err {
            return Err(e);
        }
        let expanded = match outcome {
            UpdateOutcome::Expanded(n) => Some(n),
            UpdateOutcome::Revisit => {
                revisits += 1;
                None
            }
        };

        let scenes: BTreeMap<NodeId, String> = graph
            .nodes()
            .iter()
            .filter_map(|n| world.tag_at(n.position.xy()).map(|t| (n.id, t.to_string())))
            .collect();
        let ctx = PromptContext::build(
            &ep.instruction,
            &graph,
            current,
            &walk.pose,
            &visited_path,
            &scenes,
            cfg.prompt,
        );
        let prompt = serialize_context(&ctx);
        steps += 1;
        let decision = match planner
            .decide(&ctx, &prompt)
            .and_then(|d| check_decision(&d, &graph).map(|_| d))
        {
            Ok(d) => d,
            Err(e) => {
                end = EndReason::Error;
                error = Some(e.to_string());
                break;
            }
        };
        let mut entry = StepLog {
            episode: ep.id.clone(),
            step: steps - 1,
            node: current,
            pose: walk.pose,
            expanded,
            graph_nodes: graph.len(),
            prompt,
            decision: decision.clone(),
            actions: 0,
            collisions: 0,
        };
        let target = match decision.response.action {
            Action::Stop => {
                end = if decision.flagged {
                    EndReason::Flagged
                } else {
                    EndReason::Stopped
                };
                log.push(entry);
                break;
            }
            Action::GoTo(t) => t,
        };
        let remaining = cfg.budget.actions - walk.actions;
        match navigate_to(world, walk.pose, &graph, current, target, cfg.sim.mode, remaining) {
            Ok(nav) => {
                entry.actions = nav.actions.len();
                entry.collisions = nav.collisions;
                log.push(entry);
                walk.actions += nav.actions.len();
                walk.collisions += nav.collisions;
                walk.forward_count += nav.forward_count;
                walk.positions.extend(nav.positions);
                walk.pose = nav.pose;
                current = target;
                visited_path.push(target);
                if nav.truncated || walk.actions >= cfg.budget.actions {
                    end = EndReason::ActionBudget;
                    break;
                }
            }
            Err(e) => {
                log.push(entry);
                end = EndReason::Error;
                error = Some(e.to_string());
                break;
            }
        }
    }

    let mut trajectory = walk.positions;
    trajectory.dedup();
    let metrics = nav_metrics(
        &trajectory,
        &ep.gt_path,
        ep.geodesic_distance,
        |p| field.distance(world, p),
        walk.collisions,
        walk.forward_count,
        cfg.success_radius,
    )?;
    Ok(EpisodeResult {
        episode_id: ep.id.clone(),
        world_id: ep.world_id.clone(),
        seed: cfg.seed,
        metrics,
        end,
        error,
        planner_steps: steps,
        actions: walk.actions,
        collisions: walk.collisions,
        forward_count: walk.forward_count,
        revisits,
        graph_nodes: graph.len(),
        trajectory,
    })
}

fn episode_key(id: &str) -> u64 {
    id.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Runs every episode of the dataset with the configured planner. When
/// `log_path` is given, step logs are appended to it in episode order.
pub fn run_episodes(
    cfg: &RunConfig,
    data: &Dataset,
    predictor: &WaypointSource,
    llm: Option<Arc<LlmClient>>,
    log_path: Option<&Path>,
) -> Result<Vec<EpisodeResult>> {
    let mut worlds: HashMap<&str, World> = HashMap::new();
    for ep in &data.episodes {
        if !worlds.contains_key(ep.world_id.as_str()) {
            let rec = data
                .world(&ep.world_id)
                .ok_or_else(|| Error::InvalidConfig(format!("episode {} names unknown world {}", ep.id, ep.world_id)))?;
            worlds.insert(&rec.id, rec.build()?);
        }
    }
    let mut log_file = match log_path {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let mut results = Vec::with_capacity(data.episodes.len());
    for chunk in data.episodes.chunks(LOG_CHUNK) {
        let done: Vec<(EpisodeResult, Vec<StepLog>)> = chunk
            .par_iter()
            .map(|ep| {
                let world = &worlds[ep.world_id.as_str()];
                let field = DistanceField::new(world, ep.goal)
                    .ok_or_else(|| Error::InfeasibleSpec(format!("goal of {} is not walkable", ep.id)))?;
                let mut planner = make_planner(cfg.planner.kind, cfg, ep, world, &field, llm.as_ref())?;
                let mut log = Vec::new();
                let r = run_episode(world, ep, &field, planner.as_mut(), predictor, cfg, &mut log)?;
                Ok((r, log))
            })
            .collect::<Result<_>>()?;
        for (r, log) in done {
            if let Some(f) = log_file.as_mut() {
                for entry in &log {
                    serde_json::to_writer(&mut *f, entry)?;
                    f.write_all(b"\n")?;
                }
                f.flush()?;
            }
            log::info!(
                "{} ({}): ne {:.2} m, success {}, {} steps, {:?}",
                r.episode_id,
                r.world_id,
                r.metrics.ne,
                r.metrics.sr,
                r.planner_steps,
                r.end
            );
            results.push(r);
        }
    }
    Ok(results)
}
