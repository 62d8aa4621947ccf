//! Synthetic dataset: worlds, ground-truth graphs, per-node training
//! examples and navigation episodes, stored as JSONL.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::obstacle::{obstacle_map_from_cloud, ObstacleMap};
use crate::predictor::{make_target_heatmap, TrainingExample};
use crate::radial::{world_to_local, LocalPoint, Pose, RadialGrid};
use crate::sim::{
    generate_episode, generate_world, panoramic_scan, sample_gt_graph, Episode, GtGraph, ScanConfig, World, WorldSpec,
};

pub const DATA_VERSION: u32 = 1;
const WORLD_ATTEMPTS: u64 = 20;

/// Stable seed for a named sub-stream of `base`.
pub fn derive_seed(base: u64, stream: &str, index: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(stream.as_bytes());
    for i in index {
        h.update(i.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldRecord {
    pub version: u32,
    pub id: String,
    pub split: Split,
    pub seed: u64,
    pub spec: WorldSpec,
}

impl WorldRecord {
    pub fn build(&self) -> Result<World> {
        generate_world(self.seed, &self.spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub world_id: String,
    pub graph: GtGraph,
}

/// Observation at one ground-truth node with its graph neighbours in the
/// agent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub world_id: String,
    pub node: usize,
    pub pose: Pose,
    pub map: ObstacleMap,
    /// Noise-free map, present when scans are noisy.
    pub truth: Option<ObstacleMap>,
    pub neighbors: Vec<LocalPoint>,
}

impl NodeRecord {
    pub fn truth_map(&self) -> &ObstacleMap {
        self.truth.as_ref().unwrap_or(&self.map)
    }

    pub fn to_example(&self, sigma: f64) -> Result<TrainingExample> {
        Ok(TrainingExample {
            input: self.map.clone(),
            target: make_target_heatmap(&self.map.grid, &self.neighbors, sigma)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub worlds: Vec<WorldRecord>,
    pub graphs: Vec<GraphRecord>,
    pub train: Vec<NodeRecord>,
    pub heldout: Vec<NodeRecord>,
    pub episodes: Vec<Episode>,
}

pub const WORLDS_FILE: &str = "worlds.jsonl";
pub const GRAPHS_FILE: &str = "graphs.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const HELDOUT_FILE: &str = "heldout.jsonl";
pub const EPISODES_FILE: &str = "episodes.jsonl";

impl Dataset {
    pub fn world(&self, id: &str) -> Option<&WorldRecord> {
        self.worlds.iter().find(|w| w.id == id)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(WORLDS_FILE), &self.worlds)?;
        write_jsonl(&dir.join(GRAPHS_FILE), &self.graphs)?;
        write_jsonl(&dir.join(TRAIN_FILE), &self.train)?;
        write_jsonl(&dir.join(HELDOUT_FILE), &self.heldout)?;
        write_jsonl(&dir.join(EPISODES_FILE), &self.episodes)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let worlds: Vec<WorldRecord> = read_jsonl(&dir.join(WORLDS_FILE))?;
        if let Some(w) = worlds.iter().find(|w| w.version != DATA_VERSION) {
            return Err(Error::InvalidConfig(format!(
                "world {} has data version {}, expected {DATA_VERSION}",
                w.id, w.version
            )));
        }
        Ok(Self {
            worlds,
            graphs: read_jsonl(&dir.join(GRAPHS_FILE))?,
            train: read_jsonl(&dir.join(TRAIN_FILE))?,
            heldout: read_jsonl(&dir.join(HELDOUT_FILE))?,
            episodes: read_jsonl(&dir.join(EPISODES_FILE))?,
        })
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// First feasible world for world index `i`; infeasible draws are retried
/// with fresh seeds.
fn make_world(cfg: &RunConfig, i: usize, split: Split) -> Result<(WorldRecord, World)> {
    let spec = WorldSpec {
        terrain: cfg.data.terrains[i % cfg.data.terrains.len()],
        ..cfg.world.clone()
    };
    let mut last = None;
    for attempt in 0..WORLD_ATTEMPTS {
        let seed = derive_seed(cfg.seed, "world", &[i as u64, attempt]);
        match generate_world(seed, &spec) {
            Ok(world) => {
                let rec = WorldRecord {
                    version: DATA_VERSION,
                    id: format!("w{i:03}"),
                    split,
                    seed,
                    spec,
                };
                return Ok((rec, world));
            }
            Err(e @ Error::InfeasibleSpec(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Scans every node of the ground-truth graph from a random heading.
pub fn node_records(
    world: &World,
    world_id: &str,
    gt: &GtGraph,
    grid: &RadialGrid,
    cfg: &RunConfig,
    seed: u64,
) -> Vec<NodeRecord> {
    let band = cfg.obstacle.elevation_band;
    let slope = cfg.obstacle.slope_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gt.nodes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pose = Pose::new(p.x, p.y, rng.random_range(0.0..360.0));
            let cloud = panoramic_scan(world, &pose, grid, &cfg.sim.scan, &mut rng);
            let map = obstacle_map_from_cloud(grid, &cloud, band, slope);
            let truth = (cfg.sim.scan.noise_std > 0.0).then(|| {
                let clean = ScanConfig {
                    noise_std: 0.0,
                    ..cfg.sim.scan
                };
                let cloud = panoramic_scan(world, &pose, grid, &clean, &mut rng);
                obstacle_map_from_cloud(grid, &cloud, band, slope)
            });
            let neighbors = gt.neighbors[i]
                .iter()
                .map(|&n| world_to_local(&pose, gt.nodes[n]))
                .filter(|l| l.to_polar().range <= grid.max_range)
                .collect();
            NodeRecord {
                world_id: world_id.to_string(),
                node: i,
                pose,
                map,
                truth,
                neighbors,
            }
        })
        .collect()
}

/// Builds the whole dataset. Training worlds come first, held-out worlds
/// follow and also host the navigation episodes.
pub fn generate_dataset(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let d = &cfg.data;
    if d.episodes > 0 && d.heldout_worlds == 0 {
        return Err(Error::InvalidConfig("episodes need at least one held-out world".into()));
    }
    let total = d.train_worlds + d.heldout_worlds;
    let per_world: Vec<(WorldRecord, GraphRecord, Vec<NodeRecord>, World)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let split = if i < d.train_worlds { Split::Train } else { Split::Heldout };
            let (rec, world) = make_world(cfg, i, split)?;
            let gt = sample_gt_graph(
                &world,
                derive_seed(rec.seed, "graph", &[]),
                d.node_spacing,
                d.nodes_per_world,
            );
            let nodes = node_records(&world, &rec.id, &gt, &cfg.grid, cfg, derive_seed(rec.seed, "scan", &[]));
            let graph = GraphRecord {
                world_id: rec.id.clone(),
                graph: gt,
            };
            Ok((rec, graph, nodes, world))
        })
        .collect::<Result<_>>()?;

    let heldout_worlds: Vec<(&WorldRecord, &World)> = per_world
        .iter()
        .filter(|(r, ..)| r.split == Split::Heldout)
        .map(|(r, _, _, w)| (r, w))
        .collect();
    let episodes = (0..d.episodes)
        .into_par_iter()
        .map(|k| {
            let (rec, world) = heldout_worlds[k % heldout_worlds.len()];
            let spec = crate::sim::EpisodeSpec {
                mode: cfg.sim.mode,
                ..cfg.episode.clone()
            };
            let mut ep = generate_episode(world, derive_seed(cfg.seed, "episode", &[k as u64]), &spec)?;
            ep.id = format!("ep{k:04}");
            ep.world_id = rec.id.clone();
            Ok(ep)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Dataset {
        episodes,
        ..Dataset::default()
    };
    for (rec, graph, nodes, _) in per_world {
        match rec.split {
            Split::Train => out.train.extend(nodes),
            Split::Heldout => out.heldout.extend(nodes),
        }
        out.worlds.push(rec);
        out.graphs.push(graph);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.data.train_worlds = 2;
        cfg.data.heldout_worlds = 1;
        cfg.data.nodes_per_world = 6;
        cfg.data.episodes = 3;
        cfg
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, "world", &[3]), derive_seed(1, "world", &[3]));
        assert_ne!(derive_seed(1, "world", &[3]), derive_seed(1, "world", &[4]));
        assert_ne!(derive_seed(1, "world", &[3]), derive_seed(2, "world", &[3]));
        assert_ne!(derive_seed(1, "world", &[3]), derive_seed(1, "scan", &[3]));
    }

    #[test]
    fn deterministic_and_round_trips() {
        let cfg = small();
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.worlds.len(), 3);
        assert_eq!(a.train.len(), 12);
        assert_eq!(a.heldout.len(), 6);
        assert_eq!(a.episodes.len(), 3);
        assert!(a.episodes.iter().all(|e| e.world_id == "w002"));
        assert_eq!(a.worlds[1].spec.terrain, crate::sim::Terrain::Stairs);

        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(dir.path()).unwrap(), a);
    }

    #[test]
    fn neighbors_match_graph_and_fit_the_grid() {
        let cfg = small();
        let ds = generate_dataset(&cfg).unwrap();
        for r in ds.train.iter().chain(&ds.heldout) {
            let g = &ds.graphs.iter().find(|g| g.world_id == r.world_id).unwrap().graph;
            assert!(r.neighbors.len() <= g.neighbors[r.node].len());
            for n in &r.neighbors {
                assert!(n.to_polar().range <= cfg.grid.max_range + 1e-9);
            }
            r.to_example(1.0).unwrap();
        }
        let world = ds.worlds[0].build().unwrap();
        assert!(world.is_walkable(ds.train[0].pose.position()));
    }

    #[test]
    fn noisy_scans_keep_a_truth_map() {
        let mut cfg = small();
        cfg.data.episodes = 0;
        cfg.sim.scan.noise_std = 0.05;
        let ds = generate_dataset(&cfg).unwrap();
        assert!(ds.train.iter().all(|r| r.truth.is_some()));
    }

    #[test]
    fn episodes_require_heldout_worlds() {
        let mut cfg = small();
        cfg.data.heldout_worlds = 0;
        assert!(matches!(generate_dataset(&cfg), Err(Error::InvalidConfig(_))));
    }
}
