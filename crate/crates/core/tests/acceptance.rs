//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlnce_core::config::RunConfig;
use vlnce_core::dataset::Dataset;
use vlnce_core::harness;
use vlnce_core::metrics::{chamfer, hausdorff, ndtw, spl};
use vlnce_core::obstacle::{obstacle_map_from_cloud, DEFAULT_ELEVATION_BAND};
use vlnce_core::predictor::{geometric_predict, model_waypoints, Heatmap, WaypointSet};
use vlnce_core::prompting::{parse_and_validate, parse_response, Action, ParseError, PlannerResponse};
use vlnce_core::sim::{generate_world, panoramic_scan, MotionMode, Rect, ScanConfig, Terrain, WorldBuilder, WorldSpec};
use vlnce_core::topograph::{Point3, ScoredPoint, UpdateOutcome};
use vlnce_core::{Cell, LocalPoint, ModelConfig, ObstacleMap, Point2, Pose, PredictorModel, RadialGrid, TopoGraph};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Shared state: one generated dataset and trained checkpoint reused by
/// several criteria.
struct Fixture {
    _dir: tempfile::TempDir,
    cfg: RunConfig,
    data: Dataset,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let data = harness::gen_data(&cfg).expect("gen-data with the default configuration");
    Fixture { _dir: dir, cfg, data }
}

fn all_open(ws: &WaypointSet, truth: &ObstacleMap) -> bool {
    ws.iter().all(|w| !truth.is_occupied(w.cell) && truth.is_linearly_reachable(w.cell))
}

/// Maps of three kinds in turn: independent cell flags, rays blocked from a
/// random radius outward, and noise-free scans from the dataset.
fn random_truth_map(i: usize, rng: &mut ChaCha8Rng, grid: RadialGrid, data: &Dataset) -> ObstacleMap {
    match i % 3 {
        0 => {
            let p = rng.random_range(0.0..0.6);
            ObstacleMap::from_flags(grid, (0..grid.len()).map(|_| rng.random_bool(p)).collect()).unwrap()
        }
        1 => {
            let mut m = ObstacleMap::empty(grid);
            for a in 0..grid.num_angles {
                if rng.random_bool(0.7) {
                    let j0 = rng.random_range(0..grid.num_radii);
                    for j in j0..grid.num_radii {
                        m.set(Cell::new(a, j), rng.random_bool(0.8));
                    }
                    m.set(Cell::new(a, j0), true);
                }
            }
            m
        }
        _ => {
            let recs = if i % 2 == 0 { &data.train } else { &data.heldout };
            recs[rng.random_range(0..recs.len())].truth_map().clone()
        }
    }
}

fn ac1(fx: &Fixture, model: &PredictorModel) -> Check {
    let grid = fx.cfg.grid;
    let geo = fx.cfg.predictor.geometric_config();
    let mc = fx.cfg.predictor.model_config();
    ensure(geo.mask && mc.mask, || "mask disabled in the default configuration".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut geo_n, mut model_n) = (0usize, 0usize);
    for i in 0..1000 {
        let map = random_truth_map(i, &mut rng, grid, &fx.data);
        let g = geometric_predict(&map, &geo);
        ensure(all_open(&g, &map), || format!("geometric waypoint blocked on map {i}"))?;
        let m = model_waypoints(model, &map, &mc).map_err(err)?;
        ensure(all_open(&m, &map), || format!("model waypoint blocked on map {i}"))?;
        geo_n += g.len();
        model_n += m.len();
    }
    Ok(format!(
        "1000 maps, %Open 100 for {geo_n} geometric and {model_n} trained-model waypoints"
    ))
}

fn ac2() -> Check {
    let grid = RadialGrid::default();
    let scan = ScanConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let spec = WorldSpec {
        rows: 1,
        cols: 2,
        terrain: Terrain::Stairs,
        ..WorldSpec::default()
    };
    let flight = spec.stair_steps as f64 * vlnce_core::sim::STAIR_TREAD;
    let mut stair_worlds = 0;
    for seed in 0..10 {
        let Ok(w) = generate_world(seed, &spec) else {
            continue;
        };
        let stairs = w
            .regions()
            .iter()
            .find(|r| r.tag == "staircase")
            .ok_or_else(|| format!("seed {seed}: no staircase"))?
            .rect;
        let back = 0.3;
        let pose = Pose::new(stairs.x0 - back, stairs.center().y, 0.0);
        let cloud = panoramic_scan(&w, &pose, &grid, &scan, &mut rng);
        let map = obstacle_map_from_cloud(&grid, &cloud, DEFAULT_ELEVATION_BAND, 1.0);
        // Up to one tread past the top of the flight.
        let reach = back + flight + 0.25;
        for a in [0, grid.num_angles - 1] {
            for j in 0..grid.num_radii {
                let c = Cell::new(a, j);
                if grid.cell_center(c).unwrap().range <= reach && map.is_occupied(c) {
                    return Err(format!("seed {seed}: stair ray cell {c:?} is an obstacle"));
                }
            }
        }
        stair_worlds += 1;
    }
    ensure(stair_worlds >= 5, || format!("only {stair_worlds} stair worlds generated"))?;

    for case in 0..200 {
        let x_step = rng.random_range(0.8..3.2);
        let dz = if rng.random_bool(0.5) { 0.5 } else { -0.5 };
        let mut b = WorldBuilder::new(5.0, 4.0, 0.05, 0.0);
        b.fill(Rect::new(x_step, 0.0, 5.0, 4.0), dz);
        let w = b.build().map_err(err)?;
        let pose = Pose::new(0.5, 2.0 + rng.random_range(-0.5..0.5), 0.0);
        let cloud = panoramic_scan(&w, &pose, &grid, &scan, &mut rng);
        let map = obstacle_map_from_cloud(&grid, &cloud, DEFAULT_ELEVATION_BAND, 1.0);
        let d = x_step - pose.x;
        let j = map
            .first_obstacle_index(0)
            .ok_or_else(|| format!("case {case}: {dz} m step at {d:.2} m not detected"))?;
        // Samples every 0.05 m may first land past the step in the next bin.
        let jd = grid.radial_bin(d).map_err(err)?;
        ensure(j == jd || j == jd + 1, || {
            format!("case {case}: {dz} m step in bin {jd} reported in bin {j}")
        })?;
    }
    Ok(format!("{stair_worlds} stair worlds clear; 200/200 wall steps detected"))
}

/// Central finite differences on every parameter of a reduced model.
fn gradient_check() -> Result<f64, String> {
    let grid = RadialGrid::default();
    let cfg = ModelConfig {
        d_model: 8,
        num_heads: 2,
        ff_dim: 16,
        num_layers: 2,
        seed: 3,
    };
    let mut model = PredictorModel::new(grid, cfg).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for p in model.params_mut() {
        p.mapv_inplace(|v| v + rng.random_range(-0.05..0.05));
    }
    let maps: Vec<ObstacleMap> = (0..2)
        .map(|_| ObstacleMap::from_flags(grid, (0..grid.len()).map(|_| rng.random_bool(0.2)).collect()).unwrap())
        .collect();
    // Targets near the model's output keep the loss, and with it the rounding
    // noise of each finite difference, small.
    let targets: Vec<Heatmap> = maps
        .iter()
        .map(|m| {
            let out = model.predict(m).unwrap();
            let vals = grid.cells().map(|c| out.get(c) + rng.random_range(-0.1..0.1)).collect();
            Heatmap::from_values(grid, vals).unwrap()
        })
        .collect();
    let mrefs: Vec<&ObstacleMap> = maps.iter().collect();
    let trefs: Vec<&Heatmap> = targets.iter().collect();

    let (_, grads) = model.loss_and_grad(&mrefs, &trefs);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for pi in 0..grads.len() {
        for ei in 0..grads[pi].len() {
            let orig = model.params()[pi].as_slice().unwrap()[ei];
            let mut at = |dx: f64| {
                model.params_mut()[pi].as_slice_mut().unwrap()[ei] = orig + dx;
                model.loss(&mrefs, &trefs)
            };
            let numeric = (at(step) - at(-step)) / (2.0 * step);
            at(0.0);
            let analytic = grads[pi].as_slice().unwrap()[ei];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn ac3(fx: &Fixture) -> Result<(String, PredictorModel), String> {
    ensure(fx.data.train.len() == 1000, || format!("{} training examples", fx.data.train.len()))?;
    let t = &fx.cfg.train;
    ensure(t.lr == 1e-4 && t.batch_size == 32 && t.epochs == 30, || "non-default hyperparameters".into())?;
    let out = harness::train_predictor(&fx.cfg).map_err(err)?;
    let losses = &out.report.epoch_losses;
    let (first, last) = (losses[0], *losses.last().unwrap());
    ensure(last <= 0.5 * first, || format!("final loss {last:.5} vs epoch-1 {first:.5}"))?;

    let eval = harness::eval_waypoints(&fx.cfg).map_err(err)?;
    let score = |name: &str| eval.get(name).and_then(|s| s.avg_score).unwrap_or(f64::NEG_INFINITY);
    let (trained, untrained) = (score("trained"), score("untrained"));
    ensure(trained > untrained, || {
        format!("trained avg_score {trained:.4} does not exceed untrained {untrained:.4}")
    })?;

    let worst = gradient_check()?;
    ensure(worst < 1e-4, || format!("gradient relative error {worst:e}"))?;
    let model = PredictorModel::load(&out.checkpoint).map_err(err)?;
    Ok((
        format!(
            "loss {first:.4} -> {last:.4}; avg_score trained {trained:.4} > untrained {untrained:.4}; max grad rel err {worst:.1e}"
        ),
        model,
    ))
}

fn ac4() -> Check {
    let threshold = vlnce_core::topograph::DEFAULT_MERGE_THRESHOLD;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut revisits = 0;
    for seq in 0..50 {
        let mut g = TopoGraph::new(Point3::new(0.0, 0.0, 0.0));
        let mut cached: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for call in 0..200 {
            let current = rng.random_range(0..g.len());
            let before = g.clone();
            let n = rng.random_range(0..6);
            let base = g.node(current).unwrap().position;
            let pts: Vec<ScoredPoint> = (0..n)
                .map(|_| ScoredPoint {
                    position: Point3::new(
                        base.x + rng.random_range(-3.0..3.0),
                        base.y + rng.random_range(-3.0..3.0),
                        base.z,
                    ),
                    score: rng.random_range(0.0..1.0),
                })
                .collect();
            let mut called = false;
            let outcome = g
                .update(current, threshold, || {
                    called = true;
                    pts
                })
                .map_err(err)?;
            let at = || format!("sequence {seq}, call {call}");
            if before.node(current).unwrap().visited {
                revisits += 1;
                ensure(outcome == UpdateOutcome::Revisit && !called, || format!("{}: revisit expanded", at()))?;
                ensure(g == before, || format!("{}: revisit changed the graph", at()))?;
            }
            ensure(g.len() >= before.len() && g.edge_count() >= before.edge_count(), || {
                format!("{}: graph shrank", at())
            })?;
            for (old, new) in before.nodes().iter().zip(g.nodes()) {
                ensure(old.position == new.position && (new.visited || !old.visited), || {
                    format!("{}: node {} changed", at(), old.id)
                })?;
            }
            for (a, b) in before.edges() {
                ensure(g.has_edge(a, b), || format!("{}: edge {a}-{b} removed", at()))?;
            }
            ensure(g.min_separation() >= threshold, || {
                format!("{}: separation {}", at(), g.min_separation())
            })?;
            if let UpdateOutcome::Expanded(k) = outcome {
                ensure(g.node(current).unwrap().cached_options.len() == k, || format!("{}: option count", at()))?;
                cached.insert(current, g.node(current).unwrap().cached_options.clone());
            }
            for (id, opts) in &cached {
                ensure(&g.node(*id).unwrap().cached_options == opts, || {
                    format!("{}: cached options of {id} changed", at())
                })?;
            }
        }
    }
    Ok(format!("50 sequences x 200 calls, {revisits} revisits, all invariants held"))
}

fn ac5(fx: &Fixture) -> Check {
    let mut cfg = fx.cfg.clone();
    cfg.sim.mode = MotionMode::Sliding;
    ensure(fx.data.episodes.len() == 100, || format!("{} episodes", fx.data.episodes.len()))?;
    let out = harness::run_with_data(&cfg, &fx.data, &cfg.output_dir.join("runs/ac5")).map_err(err)?;
    let s = &out.report.overall;
    let msg = format!("oracle SR {:.1}% SPL {:.3} over {} episodes", s.sr, s.spl / 100.0, s.episodes);
    ensure(s.sr >= 95.0 && s.spl >= 75.0, || msg.clone())?;
    Ok(msg)
}

fn ac6(fx: &Fixture) -> Check {
    let mut cfg = fx.cfg.clone();
    cfg.sim.mode = MotionMode::NoSliding;
    let mut rate = |mask: bool| -> Result<f64, String> {
        cfg.predictor.mask = mask;
        let dir = cfg.output_dir.join(format!("runs/ac6-mask-{mask}"));
        let out = harness::run_with_data(&cfg, &fx.data, &dir).map_err(err)?;
        Ok(out.report.overall.collision_rate)
    };
    let on = rate(true)?;
    let off = rate(false)?;
    let msg = format!("no-sliding collision rate: mask off {off:.2}% vs on {on:.2}%");
    ensure(off > on, || msg.clone())?;
    Ok(msg)
}

fn exhaustive(a: &[LocalPoint], b: &[LocalPoint]) -> (f64, f64) {
    let d = |p: &LocalPoint, q: &LocalPoint| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
    let nearest = |p: &LocalPoint, set: &[LocalPoint]| set.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min);
    let ab: Vec<f64> = a.iter().map(|p| nearest(p, b)).collect();
    let ba: Vec<f64> = b.iter().map(|q| nearest(q, a)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    (0.5 * (mean(&ab) + mean(&ba)), max(&ab).max(max(&ba)))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<LocalPoint> {
    (0..n)
        .map(|_| LocalPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
        .collect()
}

fn ac7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for case in 0..200 {
        let n = rng.random_range(1..40);
        let x: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
            .collect();
        let v = ndtw(&x, &x, 3.0);
        ensure(v == 1.0, || format!("case {case}: nDTW(x,x) = {v}"))?;
    }
    let spots = [
        (true, 10.0, 12.5, 0.8),
        (true, 10.0, 10.0, 1.0),
        (true, 10.0, 8.0, 1.0),
        (false, 10.0, 12.5, 0.0),
        (true, 5.0, 20.0, 0.25),
    ];
    for (s, l, p, want) in spots {
        let got = spl(s, l, p);
        ensure((got - want).abs() < 1e-12, || format!("SPL({s}, {l}, {p}) = {got}, expected {want}"))?;
    }
    for case in 0..1000 {
        let (na, nb) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let a = random_points(&mut rng, na);
        let b = random_points(&mut rng, nb);
        let (c, h) = (chamfer(&a, &b), hausdorff(&a, &b));
        if a.is_empty() || b.is_empty() {
            ensure(c.is_none() && h.is_none(), || format!("case {case}: distance defined for an empty set"))?;
            continue;
        }
        let (oc, oh) = exhaustive(&a, &b);
        let (c, h) = (c.unwrap(), h.unwrap());
        ensure((c - oc).abs() <= 1e-12 && (h - oh).abs() <= 1e-12, || {
            format!("case {case}: chamfer {c} vs {oc}, hausdorff {h} vs {oh}")
        })?;
    }
    Ok("nDTW(x,x)=1 on 200 paths; 5 SPL spot cases; 1000 chamfer/hausdorff cases match".into())
}

const THOUGHT_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 ,.'?!()-";

fn malformed_corpus() -> Vec<(&'static str, ParseError)> {
    use ParseError::*;
    let amb = |s: &str| Ambiguous(s.to_string());
    vec![
        ("", MissingAction),
        ("Thought: the kitchen is ahead", MissingAction),
        ("I would go to place 3.", MissingAction),
        ("Action 3", MissingAction),
        ("Actions: 3", MissingAction),
        ("Thought: ok\nNext: 2", MissingAction),
        ("Thought: ok\nAction: 2 or 3", amb("2 or 3")),
        ("Action: 1, 2", amb("1, 2")),
        ("Action: place 2 then stop", amb("place 2 then stop")),
        ("Action:", amb("")),
        ("Action: forward", amb("forward")),
        ("Action: place", amb("place")),
        ("Action: go left", amb("go left")),
        ("Action: 2.5", amb("2.5")),
        ("Action: node A", amb("node A")),
        ("Action: 17", UnknownNodeId(17)),
        ("Thought: far\nAction: place 9", UnknownNodeId(9)),
        ("**Action:** #12", UnknownNodeId(12)),
        ("Action: 1\nAction: 40", UnknownNodeId(40)),
        ("Action: Place 5", UnknownNodeId(5)),
    ]
}

fn ac8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for case in 0..1000 {
        let len = rng.random_range(0..80);
        let raw: String = (0..len)
            .map(|_| THOUGHT_CHARS[rng.random_range(0..THOUGHT_CHARS.len())] as char)
            .collect();
        let thought = raw.trim().to_string();
        let resp = if rng.random_bool(0.3) {
            PlannerResponse::stop(thought)
        } else {
            PlannerResponse::go_to(rng.random_range(0..100_000), thought)
        };
        let back = parse_response(&resp.render()).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == resp, || format!("case {case}: {resp:?} came back as {back:?}"))?;
    }

    // Nodes 0..=4.
    let mut g = TopoGraph::new(Point3::new(0.0, 0.0, 0.0));
    let pts: Vec<ScoredPoint> = (1..=4)
        .map(|i| ScoredPoint {
            position: Point3::new(i as f64, 0.0, 0.0),
            score: 1.0,
        })
        .collect();
    g.update(0, 0.5, || pts).map_err(err)?;
    ensure(g.len() == 5, || format!("fixture graph has {} nodes", g.len()))?;
    let corpus = malformed_corpus();
    for (raw, want) in &corpus {
        let got = parse_and_validate(raw, &g);
        ensure(got.as_ref() == Err(want), || format!("{raw:?}: expected {want:?}, got {got:?}"))?;
    }
    ensure(
        parse_and_validate("Thought: near\nAction: 4", &g).map(|r| r.action) == Ok(Action::GoTo(4)),
        || "valid reply rejected".into(),
    )?;
    Ok(format!("1000 round trips; {} malformed replies classified", corpus.len()))
}

fn snapshot(root: &Path) -> std::io::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn ac9() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = RunConfig {
        seed: 9,
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let pass = || -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
        harness::gen_data(&cfg).map_err(err)?;
        harness::run(&cfg, "oracle").map_err(err)?;
        snapshot(dir.path()).map_err(err)
    };
    let first = pass()?;
    let second = pass()?;
    ensure(first.keys().eq(second.keys()), || "different file sets".into())?;
    for (path, bytes) in &first {
        ensure(second[path] == *bytes, || format!("{} differs between runs", path.display()))?;
    }
    let logs = first.keys().filter(|p| p.ends_with(harness::STEPS_FILE)).count();
    ensure(logs == 1, || "no step log written".into())?;
    Ok(format!("{} files byte-identical across two runs", first.len()))
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .map_or_else(|| "panicked".into(), |s| format!("panicked: {s}"))),
    }
}

struct Outcome {
    id: usize,
    limit: Option<Duration>,
    elapsed: Duration,
    result: Check,
}

fn timed<T>(f: impl FnOnce() -> Result<T, String>) -> (Duration, Result<T, String>) {
    let t = Instant::now();
    let r = guarded(f);
    (t.elapsed(), r)
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut push = |id: usize, limit: Option<u64>, elapsed: Duration, result: Check| {
        outcomes.push(Outcome {
            id,
            limit: limit.map(Duration::from_secs),
            elapsed,
            result,
        })
    };

    let fx = guarded(|| Ok(fixture()));
    let (t3, r3) = match &fx {
        Ok(fx) => timed(|| ac3(fx)),
        Err(e) => (Duration::ZERO, Err(format!("fixture: {e}"))),
    };
    let model = match (&r3, &fx) {
        (Ok((_, m)), _) => Some(m.clone()),
        (Err(_), Ok(fx)) => PredictorModel::load(&fx.cfg.checkpoint_path()).ok(),
        _ => None,
    };
    push(3, Some(15 * 60), t3, r3.map(|(s, _)| s));

    let (t, r) = match (&fx, &model) {
        (Ok(fx), Some(m)) => timed(|| ac1(fx, m)),
        _ => (Duration::ZERO, Err("needs the dataset and trained model".into())),
    };
    push(1, Some(30), t, r);
    let (t, r) = timed(ac2);
    push(2, Some(5), t, r);
    let (t, r) = timed(ac4);
    push(4, Some(10), t, r);
    for (id, limit, f) in [(5, 120, ac5 as fn(&Fixture) -> Check), (6, 240, ac6)] {
        let (t, r) = match &fx {
            Ok(fx) => timed(|| f(fx)),
            Err(e) => (Duration::ZERO, Err(format!("fixture: {e}"))),
        };
        push(id, Some(limit), t, r);
    }
    let (t, r) = timed(ac7);
    push(7, Some(10), t, r);
    let (t, r) = timed(ac8);
    push(8, Some(5), t, r);
    let (t, r) = timed(ac9);
    push(9, None, t, r);

    outcomes.sort_by_key(|o| o.id);
    let mut failed = 0;
    for o in &outcomes {
        let secs = o.elapsed.as_secs_f64();
        let over = o.limit.filter(|l| o.elapsed > *l);
        let (status, detail) = match (&o.result, over) {
            (Ok(msg), None) => ("PASS", msg.clone()),
            (Ok(msg), Some(l)) => ("FAIL", format!("{msg}; over the {}s limit", l.as_secs())),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("AC{} {status} {detail} ({secs:.1}s)", o.id);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
