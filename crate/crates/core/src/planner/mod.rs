//! Planners choosing the next place to go, and the turn-then-move controller
//! that walks the agent there.

mod llm;

use serde::{Deserialize, Serialize};

pub use llm::{LlmClient, LlmClientConfig, LlmPlanner};

use crate::prompting::{parse_response, validate_response, Action, ParseError, PlannerResponse, PromptContext};
use crate::radial::{signed_bearing, Point2, Pose};
use crate::sim::{step, MotionMode, World, FORWARD_STEP, TURN_STEP};
use crate::topograph::{NodeId, TopoGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowLevelAction {
    /// 0.25 m along the heading.
    Forward,
    /// 15° counter-clockwise.
    TurnLeft,
    /// 15° clockwise.
    TurnRight,
    Stop,
}

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion: {0}")]
    Completion(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("planner chose place {0}, which is not in the graph")]
    InvalidTarget(NodeId),
    #[error("no path from place {from} to place {to}")]
    Disconnected { from: NodeId, to: NodeId },
    #[error("response cache: {0}")]
    Cache(String),
}

/// A planner's answer plus the raw exchanges that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub response: PlannerResponse,
    /// The reply could not be parsed even after a reminder; `response` is
    /// the Stop fallback.
    pub flagged: bool,
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub reply: String,
    pub cached: bool,
}

impl Decision {
    pub fn plain(response: PlannerResponse) -> Self {
        Self {
            response,
            flagged: false,
            exchanges: Vec::new(),
        }
    }
}

pub trait PlannerPolicy {
    fn name(&self) -> &str;

    /// `prompt` is `serialize_context(ctx)`; text planners read it, graph
    /// planners use `ctx` directly.
    fn decide(&mut self, ctx: &PromptContext, prompt: &str) -> Result<Decision, PlannerError>;
}

/// Checks a decision before it is executed.
pub fn check_decision(d: &Decision, g: &TopoGraph) -> Result<(), PlannerError> {
    match validate_response(&d.response, g) {
        Err(ParseError::UnknownNodeId(id)) => Err(PlannerError::InvalidTarget(id)),
        _ => Ok(()),
    }
}

/// Ground-truth planner: stops once the current place is within the success
/// radius of the goal, otherwise heads for the unvisited place closest to
/// the goal. `distance` measures place-to-goal distance.
pub struct OraclePlanner<'a> {
    pub goal: Point2,
    pub success_radius: f64,
    distance: Box<dyn Fn(Point2) -> f64 + 'a>,
}

impl<'a> OraclePlanner<'a> {
    /// Straight-line distance to the goal.
    pub fn euclidean(goal: Point2, success_radius: f64) -> Self {
        Self::with_distance(goal, success_radius, move |p: Point2| p.distance(&goal))
    }

    pub fn with_distance(goal: Point2, success_radius: f64, distance: impl Fn(Point2) -> f64 + 'a) -> Self {
        Self {
            goal,
            success_radius,
            distance: Box::new(distance),
        }
    }
}

impl PlannerPolicy for OraclePlanner<'_> {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&mut self, ctx: &PromptContext, _prompt: &str) -> Result<Decision, PlannerError> {
        let g = &ctx.graph;
        let here = g.node(ctx.current).map_err(|_| PlannerError::InvalidTarget(ctx.current))?;
        let d_here = (self.distance)(here.position.xy());
        if d_here <= self.success_radius {
            return Ok(Decision::plain(PlannerResponse::stop(format!(
                "Place {} is {d_here:.2} m from the goal.",
                ctx.current
            ))));
        }
        let best = g
            .nodes()
            .iter()
            .filter(|n| !n.visited)
            .map(|n| (n.id, (self.distance)(n.position.xy())))
            .filter(|(_, d)| d.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(Decision::plain(match best {
            Some((id, d)) => PlannerResponse::go_to(id, format!("Place {id} is {d:.2} m from the goal.")),
            None => PlannerResponse::stop("No unvisited places remain."),
        }))
    }
}

/// Frontier exploration: the unvisited place nearest along graph edges.
#[derive(Debug, Clone, Default)]
pub struct GreedyPlanner;

impl PlannerPolicy for GreedyPlanner {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&mut self, ctx: &PromptContext, _prompt: &str) -> Result<Decision, PlannerError> {
        let g = &ctx.graph;
        let (dist, _) = g
            .distances_from(ctx.current)
            .map_err(|_| PlannerError::InvalidTarget(ctx.current))?;
        let best = g
            .nodes()
            .iter()
            .filter(|n| !n.visited && dist[n.id].is_finite())
            .min_by(|a, b| dist[a.id].total_cmp(&dist[b.id]).then(a.id.cmp(&b.id)));
        Ok(Decision::plain(match best {
            Some(n) => PlannerResponse::go_to(n.id, "Nearest unvisited place."),
            None => PlannerResponse::stop("Everything reachable has been visited."),
        }))
    }
}

/// Reads only the rendered prompt. Picks the first option the VisitInfo
/// section marks unvisited; when that section is missing it cannot tell,
/// and takes the first option listed.
#[derive(Debug, Clone, Default)]
pub struct ScriptedTextPlanner;

#[derive(Debug, Default, PartialEq)]
struct PromptView {
    options: Vec<NodeId>,
    visit_info: Option<Vec<(NodeId, bool)>>,
    supplementary: Vec<NodeId>,
}

fn place_id(line: &str) -> Option<NodeId> {
    let rest = line.strip_prefix("Place ")?;
    let end = rest.find(':')?;
    rest[..end].parse().ok()
}

fn read_prompt(prompt: &str) -> PromptView {
    let mut view = PromptView::default();
    let mut section = "";
    for line in prompt.lines() {
        if line.starts_with("VisitInfo:") {
            section = "visit";
            view.visit_info = Some(Vec::new());
            continue;
        }
        if line.starts_with("Supplementary Info:") {
            section = "supp";
            continue;
        }
        if line.starts_with("Action Options") {
            section = "options";
            continue;
        }
        if !line.starts_with("Place ") {
            if !line.starts_with('(') {
                section = "";
            }
            continue;
        }
        let Some(id) = place_id(line) else { continue };
        match section {
            "visit" => {
                let visited = !line.ends_with("unvisited");
                if let Some(v) = view.visit_info.as_mut() {
                    v.push((id, visited));
                }
            }
            "supp" => view.supplementary.push(id),
            "options" => view.options.push(id),
            _ => {}
        }
    }
    view
}

impl PlannerPolicy for ScriptedTextPlanner {
    fn name(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, _ctx: &PromptContext, prompt: &str) -> Result<Decision, PlannerError> {
        let view = read_prompt(prompt);
        let choice = match &view.visit_info {
            Some(info) => view
                .options
                .iter()
                .copied()
                .find(|id| info.iter().any(|&(k, visited)| k == *id && !visited))
                .or_else(|| view.supplementary.first().copied()),
            None => view.options.first().copied().or_else(|| view.supplementary.first().copied()),
        };
        let reply = match choice {
            Some(id) => format!("Thought: trying place {id}\nAction: {id}"),
            None => "Thought: nothing left\nAction: stop".to_string(),
        };
        let response = parse_response(&reply).expect("scripted replies are well formed");
        Ok(Decision {
            response,
            flagged: false,
            exchanges: vec![Exchange {
                prompt: prompt.to_string(),
                reply,
                cached: false,
            }],
        })
    }
}

/// Result of walking the agent to a graph node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavOutcome {
    pub actions: Vec<LowLevelAction>,
    pub collisions: usize,
    pub forward_count: usize,
    /// Agent positions after each action.
    pub positions: Vec<Point2>,
    pub pose: Pose,
    /// The action budget ran out before the target was reached.
    pub truncated: bool,
}

/// Actions that face `target` from `pose`: the nearest multiple of 15° of
/// the relative bearing, then `round(distance / 0.25)` steps forward.
pub fn hop_actions(pose: &Pose, target: Point2) -> Vec<LowLevelAction> {
    let here = pose.position();
    let dist = here.distance(&target);
    if dist < 1e-9 {
        return Vec::new();
    }
    let bearing = signed_bearing((target.y - here.y).atan2(target.x - here.x).to_degrees() - pose.heading);
    let turns = (bearing / TURN_STEP).round() as i64;
    let turn = if turns >= 0 {
        LowLevelAction::TurnLeft
    } else {
        LowLevelAction::TurnRight
    };
    let mut out = vec![turn; turns.unsigned_abs() as usize];
    out.extend(std::iter::repeat_n(
        LowLevelAction::Forward,
        (dist / FORWARD_STEP).round() as usize,
    ));
    out
}

/// Walks along the graph's shortest path from `current` to `target`, hop by
/// hop, recomputing each hop from the agent's actual pose. A hop that ended
/// short after a collision is re-planned, up to `HOP_ATTEMPTS` tries in all.
/// Stops early when `max_actions` is reached.
pub fn navigate_to(
    world: &World,
    pose: Pose,
    graph: &TopoGraph,
    current: NodeId,
    target: NodeId,
    mode: MotionMode,
    max_actions: usize,
) -> Result<NavOutcome, PlannerError> {
    let path = graph
        .shortest_path(current, target)
        .map_err(|_| PlannerError::InvalidTarget(target))?
        .ok_or(PlannerError::Disconnected { from: current, to: target })?;
    let mut out = NavOutcome {
        actions: Vec::new(),
        collisions: 0,
        forward_count: 0,
        positions: Vec::new(),
        pose,
        truncated: false,
    };
    for &hop in path.iter().skip(1) {
        let p = graph.node(hop).expect("path nodes exist").position.xy();
        for _ in 0..HOP_ATTEMPTS {
            let mut hit = false;
            for action in hop_actions(&out.pose, p) {
                if out.actions.len() >= max_actions {
                    out.truncated = true;
                    return Ok(out);
                }
                let (next, blocked) = step(world, &out.pose, action, mode);
                if action == LowLevelAction::Forward {
                    out.forward_count += 1;
                    out.collisions += usize::from(blocked);
                    hit |= blocked;
                }
                out.pose = next;
                out.actions.push(action);
                out.positions.push(next.position());
            }
            if !hit || out.pose.position().distance(&p) <= FORWARD_STEP {
                break;
            }
        }
    }
    Ok(out)
}

pub const HOP_ATTEMPTS: usize = 3;

/// `Decision` for a parse failure after the reminder.
pub(crate) fn fallback_stop(reason: &str, exchanges: Vec<Exchange>) -> Decision {
    Decision {
        response: PlannerResponse {
            thought: format!("unparseable reply: {reason}"),
            action: Action::Stop,
        },
        flagged: true,
        exchanges,
    }
}
