//! Text protocol between the navigator and a planner: renders the prompt
//! context and parses the `Thought:` / `Action:` reply.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::radial::{signed_bearing, Pose};
use crate::topograph::{NodeId, TopoGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Front,
    Left,
    Back,
    Right,
}

impl Direction {
    /// Buckets a bearing (degrees, counter-clockwise from the heading).
    pub fn from_bearing(bearing: f64) -> Self {
        let b = signed_bearing(bearing);
        if b.abs() <= 45.0 {
            Direction::Front
        } else if b > 45.0 && b <= 135.0 {
            Direction::Left
        } else if b > 135.0 || b <= -135.0 {
            Direction::Back
        } else {
            Direction::Right
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Front => "front",
            Direction::Left => "left",
            Direction::Back => "back",
            Direction::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOption {
    pub node: NodeId,
    pub direction: Direction,
    /// Signed degrees, positive to the left.
    pub bearing: f64,
    pub distance: f64,
    pub scene: String,
    pub visited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub node: NodeId,
    pub scene: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplementaryEntry {
    pub node: NodeId,
    pub scene: String,
    pub distance: f64,
}

/// Sections that may be dropped for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSections {
    pub graph: bool,
    pub visit_info: bool,
}

impl Default for PromptSections {
    fn default() -> Self {
        Self {
            graph: true,
            visit_info: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub instruction: String,
    pub history: Vec<HistoryEntry>,
    /// Visited node ids in the order they were reached.
    pub trajectory: Vec<NodeId>,
    pub graph: TopoGraph,
    pub current: NodeId,
    pub supplementary: Vec<SupplementaryEntry>,
    pub options: Vec<ActionOption>,
    pub sections: PromptSections,
}

impl PromptContext {
    /// Assembles the context seen from `pose` while standing at `current`.
    /// Options are the current node's cached options; every other unvisited
    /// node goes to the supplementary list. `scenes` maps node ids to tags.
    pub fn build(
        instruction: &str,
        graph: &TopoGraph,
        current: NodeId,
        pose: &Pose,
        trajectory: &[NodeId],
        scenes: &BTreeMap<NodeId, String>,
        sections: PromptSections,
    ) -> Self {
        let scene = |id: NodeId| scenes.get(&id).cloned().unwrap_or_else(|| "open space".into());
        let here = pose.position();
        let node_opts: Vec<NodeId> = graph
            .node(current)
            .map(|n| n.cached_options.clone())
            .unwrap_or_default();
        let options = node_opts
            .iter()
            .filter_map(|&id| graph.node(id).ok())
            .map(|n| {
                let p = n.position.xy();
                let bearing = signed_bearing((p.y - here.y).atan2(p.x - here.x).to_degrees() - pose.heading);
                ActionOption {
                    node: n.id,
                    direction: Direction::from_bearing(bearing),
                    bearing,
                    distance: here.distance(&p),
                    scene: scene(n.id),
                    visited: n.visited,
                }
            })
            .collect();
        let supplementary = graph
            .nodes()
            .iter()
            .filter(|n| !n.visited && !node_opts.contains(&n.id))
            .map(|n| SupplementaryEntry {
                node: n.id,
                scene: scene(n.id),
                distance: here.distance(&n.position.xy()),
            })
            .collect();
        Self {
            instruction: instruction.to_string(),
            history: trajectory
                .iter()
                .map(|&id| HistoryEntry { node: id, scene: scene(id) })
                .collect(),
            trajectory: trajectory.to_vec(),
            graph: graph.clone(),
            current,
            supplementary,
            options,
            sections,
        }
    }
}

/// One line per visited node, ascending: "Place N is connected with Places A, B".
pub fn serialize_graph(g: &TopoGraph) -> String {
    let mut out = Vec::new();
    for n in g.nodes().iter().filter(|n| n.visited) {
        let nb = g.neighbors(n.id);
        let line = match nb.len() {
            0 => format!("Place {} is connected with no other places", n.id),
            1 => format!("Place {} is connected with Place {}", n.id, nb[0]),
            _ => format!("Place {} is connected with Places {}", n.id, join_ids(&nb)),
        };
        out.push(line);
    }
    out.join("\n")
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

pub const SYSTEM_PROMPT: &str = "You are a navigation agent in an indoor environment. \
You move between numbered places. Follow the instruction, use the history, trajectory and \
graph to avoid repeating yourself, and prefer unvisited places when exploring. \
You may choose any place in the graph; the agent will walk there along known connections.";

/// Renders the full prompt in a fixed section order.
pub fn serialize_context(ctx: &PromptContext) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Instruction: {}", ctx.instruction);

    s.push_str("History:\n");
    if ctx.history.is_empty() {
        s.push_str("(none)\n");
    }
    for (k, h) in ctx.history.iter().enumerate() {
        let _ = writeln!(s, "Step {}: Place {} ({})", k + 1, h.node, h.scene);
    }

    let tr: Vec<String> = ctx.trajectory.iter().map(|i| format!("Place {i}")).collect();
    let _ = writeln!(
        s,
        "Trajectory: {}",
        if tr.is_empty() { "(none)".into() } else { tr.join(" -> ") }
    );

    if ctx.sections.graph {
        s.push_str("Graph:\n");
        let g = serialize_graph(&ctx.graph);
        if g.is_empty() {
            s.push_str("(no visited places yet)\n");
        } else {
            s.push_str(&g);
            s.push('\n');
        }
    }

    if ctx.sections.visit_info {
        s.push_str("VisitInfo:\n");
        if ctx.options.is_empty() {
            s.push_str("(no options)\n");
        }
        for o in &ctx.options {
            let _ = writeln!(s, "Place {}: {}", o.node, if o.visited { "visited" } else { "unvisited" });
        }
    }

    s.push_str("Supplementary Info:\n");
    if ctx.supplementary.is_empty() {
        s.push_str("(none)\n");
    }
    for e in &ctx.supplementary {
        let _ = writeln!(s, "Place {}: {} m away, scene: {}", e.node, fmt_distance(e.distance), e.scene);
    }

    let _ = writeln!(s, "Action Options (you are at Place {}):", ctx.current);
    if ctx.options.is_empty() {
        s.push_str("(none available)\n");
    }
    for o in &ctx.options {
        let _ = writeln!(
            s,
            "Place {}: {}, bearing {}°, distance {} m, scene: {}",
            o.node,
            o.direction.as_str(),
            fmt_bearing(o.bearing),
            fmt_distance(o.distance),
            o.scene
        );
    }

    s.push_str(
        "Reply with exactly two lines:\n\
         Thought: <your reasoning>\n\
         Action: <a place number, or stop>\n",
    );
    s
}

fn fmt_bearing(b: f64) -> String {
    let r = b.round();
    // Avoid "-0".
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

fn fmt_distance(d: f64) -> String {
    format!("{d:.1}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    GoTo(NodeId),
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerResponse {
    pub thought: String,
    pub action: Action,
}

impl PlannerResponse {
    pub fn stop(thought: impl Into<String>) -> Self {
        Self {
            thought: thought.into(),
            action: Action::Stop,
        }
    }

    pub fn go_to(id: NodeId, thought: impl Into<String>) -> Self {
        Self {
            thought: thought.into(),
            action: Action::GoTo(id),
        }
    }

    /// Canonical two-line reply.
    pub fn render(&self) -> String {
        let action = match self.action {
            Action::GoTo(id) => id.to_string(),
            Action::Stop => "stop".to_string(),
        };
        format!("Thought: {}\nAction: {}", self.thought, action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("reply has no Action line")]
    MissingAction,
    #[error("action {0:?} names neither a place nor stop unambiguously")]
    Ambiguous(String),
    #[error("place {0} is not in the graph")]
    UnknownNodeId(NodeId),
}

const DECORATION: &[char] = &['*', '_', '#', '>', '-', '`', '"', '\'', ' ', '\t'];

/// Returns the text after `Keyword:` when `line` is such a field, allowing
/// markdown emphasis, list bullets and headings around the keyword.
fn field<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let rest = line.trim().trim_start_matches(DECORATION);
    let head = rest.get(..keyword.len())?;
    if !head.eq_ignore_ascii_case(keyword) {
        return None;
    }
    let rest = rest[keyword.len()..].trim_start_matches(['*', '_']);
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches(['*', '_']).trim())
}

fn action_token(word: &str) -> Option<Action> {
    let w = word.trim_matches(|c: char| !c.is_ascii_alphanumeric());
    if w.eq_ignore_ascii_case("stop") {
        return Some(Action::Stop);
    }
    let digits = w
        .strip_prefix("place")
        .or_else(|| w.strip_prefix("Place"))
        .or_else(|| w.strip_prefix("PLACE"))
        .unwrap_or(w);
    let digits = digits.trim_start_matches('#');
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        return digits.parse().ok().map(Action::GoTo);
    }
    None
}

fn parse_action(body: &str) -> Result<Action, ParseError> {
    let cleaned = body.trim_matches(|c: char| DECORATION.contains(&c) || ".,;:!()[]{}<>".contains(c));
    if let Some(a) = action_token(cleaned) {
        return Ok(a);
    }
    let mut found: Vec<Action> = cleaned
        .split(|c: char| c.is_whitespace() || c == ',' || c == '/')
        .filter_map(action_token)
        .collect();
    found.dedup();
    match found.as_slice() {
        [one] => Ok(*one),
        _ => Err(ParseError::Ambiguous(body.to_string())),
    }
}

/// Case-insensitive; uses the last `Thought:` and the last `Action:` line.
pub fn parse_response(raw: &str) -> Result<PlannerResponse, ParseError> {
    let mut thought = None;
    let mut action = None;
    for line in raw.lines() {
        if let Some(t) = field(line, "thought") {
            thought = Some(t);
        } else if let Some(a) = field(line, "action") {
            action = Some(a);
        }
    }
    let body = action.ok_or(ParseError::MissingAction)?;
    Ok(PlannerResponse {
        thought: thought.unwrap_or("").to_string(),
        action: parse_action(body)?,
    })
}

/// Rejects GoTo targets that are not nodes of `g`.
pub fn validate_response(resp: &PlannerResponse, g: &TopoGraph) -> Result<(), ParseError> {
    match resp.action {
        Action::GoTo(id) if !g.contains(id) => Err(ParseError::UnknownNodeId(id)),
        _ => Ok(()),
    }
}

pub fn parse_and_validate(raw: &str, g: &TopoGraph) -> Result<PlannerResponse, ParseError> {
    let resp = parse_response(raw)?;
    validate_response(&resp, g)?;
    Ok(resp)
}
