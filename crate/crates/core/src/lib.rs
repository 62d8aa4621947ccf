//! Zero-shot navigation in continuous environments on top of an obstacle-map
//! waypoint predictor and a topological graph memory.
//!
//! The pipeline per planner step: scan the surroundings into a point cloud,
//! reduce it to a polar obstacle map, predict reachable waypoints, merge them
//! into the graph, render the prompt, ask a planner for the next place, and
//! walk there with turn-then-move actions.

pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod obstacle;
pub mod pipeline;
pub mod planner;
pub mod predictor;
pub mod prompting;
pub mod radial;
pub mod sim;
pub mod topograph;

pub use error::{Error, Result};
pub use obstacle::{obstacle_map_from_cloud, CloudPoint, ElevationGrid, ObstacleMap, PointCloud};
pub use planner::{
    navigate_to, Decision, GreedyPlanner, LlmClient, LlmClientConfig, LlmPlanner, LowLevelAction, OraclePlanner,
    PlannerError, PlannerPolicy, ScriptedTextPlanner,
};
pub use predictor::{
    geometric_predict, make_target_heatmap, model_waypoints, nms_select, reachability_mask, Heatmap, ModelConfig,
    PredictorConfig, PredictorModel, TrainConfig, Waypoint, WaypointSet,
};
pub use prompting::{parse_response, serialize_context, serialize_graph, Action, PlannerResponse, PromptContext};
pub use radial::{Cell, LocalPoint, Point2, PolarPoint, Pose, RadialGrid};
pub use topograph::{Node, NodeId, Point3, TopoGraph};
