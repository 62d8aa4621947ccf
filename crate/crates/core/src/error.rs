use thiserror::Error;

use crate::radial::Cell;
use crate::topograph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell ({}, {}) is outside the {num_angles}x{num_radii} grid", cell.a, cell.j)]
    CellOutOfBounds {
        cell: Cell,
        num_angles: usize,
        num_radii: usize,
    },
    #[error("range {range:.3} m exceeds the grid's max range {max_range:.3} m")]
    OutOfRange { range: f64, max_range: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("model produced non-finite output; weights are corrupt")]
    NonFiniteOutput,
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {to} is not reachable from node {from} in the graph")]
    Disconnected { from: NodeId, to: NodeId },
    #[error("infeasible world or episode spec: {0}")]
    InfeasibleSpec(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("missing dataset or run output at {}; run gen-data first", .0.display())]
    MissingData(std::path::PathBuf),
    #[error("no reports to aggregate")]
    EmptyReports,
    #[error(transparent)]
    Planner(#[from] crate::planner::PlannerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the configuration rather than by the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Self::InvalidConfig(_) | Self::InfeasibleSpec(_) | Self::GridMismatch(_) | Self::CellOutOfBounds { .. }
        ) || matches!(self, Self::Planner(crate::planner::PlannerError::MissingApiKey(_)))
    }
}
