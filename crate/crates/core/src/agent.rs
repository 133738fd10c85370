use serde::{Deserialize, Serialize};

use crate::grid::Cell;

pub type AgentId = u32;
pub type GroupId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentClass {
    Single,
    DyadMember,
}

impl AgentClass {
    pub fn label(self) -> &'static str {
        match self {
            AgentClass::Single => "single",
            AgentClass::DyadMember => "dyad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub pos: Cell,
    /// Last realized displacement, in cells per step.
    pub vel: (i32, i32),
    /// Last nonzero displacement; `(0, 0)` until the agent first moves.
    pub heading: (i32, i32),
    /// m/s
    pub desired_speed: f64,
    pub group: Option<GroupId>,
    pub class: AgentClass,
    /// False while the agent waits off-grid for re-injection or after it
    /// has left through an absorbing target.
    pub on_grid: bool,
    pub last_exit: Option<u64>,
    pub last_entry: u64,
    pub entry_cell: Cell,
    /// Travel banked for the next move, in cells. A participating step adds
    /// one cell, up to a diagonal's length; moving spends the move's length.
    pub stride: f64,
}

impl Agent {
    pub fn new(id: AgentId, pos: Cell, desired_speed: f64) -> Self {
        Agent {
            id,
            pos,
            vel: (0, 0),
            heading: (0, 0),
            desired_speed,
            group: None,
            class: AgentClass::Single,
            on_grid: true,
            last_exit: None,
            last_entry: 0,
            entry_cell: pos,
            stride: 0.0,
        }
    }
}

/// Expected next position `pos + vel` in continuous cell coordinates. Not
/// wrapped or clamped; distance helpers on the environment handle wrap.
pub fn predict_position(agent: &Agent) -> (f64, f64) {
    (
        (agent.pos.x + agent.vel.0) as f64,
        (agent.pos.y + agent.vel.1) as f64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: GroupId,
    pub members: Vec<AgentId>,
}
