//! The simulation kernel: per-cell utilities, movement sampling, conflict
//! resolution and the synchronous step loop.

mod components;
mod conflict;

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use components::{group_dispersion, Components};
pub use conflict::{resolve_conflicts, resolve_with_friction};

use crate::agent::{Agent, AgentId, Group};
use crate::error::{Error, Result};
use crate::field::{build_obstacle_field, ScalarField};
use crate::grid::{Cell, Environment};
use crate::weights::{balance_weights, Weights};

const VACANT: u32 = u32::MAX;

/// Model constants that are not part of the utility weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Obstacle repulsion fades out linearly up to this distance (meters).
    pub repulsion_radius: f64,
    /// Probability that a contested cell is left empty for the step.
    pub friction: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            repulsion_radius: 0.8,
            friction: 0.9,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.repulsion_radius.is_finite() && self.repulsion_radius >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "repulsion_radius must be finite and non-negative, got {}",
                self.repulsion_radius
            )));
        }
        if !(0.0..=1.0).contains(&self.friction) {
            return Err(Error::InvalidConfig(format!(
                "friction must lie in [0, 1], got {}",
                self.friction
            )));
        }
        Ok(())
    }
}

/// What attracts agents.
#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    /// Walking distance to the nearest target cell.
    Field(ScalarField),
    /// Constant drift along a lattice direction; used on tori where a
    /// distance-to-target is not defined.
    Drift { dx: i32, dy: i32 },
}

/// What happens to an agent that steps onto a target cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ExitPolicy {
    /// Targets are ordinary cells.
    Keep,
    /// The agent leaves the simulation.
    Absorb,
    /// The agent is taken off the grid and placed back on one of the
    /// `strip` cells as soon as one is free.
    Reinject { strip: Vec<Cell> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitEvent {
    pub agent: AgentId,
    pub cell: Cell,
    pub step: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    pub exits: Vec<ExitEvent>,
    pub entries: Vec<(AgentId, Cell)>,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub env: Environment,
    pub agents: Vec<Agent>,
    pub groups: Vec<Group>,
    pub goal: Goal,
    pub obstacle: ScalarField,
    pub weights: Weights,
    pub params: ModelParams,
    /// Seconds per step.
    pub dt: f64,
    pub seed: u64,
    pub step: u64,
    pub exit: ExitPolicy,
    occupancy: Vec<u32>,
    pending: VecDeque<AgentId>,
}

impl SimState {
    /// Assembles a state, checking that agents sit on distinct walkable
    /// cells and that group membership is consistent.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        env: Environment,
        agents: Vec<Agent>,
        groups: Vec<Group>,
        goal: Goal,
        weights: Weights,
        params: ModelParams,
        dt: f64,
        seed: u64,
        exit: ExitPolicy,
    ) -> Result<Self> {
        weights.validate()?;
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let mut occupancy = vec![VACANT; env.len()];
        for (i, a) in agents.iter().enumerate() {
            if a.id as usize != i {
                return Err(Error::InvalidConfig(format!(
                    "agent ids must be dense: index {i} holds id {}",
                    a.id
                )));
            }
            if !a.on_grid {
                continue;
            }
            if !env.is_walkable(a.pos) {
                return Err(Error::InvalidGeometry(format!(
                    "agent {} placed on non-walkable {:?}",
                    a.id, a.pos
                )));
            }
            let slot = &mut occupancy[env.index(a.pos)];
            if *slot != VACANT {
                return Err(Error::InvalidGeometry(format!(
                    "agents {} and {} share {:?}",
                    *slot, a.id, a.pos
                )));
            }
            *slot = a.id;
        }
        for (gi, g) in groups.iter().enumerate() {
            if g.id as usize != gi || g.members.len() < 2 {
                return Err(Error::InvalidConfig(format!("malformed group {}", g.id)));
            }
            for &m in &g.members {
                if agents.get(m as usize).and_then(|a| a.group) != Some(g.id) {
                    return Err(Error::InvalidConfig(format!(
                        "agent {m} does not point back to group {}",
                        g.id
                    )));
                }
            }
        }
        let obstacle = build_obstacle_field(&env);
        Ok(SimState {
            env,
            agents,
            groups,
            goal,
            obstacle,
            weights,
            params,
            dt,
            seed,
            step: 0,
            exit,
            occupancy,
            pending: VecDeque::new(),
        })
    }

    /// Fresh generator for the dynamics of this run. Scenario builders use
    /// stream 0 of the same seed; the dynamics use stream 1.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }

    /// Free-flow speed of an agent that moves one cell every step (m/s).
    pub fn v_max(&self) -> f64 {
        self.env.cell_size() / self.dt
    }

    pub fn occupant(&self, c: Cell) -> Option<AgentId> {
        if !self.env.contains(c) {
            return None;
        }
        match self.occupancy[self.env.index(c)] {
            VACANT => None,
            id => Some(id),
        }
    }

    pub fn on_grid_count(&self) -> usize {
        self.agents.iter().filter(|a| a.on_grid).count()
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn partners(&self, id: AgentId) -> &[AgentId] {
        match self.agents[id as usize].group {
            Some(g) => &self.groups[g as usize].members,
            None => &[],
        }
    }

    /// Weights the agent uses this step and whether its cohesion term is
    /// active (it has at least one partner on the grid).
    pub fn effective_weights(&self, id: AgentId) -> (Weights, bool) {
        let agent = &self.agents[id as usize];
        match agent.group {
            Some(g) if self.members_on_grid(g) >= 2 => {
                let disp = group_dispersion(&self.groups[g as usize], self);
                (balance_weights(&self.weights, disp), true)
            }
            _ => (self.weights, false),
        }
    }

    fn members_on_grid(&self, g: u32) -> usize {
        self.groups[g as usize]
            .members
            .iter()
            .filter(|&&m| self.agents[m as usize].on_grid)
            .count()
    }

    /// Probability distribution over the agent's candidate cells: every
    /// legal Moore neighbour that is currently free, plus its own cell.
    pub fn move_distribution(&self, id: AgentId) -> Vec<(Cell, f64)> {
        let (eff, cohesive) = self.effective_weights(id);
        let c = self.candidates(id, &eff, cohesive);
        let probs = softmax(&c.utility[..c.len]);
        c.cell[..c.len].iter().copied().zip(probs).collect()
    }

    /// Advances the state by one synchronous step.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Result<StepEvents> {
        let v_max = self.v_max();
        let group_weights: Vec<Option<Weights>> = (0..self.groups.len())
            .map(|g| {
                (self.members_on_grid(g as u32) >= 2).then(|| {
                    balance_weights(&self.weights, group_dispersion(&self.groups[g], self))
                })
            })
            .collect();

        let mut proposals: Vec<(Cell, Cell)> = Vec::with_capacity(self.agents.len());
        let mut movers: Vec<usize> = Vec::with_capacity(self.agents.len());
        let mut participating: Vec<bool> = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter().enumerate() {
            if !agent.on_grid {
                continue;
            }
            let p_move = agent.desired_speed / v_max;
            let participates = p_move >= 1.0 || rng.gen::<f64>() < p_move;
            let target = if participates {
                let (eff, cohesive) = match agent.group.and_then(|g| group_weights[g as usize]) {
                    Some(w) => (w, true),
                    None => (self.weights, false),
                };
                let c = self.candidates(agent.id, &eff, cohesive);
                let pick = sample(&c.cell[..c.len], &c.utility[..c.len], rng);
                let banked = (agent.stride + 1.0).min(SQRT_2);
                if move_length(self.env.cell_delta(agent.pos, pick)) > banked + 1e-9 {
                    agent.pos
                } else {
                    pick
                }
            } else {
                agent.pos
            };
            proposals.push((agent.pos, target));
            movers.push(i);
            participating.push(participates);
        }

        let groups: Vec<Option<u32>> = movers.iter().map(|&i| self.agents[i].group).collect();
        let finals = resolve_with_friction(&proposals, &groups, self.params.friction, rng);

        for &i in &movers {
            let pos = self.agents[i].pos;
            let idx = self.env.index(pos);
            self.occupancy[idx] = VACANT;
        }
        for (k, &i) in movers.iter().enumerate() {
            let to = finals[k];
            let idx = self.env.index(to);
            if self.occupancy[idx] != VACANT {
                return Err(Error::Invariant {
                    step: self.step,
                    what: format!(
                        "agents {} and {} both ended in {:?}",
                        self.occupancy[idx], i, to
                    ),
                });
            }
            self.occupancy[idx] = i as u32;
            let from = self.agents[i].pos;
            let d = self.env.cell_delta(from, to);
            let a = &mut self.agents[i];
            if participating[k] {
                a.stride = (a.stride + 1.0).min(SQRT_2) - move_length(d);
            }
            a.pos = to;
            a.vel = d;
            if d != (0, 0) {
                a.heading = d;
            }
        }

        let mut events = StepEvents::default();
        if !matches!(self.exit, ExitPolicy::Keep) {
            for &i in &movers {
                let pos = self.agents[i].pos;
                if !self.env.is_target(pos) {
                    continue;
                }
                let idx = self.env.index(pos);
                self.occupancy[idx] = VACANT;
                let a = &mut self.agents[i];
                a.on_grid = false;
                a.last_exit = Some(self.step);
                events.exits.push(ExitEvent {
                    agent: a.id,
                    cell: pos,
                    step: self.step,
                });
                if matches!(self.exit, ExitPolicy::Reinject { .. }) {
                    self.pending.push_back(a.id);
                }
            }
        }
        if !self.pending.is_empty() {
            self.reinject(rng, &mut events);
        }

        self.step += 1;
        Ok(events)
    }

    fn reinject<R: Rng>(&mut self, rng: &mut R, events: &mut StepEvents) {
        let ExitPolicy::Reinject { strip } = &self.exit else {
            return;
        };
        let mut waiting = VecDeque::new();
        let mut free: Vec<Cell> = Vec::new();
        while let Some(id) = self.pending.pop_front() {
            let agent = &self.agents[id as usize];
            // Wait off-grid for partners still making their way out.
            let straggler = self.partners(id).iter().any(|&m| {
                let p = &self.agents[m as usize];
                m != id && p.on_grid && !p.last_exit.is_some_and(|e| e >= agent.last_entry)
            });
            if straggler {
                waiting.push_back(id);
                continue;
            }
            let mut choice = None;
            // Rejoin a partner that already went round this lap.
            let partner = self.partners(id).iter().copied().find(|&m| {
                let p = &self.agents[m as usize];
                m != id && p.on_grid && p.last_exit.is_some_and(|e| e >= agent.last_entry)
            });
            if let Some(m) = partner {
                let anchor = self.agents[m as usize].entry_cell;
                for radius in 1..=2 {
                    free.clear();
                    for dy in -radius..=radius {
                        for dx in -radius..=radius {
                            if let Some(c) = self.env.wrap(anchor.x + dx, anchor.y + dy) {
                                if self.env.is_walkable(c)
                                    && !self.env.is_target(c)
                                    && self.occupancy[self.env.index(c)] == VACANT
                                {
                                    free.push(c);
                                }
                            }
                        }
                    }
                    if let Some(&c) = free.choose(rng) {
                        choice = Some(c);
                        break;
                    }
                }
            }
            if choice.is_none() {
                free.clear();
                free.extend(
                    strip
                        .iter()
                        .copied()
                        .filter(|&c| self.occupancy[self.env.index(c)] == VACANT),
                );
                choice = free.choose(rng).copied();
            }
            match choice {
                Some(c) => {
                    self.occupancy[self.env.index(c)] = id;
                    let a = &mut self.agents[id as usize];
                    a.pos = c;
                    a.on_grid = true;
                    a.vel = (0, 0);
                    a.heading = (0, 0);
                    a.stride = 0.0;
                    a.last_entry = self.step;
                    a.entry_cell = c;
                    events.entries.push((id, c));
                }
                None => waiting.push_back(id),
            }
        }
        self.pending = waiting;
    }

    /// Checks the exclusion principle against the occupancy index.
    pub fn check_exclusion(&self) -> Result<()> {
        let mut seen = vec![false; self.env.len()];
        for a in self.agents.iter().filter(|a| a.on_grid) {
            let i = self.env.index(a.pos);
            if seen[i] || self.occupancy[i] != a.id {
                return Err(Error::Invariant {
                    step: self.step,
                    what: format!("cell {:?} is not exclusively held by agent {}", a.pos, a.id),
                });
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Numerically stable `exp(u) / sum(exp(u))`.
/// Length of an elementary move in cells: 0, 1 or the diagonal.
fn move_length(d: (i32, i32)) -> f64 {
    match (d.0 != 0, d.1 != 0) {
        (false, false) => 0.0,
        (true, true) => SQRT_2,
        _ => 1.0,
    }
}

pub fn softmax(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn sample<R: Rng>(cells: &[Cell], utilities: &[f64], rng: &mut R) -> Cell {
    debug_assert!(!cells.is_empty());
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights = [0.0; 9];
    let mut z = 0.0;
    for (w, u) in weights.iter_mut().zip(utilities) {
        *w = (u - max).exp();
        z += *w;
    }
    let mut r = rng.gen::<f64>() * z;
    for (k, w) in weights[..cells.len()].iter().enumerate() {
        if r < *w {
            return cells[k];
        }
        r -= w;
    }
    cells[cells.len() - 1]
}
