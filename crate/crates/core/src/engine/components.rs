use std::f64::consts::SQRT_2;

use super::{Goal, SimState, VACANT};
use crate::agent::{predict_position, AgentId, Group};
use crate::error::{Error, Result};
use crate::grid::{Cell, MOORE};
use crate::weights::Weights;

/// Per-cell terms of the utility other than cohesion, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    /// goal attraction
    pub g: f64,
    /// obstacle repulsion
    pub ob: f64,
    /// proxemics
    pub s: f64,
    /// direction inertia
    pub d: f64,
    /// overlap; always zero in uni-directional flow
    pub ov: f64,
}

#[derive(Clone, Copy)]
struct Slot {
    cell: Cell,
    offset: (i32, i32),
    goal: f64,
    free: bool,
}

/// The legal part of an agent's Moore neighbourhood.
struct Neighborhood {
    slots: [Option<Slot>; 9],
    goal_min: f64,
    goal_max: f64,
}

pub(super) struct Candidates {
    pub cell: [Cell; 9],
    pub utility: [f64; 9],
    pub len: usize,
}

/// Mean member distance from the group centroid, in meters. Positions are
/// unwrapped around the first member on periodic axes.
pub fn group_dispersion(group: &Group, state: &SimState) -> f64 {
    let env = &state.env;
    let members: Vec<&crate::agent::Agent> = group
        .members
        .iter()
        .map(|&m| &state.agents[m as usize])
        .filter(|a| a.on_grid)
        .collect();
    if members.len() < 2 {
        return 0.0;
    }
    let origin = (members[0].pos.x as f64, members[0].pos.y as f64);
    let rel: Vec<(f64, f64)> = members
        .iter()
        .map(|a| env.delta(origin, (a.pos.x as f64, a.pos.y as f64)))
        .collect();
    let n = rel.len() as f64;
    let cx = rel.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = rel.iter().map(|p| p.1).sum::<f64>() / n;
    rel.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n * env.cell_size()
}

impl SimState {
    fn goal_value(&self, to: Cell, offset: (i32, i32)) -> f64 {
        match &self.goal {
            Goal::Field(f) => f.get(to),
            Goal::Drift { dx, dy } => {
                -((offset.0 * dx + offset.1 * dy) as f64) * self.env.cell_size()
            }
        }
    }

    fn neighborhood(&self, id: AgentId) -> Neighborhood {
        let agent = &self.agents[id as usize];
        let mut slots = [None; 9];
        let mut goal_min = f64::INFINITY;
        let mut goal_max = f64::NEG_INFINITY;
        for (k, &(dx, dy)) in MOORE.iter().enumerate() {
            let cell = if k == 0 {
                agent.pos
            } else {
                match self.env.step_target(agent.pos, dx, dy) {
                    Some(c) => c,
                    None => continue,
                }
            };
            let goal = self.goal_value(cell, (dx, dy));
            if goal.is_finite() {
                goal_min = goal_min.min(goal);
                goal_max = goal_max.max(goal);
            }
            let free = k == 0 || self.occupancy[self.env.index(cell)] == VACANT;
            slots[k] = Some(Slot {
                cell,
                offset: (dx, dy),
                goal,
                free,
            });
        }
        Neighborhood {
            slots,
            goal_min,
            goal_max,
        }
    }

    fn same_group(&self, a: AgentId, b: AgentId) -> bool {
        let ga = self.agents[a as usize].group;
        ga.is_some() && ga == self.agents[b as usize].group
    }

    fn proxemics(&self, id: AgentId, c: Cell) -> f64 {
        if let Some(o) = self.occupant(c) {
            if o != id && !self.same_group(id, o) {
                return -1.0;
            }
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let Some(n) = self.env.wrap(c.x + dx, c.y + dy) else {
                continue;
            };
            let o = self.occupancy[self.env.index(n)];
            if o != VACANT && o != id && !self.same_group(id, o) {
                return -0.5;
            }
        }
        0.0
    }

    fn obstacle_term(&self, c: Cell) -> f64 {
        let d = self.obstacle.get(c);
        let adjacent = SQRT_2 * self.env.cell_size() + 1e-9;
        let radius = self.params.repulsion_radius;
        if d <= adjacent {
            -1.0
        } else if d >= radius {
            0.0
        } else {
            -(radius - d) / (radius - adjacent)
        }
    }

    fn components_for(&self, id: AgentId, hood: &Neighborhood, slot: &Slot) -> Components {
        let agent = &self.agents[id as usize];
        let g = if !slot.goal.is_finite() {
            -1.0
        } else if hood.goal_max > hood.goal_min {
            1.0 - 2.0 * (slot.goal - hood.goal_min) / (hood.goal_max - hood.goal_min)
        } else {
            0.0
        };
        let d = if slot.offset == (0, 0) || agent.heading == (0, 0) {
            0.0
        } else {
            let (mx, my) = (slot.offset.0 as f64, slot.offset.1 as f64);
            let (hx, hy) = (agent.heading.0 as f64, agent.heading.1 as f64);
            (mx * hx + my * hy) / (mx.hypot(my) * hx.hypot(hy))
        };
        Components {
            g,
            ob: self.obstacle_term(slot.cell),
            s: self.proxemics(id, slot.cell),
            d,
            ov: 0.0,
        }
    }

    /// Non-cohesion utility terms for cell `c`, or `None` if `c` is not a
    /// legal move for the agent.
    pub fn component_values(&self, c: Cell, id: AgentId) -> Option<Components> {
        let hood = self.neighborhood(id);
        let slot = hood.slots.iter().flatten().find(|s| s.cell == c)?;
        Some(self.components_for(id, &hood, slot))
    }

    /// Cohesion attraction of cell `c` in `[-1, 1]`: how much moving to `c`
    /// shortens the distance to the predicted positions of the partners,
    /// relative to staying. The raw mean difference is bounded by the
    /// diagonal step length and mapped affinely onto `[-1, 1]`.
    pub fn cohesion_value(&self, c: Cell, id: AgentId) -> Result<f64> {
        let agent = &self.agents[id as usize];
        let Some(g) = agent.group else {
            return Err(Error::NotGrouped(id));
        };
        let offset = self.env.cell_delta(agent.pos, c);
        Ok(self.cohesion_at(id, &self.groups[g as usize], offset))
    }

    fn cohesion_at(&self, id: AgentId, group: &Group, offset: (i32, i32)) -> f64 {
        let agent = &self.agents[id as usize];
        let here = (agent.pos.x as f64, agent.pos.y as f64);
        let cand = (here.0 + offset.0 as f64, here.1 + offset.1 as f64);
        let mut sum = 0.0;
        let mut n = 0usize;
        for &m in &group.members {
            let other = &self.agents[m as usize];
            if m == id || !other.on_grid {
                continue;
            }
            let predicted = predict_position(other);
            sum += self.env.distance_m(here, predicted) - self.env.distance_m(cand, predicted);
            n += 1;
        }
        if n == 0 {
            return 0.0;
        }
        let span = SQRT_2 * self.env.cell_size();
        // eta maps [-span, span] onto [0, 1]; then (x * 2) - 1.
        let eta = (sum / n as f64 + span) / (2.0 * span);
        (eta * 2.0 - 1.0).clamp(-1.0, 1.0)
    }

    fn utility_of(
        &self,
        id: AgentId,
        hood: &Neighborhood,
        slot: &Slot,
        eff: &Weights,
        cohesive: bool,
    ) -> f64 {
        let k = self.components_for(id, hood, slot);
        let cohesion = match (cohesive, self.agents[id as usize].group) {
            (true, Some(g)) => {
                eff.kappa_c * self.cohesion_at(id, &self.groups[g as usize], slot.offset)
            }
            _ => 0.0,
        };
        let sum = eff.kappa_g * k.g
            + eff.kappa_ob * k.ob
            + eff.kappa_s * k.s
            + cohesion
            + eff.kappa_d * k.d
            + eff.kappa_ov * k.ov;
        let divisor = if slot.offset.0 != 0 && slot.offset.1 != 0 {
            SQRT_2
        } else {
            1.0
        };
        sum / divisor
    }

    /// Aggregated utility of cell `c` under the given effective weights.
    /// The cohesion term is dropped for agents without a group.
    pub fn utility(&self, c: Cell, id: AgentId, eff: &Weights) -> Option<f64> {
        let hood = self.neighborhood(id);
        let slot = hood.slots.iter().flatten().find(|s| s.cell == c)?;
        let cohesive = self.agents[id as usize].group.is_some();
        Some(self.utility_of(id, &hood, slot, eff, cohesive))
    }

    pub(super) fn candidates(&self, id: AgentId, eff: &Weights, cohesive: bool) -> Candidates {
        let hood = self.neighborhood(id);
        let mut out = Candidates {
            cell: [Cell::new(0, 0); 9],
            utility: [0.0; 9],
            len: 0,
        };
        for slot in hood.slots.iter().flatten().filter(|s| s.free) {
            out.cell[out.len] = slot.cell;
            out.utility[out.len] = self.utility_of(id, &hood, slot, eff, cohesive);
            out.len += 1;
        }
        out
    }
}
