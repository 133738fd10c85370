//! Builders for the three experimental setups: the calibration corridor,
//! the periodic corridor used for fundamental diagrams and the bottleneck
//! room with periodic re-entry.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentClass, Group};
use crate::engine::{ExitPolicy, Goal, ModelParams, SimState};
use crate::error::{Error, Result};
use crate::field::build_distance_field;
use crate::grid::{Cell, CellKind, Environment};
use crate::metrics::MeasurementArea;
use crate::weights::Weights;
use crate::{CELL_SIZE, DESIRED_SPEED, TIME_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    CalibrationCorridor,
    PeriodicCorridor,
    BottleneckRoom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CalibrationCorridor => "calibration-corridor",
            ScenarioKind::PeriodicCorridor => "periodic-corridor",
            ScenarioKind::BottleneckRoom => "bottleneck-room",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationCorridor {
    /// meters
    pub width: f64,
    pub buffer: f64,
    pub measurement: f64,
    pub tail: f64,
    /// Start areas are laid out as `start_rows` lateral bands times
    /// `start_cols` longitudinal blocks upstream of the buffer.
    pub start_rows: usize,
    pub start_cols: usize,
    /// Length of one start block, meters.
    pub start_block: f64,
}

impl Default for CalibrationCorridor {
    fn default() -> Self {
        CalibrationCorridor {
            width: 3.0,
            buffer: 2.0,
            measurement: 10.0,
            tail: 2.0,
            start_rows: 3,
            start_cols: 3,
            start_block: 1.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicCorridor {
    /// persons per m² of nominal corridor area
    pub target_density: f64,
    pub width: f64,
    pub length: f64,
    pub measurement: f64,
}

impl PeriodicCorridor {
    /// Head count that realizes the target density on the nominal area.
    pub fn population(&self) -> usize {
        (self.target_density * self.width * self.length).round() as usize
    }
}

impl Default for PeriodicCorridor {
    fn default() -> Self {
        PeriodicCorridor {
            target_density: 1.0,
            width: 3.0,
            length: 24.0,
            measurement: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BottleneckRoom {
    /// Opening width, meters.
    pub bottleneck_width: f64,
    pub room_side: f64,
    /// Depth of the rear re-entry strip, meters.
    pub strip_depth: f64,
}

impl Default for BottleneckRoom {
    fn default() -> Self {
        BottleneckRoom {
            bottleneck_width: 4.0,
            room_side: 10.0,
            strip_depth: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub population: usize,
    pub dyad_fraction: f64,
    pub steps: u64,
    pub warmup_steps: u64,
    /// Fundamental-diagram window, steps.
    pub window_steps: u64,
    pub weights: Weights,
    pub model: ModelParams,
    pub calibration_corridor: CalibrationCorridor,
    pub periodic_corridor: PeriodicCorridor,
    pub bottleneck_room: BottleneckRoom,
}

impl ScenarioConfig {
    pub fn calibration() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::CalibrationCorridor,
            seed: 1,
            population: 54,
            dyad_fraction: 24.0 / 54.0,
            steps: 600,
            warmup_steps: 0,
            window_steps: 40,
            weights: Weights::default(),
            model: ModelParams::default(),
            calibration_corridor: CalibrationCorridor::default(),
            periodic_corridor: PeriodicCorridor::default(),
            bottleneck_room: BottleneckRoom::default(),
        }
    }

    pub fn periodic(target_density: f64, dyad_fraction: f64) -> Self {
        let periodic_corridor = PeriodicCorridor {
            target_density,
            ..PeriodicCorridor::default()
        };
        ScenarioConfig {
            kind: ScenarioKind::PeriodicCorridor,
            population: periodic_corridor.population(),
            dyad_fraction,
            steps: 5000,
            warmup_steps: 2000,
            periodic_corridor,
            ..Self::calibration()
        }
    }

    pub fn bottleneck(width: f64, dyad_fraction: f64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::BottleneckRoom,
            population: 400,
            dyad_fraction,
            steps: 5000,
            warmup_steps: 2000,
            bottleneck_room: BottleneckRoom {
                bottleneck_width: width,
                ..BottleneckRoom::default()
            },
            ..Self::calibration()
        }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::CalibrationCorridor => Self::calibration(),
            ScenarioKind::PeriodicCorridor => Self::periodic(1.0, 0.0),
            ScenarioKind::BottleneckRoom => Self::bottleneck(4.0, 0.0),
        }
    }

    /// Number of agents that belong to dyads.
    pub fn dyad_members(&self) -> usize {
        (self.dyad_fraction * self.population as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.model.validate()?;
        if !(0.0..=1.0).contains(&self.dyad_fraction) {
            return Err(Error::InvalidConfig(format!(
                "dyad_fraction must lie in [0, 1], got {}",
                self.dyad_fraction
            )));
        }
        let exact = self.dyad_fraction * self.population as f64;
        if (exact - exact.round()).abs() > 1e-6 || self.dyad_members() % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "dyad_fraction x population = {exact} is not an even head count"
            )));
        }
        if self.warmup_steps > self.steps {
            return Err(Error::InvalidConfig(format!(
                "warmup_steps {} exceeds steps {}",
                self.warmup_steps, self.steps
            )));
        }
        if self.window_steps == 0 {
            return Err(Error::InvalidConfig("window_steps must be positive".into()));
        }
        if self.kind == ScenarioKind::BottleneckRoom
            && self.bottleneck_room.bottleneck_width < 2.0 * CELL_SIZE - 1e-9
        {
            return Err(Error::InvalidGeometry(format!(
                "bottleneck width {} m is narrower than two cells",
                self.bottleneck_room.bottleneck_width
            )));
        }
        Ok(())
    }

    /// Builds the initial state; identical configs give identical states.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        match self.kind {
            ScenarioKind::CalibrationCorridor => build_calibration_corridor(self),
            ScenarioKind::PeriodicCorridor => build_periodic_corridor(self),
            ScenarioKind::BottleneckRoom => build_bottleneck_room(self),
        }
    }
}

/// An initial state together with the measurement geometry of its setup.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub state: SimState,
    pub area: MeasurementArea,
    /// Unit vector of the main walking direction.
    pub heading: (f64, f64),
    /// Width of the bottleneck opening, meters (bottleneck room only).
    pub opening_width: Option<f64>,
}

fn cells_for(meters: f64) -> usize {
    (meters / CELL_SIZE).round() as usize
}

fn builder_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Corridor of `rows` walkable rows between two wall rows.
fn corridor(length: usize, rows: usize) -> Result<Environment> {
    let mut env = Environment::new(length, rows + 2, CELL_SIZE)?;
    env.fill(0, 0, length as i32, 1, CellKind::Obstacle);
    env.fill(
        0,
        rows as i32 + 1,
        length as i32,
        rows as i32 + 2,
        CellKind::Obstacle,
    );
    Ok(env)
}

/// Places `pairs` adjacent dyads and then singles into `areas`, where
/// `quota[i]` agents go into area `i`.
fn populate<R: Rng>(
    env: &Environment,
    areas: &[Vec<Cell>],
    quota: &[usize],
    pairs: usize,
    rng: &mut R,
) -> Result<(Vec<Agent>, Vec<Group>)> {
    let capacity: usize = areas.iter().map(Vec::len).sum();
    let requested: usize = quota.iter().sum();
    for (a, &q) in areas.iter().zip(quota) {
        if q > a.len() {
            return Err(Error::SpawnOverflow {
                requested,
                capacity,
            });
        }
    }
    // Pair slots: each area offers floor(quota / 2) of them.
    let mut pair_slots: Vec<usize> = quota
        .iter()
        .enumerate()
        .flat_map(|(i, &q)| std::iter::repeat_n(i, q / 2))
        .collect();
    if pairs > pair_slots.len() {
        return Err(Error::SpawnOverflow {
            requested,
            capacity,
        });
    }
    pair_slots.shuffle(rng);
    let mut pair_count = vec![0usize; areas.len()];
    for &i in &pair_slots[..pairs] {
        pair_count[i] += 1;
    }

    let mut taken = vec![false; env.len()];
    let mut agents = Vec::with_capacity(requested);
    let mut groups = Vec::with_capacity(pairs);
    for (i, area) in areas.iter().enumerate() {
        let in_area = |c: Cell| area.contains(&c);
        for _ in 0..pair_count[i] {
            let mut options: Vec<(Cell, Cell)> = Vec::new();
            for &c in area.iter().filter(|&&c| !taken[env.index(c)]) {
                for &(dx, dy) in &crate::grid::MOORE[1..] {
                    if let Some(n) = env.step_target(c, dx, dy) {
                        if in_area(n) && !taken[env.index(n)] {
                            options.push((c, n));
                        }
                    }
                }
            }
            let &(a, b) = options.choose(rng).ok_or(Error::SpawnOverflow {
                requested,
                capacity,
            })?;
            taken[env.index(a)] = true;
            taken[env.index(b)] = true;
            let gid = groups.len() as u32;
            let mut members = Vec::with_capacity(2);
            for c in [a, b] {
                let mut agent = Agent::new(agents.len() as u32, c, DESIRED_SPEED);
                agent.group = Some(gid);
                agent.class = AgentClass::DyadMember;
                members.push(agent.id);
                agents.push(agent);
            }
            groups.push(Group { id: gid, members });
        }
        let singles = quota[i] - 2 * pair_count[i];
        let mut free: Vec<Cell> = area
            .iter()
            .copied()
            .filter(|&c| !taken[env.index(c)])
            .collect();
        free.shuffle(rng);
        if singles > free.len() {
            return Err(Error::SpawnOverflow {
                requested,
                capacity,
            });
        }
        for &c in &free[..singles] {
            taken[env.index(c)] = true;
            agents.push(Agent::new(agents.len() as u32, c, DESIRED_SPEED));
        }
    }
    Ok((agents, groups))
}

pub fn build_calibration_corridor(cfg: &ScenarioConfig) -> Result<Scenario> {
    let geo = &cfg.calibration_corridor;
    let rows = cells_for(geo.width);
    let block = cells_for(geo.start_block);
    let bands = geo.start_rows;
    if rows < bands || bands == 0 || geo.start_cols == 0 || block == 0 {
        return Err(Error::InvalidGeometry(
            "start areas do not fit the corridor".into(),
        ));
    }
    let start_len = block * geo.start_cols;
    let buffer = cells_for(geo.buffer);
    let measurement = cells_for(geo.measurement);
    let tail = cells_for(geo.tail);
    // west wall | start zone | buffer | measurement | tail | target column
    let length = 1 + start_len + buffer + measurement + tail + 1;
    let mut env = corridor(length, rows)?;
    env.fill(0, 0, 1, rows as i32 + 2, CellKind::Obstacle);
    let target_x = length as i32 - 1;
    env.fill(target_x, 1, target_x + 1, rows as i32 + 1, CellKind::Target);

    // Lateral bands as even as possible, extra rows go to the outer bands.
    let mut band_rows = vec![rows / bands; bands];
    for k in 0..rows % bands {
        let i = if k % 2 == 0 { k / 2 } else { bands - 1 - k / 2 };
        band_rows[i] += 1;
    }
    let mut areas = Vec::new();
    let mut y0 = 1;
    for &h in &band_rows {
        for col in 0..geo.start_cols {
            let x0 = 1 + (col * block) as i32;
            let id = areas.len() as u16;
            let mut cells = Vec::new();
            for y in y0..y0 + h as i32 {
                for x in x0..x0 + block as i32 {
                    env.set(Cell::new(x, y), CellKind::Spawn(id));
                    cells.push(Cell::new(x, y));
                }
            }
            areas.push(cells);
        }
        y0 += h as i32;
    }
    let n_areas = areas.len();
    let quota: Vec<usize> = (0..n_areas)
        .map(|i| cfg.population / n_areas + usize::from(i < cfg.population % n_areas))
        .collect();
    let mut rng = builder_rng(cfg.seed);
    let (agents, groups) = populate(&env, &areas, &quota, cfg.dyad_members() / 2, &mut rng)?;

    let targets = env.cells_of(|k| k == CellKind::Target);
    let goal = Goal::Field(build_distance_field(&env, &targets)?);
    let mx0 = (1 + start_len + buffer) as f64 * CELL_SIZE;
    let area = MeasurementArea::new(
        mx0,
        CELL_SIZE,
        mx0 + measurement as f64 * CELL_SIZE,
        (rows + 1) as f64 * CELL_SIZE,
    );
    let state = SimState::new(
        env,
        agents,
        groups,
        goal,
        cfg.weights,
        cfg.model,
        TIME_STEP,
        cfg.seed,
        ExitPolicy::Absorb,
    )?;
    Ok(Scenario {
        state,
        area,
        heading: (1.0, 0.0),
        opening_width: None,
    })
}

pub fn build_periodic_corridor(cfg: &ScenarioConfig) -> Result<Scenario> {
    let geo = &cfg.periodic_corridor;
    let max = 1.0 / (CELL_SIZE * CELL_SIZE);
    if !(geo.target_density >= 0.0) || geo.target_density > max + 1e-9 {
        return Err(Error::OverCapacity {
            density: geo.target_density,
            max,
        });
    }
    let rows = cells_for(geo.width);
    let length = cells_for(geo.length);
    let mut env = corridor(length, rows)?;
    env.periodic_x = true;
    let walkable: Vec<Cell> = env.cells_of(CellKind::is_walkable);
    if cfg.population > walkable.len() {
        return Err(Error::OverCapacity {
            density: geo.target_density,
            max,
        });
    }
    let mut rng = builder_rng(cfg.seed);
    let (agents, groups) = populate(
        &env,
        &[walkable],
        &[cfg.population],
        cfg.dyad_members() / 2,
        &mut rng,
    )?;
    let centre = length as f64 * CELL_SIZE / 2.0;
    let area = MeasurementArea::new(
        centre - geo.measurement / 2.0,
        CELL_SIZE,
        centre + geo.measurement / 2.0,
        (rows + 1) as f64 * CELL_SIZE,
    );
    let state = SimState::new(
        env,
        agents,
        groups,
        Goal::Drift { dx: 1, dy: 0 },
        cfg.weights,
        cfg.model,
        TIME_STEP,
        cfg.seed,
        ExitPolicy::Keep,
    )?;
    Ok(Scenario {
        state,
        area,
        heading: (1.0, 0.0),
        opening_width: None,
    })
}

pub fn build_bottleneck_room(cfg: &ScenarioConfig) -> Result<Scenario> {
    let geo = &cfg.bottleneck_room;
    let side = cells_for(geo.room_side);
    let door = cells_for(geo.bottleneck_width);
    if door > side || geo.bottleneck_width > geo.room_side + 1e-9 {
        return Err(Error::InvalidGeometry(format!(
            "opening of {} m exceeds the room side of {} m",
            geo.bottleneck_width, geo.room_side
        )));
    }
    if door < 2 {
        return Err(Error::InvalidGeometry(format!(
            "opening of {} m is narrower than two cells",
            geo.bottleneck_width
        )));
    }
    // west wall | room | east wall with opening | target column
    let (w, h) = (side + 3, side + 2);
    let mut env = Environment::new(w, h, CELL_SIZE)?;
    env.fill(0, 0, w as i32, h as i32, CellKind::Obstacle);
    env.fill(1, 1, side as i32 + 1, side as i32 + 1, CellKind::Walkable);
    let wall_x = side as i32 + 1;
    let y0 = 1 + ((side - door) / 2) as i32;
    env.fill(wall_x, y0, wall_x + 1, y0 + door as i32, CellKind::Walkable);
    env.fill(
        wall_x + 1,
        y0,
        wall_x + 2,
        y0 + door as i32,
        CellKind::Target,
    );
    let depth = cells_for(geo.strip_depth).clamp(1, side);
    env.fill(1, 1, 1 + depth as i32, side as i32 + 1, CellKind::Spawn(0));
    let strip = env.cells_of(|k| k == CellKind::Spawn(0));

    let room: Vec<Cell> = env
        .cells_of(CellKind::is_walkable)
        .into_iter()
        .filter(|c| c.x <= side as i32)
        .collect();
    if cfg.population > room.len() {
        return Err(Error::SpawnOverflow {
            requested: cfg.population,
            capacity: room.len(),
        });
    }
    let mut rng = builder_rng(cfg.seed);
    let (agents, groups) = populate(
        &env,
        &[room],
        &[cfg.population],
        cfg.dyad_members() / 2,
        &mut rng,
    )?;
    let targets = env.cells_of(|k| k == CellKind::Target);
    let goal = Goal::Field(build_distance_field(&env, &targets)?);
    let area = MeasurementArea::new(
        CELL_SIZE,
        CELL_SIZE,
        (side + 1) as f64 * CELL_SIZE,
        (side + 1) as f64 * CELL_SIZE,
    );
    let state = SimState::new(
        env,
        agents,
        groups,
        goal,
        cfg.weights,
        cfg.model,
        TIME_STEP,
        cfg.seed,
        ExitPolicy::Reinject { strip },
    )?;
    Ok(Scenario {
        state,
        area,
        heading: (1.0, 0.0),
        opening_width: Some(door as f64 * CELL_SIZE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separation(s: &SimState, g: &Group) -> f64 {
        let a = &s.agents[g.members[0] as usize];
        let b = &s.agents[g.members[1] as usize];
        s.env.distance_m(
            (a.pos.x as f64, a.pos.y as f64),
            (b.pos.x as f64, b.pos.y as f64),
        )
    }

    #[test]
    fn calibration_default_population() {
        let sc = ScenarioConfig::calibration().build().unwrap();
        let s = &sc.state;
        assert_eq!(s.agents.len(), 54);
        let dyads = s
            .agents
            .iter()
            .filter(|a| a.class == AgentClass::DyadMember)
            .count();
        assert_eq!(dyads, 24);
        assert_eq!(s.groups.len(), 12);
        assert!(s.env.walkable_count() > 0);
    }

    #[test]
    fn calibration_without_dyads() {
        let cfg = ScenarioConfig {
            dyad_fraction: 0.0,
            ..ScenarioConfig::calibration()
        };
        let s = cfg.build().unwrap().state;
        assert_eq!(s.agents.len(), 54);
        assert!(s.groups.is_empty());
        assert!(s.agents.iter().all(|a| a.class == AgentClass::Single));
    }

    #[test]
    fn calibration_spawn_overflow() {
        let cfg = ScenarioConfig {
            population: 400,
            dyad_fraction: 0.0,
            ..ScenarioConfig::calibration()
        };
        assert!(matches!(cfg.build(), Err(Error::SpawnOverflow { .. })));
    }

    #[test]
    fn partners_start_adjacent() {
        let diag = 2f64.sqrt() * CELL_SIZE + 1e-12;
        for seed in 0..100 {
            for cfg in [
                ScenarioConfig {
                    seed,
                    ..ScenarioConfig::calibration()
                },
                ScenarioConfig {
                    seed,
                    ..ScenarioConfig::bottleneck(4.0, 0.5)
                },
            ] {
                let s = cfg.build().unwrap().state;
                for g in &s.groups {
                    assert!(separation(&s, g) <= diag, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn periodic_population_from_density() {
        let cfg = ScenarioConfig::periodic(1.0, 0.5);
        assert_eq!(cfg.population, 72);
        let s = cfg.build().unwrap().state;
        assert_eq!(s.agents.len(), 72);
        assert_eq!(s.groups.len(), 18);
        assert!(s.env.periodic_x);
    }

    #[test]
    fn periodic_over_capacity() {
        let cfg = ScenarioConfig::periodic(7.0, 0.0);
        assert!(matches!(cfg.build(), Err(Error::OverCapacity { .. })));
    }

    #[test]
    fn empty_periodic_corridor_steps() {
        let cfg = ScenarioConfig::periodic(0.0, 0.0);
        let mut s = cfg.build().unwrap().state;
        let mut rng = s.rng();
        let ev = s.step(&mut rng).unwrap();
        assert!(s.agents.is_empty());
        assert_eq!(ev, Default::default());
        assert_eq!(s.step, 1);
    }

    #[test]
    fn bottleneck_opening_cells() {
        let sc = ScenarioConfig::bottleneck(4.0, 0.0).build().unwrap();
        assert_eq!(sc.opening_width, Some(10.0 * CELL_SIZE));
        let s = &sc.state;
        let targets = s.env.cells_of(|k| k == CellKind::Target);
        assert_eq!(targets.len(), 10);
        assert_eq!(s.agents.len(), 400);
    }

    #[test]
    fn bottleneck_geometry_errors() {
        let too_wide = ScenarioConfig::bottleneck(12.0, 0.0);
        assert!(matches!(too_wide.build(), Err(Error::InvalidGeometry(_))));
        let too_narrow = ScenarioConfig::bottleneck(0.4, 0.0);
        assert!(matches!(too_narrow.build(), Err(Error::InvalidGeometry(_))));
        let open = ScenarioConfig::bottleneck(10.0, 0.0).build().unwrap();
        assert_eq!(open.state.env.cells_of(|k| k == CellKind::Target).len(), 25);
    }

    #[test]
    fn odd_dyad_count_rejected() {
        let cfg = ScenarioConfig {
            population: 54,
            dyad_fraction: 0.5,
            ..ScenarioConfig::calibration()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn class_counts_match_fraction() {
        for (pop, frac) in [(72usize, 0.5), (40, 0.25), (54, 24.0 / 54.0), (100, 1.0)] {
            let cfg = ScenarioConfig {
                population: pop,
                ..ScenarioConfig::periodic(pop as f64 / 72.0, frac)
            };
            let s = cfg.build().unwrap().state;
            let members = s.agents.iter().filter(|a| a.group.is_some()).count();
            assert_eq!(members, 2 * ((frac * pop as f64 / 2.0).floor() as usize));
            assert_eq!(s.agents.len() - members, pop - members);
        }
    }
}
