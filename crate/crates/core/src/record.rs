//! Per-step trajectory recording.

use std::io::{self, Read, Write};

use crate::agent::{AgentClass, AgentId, Group};
use crate::engine::{ExitEvent, SimState};
use crate::error::Result;
use crate::grid::Cell;

pub const NO_GROUP: u32 = u32::MAX;

/// One agent after one step: where it stands and how it got there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Snapshot {
    pub id: AgentId,
    pub group: u32,
    pub x: u16,
    pub y: u16,
    /// Realized displacement during the step, in cells.
    pub dx: i8,
    pub dy: i8,
}

impl Snapshot {
    pub fn cell(&self) -> Cell {
        Cell::new(self.x as i32, self.y as i32)
    }

    pub fn displacement_cells(&self) -> f64 {
        (self.dx as f64).hypot(self.dy as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub cell_size: f64,
    pub dt: f64,
    pub width: usize,
    pub height: usize,
    pub periodic_x: bool,
    pub periodic_y: bool,
    pub warmup_steps: u64,
    pub seed: u64,
    /// Echo of the configuration that produced the run.
    pub config: String,
    pub classes: Vec<AgentClass>,
    pub groups: Vec<Group>,
    /// `snapshots[offsets[k]..offsets[k + 1]]` is the frame after step `k`.
    offsets: Vec<usize>,
    snapshots: Vec<Snapshot>,
    pub exits: Vec<ExitEvent>,
}

impl RunRecord {
    pub fn new(state: &SimState, warmup_steps: u64, config: impl Into<String>) -> Self {
        RunRecord {
            cell_size: state.env.cell_size(),
            dt: state.dt,
            width: state.env.width(),
            height: state.env.height(),
            periodic_x: state.env.periodic_x,
            periodic_y: state.env.periodic_y,
            warmup_steps,
            seed: state.seed,
            config: config.into(),
            classes: state.agents.iter().map(|a| a.class).collect(),
            groups: state.groups.clone(),
            offsets: vec![0],
            snapshots: Vec::new(),
            exits: Vec::new(),
        }
    }

    /// Appends the frame describing `state` after its latest step.
    pub fn push_frame(&mut self, state: &SimState) {
        for a in state.agents.iter().filter(|a| a.on_grid) {
            self.snapshots.push(Snapshot {
                id: a.id,
                group: a.group.unwrap_or(NO_GROUP),
                x: a.pos.x as u16,
                y: a.pos.y as u16,
                dx: a.vel.0 as i8,
                dy: a.vel.1 as i8,
            });
        }
        self.offsets.push(self.snapshots.len());
    }

    /// Appends a frame given explicitly, e.g. when reloading a record.
    pub fn push_snapshots(&mut self, frame: &[Snapshot]) {
        self.snapshots.extend_from_slice(frame);
        self.offsets.push(self.snapshots.len());
    }

    pub fn steps(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn frame(&self, step: usize) -> &[Snapshot] {
        &self.snapshots[self.offsets[step]..self.offsets[step + 1]]
    }

    pub fn frames(&self) -> impl Iterator<Item = (u64, &[Snapshot])> + '_ {
        (0..self.steps()).map(move |k| (k as u64, self.frame(k)))
    }

    /// Frames at or after the warm-up.
    pub fn steady_frames(&self) -> impl Iterator<Item = (u64, &[Snapshot])> + '_ {
        self.frames().filter(move |(k, _)| !self.is_excluded(*k))
    }

    pub fn is_excluded(&self, step: u64) -> bool {
        step < self.warmup_steps
    }

    pub fn class_of(&self, id: AgentId) -> AgentClass {
        self.classes[id as usize]
    }

    /// Minimum-image displacement between two cells in cell units.
    pub fn delta(&self, from: Cell, to: Cell) -> (f64, f64) {
        let mut dx = (to.x - from.x) as f64;
        let mut dy = (to.y - from.y) as f64;
        if self.periodic_x {
            let w = self.width as f64;
            dx -= w * (dx / w).round();
        }
        if self.periodic_y {
            let h = self.height as f64;
            dy -= h * (dy / h).round();
        }
        (dx, dy)
    }
}

/// `step,id,group,x,y,dx,dy`, one row per agent on the grid per frame;
/// `group` is empty for singles.
pub fn write_trajectory<W: Write>(w: W, record: &RunRecord) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "id", "group", "x", "y", "dx", "dy"])?;
    for (k, frame) in record.frames() {
        for s in frame {
            let group = if s.group == NO_GROUP {
                String::new()
            } else {
                s.group.to_string()
            };
            out.write_record([
                k.to_string(),
                s.id.to_string(),
                group,
                s.x.to_string(),
                s.y.to_string(),
                s.dx.to_string(),
                s.dy.to_string(),
            ])?;
        }
    }
    out.flush()
}

/// `step,agents`, one row per frame, so empty frames survive a round trip.
pub fn write_frames<W: Write>(w: W, record: &RunRecord) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "agents"])?;
    for (k, frame) in record.frames() {
        out.write_record([k.to_string(), frame.len().to_string()])?;
    }
    out.flush()
}

/// `step,agent,x,y`
pub fn write_exits<W: Write>(w: W, record: &RunRecord) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "agent", "x", "y"])?;
    for e in &record.exits {
        out.write_record([
            e.step.to_string(),
            e.agent.to_string(),
            e.cell.x.to_string(),
            e.cell.y.to_string(),
        ])?;
    }
    out.flush()
}

fn bad(line: Option<u64>, what: impl std::fmt::Display) -> io::Error {
    let at = line.map(|l| format!("line {l}: ")).unwrap_or_default();
    io::Error::new(io::ErrorKind::InvalidData, format!("{at}{what}"))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> io::Result<T> {
    let line = rec.position().map(|p| p.line());
    let raw = rec
        .get(i)
        .ok_or_else(|| bad(line, format!("missing column {i}")))?;
    raw.parse()
        .map_err(|_| bad(line, format!("cannot parse {raw:?}")))
}

impl RunRecord {
    /// Fills an empty record (as made by [`RunRecord::new`]) from the
    /// outputs of [`write_frames`], [`write_trajectory`] and [`write_exits`].
    pub fn load<R1: Read, R2: Read, R3: Read>(
        &mut self,
        frames: R1,
        trajectory: R2,
        exits: R3,
    ) -> io::Result<()> {
        let counts: Vec<usize> = csv::Reader::from_reader(frames)
            .records()
            .map(|r| field(&r?, 1))
            .collect::<io::Result<_>>()?;
        let mut rows = csv::Reader::from_reader(trajectory);
        let mut rows = rows.records();
        for (k, &n) in counts.iter().enumerate() {
            let mut frame = Vec::with_capacity(n);
            for _ in 0..n {
                let rec = rows
                    .next()
                    .ok_or_else(|| bad(None, format!("trajectory ends inside frame {k}")))??;
                let step: usize = field(&rec, 0)?;
                if step != k {
                    return Err(bad(
                        rec.position().map(|p| p.line()),
                        format!("expected step {k}, found {step}"),
                    ));
                }
                let group = match rec.get(2) {
                    Some("") | None => NO_GROUP,
                    Some(_) => field(&rec, 2)?,
                };
                frame.push(Snapshot {
                    id: field(&rec, 1)?,
                    group,
                    x: field(&rec, 3)?,
                    y: field(&rec, 4)?,
                    dx: field(&rec, 5)?,
                    dy: field(&rec, 6)?,
                });
            }
            self.push_snapshots(&frame);
        }
        if rows.next().is_some() {
            return Err(bad(None, "trajectory has rows beyond the last frame"));
        }
        for rec in csv::Reader::from_reader(exits).records() {
            let rec = rec?;
            self.exits.push(ExitEvent {
                step: field(&rec, 0)?,
                agent: field(&rec, 1)?,
                cell: Cell::new(field(&rec, 2)?, field(&rec, 3)?),
            });
        }
        Ok(())
    }
}

/// Steps `state` up to `steps` times, recording every frame. Stops early
/// once no agent is left on the grid and none is waiting to re-enter.
pub fn run(state: &mut SimState, steps: u64, warmup_steps: u64, config: &str) -> Result<RunRecord> {
    let mut rng = state.rng();
    let mut record = RunRecord::new(state, warmup_steps, config);
    for _ in 0..steps {
        let events = state.step(&mut rng)?;
        if cfg!(debug_assertions) {
            state.check_exclusion()?;
        }
        record.exits.extend(events.exits);
        record.push_frame(state);
        if state.on_grid_count() == 0 && state.pending_count() == 0 && !state.agents.is_empty() {
            break;
        }
    }
    Ok(record)
}
