//! Measurements over recorded runs: fundamental diagrams, speeds by class,
//! dyad relative positions, density maps and bottleneck outflow.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentClass, AgentId};
use crate::error::{Error, Result};
use crate::record::{RunRecord, Snapshot, NO_GROUP};

/// Axis-aligned rectangle in meters. A cell is inside when its center is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementArea {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl MeasurementArea {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        MeasurementArea { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, s: &Snapshot, cell_size: f64) -> bool {
        let cx = (s.x as f64 + 0.5) * cell_size;
        let cy = (s.y as f64 + 0.5) * cell_size;
        cx >= self.x0 && cx < self.x1 && cy >= self.y0 && cy < self.y1
    }
}

/// One stay of an agent inside a measurement area. `exit` is `None` when
/// the agent was still inside at the end of the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AreaEvent {
    pub agent: AgentId,
    pub enter: u64,
    pub exit: Option<u64>,
}

/// Entry/exit log of `area`. An agent leaving the grid counts as exiting.
pub fn area_events(record: &RunRecord, area: &MeasurementArea) -> Vec<AreaEvent> {
    let mut open: HashMap<AgentId, usize> = HashMap::new();
    let mut events: Vec<AreaEvent> = Vec::new();
    let mut inside_now: Vec<AgentId> = Vec::new();
    for (step, frame) in record.frames() {
        inside_now.clear();
        inside_now.extend(
            frame
                .iter()
                .filter(|s| area.contains(s, record.cell_size))
                .map(|s| s.id),
        );
        inside_now.sort_unstable();
        for &id in &inside_now {
            open.entry(id).or_insert_with(|| {
                events.push(AreaEvent {
                    agent: id,
                    enter: step,
                    exit: None,
                });
                events.len() - 1
            });
        }
        let mut left: Vec<AgentId> = open
            .keys()
            .copied()
            .filter(|id| inside_now.binary_search(id).is_err())
            .collect();
        left.sort_unstable();
        for id in left {
            let k = open.remove(&id).expect("open event");
            events[k].exit = Some(step);
        }
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdPoint {
    pub window_start: u64,
    /// p/m²
    pub density: f64,
    /// m/s
    pub speed: f64,
    /// p/(m·s)
    pub flow: f64,
}

/// One fundamental-diagram point per full post-warm-up window of `window`
/// steps. Windows in which nobody was inside the area are skipped.
pub fn fundamental_diagram(
    record: &RunRecord,
    area: &MeasurementArea,
    window: u64,
) -> Vec<FdPoint> {
    let mut out = Vec::new();
    if window == 0 {
        return out;
    }
    let first = record.warmup_steps as usize;
    let total = record.steps();
    let mut start = first;
    while start + window as usize <= total {
        let mut count = 0usize;
        let mut travelled = 0.0;
        for k in start..start + window as usize {
            for s in record.frame(k) {
                if area.contains(s, record.cell_size) {
                    count += 1;
                    travelled += s.displacement_cells();
                }
            }
        }
        if count > 0 {
            let density = count as f64 / window as f64 / area.area();
            let speed = travelled * record.cell_size / (count as f64 * record.dt);
            out.push(FdPoint {
                window_start: start as u64,
                density,
                speed,
                flow: density * speed,
            });
        }
        start += window as usize;
    }
    out
}

/// Mean speeds (m/s) by class; `None` where the class has no samples.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeedTable {
    pub single: Option<f64>,
    pub dyad: Option<f64>,
    pub population: Option<f64>,
}

impl SpeedTable {
    pub fn rows(&self) -> [(&'static str, Option<f64>); 3] {
        [
            ("single", self.single),
            ("dyad", self.dyad),
            ("population", self.population),
        ]
    }
}

/// Per-agent mean speed inside the area after warm-up, averaged over the
/// agents of each class.
pub fn speed_by_class(record: &RunRecord, area: &MeasurementArea) -> SpeedTable {
    let mut per_agent: HashMap<AgentId, (f64, usize)> = HashMap::new();
    for (_, frame) in record.steady_frames() {
        for s in frame.iter().filter(|s| area.contains(s, record.cell_size)) {
            let e = per_agent.entry(s.id).or_insert((0.0, 0));
            e.0 += s.displacement_cells();
            e.1 += 1;
        }
    }
    let mut ids: Vec<AgentId> = per_agent.keys().copied().collect();
    ids.sort_unstable();
    let mut sums = [(0.0, 0usize); 2];
    for id in ids {
        let (dist, n) = per_agent[&id];
        let v = dist * record.cell_size / (n as f64 * record.dt);
        let k = match record.class_of(id) {
            AgentClass::Single => 0,
            AgentClass::DyadMember => 1,
        };
        sums[k].0 += v;
        sums[k].1 += 1;
    }
    let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    SpeedTable {
        single: mean(sums[0]),
        dyad: mean(sums[1]),
        population: mean((sums[0].0 + sums[1].0, sums[0].1 + sums[1].1)),
    }
}

/// Square-binned 2-D histogram over `[lo, hi)²`, row-major in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub lo: f64,
    pub bin: f64,
    pub n: usize,
    pub mass: Vec<f64>,
}

impl Histogram2D {
    pub fn new(lo: f64, hi: f64, bin: f64) -> Self {
        let n = ((hi - lo) / bin).round() as usize;
        Histogram2D {
            lo,
            bin,
            n,
            mass: vec![0.0; n * n],
        }
    }

    /// Bin of a coordinate. Lattice offsets land on bin edges, so a small
    /// tolerance keeps them in the bin that starts at the edge.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let k = ((v - self.lo) / self.bin + 1e-9).floor();
        (k >= 0.0 && (k as usize) < self.n).then_some(k as usize)
    }

    pub fn add(&mut self, x: f64, y: f64, w: f64) {
        if let (Some(i), Some(j)) = (self.bin_of(x), self.bin_of(y)) {
            self.mass[j * self.n + i] += w;
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.mass[iy * self.n + ix]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            self.mass.iter_mut().for_each(|m| *m /= t);
        }
    }

    /// Bin `(ix, iy)` with the most mass; ties go to the lowest index.
    pub fn mode(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = k;
            }
        }
        (best % self.n, best / self.n)
    }

    /// L1 distance between two histograms on the same bins.
    pub fn l1(&self, other: &Histogram2D) -> f64 {
        assert_eq!(self.mass.len(), other.mass.len(), "histogram shapes differ");
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// True when the mode sits at zero longitudinal offset, i.e. partners
    /// walking side by side.
    pub fn mode_is_lateral(&self) -> bool {
        let (ix, iy) = self.mode();
        let zero = self.bin_of(0.0);
        Some(ix) == zero && Some(iy) != zero
    }
}

/// Default binning of relative positions: 0.2 m bins over [-2, 2] m.
pub fn relative_position_bins() -> Histogram2D {
    Histogram2D::new(-2.0, 2.0, 0.2)
}

/// Raw (unnormalized) counts of partner offsets seen from every group
/// member, in the frame where the walking direction `heading` is +x.
/// Samples need both agents inside `area` after warm-up.
pub fn relative_position_counts(
    record: &RunRecord,
    area: &MeasurementArea,
    heading: (f64, f64),
    mut hist: Histogram2D,
) -> Result<Histogram2D> {
    if record.groups.is_empty() {
        return Err(Error::NoDyads);
    }
    let norm = heading.0.hypot(heading.1);
    let (hx, hy) = (heading.0 / norm, heading.1 / norm);
    let mut where_: Vec<Option<&Snapshot>> = vec![None; record.classes.len()];
    for (_, frame) in record.steady_frames() {
        where_.iter_mut().for_each(|w| *w = None);
        for s in frame {
            where_[s.id as usize] = Some(s);
        }
        for s in frame.iter().filter(|s| s.group != NO_GROUP) {
            if !area.contains(s, record.cell_size) {
                continue;
            }
            for &m in &record.groups[s.group as usize].members {
                if m == s.id {
                    continue;
                }
                let Some(p) = where_[m as usize] else {
                    continue;
                };
                if !area.contains(p, record.cell_size) {
                    continue;
                }
                let (dx, dy) = record.delta(s.cell(), p.cell());
                let (ox, oy) = (dx * record.cell_size, dy * record.cell_size);
                let along = ox * hx + oy * hy;
                let across = -ox * hy + oy * hx;
                hist.add(along, across, 1.0);
            }
        }
    }
    Ok(hist)
}

/// Probability mass of partner offsets; see [`relative_position_counts`].
pub fn relative_position_histogram(
    record: &RunRecord,
    area: &MeasurementArea,
    heading: (f64, f64),
    bins: Histogram2D,
) -> Result<Histogram2D> {
    let mut h = relative_position_counts(record, area, heading, bins)?;
    h.normalize();
    Ok(h)
}

/// Per-cell density map in p/m², row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub frames: usize,
}

impl DensityMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Occupancy frequency of every cell over the post-warm-up frames, divided
/// by the cell area.
pub fn cumulative_mean_density(record: &RunRecord) -> DensityMap {
    let mut counts = vec![0u64; record.width * record.height];
    let mut frames = 0usize;
    for (_, frame) in record.steady_frames() {
        frames += 1;
        for s in frame {
            counts[s.y as usize * record.width + s.x as usize] += 1;
        }
    }
    let cell_area = record.cell_size * record.cell_size;
    let values = counts
        .into_iter()
        .map(|c| {
            if frames == 0 {
                0.0
            } else {
                c as f64 / frames as f64 / cell_area
            }
        })
        .collect();
    DensityMap {
        width: record.width,
        height: record.height,
        values,
        frames,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outflow {
    pub crossings: usize,
    /// seconds
    pub duration: f64,
    /// p/s
    pub j: f64,
    /// p/(m·s)
    pub specific: f64,
}

/// `J = N / t` over the exits logged in steps `[from, to)`, and the same
/// per meter of opening.
pub fn bottleneck_flow(record: &RunRecord, from: u64, to: u64, width: f64) -> Result<Outflow> {
    flow_from_exits(
        record.exits.iter().map(|e| e.step),
        from,
        to,
        record.dt,
        width,
    )
}

pub fn flow_from_exits(
    exit_steps: impl Iterator<Item = u64>,
    from: u64,
    to: u64,
    dt: f64,
    width: f64,
) -> Result<Outflow> {
    if to <= from || width <= 0.0 {
        return Err(Error::EmptyWindow);
    }
    let crossings = exit_steps.filter(|s| (from..to).contains(s)).count();
    let duration = (to - from) as f64 * dt;
    let j = crossings as f64 / duration;
    Ok(Outflow {
        crossings,
        duration,
        j,
        specific: j / width,
    })
}
