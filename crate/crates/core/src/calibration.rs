//! Grid-search calibration of the group parameters `(delta, kappa_c)`
//! against reference walking speeds and, optionally, a reference
//! distribution of dyad relative positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    relative_position_bins, relative_position_counts, speed_by_class, Histogram2D, SpeedTable,
};
use crate::record::run;
use crate::scenarios::{ScenarioConfig, ScenarioKind};
use crate::weights::DELTA_UNIT_M;

/// Mean speeds observed in the controlled experiment the corridor mimics.
pub const EXPERIMENT_SPEEDS: SpeedTable = SpeedTable {
    single: Some(1.32),
    dyad: Some(1.30),
    population: Some(1.31),
};

/// Inclusive integer range `from, from + step, ..., <= to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub from: i64,
    pub to: i64,
    #[serde(default = "one")]
    pub step: i64,
}

fn one() -> i64 {
    1
}

impl IntRange {
    pub fn new(from: i64, to: i64, step: i64) -> Self {
        IntRange { from, to, step }
    }

    pub fn values(&self) -> Vec<i64> {
        if self.step <= 0 || self.to < self.from {
            return Vec::new();
        }
        (self.from..=self.to).step_by(self.step as usize).collect()
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// In units of [`DELTA_UNIT_M`].
    pub delta: IntRange,
    pub kappa_c: IntRange,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default)]
    pub seed_base: u64,
    /// Weight of the squared speed error.
    #[serde(default = "one_f")]
    pub speed_weight: f64,
    /// Weight of the histogram L1 distance.
    #[serde(default = "half")]
    pub histogram_weight: f64,
}

fn default_replicas() -> u32 {
    10
}
fn one_f() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}

impl SweepSpec {
    /// The lattice explored for the original calibration: both parameters
    /// over `0..=30` in unit steps.
    pub fn full(replicas: u32) -> Self {
        SweepSpec {
            delta: IntRange::new(0, 30, 1),
            kappa_c: IntRange::new(0, 30, 1),
            replicas,
            seed_base: 0,
            speed_weight: 1.0,
            histogram_weight: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.is_empty() || self.kappa_c.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep ranges must be non-empty".into(),
            ));
        }
        if self.delta.from < 0 || self.kappa_c.from < 0 {
            return Err(Error::InvalidConfig(
                "sweep ranges must be non-negative".into(),
            ));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("replicas must be at least 1".into()));
        }
        Ok(())
    }

    /// Lattice points in index order: `delta` major, `kappa_c` minor.
    pub fn points(&self) -> Vec<(i64, i64)> {
        let ks = self.kappa_c.values();
        self.delta
            .values()
            .into_iter()
            .flat_map(|d| ks.iter().map(move |&k| (d, k)))
            .collect()
    }

    pub fn replica_seed(&self, point: usize, replica: u32) -> u64 {
        self.seed_base ^ ((point as u64) << 32 | replica as u64)
    }
}

/// What a set of replicas produced: mean speeds per class and the pooled
/// relative-position histogram (normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub speeds: SpeedTable,
    pub histogram: Option<Histogram2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub speeds: SpeedTable,
    pub histogram: Option<Histogram2D>,
}

impl Default for Reference {
    fn default() -> Self {
        Reference {
            speeds: EXPERIMENT_SPEEDS,
            histogram: None,
        }
    }
}

fn complete(t: &SpeedTable, what: &'static str) -> Result<[f64; 3]> {
    match (t.single, t.dyad, t.population) {
        (Some(s), Some(d), Some(p)) => Ok([s, d, p]),
        _ => Err(Error::IncompleteStats(what)),
    }
}

/// `w_speed * sum of squared speed errors + w_hist * L1(histograms)`. The
/// histogram term is skipped when the reference carries no histogram.
pub fn objective(
    stats: &SimStats,
    reference: &Reference,
    w_speed: f64,
    w_hist: f64,
) -> Result<f64> {
    let sim = complete(&stats.speeds, "simulated speeds")?;
    let refs = complete(&reference.speeds, "reference speeds")?;
    let sse: f64 = sim.iter().zip(refs).map(|(s, r)| (s - r).powi(2)).sum();
    let l1 = match (&reference.histogram, &stats.histogram) {
        (None, _) => 0.0,
        (Some(r), Some(s)) => s.l1(r),
        (Some(_), None) => return Err(Error::IncompleteStats("relative-position histogram")),
    };
    Ok(w_speed * sse + w_hist * l1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub index: usize,
    pub delta: i64,
    pub kappa_c: i64,
    pub speeds: SpeedTable,
    /// L1 distance to the reference histogram, if there is one.
    pub histogram_distance: Option<f64>,
    pub objective: f64,
    /// Set when a replica failed; the point then ranks last.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
    /// Point indices, best first.
    pub ranking: Vec<usize>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&PointResult> {
        self.ranking.first().map(|&i| &self.points[i])
    }

    pub fn rank_of(&self, index: usize) -> usize {
        self.ranking
            .iter()
            .position(|&i| i == index)
            .expect("index in ranking")
    }
}

struct Replica {
    speeds: SpeedTable,
    counts: Option<Histogram2D>,
}

fn run_replica(cfg: &ScenarioConfig) -> Result<Replica> {
    let mut sc = cfg.build()?;
    let record = run(&mut sc.state, cfg.steps, cfg.warmup_steps, "")?;
    let speeds = speed_by_class(&record, &sc.area);
    let counts =
        match relative_position_counts(&record, &sc.area, sc.heading, relative_position_bins()) {
            Ok(h) => Some(h),
            Err(Error::NoDyads) => None,
            Err(e) => return Err(e),
        };
    Ok(Replica { speeds, counts })
}

/// Configuration of one replica of one lattice point.
pub fn point_config(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    index: usize,
    replica: u32,
) -> ScenarioConfig {
    let (delta, kappa_c) = spec.points()[index];
    let mut cfg = base.clone();
    cfg.weights.delta = delta as f64 * DELTA_UNIT_M;
    cfg.weights.kappa_c = kappa_c as f64;
    cfg.seed = spec.replica_seed(index, replica);
    cfg
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<f64>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(replicas: &[Replica]) -> SimStats {
    let speeds = SpeedTable {
        single: mean_of(replicas.iter().map(|r| r.speeds.single)),
        dyad: mean_of(replicas.iter().map(|r| r.speeds.dyad)),
        population: mean_of(replicas.iter().map(|r| r.speeds.population)),
    };
    let mut pooled: Option<Histogram2D> = None;
    for h in replicas.iter().filter_map(|r| r.counts.as_ref()) {
        match &mut pooled {
            None => pooled = Some(h.clone()),
            Some(p) => p.mass.iter_mut().zip(&h.mass).for_each(|(a, b)| *a += b),
        }
    }
    if let Some(p) = &mut pooled {
        p.normalize();
    }
    SimStats {
        speeds,
        histogram: pooled,
    }
}

/// Runs every replica of every lattice point on the current rayon pool and
/// ranks the points by objective. Results do not depend on the pool size.
pub fn sweep(
    spec: &SweepSpec,
    base: &ScenarioConfig,
    reference: &Reference,
) -> Result<SweepResult> {
    spec.validate()?;
    if base.kind != ScenarioKind::CalibrationCorridor {
        return Err(Error::InvalidConfig(format!(
            "sweeps run on the calibration corridor, not {}",
            base.kind.name()
        )));
    }
    let lattice = spec.points();
    let jobs: Vec<(usize, u32)> = (0..lattice.len())
        .flat_map(|p| (0..spec.replicas).map(move |r| (p, r)))
        .collect();
    let outcomes: Vec<Result<Replica>> = jobs
        .par_iter()
        .map(|&(p, r)| run_replica(&point_config(base, spec, p, r)))
        .collect();

    let per_point = spec.replicas as usize;
    let mut outcomes = outcomes.into_iter();
    let mut points = Vec::with_capacity(lattice.len());
    for (index, &(delta, kappa_c)) in lattice.iter().enumerate() {
        let mut replicas = Vec::with_capacity(per_point);
        let mut failure = None;
        for outcome in outcomes.by_ref().take(per_point) {
            match outcome {
                Ok(r) => replicas.push(r),
                Err(e) => {
                    failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let stats = aggregate(&replicas);
        let histogram_distance = match (&reference.histogram, &stats.histogram) {
            (Some(r), Some(s)) => Some(s.l1(r)),
            _ => None,
        };
        let (objective, failure) = match failure {
            Some(f) => (f64::INFINITY, Some(f)),
            None => match objective(&stats, reference, spec.speed_weight, spec.histogram_weight) {
                Ok(v) => (v, None),
                Err(e) => (f64::INFINITY, Some(e.to_string())),
            },
        };
        points.push(PointResult {
            index,
            delta,
            kappa_c,
            speeds: stats.speeds,
            histogram_distance,
            objective,
            failure,
        });
    }
    let mut ranking: Vec<usize> = (0..points.len()).collect();
    ranking.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pa.failure
            .is_some()
            .cmp(&pb.failure.is_some())
            .then(pa.objective.total_cmp(&pb.objective))
            .then(a.cmp(&b))
    });
    Ok(SweepResult { points, ranking })
}
