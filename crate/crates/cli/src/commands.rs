use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;

use groupflow::calibration::{self, IntRange, Reference, SweepSpec};
use groupflow::config::Config;
use groupflow::metrics::{
    bottleneck_flow, cumulative_mean_density, fundamental_diagram, relative_position_bins,
    relative_position_histogram, speed_by_class, DensityMap, FdPoint, MeasurementArea,
};
use groupflow::output::{self, FdSummaryRow, FlowRow};
use groupflow::record::{self, RunRecord};
use groupflow::scenarios::{Scenario, ScenarioConfig, ScenarioKind};

use crate::outdir::OutDir;
use crate::Common;

fn load(common: &Common, fallback: Config) -> anyhow::Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Config::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => fallback,
    };
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(r) = common.replicas {
        cfg.campaign.replicas = r;
        if let Some(s) = &mut cfg.sweep {
            s.replicas = r;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_kind(cfg: &Config, kind: ScenarioKind) -> anyhow::Result<()> {
    if cfg.scenario.kind != kind {
        return Err(groupflow::Error::InvalidConfig(format!(
            "this command needs a {} scenario, the configuration describes a {}",
            kind.name(),
            cfg.scenario.kind.name()
        ))
        .into());
    }
    Ok(())
}

fn manifest(verb: &str, cfg: &Config) -> String {
    format!(
        "# groupflow {}\n# command: {verb}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()
    )
}

/// Seed of replica `replica` of campaign item `item`.
fn job_seed(base: u64, item: usize, replica: u32) -> u64 {
    base ^ ((item as u64) << 32 | replica as u64)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

struct Geometry {
    area: MeasurementArea,
    heading: (f64, f64),
    opening: Option<f64>,
}

impl From<&Scenario> for Geometry {
    fn from(s: &Scenario) -> Self {
        Geometry {
            area: s.area,
            heading: s.heading,
            opening: s.opening_width,
        }
    }
}

fn metric_files(cfg: &ScenarioConfig) -> Vec<String> {
    let mut names: Vec<String> = [
        "summary.txt",
        "speeds.csv",
        "fd.csv",
        "density.csv",
        "density.pgm",
    ]
    .map(String::from)
    .to_vec();
    if cfg.dyad_members() > 0 {
        names.extend(["relpos.csv".to_string(), "relpos.pgm".to_string()]);
    }
    if cfg.kind == ScenarioKind::BottleneckRoom {
        names.push("flow.csv".to_string());
    }
    names
}

fn write_metrics(
    out: &OutDir,
    cfg: &ScenarioConfig,
    geo: &Geometry,
    rec: &RunRecord,
) -> anyhow::Result<()> {
    let speeds = speed_by_class(rec, &geo.area);
    output::write_speeds(out.create("speeds.csv")?, &speeds)?;
    let fd = fundamental_diagram(rec, &geo.area, cfg.window_steps);
    output::write_fd(out.create("fd.csv")?, &fd)?;
    let map = cumulative_mean_density(rec);
    output::write_matrix(out.create("density.csv")?, map.width, &map.values)?;
    output::write_pgm(
        out.create("density.pgm")?,
        map.width,
        &map.values,
        max_of(&map.values),
    )?;
    if !rec.groups.is_empty() {
        let h = relative_position_histogram(rec, &geo.area, geo.heading, relative_position_bins())?;
        output::write_matrix(out.create("relpos.csv")?, h.n, &h.mass)?;
        output::write_pgm(out.create("relpos.pgm")?, h.n, &h.mass, max_of(&h.mass))?;
    }
    let mut summary = format!(
        "kind = {}\nseed = {}\nsteps = {}\nwarmup_steps = {}\nagents = {}\ngroups = {}\nexits = {}\n",
        cfg.kind.name(),
        cfg.seed,
        rec.steps(),
        rec.warmup_steps,
        rec.classes.len(),
        rec.groups.len(),
        rec.exits.len()
    );
    if let Some(width) = geo.opening {
        let flow = bottleneck_flow(rec, rec.warmup_steps, rec.steps() as u64, width)?;
        output::write_flow(
            out.create("flow.csv")?,
            &[FlowRow {
                width,
                dyad_fraction: cfg.dyad_fraction,
                replica: 0,
                outflow: flow,
            }],
        )?;
        summary += &format!("specific_flow = {}\n", flow.specific);
    }
    for (class, v) in speeds.rows() {
        if let Some(v) = v {
            summary += &format!("speed_{class} = {v}\n");
        }
    }
    out.write_str("summary.txt", &summary)
}

const RECORD_FILES: [&str; 3] = ["frames.csv", "trajectory.csv", "exits.csv"];

pub fn run(common: &Common) -> anyhow::Result<()> {
    let cfg = load(common, Config::new(ScenarioConfig::calibration()))?;
    let out = OutDir::open(&common.out, common.force)?;
    let mut names = metric_files(&cfg.scenario);
    names.extend(RECORD_FILES.map(String::from));
    names.push("manifest.toml".into());
    out.claim(&names)?;

    let text = manifest("run", &cfg);
    let mut sc = cfg.scenario.build()?;
    let geo = Geometry::from(&sc);
    let rec = record::run(
        &mut sc.state,
        cfg.scenario.steps,
        cfg.scenario.warmup_steps,
        &text,
    )?;
    out.write_str("manifest.toml", &text)?;
    record::write_frames(out.create("frames.csv")?, &rec)?;
    record::write_trajectory(out.create("trajectory.csv")?, &rec)?;
    record::write_exits(out.create("exits.csv")?, &rec)?;
    write_metrics(&out, &cfg.scenario, &geo, &rec)
}

pub fn analyze(dir: &Path, out: &Path, force: bool) -> anyhow::Result<()> {
    let path = dir.join("manifest.toml");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = Config::parse(&text).with_context(|| format!("in {}", path.display()))?;
    let out = OutDir::open(out, force)?;
    out.claim(&metric_files(&cfg.scenario))?;

    let sc = cfg.scenario.build()?;
    let mut rec = RunRecord::new(&sc.state, cfg.scenario.warmup_steps, text);
    let open = |name: &str| {
        let p = dir.join(name);
        std::fs::File::open(&p).with_context(|| format!("opening {}", p.display()))
    };
    rec.load(
        open("frames.csv")?,
        open("trajectory.csv")?,
        open("exits.csv")?,
    )
    .with_context(|| format!("loading the record in {}", dir.display()))?;
    write_metrics(&out, &cfg.scenario, &Geometry::from(&sc), &rec)
}

/// Desk-scale lattice around the published optimum.
fn desk_sweep() -> SweepSpec {
    SweepSpec {
        delta: IntRange::new(5, 9, 1),
        kappa_c: IntRange::new(10, 14, 1),
        replicas: 10,
        ..SweepSpec::full(10)
    }
}

pub fn sweep(common: &Common) -> anyhow::Result<()> {
    let mut fallback = Config::new(ScenarioConfig::calibration());
    fallback.sweep = Some(desk_sweep());
    let mut cfg = load(common, fallback)?;
    require_kind(&cfg, ScenarioKind::CalibrationCorridor)?;
    let mut spec = cfg.sweep.clone().unwrap_or_else(desk_sweep);
    if let Some(r) = common.replicas {
        spec.replicas = r;
    }
    if let Some(s) = common.seed {
        spec.seed_base = s;
    }
    cfg.sweep = Some(spec.clone());
    let out = OutDir::open(&common.out, common.force)?;
    out.claim(&["manifest.toml".into(), "sweep.csv".into()])?;

    let result = calibration::sweep(&spec, &cfg.scenario, &Reference::default())?;
    out.write_str("manifest.toml", &manifest("sweep", &cfg))?;
    output::write_sweep(out.create("sweep.csv")?, &result)?;
    if let Some(b) = result.best() {
        println!(
            "best: delta = {}, kappa_c = {}, objective = {:.6}",
            b.delta, b.kappa_c, b.objective
        );
    }
    Ok(())
}

fn fd_name(density: f64, dyads: f64, replica: u32) -> String {
    format!("fd_d{density}_y{dyads}_r{replica}.csv")
}

pub fn fd(common: &Common, densities: &[f64], dyads: &[f64]) -> anyhow::Result<()> {
    let mut cfg = load(common, Config::new(ScenarioConfig::periodic(1.0, 0.0)))?;
    require_kind(&cfg, ScenarioKind::PeriodicCorridor)?;
    if !densities.is_empty() {
        cfg.campaign.densities = densities.to_vec();
    }
    if !dyads.is_empty() {
        cfg.campaign.dyad_fractions = dyads.to_vec();
    }
    cfg.validate()?;
    let camp = cfg.campaign.clone();

    let mut jobs = Vec::new();
    for (fi, &f) in camp.dyad_fractions.iter().enumerate() {
        for (di, &d) in camp.densities.iter().enumerate() {
            let item = fi * camp.densities.len() + di;
            for r in 0..camp.replicas {
                let mut sc = cfg.scenario.clone();
                sc.periodic_corridor.target_density = d;
                sc.population = sc.periodic_corridor.population();
                sc.dyad_fraction = f;
                sc.seed = job_seed(cfg.scenario.seed, item, r);
                sc.validate()?;
                jobs.push((d, f, r, sc));
            }
        }
    }
    let out = OutDir::open(&common.out, common.force)?;
    let mut names: Vec<String> = jobs
        .iter()
        .map(|(d, f, r, _)| fd_name(*d, *f, *r))
        .collect();
    names.extend(["manifest.toml".into(), "fd_summary.csv".into()]);
    out.claim(&names)?;

    let results: Vec<groupflow::Result<Vec<FdPoint>>> = jobs
        .par_iter()
        .map(|(_, _, _, sc)| {
            let mut s = sc.build()?;
            let rec = record::run(&mut s.state, sc.steps, sc.warmup_steps, "")?;
            Ok(fundamental_diagram(&rec, &s.area, sc.window_steps))
        })
        .collect();

    out.write_str("manifest.toml", &manifest("fd", &cfg))?;
    let mut summary = Vec::new();
    for ((d, f, r, _), res) in jobs.iter().zip(results) {
        let pts = res?;
        output::write_fd(out.create(&fd_name(*d, *f, *r))?, &pts)?;
        let n = pts.len().max(1) as f64;
        summary.push(FdSummaryRow {
            target_density: *d,
            dyad_fraction: *f,
            replica: *r,
            density: pts.iter().map(|p| p.density).sum::<f64>() / n,
            speed: pts.iter().map(|p| p.speed).sum::<f64>() / n,
            flow: pts.iter().map(|p| p.flow).sum::<f64>() / n,
        });
    }
    output::write_fd_summary(out.create("fd_summary.csv")?, &summary)?;
    Ok(())
}

fn density_name(width: f64, dyads: f64, ext: &str) -> String {
    format!("density_w{width}_y{dyads}.{ext}")
}

pub fn bottleneck(common: &Common, widths: &[f64], dyads: &[f64]) -> anyhow::Result<()> {
    let mut cfg = load(common, Config::new(ScenarioConfig::bottleneck(4.0, 0.0)))?;
    require_kind(&cfg, ScenarioKind::BottleneckRoom)?;
    if !widths.is_empty() {
        cfg.campaign.widths = widths.to_vec();
    }
    let requested = if dyads.is_empty() {
        cfg.campaign.dyad_fractions.clone()
    } else {
        dyads.to_vec()
    };
    // The singles-only baseline always comes first.
    let mut fractions = vec![0.0];
    fractions.extend(requested.into_iter().filter(|&f| f != 0.0));
    fractions.dedup();
    cfg.campaign.dyad_fractions = fractions.clone();
    cfg.validate()?;
    let camp = cfg.campaign.clone();
    if camp.widths.is_empty() {
        bail!("no bottleneck width given");
    }

    let mut jobs = Vec::new();
    for (fi, &f) in fractions.iter().enumerate() {
        for (wi, &w) in camp.widths.iter().enumerate() {
            let item = fi * camp.widths.len() + wi;
            for r in 0..camp.replicas {
                let mut sc = cfg.scenario.clone();
                sc.bottleneck_room.bottleneck_width = w;
                sc.dyad_fraction = f;
                sc.seed = job_seed(cfg.scenario.seed, item, r);
                sc.validate()?;
                jobs.push((w, f, r, sc));
            }
        }
    }
    let out = OutDir::open(&common.out, common.force)?;
    let mut names = vec!["manifest.toml".to_string(), "flow.csv".to_string()];
    for &w in &camp.widths {
        for &f in &fractions {
            names.push(density_name(w, f, "csv"));
            names.push(density_name(w, f, "pgm"));
        }
    }
    out.claim(&names)?;

    let results: Vec<groupflow::Result<(groupflow::metrics::Outflow, Option<DensityMap>)>> = jobs
        .par_iter()
        .map(|(_, _, r, sc)| {
            let mut s = sc.build()?;
            let width = s
                .opening_width
                .expect("bottleneck scenarios have an opening");
            let rec = record::run(&mut s.state, sc.steps, sc.warmup_steps, "")?;
            let flow = bottleneck_flow(&rec, sc.warmup_steps, rec.steps() as u64, width)?;
            let map = (*r == 0).then(|| cumulative_mean_density(&rec));
            Ok((flow, map))
        })
        .collect();

    out.write_str("manifest.toml", &manifest("bottleneck", &cfg))?;
    let mut rows = Vec::new();
    let mut maps: Vec<(f64, f64, DensityMap)> = Vec::new();
    for ((w, f, r, _), res) in jobs.iter().zip(results) {
        let (flow, map) = res?;
        rows.push(FlowRow {
            width: *w,
            dyad_fraction: *f,
            replica: *r,
            outflow: flow,
        });
        if let Some(m) = map {
            maps.push((*w, *f, m));
        }
    }
    output::write_flow(out.create("flow.csv")?, &rows)?;
    // Panels of one width share a grey scale so they compare directly.
    for &w in &camp.widths {
        let panels: Vec<&(f64, f64, DensityMap)> = maps.iter().filter(|m| m.0 == w).collect();
        let scale = panels
            .iter()
            .map(|m| max_of(&m.2.values))
            .fold(0.0, f64::max);
        for (_, f, m) in panels {
            output::write_matrix(out.create(&density_name(w, *f, "csv"))?, m.width, &m.values)?;
            output::write_pgm(
                out.create(&density_name(w, *f, "pgm"))?,
                m.width,
                &m.values,
                scale,
            )?;
        }
    }
    Ok(())
}
