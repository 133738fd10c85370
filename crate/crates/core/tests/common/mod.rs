//! Property checks shared by the invariant tests and the acceptance report.
//! Each returns `Err` with the shrunk counterexample when the property fails.

#![allow(dead_code)]

use std::f64::consts::SQRT_2;

use groupflow::scenarios::ScenarioConfig;
use groupflow::{
    build_distance_field, softmax, Agent, AgentClass, Cell, CellKind, Environment, ExitPolicy,
    Goal, Group, ModelParams, SimState, Weights,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub const DENSITIES: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn report<T: std::fmt::Debug>(
    r: Result<(), proptest::test_runner::TestError<T>>,
) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn periodic(density: f64, dyads: bool, seed: u64) -> SimState {
    let mut cfg = ScenarioConfig::periodic(density, if dyads { 0.5 } else { 0.0 });
    cfg.seed = seed;
    cfg.build().expect("periodic corridor builds").state
}

fn scenario_strategy() -> impl Strategy<Value = (f64, bool, u64)> {
    (
        prop::sample::select(DENSITIES.to_vec()),
        any::<bool>(),
        any::<u64>(),
    )
}

/// No two agents share a cell after any step, in every scenario family.
pub fn exclusion_every_step(cases: u32, steps: u64) -> Result<(), String> {
    let strategy = (0..3usize, any::<bool>(), any::<u64>());
    report(runner(cases).run(&strategy, |(kind, dyads, seed)| {
        let mut cfg = match kind {
            0 => ScenarioConfig::calibration(),
            1 => ScenarioConfig::periodic(2.0, if dyads { 0.5 } else { 0.0 }),
            _ => ScenarioConfig::bottleneck(2.0, if dyads { 0.5 } else { 0.0 }),
        };
        if kind == 0 && !dyads {
            cfg.dyad_fraction = 0.0;
        }
        cfg.seed = seed;
        let mut s = cfg.build().unwrap().state;
        let mut rng = s.rng();
        s.check_exclusion()
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        for _ in 0..steps {
            s.step(&mut rng).unwrap();
            s.check_exclusion()
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
        }
        Ok(())
    }))
}

/// The torus neither loses nor creates agents.
pub fn periodic_conservation(cases: u32, steps: u64) -> Result<(), String> {
    report(
        runner(cases).run(&scenario_strategy(), |(density, dyads, seed)| {
            let mut s = periodic(density, dyads, seed);
            let n = s.agents.len();
            let mut rng = s.rng();
            for k in 0..steps {
                s.step(&mut rng).unwrap();
                prop_assert_eq!(s.on_grid_count(), n, "step {}", k);
            }
            Ok(())
        }),
    )
}

/// Every agent's move distribution is a probability vector.
pub fn move_distribution_normalized(cases: u32) -> Result<(), String> {
    let strategy = (scenario_strategy(), 0u64..200);
    report(
        runner(cases).run(&strategy, |((density, dyads, seed), warm)| {
            let mut s = periodic(density, dyads, seed);
            let mut rng = s.rng();
            for _ in 0..warm {
                s.step(&mut rng).unwrap();
            }
            for a in &s.agents {
                let dist = s.move_distribution(a.id);
                prop_assert!(!dist.is_empty());
                prop_assert!(dist.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
                let total: f64 = dist.iter().map(|&(_, p)| p).sum();
                prop_assert!(
                    (total - 1.0).abs() <= 1e-9,
                    "agent {} sums to {}",
                    a.id,
                    total
                );
            }
            Ok(())
        }),
    )
}

/// Cohesion stays within [-1, 1] for arbitrary dyad layouts and motion.
pub fn cohesion_in_range(cases: u32) -> Result<(), String> {
    let cell = || (0i32..24, 0i32..24);
    let vel = || (-1i32..=1, -1i32..=1);
    let strategy = (cell(), cell(), vel(), vel(), 0usize..9, any::<bool>());
    report(runner(cases).run(&strategy, |(a, b, va, vb, k, torus)| {
        prop_assume!(a != b);
        let mut env = Environment::new(24, 24, 0.4).unwrap();
        env.periodic_x = torus;
        let mut agents = vec![
            Agent::new(0, Cell::new(a.0, a.1), 1.6),
            Agent::new(1, Cell::new(b.0, b.1), 1.6),
        ];
        agents[0].vel = va;
        agents[1].vel = vb;
        for ag in &mut agents {
            ag.group = Some(0);
            ag.class = AgentClass::DyadMember;
        }
        let groups = vec![Group {
            id: 0,
            members: vec![0, 1],
        }];
        let s = SimState::new(
            env,
            agents,
            groups,
            Goal::Drift { dx: 1, dy: 0 },
            Weights::default(),
            ModelParams::default(),
            0.25,
            0,
            ExitPolicy::Keep,
        )
        .unwrap();
        let (dx, dy) = groupflow::grid::MOORE[k];
        let c = Cell::new(a.0 + dx, a.1 + dy);
        let v = s.cohesion_value(c, 0).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v), "{}", v);
        Ok(())
    }))
}

/// Textbook O(V^2) Dijkstra over the same move graph.
pub fn brute_force_distances(env: &Environment, sources: &[Cell]) -> Vec<f64> {
    let n = env.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    for &s in sources {
        dist[env.index(s)] = 0.0;
    }
    loop {
        let mut best = None;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && best.map_or(true, |b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        let here = env.cell_at(u);
        for &(dx, dy) in &groupflow::grid::MOORE[1..] {
            if let Some(next) = env.step_target(here, dx, dy) {
                let len = if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 } * env.cell_size();
                let j = env.index(next);
                if dist[u] + len < dist[j] {
                    dist[j] = dist[u] + len;
                }
            }
        }
    }
    for (i, d) in dist.iter_mut().enumerate() {
        if !env.is_walkable(env.cell_at(i)) {
            *d = f64::INFINITY;
        }
    }
    dist
}

/// The goal distance field agrees with brute-force Dijkstra on random maps.
pub fn distance_field_matches_dijkstra(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(prop::bool::weighted(0.3), 2500),
        prop::collection::vec(0usize..2500, 1..4),
        any::<bool>(),
    );
    report(runner(cases).run(&strategy, |(walls, picks, torus)| {
        let mut env = Environment::new(50, 50, 0.4).unwrap();
        env.periodic_x = torus;
        for (i, &w) in walls.iter().enumerate() {
            if w {
                env.set(env.cell_at(i), CellKind::Obstacle);
            }
        }
        let sources: Vec<Cell> = picks.iter().map(|&i| env.cell_at(i)).collect();
        for &s in &sources {
            env.set(s, CellKind::Walkable);
        }
        let field = build_distance_field(&env, &sources).unwrap();
        let oracle = brute_force_distances(&env, &sources);
        for (i, (&got, &want)) in field.values().iter().zip(&oracle).enumerate() {
            let ok = if want.is_infinite() {
                got.is_infinite()
            } else {
                (got - want).abs() <= 1e-9
            };
            prop_assert!(ok, "cell {:?}: {} vs {}", env.cell_at(i), got, want);
        }
        Ok(())
    }))
}

/// Two runs from the same configuration produce identical records.
pub fn seed_determinism(cases: u32, steps: u64) -> Result<(), String> {
    let strategy = (0..3usize, any::<u64>());
    report(runner(cases).run(&strategy, |(kind, seed)| {
        let mut cfg = match kind {
            0 => ScenarioConfig::calibration(),
            1 => ScenarioConfig::periodic(1.5, 0.5),
            _ => ScenarioConfig::bottleneck(3.0, 0.5),
        };
        cfg.seed = seed;
        let go = || {
            let mut s = cfg.build().unwrap().state;
            groupflow::record::run(&mut s, steps, 0, "").unwrap()
        };
        let (a, b) = (go(), go());
        prop_assert!(a == b, "records differ for seed {}", seed);
        Ok(())
    }))
}

/// Adding a constant to every utility leaves the softmax unchanged.
pub fn softmax_shift_invariant(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(-50.0f64..50.0, 1..10),
        -100.0f64..100.0,
    );
    report(runner(cases).run(&strategy, |(u, shift)| {
        let shifted: Vec<f64> = u.iter().map(|x| x + shift).collect();
        for (p, q) in softmax(&u).iter().zip(softmax(&shifted)) {
            prop_assert!((p - q).abs() <= 1e-12, "{} vs {}", p, q);
        }
        Ok(())
    }))
}
