//! Static floor fields.
//!
//! Distances are accumulated as exact `(orthogonal, diagonal)` step counts
//! and converted to meters only at the end, so two shortest-path
//! computations over the same graph agree bit for bit no matter in which
//! order they relax edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Environment, MOORE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldTag {
    GoalDistance,
    ObstacleProximity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    width: usize,
    values: Vec<f64>,
    pub tag: FieldTag,
}

impl ScalarField {
    pub fn get(&self, c: Cell) -> f64 {
        self.values[c.y as usize * self.width + c.x as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Octile path length in meters for the given step counts.
#[inline]
pub fn octile_length(orthogonal: u32, diagonal: u32, cell_size: f64) -> f64 {
    (orthogonal as f64 + diagonal as f64 * SQRT_2) * cell_size
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    key: f64,
    steps: (u32, u32),
    index: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn multi_source_dijkstra<F>(env: &Environment, sources: &[Cell], step: F) -> Vec<Option<(u32, u32)>>
where
    F: Fn(Cell, i32, i32) -> Option<Cell>,
{
    let mut best: Vec<Option<(u32, u32)>> = vec![None; env.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        let i = env.index(s);
        if best[i].is_none() {
            best[i] = Some((0, 0));
            heap.push(Frontier {
                key: 0.0,
                steps: (0, 0),
                index: i,
            });
        }
    }
    while let Some(Frontier { key, steps, index }) = heap.pop() {
        let (o, d) = best[index].expect("settled cells have a cost");
        if (o, d) != steps {
            continue;
        }
        let here = env.cell_at(index);
        for &(dx, dy) in &MOORE[1..] {
            let Some(next) = step(here, dx, dy) else {
                continue;
            };
            let cand = if dx != 0 && dy != 0 {
                (o, d + 1)
            } else {
                (o + 1, d)
            };
            let cand_key = cand.0 as f64 + cand.1 as f64 * SQRT_2;
            let j = env.index(next);
            let better = match best[j] {
                None => true,
                Some((bo, bd)) => cand_key < bo as f64 + bd as f64 * SQRT_2,
            };
            if better {
                best[j] = Some(cand);
                heap.push(Frontier {
                    key: cand_key,
                    steps: cand,
                    index: j,
                });
            }
        }
        debug_assert!(key.is_finite());
    }
    best
}

/// Shortest walking distance in meters from every cell to the nearest
/// source. Obstacles and unreachable cells hold `f64::INFINITY`.
pub fn build_distance_field(env: &Environment, sources: &[Cell]) -> Result<ScalarField> {
    if sources.is_empty() {
        return Err(Error::EmptySources);
    }
    if let Some(&bad) = sources.iter().find(|&&s| !env.is_walkable(s)) {
        return Err(Error::SourceNotWalkable(bad));
    }
    let best = multi_source_dijkstra(env, sources, |c, dx, dy| env.step_target(c, dx, dy));
    let cs = env.cell_size();
    Ok(ScalarField {
        width: env.width(),
        values: best
            .into_iter()
            .map(|b| b.map_or(f64::INFINITY, |(o, d)| octile_length(o, d, cs)))
            .collect(),
        tag: FieldTag::GoalDistance,
    })
}

/// Distance in meters from each walkable cell to the closest obstacle cell
/// (zero on obstacles, infinity when the grid has none).
pub fn build_obstacle_field(env: &Environment) -> ScalarField {
    let obstacles: Vec<Cell> = env.cells_of(|k| !k.is_walkable());
    let best = multi_source_dijkstra(env, &obstacles, |c, dx, dy| {
        env.wrap(c.x + dx, c.y + dy).filter(|&n| env.is_walkable(n))
    });
    let cs = env.cell_size();
    ScalarField {
        width: env.width(),
        values: best
            .into_iter()
            .map(|b| b.map_or(f64::INFINITY, |(o, d)| octile_length(o, d, cs)))
            .collect(),
        tag: FieldTag::ObstacleProximity,
    }
}
