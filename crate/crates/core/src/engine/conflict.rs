use rand::Rng;

use crate::agent::GroupId;
use crate::grid::Cell;

/// Parallel-update conflict resolution. `proposals[i]` is `(current,
/// target)` for agent `i`; the result holds each agent's final cell. When
/// several agents claim the same cell one of them, chosen uniformly, gets
/// it and the others stay put. Staying is never contested because no agent
/// may target an occupied cell.
pub fn resolve_conflicts<R: Rng>(proposals: &[(Cell, Cell)], rng: &mut R) -> Vec<Cell> {
    resolve_with_friction(proposals, &[], 0.0, rng)
}

/// Like [`resolve_conflicts`], except that a cell contested by agents of
/// different groups stays empty with probability `friction` and every
/// claimant keeps its place. `groups[i]` is agent `i`'s group; members of
/// one group never block each other. An empty `groups` means all singles.
pub fn resolve_with_friction<R: Rng>(
    proposals: &[(Cell, Cell)],
    groups: &[Option<GroupId>],
    friction: f64,
    rng: &mut R,
) -> Vec<Cell> {
    let mut finals: Vec<Cell> = proposals.iter().map(|&(from, _)| from).collect();
    let mut claims: Vec<(Cell, usize)> = proposals
        .iter()
        .enumerate()
        .filter(|(_, (from, to))| from != to)
        .map(|(i, &(_, to))| (to, i))
        .collect();
    claims.sort_unstable();
    for same in claims.chunk_by(|a, b| a.0 == b.0) {
        let winner = if same.len() == 1 {
            same[0].1
        } else {
            let group_of = |i: usize| groups.get(i).copied().flatten();
            let kin = group_of(same[0].1).is_some()
                && same.iter().all(|c| group_of(c.1) == group_of(same[0].1));
            if friction > 0.0 && !kin && rng.gen::<f64>() < friction {
                continue;
            }
            same[rng.gen_range(0..same.len())].1
        };
        finals[winner] = same[0].0;
    }
    finals
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn disjoint_proposals_granted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = [
            (Cell::new(0, 0), Cell::new(1, 0)),
            (Cell::new(0, 1), Cell::new(1, 1)),
            (Cell::new(5, 5), Cell::new(5, 5)),
        ];
        let f = resolve_conflicts(&p, &mut rng);
        assert_eq!(f, vec![Cell::new(1, 0), Cell::new(1, 1), Cell::new(5, 5)]);
    }

    #[test]
    fn fair_two_way_conflict() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = [
            (Cell::new(0, 0), Cell::new(1, 0)),
            (Cell::new(2, 0), Cell::new(1, 0)),
        ];
        let trials = 10_000;
        let mut first = 0;
        for _ in 0..trials {
            let f = resolve_conflicts(&p, &mut rng);
            assert_ne!(f[0], f[1]);
            if f[0] == Cell::new(1, 0) {
                first += 1;
                assert_eq!(f[1], Cell::new(2, 0));
            } else {
                assert_eq!(f[0], Cell::new(0, 0));
            }
        }
        let share = first as f64 / trials as f64;
        assert!((share - 0.5).abs() <= 0.02, "share {share}");
    }

    #[test]
    fn staying_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = [
            (Cell::new(1, 0), Cell::new(1, 0)),
            (Cell::new(0, 0), Cell::new(0, 1)),
            (Cell::new(1, 1), Cell::new(0, 1)),
        ];
        for _ in 0..100 {
            let f = resolve_conflicts(&p, &mut rng);
            assert_eq!(f[0], Cell::new(1, 0));
            assert_ne!(f[1], f[2]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p: Vec<(Cell, Cell)> = (0..6)
            .map(|i| (Cell::new(i, 0), Cell::new(i % 2, 1)))
            .collect();
        let a = resolve_conflicts(&p, &mut ChaCha8Rng::seed_from_u64(11));
        let b = resolve_conflicts(&p, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }
}
