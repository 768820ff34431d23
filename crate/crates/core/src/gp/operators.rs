//! Selection and variation operators. Every operator returns a tree with a
//! function root and depth within the configured limit.

use rand::Rng;

use super::init::{Builder, Method};
use super::tree::{ExpressionTree, Terminal};
use super::EvolutionConfig;

/// Node-pair draws attempted before crossover falls back to copying parent 1.
pub const CROSSOVER_RETRIES: usize = 10;

/// Draws `size` contestants with replacement, ranks them by fitness
/// (ascending, draw order breaks ties) and returns the index of rank `r` with
/// probability `p * (1 - p)^r`; the worst rank takes the residual mass.
pub fn tournament_index<R: Rng>(fitness: &[f64], size: usize, p: f64, rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "tournament over an empty population");
    let contestants: Vec<usize> = (0..size.max(1)).map(|_| rng.random_range(0..fitness.len())).collect();
    pick_ranked(contestants, fitness, p, rng)
}

/// Ranks `contestants` by fitness and draws one with the geometric schedule.
pub fn pick_ranked<R: Rng>(mut contestants: Vec<usize>, fitness: &[f64], p: f64, rng: &mut R) -> usize {
    contestants.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let last = contestants.len() - 1;
    for &c in &contestants[..last] {
        if rng.random::<f64>() < p {
            return c;
        }
    }
    contestants[last]
}

pub fn tournament_select<'a, R: Rng>(
    population: &'a [ExpressionTree],
    fitness: &[f64],
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> &'a ExpressionTree {
    &population[tournament_index(fitness, cfg.tournament_size, cfg.tournament_p, rng)]
}

/// Grafts parent 2's subtree at `donor` into parent 1 at pre-order `slot`.
pub fn crossover_at(parent1: &ExpressionTree, slot: usize, parent2: &ExpressionTree, donor: usize) -> ExpressionTree {
    let (graft, _) = parent2.root().get(donor).expect("donor index in range");
    ExpressionTree::from_function(parent1.root().replaced(slot, graft.clone()))
}

/// Subtree crossover keeping only the first offspring. Parent 1's root is
/// never a swap point. Depth violations are retried, then parent 1 is copied.
pub fn crossover<R: Rng>(
    parent1: &ExpressionTree,
    parent2: &ExpressionTree,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> ExpressionTree {
    let (n1, n2) = (parent1.size(), parent2.size());
    for _ in 0..CROSSOVER_RETRIES {
        let slot = rng.random_range(1..n1);
        let donor = rng.random_range(0..n2);
        let child = crossover_at(parent1, slot, parent2, donor);
        if child.depth() <= cfg.max_depth {
            return child;
        }
    }
    parent1.clone()
}

/// Replaces the non-root node at `slot` with a grown subtree of at most
/// `replacement_depth` levels.
pub fn mutate_at<R: Rng>(
    parent: &ExpressionTree,
    slot: usize,
    replacement_depth: usize,
    terminals: &[Terminal],
    rng: &mut R,
) -> ExpressionTree {
    let fresh = Builder::new(terminals).build(Method::Grow, replacement_depth, 0, rng);
    ExpressionTree::from_function(parent.root().replaced(slot, fresh))
}

/// Subtree mutation: a uniformly chosen non-root node is replaced by a grow
/// subtree whose depth limit is drawn so the result stays within `max_depth`.
pub fn mutate<R: Rng>(parent: &ExpressionTree, cfg: &EvolutionConfig, terminals: &[Terminal], rng: &mut R) -> ExpressionTree {
    let slot = rng.random_range(1..parent.size());
    let (_, depth) = parent.root().get(slot).expect("slot in range");
    let room = cfg.max_depth.saturating_sub(depth);
    let replacement_depth = rng.random_range(0..=room);
    mutate_at(parent, slot, replacement_depth, terminals, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::init::{ramped_half_and_half, terminal_set};
    use crate::gp::rng_stream;

    #[test]
    fn tournament_best_wins_at_rate_p() {
        let mut fitness = vec![0.5; 10];
        fitness[3] = 0.0;
        let mut rng = rng_stream(1, 0);
        let trials = 10_000;
        let wins = (0..trials)
            .filter(|_| pick_ranked((0..10).collect(), &fitness, 0.8, &mut rng) == 3)
            .count();
        let rate = wins as f64 / trials as f64;
        assert!((0.78..=0.82).contains(&rate), "rate {rate}");
    }

    #[test]
    fn residual_mass_goes_to_worst() {
        let fitness: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut rng = rng_stream(4, 0);
        let trials = 200_000;
        let worst = (0..trials)
            .filter(|_| pick_ranked((0..10).rev().collect(), &fitness, 0.8, &mut rng) == 9)
            .count();
        // 0.2^9 = 5.12e-7 of the mass
        assert!(worst <= 3, "{worst}");
        let second = (0..trials)
            .filter(|_| pick_ranked((0..10).collect(), &fitness, 0.8, &mut rng) == 1)
            .count() as f64
            / trials as f64;
        assert!((second - 0.16).abs() < 0.01, "{second}");
    }

    #[test]
    fn tournament_rank_schedule() {
        // large population: duplicate contestants are rare
        let fitness: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let mut rng = rng_stream(2, 0);
        let mut top = 0;
        let n = 20_000;
        for _ in 0..n {
            let mut probe = rng.clone();
            let mut drawn: Vec<usize> = (0..10).map(|_| probe.random_range(0..1000)).collect();
            drawn.sort();
            if tournament_index(&fitness, 10, 0.8, &mut rng) == drawn[0] {
                top += 1;
            }
        }
        let rate = top as f64 / n as f64;
        assert!((0.78..=0.82).contains(&rate), "rate {rate}");
    }

    #[test]
    fn single_tree_population() {
        let mut rng = rng_stream(0, 0);
        for _ in 0..100 {
            assert_eq!(tournament_index(&[0.3], 10, 0.8, &mut rng), 0);
        }
    }

    fn population(seed: u64) -> (EvolutionConfig, Vec<Terminal>, Vec<ExpressionTree>) {
        let cfg = EvolutionConfig { population_size: 200, ..EvolutionConfig::default() };
        let terms = terminal_set(4, 50);
        let pop = ramped_half_and_half(&cfg, &terms, &mut rng_stream(seed, 0));
        (cfg, terms, pop)
    }

    #[test]
    fn identical_parents_same_slot() {
        let tree = ExpressionTree::parse("(add (mul (var 0) (var 1)) (const 0.5))").unwrap();
        for i in 1..tree.size() {
            assert_eq!(crossover_at(&tree, i, &tree, i), tree);
        }
    }

    #[test]
    fn crossover_closure() {
        let (cfg, _, pop) = population(5);
        let mut rng = rng_stream(5, 1);
        for k in 0..2000 {
            let a = &pop[k % pop.len()];
            let b = &pop[(k * 7 + 3) % pop.len()];
            let c = crossover(a, b, &cfg, &mut rng);
            assert!(c.root().is_function());
            assert!(c.depth() <= cfg.max_depth);
            assert!(c.check_modalities(4).is_ok());
        }
    }

    #[test]
    fn mutation_closure_and_determinism() {
        let (cfg, terms, pop) = population(6);
        let deep: Vec<&ExpressionTree> = pop.iter().filter(|t| t.depth() == 8).collect();
        assert!(!deep.is_empty());
        let mut rng = rng_stream(6, 1);
        for t in deep.iter().cycle().take(2000) {
            let m = mutate(t, &cfg, &terms, &mut rng);
            assert!(m.root().is_function());
            assert!(m.depth() <= 8);
        }
        let a = mutate(deep[0], &cfg, &terms, &mut rng_stream(9, 9));
        let b = mutate(deep[0], &cfg, &terms, &mut rng_stream(9, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn forced_zero_depth_mutation_is_terminal() {
        let tree = ExpressionTree::parse("(add (mul (var 0) (var 1)) (const 0.5))").unwrap();
        let terms = terminal_set(2, 2);
        let m = mutate_at(&tree, 1, 0, &terms, &mut rng_stream(0, 0));
        let (slot, _) = m.root().get(1).unwrap();
        assert!(!slot.is_function());
        assert_eq!(m.depth(), 1);
    }
}
