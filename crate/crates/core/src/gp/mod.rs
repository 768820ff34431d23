//! Genetic programming engine: evolves fusion functions whose fitness is the
//! EER of the fused training scores.

pub mod init;
pub mod operators;
pub mod tree;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{Label, ScoreDataset};
use crate::error::{Error, Result};
use crate::metrics::{sweep_roc_quiet, FusedScores};

pub use init::{ramped_half_and_half, terminal_set};
pub use operators::{crossover, mutate, tournament_select};
pub use tree::{ExpressionTree, Node, Op, Terminal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population_size: usize,
    /// Generations evaluated, the initial population included.
    pub max_generations: usize,
    pub max_depth: usize,
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub p_reproduction: f64,
    pub tournament_size: usize,
    pub tournament_p: f64,
    pub n_constants: usize,
    pub fitness_target: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 500,
            max_generations: 50,
            max_depth: 8,
            init_depth_min: 2,
            init_depth_max: 8,
            p_crossover: 0.45,
            p_mutation: 0.50,
            p_reproduction: 0.05,
            tournament_size: 10,
            tournament_p: 0.80,
            n_constants: 50,
            fitness_target: 0.001,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(format!("evolution config: {msg}")));
        let probs = [self.p_crossover, self.p_mutation, self.p_reproduction, self.tournament_p];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if (self.p_crossover + self.p_mutation + self.p_reproduction - 1.0).abs() > 1e-9 {
            return bad("crossover, mutation and reproduction probabilities must sum to 1");
        }
        if self.population_size == 0 || self.max_generations == 0 || self.tournament_size == 0 {
            return bad("sizes must be positive");
        }
        if self.n_constants < 2 {
            return bad("at least 2 constants are required");
        }
        if self.init_depth_min < 1 || self.init_depth_min > self.init_depth_max || self.init_depth_max > self.max_depth {
            return bad("initial depths must satisfy 1 <= min <= max <= max_depth");
        }
        Ok(())
    }

    /// Individuals copied unchanged into each new generation.
    pub fn elite_count(&self) -> usize {
        ((self.population_size as f64 * self.p_reproduction).round() as usize).min(self.population_size)
    }
}

/// Deterministic sub-stream `stream` of the generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Column-major copy of a dataset for batched tree evaluation.
#[derive(Clone, Debug)]
pub struct ScoreColumns {
    pub modality_count: usize,
    genuine: Vec<Vec<f64>>,
    impostor: Vec<Vec<f64>>,
    n_genuine: usize,
    n_impostor: usize,
}

impl ScoreColumns {
    pub fn new(ds: &ScoreDataset) -> Self {
        let cols = |label| (0..ds.modality_count).map(|m| ds.column(label, m)).collect();
        Self {
            modality_count: ds.modality_count,
            genuine: cols(Label::Genuine),
            impostor: cols(Label::Impostor),
            n_genuine: ds.genuine.len(),
            n_impostor: ds.impostor.len(),
        }
    }

    pub fn fuse(&self, tree: &ExpressionTree) -> Result<FusedScores> {
        tree.check_modalities(self.modality_count)?;
        FusedScores::new(
            tree.root().eval_columns(&self.genuine, self.n_genuine),
            tree.root().eval_columns(&self.impostor, self.n_impostor),
        )
    }

    pub fn fitness(&self, tree: &ExpressionTree) -> Result<f64> {
        Ok(sweep_roc_quiet(&self.fuse(tree)?).eer)
    }
}

/// Fused genuine and impostor scores of `tree` over `ds`, in order.
pub fn eval_population(tree: &ExpressionTree, ds: &ScoreDataset) -> Result<FusedScores> {
    if ds.modality_count == 0 {
        return Err(Error::Validation("empty modality set".to_owned()));
    }
    ScoreColumns::new(ds).fuse(tree)
}

/// EER of the standard threshold sweep over the fused scores; lower is better.
pub fn fitness(tree: &ExpressionTree, ds: &ScoreDataset) -> Result<f64> {
    ScoreColumns::new(ds).fitness(tree)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub worst: f64,
    pub mean: f64,
    pub std: f64,
    pub best_tree: ExpressionTree,
    /// How each member of this generation was produced.
    pub elites: usize,
    pub crossovers: usize,
    pub mutations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    pub best: ExpressionTree,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

impl EvolutionResult {
    /// CSV with header `generation,best,worst,mean,std`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best,worst,mean,std\n");
        for g in &self.history {
            let _ = writeln!(out, "{},{},{},{},{}", g.generation, g.best, g.worst, g.mean, g.std);
        }
        out
    }
}

pub fn evolve(train: &ScoreDataset, cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    evolve_with(train, cfg, |_, _, _| {})
}

/// Runs the generational loop. `observe` sees every generation's population
/// and fitness before breeding.
///
/// Random draws come from one ChaCha8 sub-stream per generation (stream 0
/// builds the initial population, stream `g` breeds generation `g`), and all
/// of them happen on this thread in a fixed order; only fitness evaluation
/// runs in parallel.
pub fn evolve_with<F>(train: &ScoreDataset, cfg: &EvolutionConfig, mut observe: F) -> Result<EvolutionResult>
where
    F: FnMut(usize, &[ExpressionTree], &[f64]),
{
    cfg.validate()?;
    train.ensure_evaluable()?;
    let columns = ScoreColumns::new(train);
    let terminals = terminal_set(train.modality_count, cfg.n_constants);
    let n_elite = cfg.elite_count();
    let p_cross_given_bred = if cfg.p_crossover + cfg.p_mutation > 0.0 {
        cfg.p_crossover / (cfg.p_crossover + cfg.p_mutation)
    } else {
        0.0
    };

    let mut population = ramped_half_and_half(cfg, &terminals, &mut rng_stream(cfg.seed, 0));
    let mut known: Vec<Option<f64>> = vec![None; population.len()];
    let mut counts = (0usize, 0usize, 0usize);
    let mut history = Vec::new();

    for generation in 0.. {
        let fit: Vec<f64> = population
            .par_iter()
            .zip(&known)
            .map(|(tree, k)| match k {
                Some(f) => Ok(*f),
                None => columns.fitness(tree),
            })
            .collect::<Result<_>>()?;
        observe(generation, &population, &fit);

        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));
        let n = fit.len() as f64;
        let mean = fit.iter().sum::<f64>() / n;
        let std = (fit.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n).sqrt();
        let best_idx = order[0];
        history.push(GenerationStats {
            generation,
            best: fit[best_idx],
            worst: fit[order[order.len() - 1]],
            mean: mean.clamp(fit[best_idx], fit[order[order.len() - 1]]),
            std,
            best_tree: population[best_idx].clone(),
            elites: counts.0,
            crossovers: counts.1,
            mutations: counts.2,
        });
        log::debug!("generation {generation}: best {:.6} mean {:.6}", fit[best_idx], mean);

        if fit[best_idx] < cfg.fitness_target || generation + 1 >= cfg.max_generations {
            return Ok(EvolutionResult {
                best: population[best_idx].clone(),
                best_fitness: fit[best_idx],
                history,
            });
        }

        let mut rng = rng_stream(cfg.seed, generation as u64 + 1);
        let mut next = Vec::with_capacity(population.len());
        let mut next_known = Vec::with_capacity(population.len());
        for &i in &order[..n_elite] {
            next.push(population[i].clone());
            next_known.push(Some(fit[i]));
        }
        counts = (n_elite, 0, 0);
        while next.len() < cfg.population_size {
            let parent = tournament_select(&population, &fit, cfg, &mut rng);
            let child = if rng.random::<f64>() < p_cross_given_bred {
                counts.1 += 1;
                let other = tournament_select(&population, &fit, cfg, &mut rng);
                crossover(parent, other, cfg, &mut rng)
            } else {
                counts.2 += 1;
                mutate(parent, cfg, &terminals, &mut rng)
            };
            next.push(child);
            next_known.push(None);
        }
        population = next;
        known = next_known;
    }
    unreachable!("generation loop exits through the termination check")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_synthetic, ScoreTuple, SyntheticSpec};
    use crate::metrics::eer_oracle;

    fn small_cfg(seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            population_size: 60,
            max_generations: 8,
            seed,
            ..EvolutionConfig::default()
        }
    }

    fn overlapping(seed: u64) -> ScoreDataset {
        let spec = SyntheticSpec {
            genuine_mean: vec![0.6, 0.55, 0.52],
            genuine_std: vec![0.05; 3],
            impostor_mean: vec![0.5; 3],
            impostor_std: vec![0.05; 3],
            ..SyntheticSpec::uniform(3, (0.0, 1.0), (0.0, 1.0), 200, 300, seed)
        };
        generate_synthetic(&spec).unwrap()
    }

    #[test]
    fn default_config_valid() {
        let cfg = EvolutionConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.elite_count(), 25);
        let bad = EvolutionConfig { p_mutation: 0.6, ..cfg.clone() };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig { init_depth_max: 9, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identity_like_tree() {
        let ds = overlapping(1);
        let tree = ExpressionTree::parse("(add (var 0) (mul (var 1) (const 0)))").unwrap();
        let fs = eval_population(&tree, &ds).unwrap();
        assert_eq!(fs.genuine, ds.column(Label::Genuine, 0));
        assert_eq!(fs.impostor, ds.column(Label::Impostor, 0));
    }

    #[test]
    fn constant_tree_is_chance() {
        let ds = overlapping(2);
        let tree = ExpressionTree::parse("(add (const 0.3) (const 0.2))").unwrap();
        let fs = eval_population(&tree, &ds).unwrap();
        assert!(fs.genuine.iter().chain(&fs.impostor).all(|&s| s == 0.5));
        assert_eq!(fitness(&tree, &ds).unwrap(), 0.5);
    }

    #[test]
    fn batch_matches_per_tuple() {
        let ds = overlapping(3);
        let cfg = small_cfg(3);
        let terms = terminal_set(3, 50);
        for tree in ramped_half_and_half(&cfg, &terms, &mut rng_stream(3, 0)) {
            let fs = eval_population(&tree, &ds).unwrap();
            let by_row: Vec<f64> = ds.genuine.iter().map(|t| tree.eval(&t.scores)).collect();
            assert_eq!(fs.genuine, by_row);
            let by_row: Vec<f64> = ds.impostor.iter().map(|t| tree.eval(&t.scores)).collect();
            assert_eq!(fs.impostor, by_row);
        }
    }

    #[test]
    fn modality_mismatch_rejected() {
        let ds = overlapping(4);
        let tree = ExpressionTree::parse("(add (var 0) (var 5))").unwrap();
        assert!(matches!(fitness(&tree, &ds), Err(Error::ModalityMismatch { .. })));
    }

    #[test]
    fn perfectly_separating_tree() {
        let g = (0..10).map(|i| ScoreTuple { scores: vec![0.9 + i as f64 * 1e-3, 0.1], label: Label::Genuine });
        let i = (0..10).map(|i| ScoreTuple { scores: vec![0.1 + i as f64 * 1e-3, 0.9], label: Label::Impostor });
        let ds = ScoreDataset::new("sep", 2, g.collect(), i.collect()).unwrap();
        let tree = ExpressionTree::parse("(sub (var 0) (var 1))").unwrap();
        assert_eq!(fitness(&tree, &ds).unwrap(), 0.0);
    }

    #[test]
    fn evolution_is_deterministic_and_elitist() {
        let ds = overlapping(5);
        let a = evolve(&ds, &small_cfg(7)).unwrap();
        let b = evolve(&ds, &small_cfg(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 8);
        for w in a.history.windows(2) {
            assert!(w[1].best <= w[0].best);
        }
        for g in &a.history {
            assert!(g.best <= g.mean && g.mean <= g.worst);
        }
        assert_eq!(a.best_fitness, a.history.last().unwrap().best);
        assert_eq!(fitness(&a.best, &ds).unwrap(), a.best_fitness);
    }

    #[test]
    fn operator_accounting() {
        let ds = overlapping(6);
        let cfg = EvolutionConfig { population_size: 100, ..small_cfg(8) };
        let r = evolve(&ds, &cfg).unwrap();
        assert_eq!((r.history[0].elites, r.history[0].crossovers, r.history[0].mutations), (0, 0, 0));
        let (mut c, mut m) = (0, 0);
        for g in &r.history[1..] {
            assert_eq!(g.elites, 5);
            assert_eq!(g.elites + g.crossovers + g.mutations, 100);
            c += g.crossovers;
            m += g.mutations;
        }
        let frac = c as f64 / (c + m) as f64;
        assert!((frac - 0.45 / 0.95).abs() < 0.06, "{frac}");
    }

    #[test]
    fn separable_modality_terminates_early() {
        let mut spec = SyntheticSpec::uniform(2, (0.0, 1.0), (0.0, 1.0), 200, 200, 11);
        spec.genuine_mean[0] = 20.0;
        let ds = generate_synthetic(&spec).unwrap();
        let fused_a = FusedScores::new(ds.column(Label::Genuine, 0), ds.column(Label::Impostor, 0)).unwrap();
        assert_eq!(eer_oracle(&fused_a), 0.0);
        let r = evolve(&ds, &EvolutionConfig { population_size: 100, ..small_cfg(1) }).unwrap();
        assert_eq!(r.best_fitness, 0.0);
        assert!(r.history.len() < 8);
    }

    #[test]
    fn rejects_empty_training_set() {
        let ds = ScoreDataset {
            name: "e".into(),
            modality_count: 2,
            genuine: vec![],
            impostor: vec![],
        };
        assert!(matches!(evolve(&ds, &small_cfg(0)), Err(Error::Validation(_))));
    }

    #[test]
    fn history_csv_header() {
        let r = evolve(&overlapping(9), &EvolutionConfig { max_generations: 2, ..small_cfg(2) }).unwrap();
        let csv = r.history_csv();
        assert!(csv.starts_with("generation,best,worst,mean,std\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
