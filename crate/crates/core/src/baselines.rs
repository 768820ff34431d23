//! Classical fusion rules and the GA-tuned weighted sum used as the
//! comparison bar.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{ScoreDataset, SplitPair};
use crate::error::{Error, Result};
use crate::gp::rng_stream;
use crate::metrics::{hter, sweep_roc, sweep_roc_quiet, FusedScores, RocCurve};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    Sum,
    Min,
    Mul,
}

impl FusionRule {
    pub fn name(self) -> &'static str {
        match self {
            FusionRule::Sum => "sum",
            FusionRule::Min => "min",
            FusionRule::Mul => "mul",
        }
    }
}

pub fn fuse_rule(rule: FusionRule, scores: &[f64]) -> f64 {
    match rule {
        FusionRule::Sum => scores.iter().fold(0.0, |acc, s| acc + s),
        FusionRule::Min => scores.iter().copied().fold(f64::INFINITY, f64::min),
        FusionRule::Mul => scores.iter().product(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub const LO: f64 = -10.0;
    pub const HI: f64 = 10.0;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(Self::LO..=Self::HI).contains(*w)) {
            return Err(Error::Validation(format!("weight {w} outside [{}, {}]", Self::LO, Self::HI)));
        }
        Ok(Self(weights))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighted sum; with all-ones weights this is bit-identical to the sum rule.
pub fn fuse_weighted(w: &WeightVector, scores: &[f64]) -> Result<f64> {
    if w.len() != scores.len() {
        return Err(Error::ModalityMismatch { expected: w.len(), found: scores.len() });
    }
    Ok(weighted(w.as_slice(), scores))
}

#[inline]
fn weighted(w: &[f64], scores: &[f64]) -> f64 {
    w.iter().zip(scores).fold(0.0, |acc, (w, s)| acc + w * s)
}

/// Applies a per-tuple fusion function to both classes.
pub fn fuse_dataset(ds: &ScoreDataset, f: impl Fn(&[f64]) -> f64) -> Result<FusedScores> {
    FusedScores::new(
        ds.genuine.iter().map(|t| f(&t.scores)).collect(),
        ds.impostor.iter().map(|t| f(&t.scores)).collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub selection_q: f64,
    pub elitism: bool,
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub seed: u64,
}

impl GaConfig {
    /// Population 5000, 500 generations.
    pub fn paper(seed: u64) -> Self {
        Self {
            population_size: 5000,
            generations: 500,
            selection_q: 0.9,
            elitism: true,
            weight_lo: WeightVector::LO,
            weight_hi: WeightVector::HI,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            seed,
        }
    }

    /// Population 200, 60 generations; same operators.
    pub fn desk(seed: u64) -> Self {
        Self { population_size: 200, generations: 60, ..Self::paper(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(format!("GA config: {msg}")));
        if self.population_size == 0 || self.generations == 0 {
            return bad("sizes must be positive");
        }
        if !(self.selection_q > 0.0 && self.selection_q <= 1.0) {
            return bad("selection q must lie in (0, 1]");
        }
        if ![self.crossover_rate, self.mutation_rate].iter().all(|p| (0.0..=1.0).contains(p)) {
            return bad("rates must lie in [0, 1]");
        }
        if !(WeightVector::LO <= self.weight_lo && self.weight_lo < self.weight_hi && self.weight_hi <= WeightVector::HI) {
            return bad("weight bounds must satisfy -10 <= lo < hi <= 10");
        }
        Ok(())
    }
}

/// Normalized geometric ranking: rank `r` (1-based, best first) is chosen
/// with probability `q' (1 - q)^(r - 1)` where `q' = q / (1 - (1 - q)^P)`.
pub fn geometric_selection_probs(population: usize, q: f64) -> Vec<f64> {
    let keep = 1.0 - q;
    let q_norm = q / (1.0 - keep.powi(population as i32));
    let mut p = q_norm;
    (0..population)
        .map(|_| {
            let out = p;
            p *= keep;
            out
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaGeneration {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TunedWeights {
    pub weights: WeightVector,
    pub train_eer: f64,
    pub history: Vec<GaGeneration>,
}

/// Real-coded GA over weight vectors minimizing the training EER of the
/// weighted sum. The all-ones chromosome seeds the initial population, so
/// the result never does worse than the sum rule on the training set.
pub fn ga_tune_weights(train: &ScoreDataset, cfg: &GaConfig) -> Result<TunedWeights> {
    cfg.validate()?;
    train.ensure_evaluable()?;
    let n = train.modality_count;
    let eer_of = |w: &[f64]| -> Result<f64> {
        Ok(sweep_roc_quiet(&fuse_dataset(train, |s| weighted(w, s))?).eer)
    };

    let probs = geometric_selection_probs(cfg.population_size, cfg.selection_q);
    let mut cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    let pick = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let u: f64 = rng.random();
        cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
    };

    let mut rng = rng_stream(cfg.seed, 0);
    let mut pop: Vec<Vec<f64>> = std::iter::once(vec![1.0f64.clamp(cfg.weight_lo, cfg.weight_hi); n])
        .chain((1..cfg.population_size).map(|_| {
            (0..n).map(|_| rng.random_range(cfg.weight_lo..=cfg.weight_hi)).collect()
        }))
        .collect();
    let mut known: Vec<Option<f64>> = vec![None; pop.len()];
    let mut history = Vec::with_capacity(cfg.generations);

    for generation in 0..cfg.generations {
        let fit: Vec<f64> = pop
            .par_iter()
            .zip(&known)
            .map(|(w, k)| k.map_or_else(|| eer_of(w), Ok))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));
        history.push(GaGeneration {
            generation,
            best: fit[order[0]],
            mean: fit.iter().sum::<f64>() / fit.len() as f64,
        });
        if generation + 1 == cfg.generations {
            let best = order[0];
            return Ok(TunedWeights {
                weights: WeightVector::new(pop[best].clone())?,
                train_eer: fit[best],
                history,
            });
        }

        let mut rng = rng_stream(cfg.seed, generation as u64 + 1);
        let mut next = Vec::with_capacity(pop.len());
        let mut next_known = Vec::with_capacity(pop.len());
        if cfg.elitism {
            next.push(pop[order[0]].clone());
            next_known.push(Some(fit[order[0]]));
        }
        while next.len() < cfg.population_size {
            let a = &pop[order[pick(&mut rng)]];
            let b = &pop[order[pick(&mut rng)]];
            let mut child: Vec<f64> = if rng.random::<f64>() < cfg.crossover_rate {
                let alpha: f64 = rng.random();
                a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect()
            } else {
                a.clone()
            };
            if rng.random::<f64>() < cfg.mutation_rate {
                for g in child.iter_mut() {
                    if rng.random_range(0..n) == 0 {
                        *g = rng.random_range(cfg.weight_lo..=cfg.weight_hi);
                    }
                }
            }
            for g in child.iter_mut() {
                *g = g.clamp(cfg.weight_lo, cfg.weight_hi);
            }
            next.push(child);
            next_known.push(None);
        }
        pop = next;
        known = next_known;
    }
    unreachable!("GA loop returns on its last generation")
}

/// Train/validation results for one fusion method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub train_eer: f64,
    /// Decision threshold carried to the validation half.
    pub train_eer_threshold: f64,
    pub validation_eer: f64,
    pub validation_hter: f64,
    pub validation_auc: f64,
}

#[derive(Clone, Debug)]
pub struct MethodEvaluation {
    pub result: MethodResult,
    pub validation_curve: RocCurve,
}

/// Fixes the decision threshold at the training EER point and reports HTER
/// at that threshold on validation, plus validation EER and AUC.
pub fn evaluate_fused(method: &str, train: &FusedScores, validation: &FusedScores) -> MethodEvaluation {
    let train_curve = sweep_roc(train);
    let validation_curve = sweep_roc(validation);
    MethodEvaluation {
        result: MethodResult {
            method: method.to_owned(),
            train_eer: train_curve.eer,
            train_eer_threshold: train_curve.eer_threshold,
            validation_eer: validation_curve.eer,
            validation_hter: hter(validation, train_curve.eer_threshold),
            validation_auc: validation_curve.auc(),
        },
        validation_curve,
    }
}

pub fn evaluate_scorer(
    method: &str,
    split: &SplitPair,
    f: impl Fn(&[f64]) -> f64,
) -> Result<MethodEvaluation> {
    Ok(evaluate_fused(
        method,
        &fuse_dataset(&split.train, &f)?,
        &fuse_dataset(&split.validation, &f)?,
    ))
}

#[derive(Clone, Debug)]
pub struct BaselineOptions {
    pub singles: bool,
    pub rules: Vec<FusionRule>,
    pub weighted: Option<GaConfig>,
}

#[derive(Clone, Debug)]
pub struct BaselineReport {
    pub evaluations: Vec<MethodEvaluation>,
    pub tuned: Option<TunedWeights>,
}

/// Evaluates per-modality projections (`s1`..`sn`), the requested rules and,
/// optionally, the GA-tuned weighted sum (`weight`) on a normalized split.
pub fn evaluate_baselines(split: &SplitPair, opts: &BaselineOptions) -> Result<BaselineReport> {
    split.train.ensure_evaluable()?;
    split.validation.ensure_evaluable()?;
    let mut evaluations = Vec::new();
    if opts.singles {
        for m in 0..split.train.modality_count {
            evaluations.push(evaluate_scorer(&format!("s{}", m + 1), split, |s| s[m])?);
        }
    }
    for &rule in &opts.rules {
        evaluations.push(evaluate_scorer(rule.name(), split, |s| fuse_rule(rule, s))?);
    }
    let tuned = match &opts.weighted {
        Some(cfg) => {
            let tuned = ga_tune_weights(&split.train, cfg)?;
            let w = tuned.weights.as_slice().to_vec();
            evaluations.push(evaluate_scorer("weight", split, |s| weighted(&w, s))?);
            Some(tuned)
        }
        None => None,
    };
    Ok(BaselineReport { evaluations, tuned })
}
