//! tanh score normalization driven by genuine-score statistics.
//!
//! For modality `m`, `s' = 0.5 * (tanh((s - mu_m) / (100 * sigma_m)) + 1)`
//! where `mu_m` and `sigma_m` are the mean and population standard deviation
//! of the genuine training scores. Impostor scores are never consulted.

use serde::{Deserialize, Serialize};

use crate::datasets::{Label, ScoreDataset, ScoreTuple};
use crate::error::{Error, Result};

const SPREAD: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub modalities: Vec<ModalityStats>,
}

impl NormalizationParams {
    pub fn new(modalities: Vec<ModalityStats>) -> Result<Self> {
        if let Some((m, _)) = modalities
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()))
        {
            return Err(Error::DegenerateModality { modality: m });
        }
        Ok(Self { modalities })
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text)?;
        Self::new(raw.modalities)
    }
}

/// Fits per-modality genuine mean and population standard deviation.
pub fn fit_normalization(train: &ScoreDataset) -> Result<NormalizationParams> {
    if train.genuine.len() < 2 {
        return Err(Error::Validation(format!(
            "normalization needs at least 2 genuine tuples, got {}",
            train.genuine.len()
        )));
    }
    let stats = (0..train.modality_count)
        .map(|m| {
            let col = train.column(Label::Genuine, m);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            ModalityStats { mean, std: var.sqrt() }
        })
        .collect();
    NormalizationParams::new(stats)
}

/// Normalizes one score of modality `m`. Results lie in the open unit
/// interval; far tails (beyond roughly 1800 stddevs) saturate to the nearest
/// representable value inside it.
pub fn normalize(score: f64, m: usize, params: &NormalizationParams) -> f64 {
    let ModalityStats { mean, std } = params.modalities[m];
    let z = (score - mean) / std;
    let v = 0.5 * ((z / SPREAD).tanh() + 1.0);
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn normalize_dataset(ds: &ScoreDataset, params: &NormalizationParams) -> Result<ScoreDataset> {
    if ds.modality_count != params.modality_count() {
        return Err(Error::ModalityMismatch {
            expected: params.modality_count(),
            found: ds.modality_count,
        });
    }
    let apply = |tuples: &[ScoreTuple]| -> Vec<ScoreTuple> {
        tuples
            .iter()
            .map(|t| ScoreTuple {
                scores: t
                    .scores
                    .iter()
                    .enumerate()
                    .map(|(m, &s)| normalize(s, m, params))
                    .collect(),
                label: t.label,
            })
            .collect()
    };
    Ok(ScoreDataset {
        name: ds.name.clone(),
        modality_count: ds.modality_count,
        genuine: apply(&ds.genuine),
        impostor: apply(&ds.impostor),
    })
}
