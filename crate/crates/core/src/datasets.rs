//! Score datasets: the CSV tuple format, the train/validation split and a
//! seeded Gaussian generator used as a stand-in for real score databases.
//!
//! Scores follow the similarity convention (higher = more genuine). Modalities
//! that produce distances can be flipped at ingestion with
//! [`LoadOptions::negate`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Impostor,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        }
    }

    fn parse(field: &str) -> Option<Label> {
        if field.eq_ignore_ascii_case("genuine") {
            Some(Label::Genuine)
        } else if field.eq_ignore_ascii_case("impostor") {
            Some(Label::Impostor)
        } else {
            None
        }
    }
}

/// One comparison event: a score per modality plus its ground-truth label.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTuple {
    pub scores: Vec<f64>,
    pub label: Label,
}

/// A labeled score collection. Genuine and impostor tuples are kept in their
/// original order; the split protocol depends on it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreDataset {
    pub name: String,
    pub modality_count: usize,
    pub genuine: Vec<ScoreTuple>,
    pub impostor: Vec<ScoreTuple>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub train: ScoreDataset,
    pub validation: ScoreDataset,
}

impl ScoreDataset {
    /// Builds a dataset, checking tuple arity, finiteness and labels.
    pub fn new(
        name: impl Into<String>,
        modality_count: usize,
        genuine: Vec<ScoreTuple>,
        impostor: Vec<ScoreTuple>,
    ) -> Result<Self> {
        if modality_count < 2 {
            return Err(Error::Validation(format!(
                "modality count must be at least 2, got {modality_count}"
            )));
        }
        for (expected, tuples) in [(Label::Genuine, &genuine), (Label::Impostor, &impostor)] {
            for (i, t) in tuples.iter().enumerate() {
                if t.label != expected {
                    return Err(Error::Validation(format!(
                        "{} tuple {i} is labeled {}",
                        expected.as_str(),
                        t.label.as_str()
                    )));
                }
                if t.scores.len() != modality_count {
                    return Err(Error::ModalityMismatch {
                        expected: modality_count,
                        found: t.scores.len(),
                    });
                }
                if let Some(s) = t.scores.iter().find(|s| !s.is_finite()) {
                    return Err(Error::Validation(format!(
                        "{} tuple {i} has non-finite score {s}",
                        expected.as_str()
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            modality_count,
            genuine,
            impostor,
        })
    }

    pub fn len(&self) -> usize {
        self.genuine.len() + self.impostor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Errors unless both classes are non-empty.
    pub fn ensure_evaluable(&self) -> Result<()> {
        if self.genuine.is_empty() {
            return Err(Error::Validation(format!("dataset `{}` has no genuine tuples", self.name)));
        }
        if self.impostor.is_empty() {
            return Err(Error::Validation(format!("dataset `{}` has no impostor tuples", self.name)));
        }
        Ok(())
    }

    /// Scores of one modality for one class, in order.
    pub fn column(&self, label: Label, modality: usize) -> Vec<f64> {
        let tuples = match label {
            Label::Genuine => &self.genuine,
            Label::Impostor => &self.impostor,
        };
        tuples.iter().map(|t| t.scores[modality]).collect()
    }

    /// Serializes to the CSV score format: genuine rows first, then impostor
    /// rows, no header, shortest round-trip decimal representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for t in self.genuine.iter().chain(&self.impostor) {
            for s in &t.scores {
                let _ = write!(out, "{s},");
            }
            out.push_str(t.label.as_str());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Zero-based modality indices whose scores are negated on load.
    pub negate: Vec<usize>,
    /// Dataset name; defaults to the file stem.
    pub name: Option<String>,
}

pub fn load_dataset(path: &Path, modality_count: usize) -> Result<ScoreDataset> {
    load_dataset_with(path, modality_count, &LoadOptions::default())
}

pub fn load_dataset_with(path: &Path, modality_count: usize, opts: &LoadOptions) -> Result<ScoreDataset> {
    let text = fs::read_to_string(path)?;
    let name = opts.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_owned())
    });
    let ds = parse_scores(&text, modality_count, opts)
        .map_err(|(line, msg)| Error::Parse { path: path.to_path_buf(), line, msg })?;
    let ds = ScoreDataset { name, ..ds };
    ds.ensure_evaluable()?;
    log::info!(
        "loaded `{}`: {} genuine, {} impostor tuples",
        ds.name,
        ds.genuine.len(),
        ds.impostor.len()
    );
    Ok(ds)
}

/// Parses the CSV score format. Errors carry a 1-based line number.
pub fn parse_scores(
    text: &str,
    modality_count: usize,
    opts: &LoadOptions,
) -> std::result::Result<ScoreDataset, (usize, String)> {
    if modality_count < 2 {
        return Err((0, format!("modality count must be at least 2, got {modality_count}")));
    }
    if let Some(&m) = opts.negate.iter().find(|&&m| m >= modality_count) {
        return Err((0, format!("cannot negate modality {m}: only {modality_count} modalities")));
    }
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header
        }
        if fields.len() != modality_count + 1 {
            return Err((
                line_no,
                format!("expected {} columns, found {}", modality_count + 1, fields.len()),
            ));
        }
        let mut scores = Vec::with_capacity(modality_count);
        for (m, f) in fields[..modality_count].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| (line_no, format!("non-numeric score `{f}` in column {}", m + 1)))?;
            if !v.is_finite() {
                return Err((line_no, format!("non-finite score `{f}` in column {}", m + 1)));
            }
            scores.push(if opts.negate.contains(&m) { -v } else { v });
        }
        let label_field = fields[modality_count];
        let label = Label::parse(label_field)
            .ok_or_else(|| (line_no, format!("unknown label `{label_field}`")))?;
        let tuple = ScoreTuple { scores, label };
        match label {
            Label::Genuine => genuine.push(tuple),
            Label::Impostor => impostor.push(tuple),
        }
    }
    Ok(ScoreDataset {
        name: String::new(),
        modality_count,
        genuine,
        impostor,
    })
}

pub fn save_dataset(ds: &ScoreDataset, path: &Path) -> Result<()> {
    crate::cli::write_atomic(path, ds.to_csv().as_bytes())
}

/// Order-preserving halves; an odd extra tuple goes to the training half.
pub fn split_dataset(ds: &ScoreDataset) -> Result<SplitPair> {
    if ds.genuine.len() < 2 || ds.impostor.len() < 2 {
        return Err(Error::Validation(format!(
            "split needs at least 2 tuples per class, got {} genuine and {} impostor",
            ds.genuine.len(),
            ds.impostor.len()
        )));
    }
    let g = ds.genuine.len().div_ceil(2);
    let i = ds.impostor.len().div_ceil(2);
    let half = |suffix: &str, genuine: &[ScoreTuple], impostor: &[ScoreTuple]| ScoreDataset {
        name: format!("{}/{suffix}", ds.name),
        modality_count: ds.modality_count,
        genuine: genuine.to_vec(),
        impostor: impostor.to_vec(),
    };
    Ok(SplitPair {
        train: half("train", &ds.genuine[..g], &ds.impostor[..i]),
        validation: half("validation", &ds.genuine[g..], &ds.impostor[i..]),
    })
}

/// Parameters for the seeded Gaussian score generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub modality_count: usize,
    pub genuine_mean: Vec<f64>,
    pub genuine_std: Vec<f64>,
    pub impostor_mean: Vec<f64>,
    pub impostor_std: Vec<f64>,
    pub genuine_count: usize,
    pub impostor_count: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Same distribution on every modality.
    pub fn uniform(
        modality_count: usize,
        (genuine_mean, genuine_std): (f64, f64),
        (impostor_mean, impostor_std): (f64, f64),
        genuine_count: usize,
        impostor_count: usize,
        seed: u64,
    ) -> Self {
        Self {
            name: "synthetic".to_owned(),
            modality_count,
            genuine_mean: vec![genuine_mean; modality_count],
            genuine_std: vec![genuine_std; modality_count],
            impostor_mean: vec![impostor_mean; modality_count],
            impostor_std: vec![impostor_std; modality_count],
            genuine_count,
            impostor_count,
            seed,
        }
    }

    /// Table-shaped presets: `bssr1` (512/261632, n=4), `private`
    /// (1600/158400, n=5), `banca` (467/624, n=4), plus the desk-sized
    /// `desk` (1000/5000, n=4) and the trivially separable `separable`.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        let shaped = |n: usize, g: usize, i: usize| {
            // per-modality separations in genuine-stddev units
            let seps = [3.4, 2.8, 2.2, 1.6, 1.0];
            Self {
                name: name.to_owned(),
                modality_count: n,
                genuine_mean: seps[..n].to_vec(),
                genuine_std: vec![1.0; n],
                impostor_mean: vec![0.0; n],
                impostor_std: vec![1.0; n],
                genuine_count: g,
                impostor_count: i,
                seed,
            }
        };
        match name {
            "bssr1" => Some(shaped(4, 512, 261_632)),
            "private" => Some(shaped(5, 1600, 158_400)),
            "banca" => Some(shaped(4, 467, 624)),
            "desk" => Some(shaped(4, 1000, 5000)),
            "separable" => Some(Self {
                name: name.to_owned(),
                ..Self::uniform(4, (10.0, 1.0), (0.0, 1.0), 500, 500, seed)
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.modality_count;
        if n < 2 {
            return Err(Error::Validation(format!("modality count must be at least 2, got {n}")));
        }
        for (what, v) in [
            ("genuine mean", &self.genuine_mean),
            ("genuine stddev", &self.genuine_std),
            ("impostor mean", &self.impostor_mean),
            ("impostor stddev", &self.impostor_std),
        ] {
            if v.len() != n {
                return Err(Error::Validation(format!(
                    "{what} has {} entries for {n} modalities",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("{what} must be finite")));
            }
        }
        if let Some(s) = self.genuine_std.iter().chain(&self.impostor_std).find(|&&s| s <= 0.0) {
            return Err(Error::Validation(format!("stddev must be strictly positive, got {s}")));
        }
        if self.genuine_count == 0 || self.impostor_count == 0 {
            return Err(Error::Validation("tuple counts must be positive".to_owned()));
        }
        Ok(())
    }
}

/// Draws genuine tuples, then impostor tuples, modality by modality, from a
/// single ChaCha8 stream seeded with `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ScoreDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.modality_count;
    let dists = |means: &[f64], stds: &[f64]| -> Result<Vec<Normal<f64>>> {
        means
            .iter()
            .zip(stds)
            .map(|(&m, &s)| Normal::new(m, s).map_err(|e| Error::Validation(e.to_string())))
            .collect()
    };
    let gen_d = dists(&spec.genuine_mean, &spec.genuine_std)?;
    let imp_d = dists(&spec.impostor_mean, &spec.impostor_std)?;
    let mut draw = |d: &[Normal<f64>], count: usize, label: Label| -> Vec<ScoreTuple> {
        (0..count)
            .map(|_| ScoreTuple {
                scores: d.iter().map(|d| d.sample(&mut rng)).collect(),
                label,
            })
            .collect()
    };
    let genuine = draw(&gen_d, spec.genuine_count, Label::Genuine);
    let impostor = draw(&imp_d, spec.impostor_count, Label::Impostor);
    Ok(ScoreDataset {
        name: spec.name.clone(),
        modality_count: n,
        genuine,
        impostor,
    })
}
