//! End-to-end experiment runner behind the `gpfusion` binary: load or
//! synthesize, split, normalize on the training half, run the requested
//! fusion methods and write the report and artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_baselines, evaluate_fused, BaselineOptions, FusionRule, GaConfig, MethodEvaluation, MethodResult};
use crate::datasets::{generate_synthetic, load_dataset_with, split_dataset, LoadOptions, ScoreDataset, SplitPair, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gp::{eval_population, evolve, EvolutionConfig, EvolutionResult, ExpressionTree};
use crate::metrics::{gain, hter, sweep_roc};
use crate::normalization::{fit_normalization, normalize_dataset, NormalizationParams};

/// Fusion methods selectable with `--methods`. Per-modality projections are
/// always reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Sum,
    Min,
    Mul,
    Weight,
    Gp,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Sum => "sum",
            MethodName::Min => "min",
            MethodName::Mul => "mul",
            MethodName::Weight => "weight",
            MethodName::Gp => "gp",
        }
    }
}

impl FromStr for MethodName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(MethodName::Sum),
            "min" => Ok(MethodName::Min),
            "mul" => Ok(MethodName::Mul),
            "weight" => Ok(MethodName::Weight),
            "gp" => Ok(MethodName::Gp),
            other => Err(format!("unknown method `{other}` (expected sum, min, mul, weight or gp)")),
        }
    }
}

#[derive(Clone, Debug)]
pub enum InputSource {
    File {
        path: PathBuf,
        modality_count: usize,
        negate: Vec<usize>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub input: InputSource,
    pub methods: Vec<MethodName>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub gp: EvolutionConfig,
    pub ga: GaConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub modality_count: usize,
    pub genuine: usize,
    pub impostor: usize,
    pub train_genuine: usize,
    pub train_impostor: usize,
    pub validation_genuine: usize,
    pub validation_impostor: usize,
}

/// Relative improvement over the weighted sum on validation, in percent.
/// `None` where the weighted-sum reference is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    pub method: String,
    pub eer: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    pub tree: String,
    pub train_fitness: f64,
    pub generations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub methods: Vec<MethodName>,
    pub gp: Option<EvolutionConfig>,
    pub ga: Option<GaConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: DatasetSummary,
    pub seed: u64,
    pub normalization: NormalizationParams,
    pub methods: Vec<MethodResult>,
    pub gains: Option<Vec<GainEntry>>,
    pub gp: Option<GpSummary>,
    pub weights: Option<Vec<f64>>,
    pub config: ConfigEcho,
}

impl ExperimentReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Plain-text table of the per-method results.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{} ({} genuine / {} impostor, {} modalities)\n{:<8} {:>10} {:>10} {:>10} {:>10}\n",
            self.dataset.name,
            self.dataset.genuine,
            self.dataset.impostor,
            self.dataset.modality_count,
            "method",
            "train EER",
            "val EER",
            "val HTER",
            "val AUC"
        );
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{:<8} {:>9.2}% {:>9.2}% {:>9.2}% {:>10.6}",
                m.method,
                100.0 * m.train_eer,
                100.0 * m.validation_eer,
                100.0 * m.validation_hter,
                m.validation_auc
            );
        }
        if let Some(gains) = &self.gains {
            for g in gains {
                let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{v:.2}%"));
                let _ = writeln!(out, "gain vs weight [{}]: EER {} AUC {}", g.method, fmt(g.eer), fmt(g.auc));
            }
        }
        out
    }
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn load_input(input: &InputSource) -> Result<ScoreDataset> {
    match input {
        InputSource::File { path, modality_count, negate } => load_dataset_with(
            path,
            *modality_count,
            &LoadOptions { negate: negate.clone(), name: None },
        ),
        InputSource::Synthetic(spec) => generate_synthetic(spec),
    }
}

fn describe(input: &InputSource) -> String {
    match input {
        InputSource::File { path, negate, .. } if negate.is_empty() => path.display().to_string(),
        InputSource::File { path, negate, .. } => format!("{} (negated: {negate:?})", path.display()),
        InputSource::Synthetic(spec) => format!("synthetic:{}:seed={}", spec.name, spec.seed),
    }
}

/// Runs the full pipeline and writes into `opts.out_dir`:
/// `report.json`, `normalization.json`, `roc_<method>.csv` (validation
/// curves), and with gp `best_tree.sexp` + `gp_history.csv`, with weight
/// `ga_history.csv`, and `scores.csv` for synthetic inputs.
pub fn run(opts: &RunOptions) -> Result<ExperimentReport> {
    let methods: Vec<MethodName> = opts.methods.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let raw = load_input(&opts.input)?;
    let raw_split = split_dataset(&raw)?;
    let params = fit_normalization(&raw_split.train)?;
    let split = SplitPair {
        train: normalize_dataset(&raw_split.train, &params)?,
        validation: normalize_dataset(&raw_split.validation, &params)?,
    };

    let rules: Vec<FusionRule> = methods
        .iter()
        .filter_map(|m| match m {
            MethodName::Sum => Some(FusionRule::Sum),
            MethodName::Min => Some(FusionRule::Min),
            MethodName::Mul => Some(FusionRule::Mul),
            _ => None,
        })
        .collect();
    let ga = GaConfig { seed: opts.seed, ..opts.ga.clone() };
    let gp_cfg = EvolutionConfig { seed: opts.seed, ..opts.gp.clone() };
    let baselines = evaluate_baselines(
        &split,
        &BaselineOptions {
            singles: true,
            rules,
            weighted: methods.contains(&MethodName::Weight).then(|| ga.clone()),
        },
    )?;
    let mut evaluations: Vec<MethodEvaluation> = baselines.evaluations;

    let evolved: Option<EvolutionResult> = if methods.contains(&MethodName::Gp) {
        let r = evolve(&split.train, &gp_cfg)?;
        evaluations.push(evaluate_tree(&r.best, &split)?);
        Some(r)
    } else {
        None
    };

    let results: Vec<MethodResult> = evaluations.iter().map(|e| e.result.clone()).collect();
    let gains = results.iter().find(|m| m.method == "weight").map(|reference| {
        results
            .iter()
            .filter(|m| m.method != "weight")
            .map(|m| GainEntry {
                method: m.method.clone(),
                eer: gain(reference.validation_eer, m.validation_eer).ok(),
                auc: gain(reference.validation_auc, m.validation_auc).ok(),
            })
            .collect()
    });

    let report = ExperimentReport {
        dataset: DatasetSummary {
            name: raw.name.clone(),
            modality_count: raw.modality_count,
            genuine: raw.genuine.len(),
            impostor: raw.impostor.len(),
            train_genuine: split.train.genuine.len(),
            train_impostor: split.train.impostor.len(),
            validation_genuine: split.validation.genuine.len(),
            validation_impostor: split.validation.impostor.len(),
        },
        seed: opts.seed,
        normalization: params.clone(),
        methods: results,
        gains,
        gp: evolved.as_ref().map(|r| GpSummary {
            tree: r.best.to_sexpr(),
            train_fitness: r.best_fitness,
            generations: r.history.len(),
        }),
        weights: baselines.tuned.as_ref().map(|t| t.weights.as_slice().to_vec()),
        config: ConfigEcho {
            input: describe(&opts.input),
            methods: methods.clone(),
            gp: evolved.as_ref().map(|_| gp_cfg.clone()),
            ga: baselines.tuned.as_ref().map(|_| ga.clone()),
        },
    };

    let out = &opts.out_dir;
    fs::create_dir_all(out)?;
    write_atomic(&out.join("normalization.json"), params.to_json()?.as_bytes())?;
    for e in &evaluations {
        write_atomic(
            &out.join(format!("roc_{}.csv", e.result.method)),
            e.validation_curve.to_csv().as_bytes(),
        )?;
    }
    if let Some(r) = &evolved {
        write_atomic(&out.join("best_tree.sexp"), format!("{}\n", r.best.to_sexpr()).as_bytes())?;
        write_atomic(&out.join("gp_history.csv"), r.history_csv().as_bytes())?;
    }
    if let Some(t) = &baselines.tuned {
        let mut csv = String::from("generation,best,mean\n");
        for g in &t.history {
            let _ = writeln!(csv, "{},{},{}", g.generation, g.best, g.mean);
        }
        write_atomic(&out.join("ga_history.csv"), csv.as_bytes())?;
    }
    if matches!(opts.input, InputSource::Synthetic(_)) {
        write_atomic(&out.join("scores.csv"), raw.to_csv().as_bytes())?;
    }
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_atomic(&out.join("report.json"), json.as_bytes())?;
    Ok(report)
}

fn evaluate_tree(tree: &ExpressionTree, split: &SplitPair) -> Result<MethodEvaluation> {
    Ok(evaluate_fused(
        "gp",
        &eval_population(tree, &split.train)?,
        &eval_population(tree, &split.validation)?,
    ))
}

/// Writes a synthetic dataset as a score file and returns it.
pub fn gen_synth(spec: &SyntheticSpec, path: &Path) -> Result<ScoreDataset> {
    let ds = generate_synthetic(spec)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(path, ds.to_csv().as_bytes())?;
    Ok(ds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    All,
    Train,
    Validation,
}

impl FromStr for SplitChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all" => Ok(SplitChoice::All),
            "train" => Ok(SplitChoice::Train),
            "validation" => Ok(SplitChoice::Validation),
            other => Err(format!("unknown split `{other}` (expected all, train or validation)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalTreeOptions {
    pub tree: PathBuf,
    pub input: PathBuf,
    pub modality_count: usize,
    pub params: PathBuf,
    pub negate: Vec<usize>,
    pub split: SplitChoice,
    /// HTER threshold; defaults to the evaluated set's own EER threshold.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEvaluation {
    pub eer: f64,
    pub eer_threshold: f64,
    pub auc: f64,
    pub threshold: f64,
    pub hter: f64,
}

/// Re-evaluates a saved tree on a score file with saved normalization params.
pub fn eval_tree(opts: &EvalTreeOptions) -> Result<TreeEvaluation> {
    let tree = ExpressionTree::parse(&fs::read_to_string(&opts.tree)?)?;
    let params = NormalizationParams::from_json(&fs::read_to_string(&opts.params)?)?;
    let raw = load_dataset_with(
        &opts.input,
        opts.modality_count,
        &LoadOptions { negate: opts.negate.clone(), name: None },
    )?;
    tree.check_modalities(raw.modality_count)?;
    let subset = match opts.split {
        SplitChoice::All => raw,
        SplitChoice::Train => split_dataset(&raw)?.train,
        SplitChoice::Validation => split_dataset(&raw)?.validation,
    };
    let fused = eval_population(&tree, &normalize_dataset(&subset, &params)?)?;
    let curve = sweep_roc(&fused);
    let threshold = opts.threshold.unwrap_or(curve.eer_threshold);
    Ok(TreeEvaluation {
        eer: curve.eer,
        eer_threshold: curve.eer_threshold,
        auc: curve.auc(),
        threshold,
        hter: hter(&fused, threshold),
    })
}
