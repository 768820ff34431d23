use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use gpfusion::baselines::GaConfig;
use gpfusion::cli::{self, EvalTreeOptions, InputSource, MethodName, RunOptions, SplitChoice};
use gpfusion::datasets::SyntheticSpec;
use gpfusion::gp::EvolutionConfig;

#[derive(Parser)]
#[command(name = "gpfusion", version, about = "Multibiometric score fusion with genetic programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split, normalize, fuse and report.
    Run(RunArgs),
    /// Write a synthetic score file.
    GenSynth(GenSynthArgs),
    /// Re-evaluate a saved tree on a score file.
    EvalTree(EvalTreeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GaPreset {
    Paper,
    Desk,
}

#[derive(Args)]
struct RunArgs {
    /// Score file (CSV).
    #[arg(long, required_unless_present = "synth_preset", requires = "modalities")]
    input: Option<PathBuf>,
    /// Use a synthetic preset instead of a file (bssr1, private, banca, desk, separable).
    #[arg(long, conflicts_with_all = ["input", "negate_modality", "modalities"])]
    synth_preset: Option<String>,
    #[arg(long)]
    modalities: Option<usize>,
    /// Comma-separated subset of sum,min,mul,weight,gp.
    #[arg(long, value_delimiter = ',', default_value = "sum,min,mul,weight,gp")]
    methods: Vec<MethodName>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Zero-based modality whose scores are negated on load (repeatable).
    #[arg(long)]
    negate_modality: Vec<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    ga_preset: GaPreset,
    /// Override the number of GP generations.
    #[arg(long)]
    gp_generations: Option<usize>,
    /// Override the GP population size.
    #[arg(long)]
    gp_population: Option<usize>,
}

#[derive(Args)]
struct GenSynthArgs {
    /// Table-shaped preset (bssr1, private, banca, desk, separable).
    #[arg(long, conflicts_with_all = ["modalities", "genuine_mean", "impostor_mean"])]
    preset: Option<String>,
    #[arg(long, required_unless_present = "preset")]
    modalities: Option<usize>,
    /// One value, or one per modality.
    #[arg(long, value_delimiter = ',', required_unless_present = "preset")]
    genuine_mean: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    genuine_std: Vec<f64>,
    #[arg(long, value_delimiter = ',', required_unless_present = "preset")]
    impostor_mean: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    impostor_std: Vec<f64>,
    #[arg(long)]
    genuine_count: Option<usize>,
    #[arg(long)]
    impostor_count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalTreeArgs {
    /// File holding the tree s-expression.
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    modalities: usize,
    /// Normalization params JSON written by `run`.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    negate_modality: Vec<usize>,
    #[arg(long, default_value = "all")]
    split: SplitChoice,
    /// HTER decision threshold (defaults to the EER threshold).
    #[arg(long)]
    threshold: Option<f64>,
}

fn usage_error(msg: String) -> ! {
    Cli::command().error(clap::error::ErrorKind::ValueValidation, msg).exit()
}

fn broadcast(name: &str, v: Vec<f64>, n: usize) -> Vec<f64> {
    match v.len() {
        1 => vec![v[0]; n],
        k if k == n => v,
        k => usage_error(format!("--{name} has {k} values for {n} modalities")),
    }
}

fn synth_spec(args: GenSynthArgs) -> SyntheticSpec {
    let mut spec = match &args.preset {
        Some(name) => SyntheticSpec::preset(name, args.seed)
            .unwrap_or_else(|| usage_error(format!("unknown preset `{name}`"))),
        None => {
            let n = args.modalities.unwrap_or(0);
            SyntheticSpec {
                name: "synthetic".to_owned(),
                modality_count: n,
                genuine_mean: broadcast("genuine-mean", args.genuine_mean, n),
                genuine_std: broadcast("genuine-std", args.genuine_std, n),
                impostor_mean: broadcast("impostor-mean", args.impostor_mean, n),
                impostor_std: broadcast("impostor-std", args.impostor_std, n),
                genuine_count: 1000,
                impostor_count: 1000,
                seed: args.seed,
            }
        }
    };
    if let Some(g) = args.genuine_count {
        spec.genuine_count = g;
    }
    if let Some(i) = args.impostor_count {
        spec.impostor_count = i;
    }
    if let Err(e) = spec.validate() {
        usage_error(e.to_string());
    }
    spec
}

fn execute(command: Command) -> gpfusion::Result<()> {
    match command {
        Command::Run(a) => {
            let input = match (a.input, a.synth_preset) {
                (Some(path), _) => InputSource::File {
                    path,
                    modality_count: a.modalities.expect("clap requires --modalities"),
                    negate: a.negate_modality,
                },
                (None, Some(name)) => InputSource::Synthetic(
                    SyntheticSpec::preset(&name, a.seed)
                        .unwrap_or_else(|| usage_error(format!("unknown preset `{name}`"))),
                ),
                (None, None) => unreachable!("clap requires an input"),
            };
            let mut gp = EvolutionConfig::default();
            if let Some(g) = a.gp_generations {
                gp.max_generations = g;
            }
            if let Some(p) = a.gp_population {
                gp.population_size = p;
            }
            if let Err(e) = gp.validate() {
                usage_error(e.to_string());
            }
            let ga = match a.ga_preset {
                GaPreset::Paper => GaConfig::paper(a.seed),
                GaPreset::Desk => GaConfig::desk(a.seed),
            };
            let report = cli::run(&RunOptions {
                input,
                methods: a.methods,
                seed: a.seed,
                out_dir: a.out,
                gp,
                ga,
            })?;
            print!("{}", report.table());
        }
        Command::GenSynth(a) => {
            let out = a.out.clone();
            let spec = synth_spec(a);
            let ds = cli::gen_synth(&spec, &out)?;
            println!(
                "wrote {}: {} genuine, {} impostor, {} modalities",
                out.display(),
                ds.genuine.len(),
                ds.impostor.len(),
                ds.modality_count
            );
        }
        Command::EvalTree(a) => {
            let eval = cli::eval_tree(&EvalTreeOptions {
                tree: a.tree,
                input: a.input,
                modality_count: a.modalities,
                params: a.params,
                negate: a.negate_modality,
                split: a.split,
                threshold: a.threshold,
            })?;
            println!("{}", serde_json::to_string_pretty(&eval)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
