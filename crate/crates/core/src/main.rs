use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use recipe_amounts::amount_models::HeadKind;
use recipe_amounts::metrics_eval::OutOfRange;
use recipe_amounts::pipeline::{self, Config, PipelineError, RunManifest};

#[derive(Parser)]
#[command(
    name = "recipe-amounts",
    version,
    about = "Recipe ingredient amounts: parse, normalize, train, evaluate"
)]
struct Cli {
    /// Seed for every random choice (split, initialization, shuffling, retrieval pools).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML file with stage settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the stage manifest (default: print to stdout).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw recipes into quantity, unit and name per line.
    Parse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        units: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        drops: PathBuf,
    },
    /// Propose ingredient merges or apply reviewed decisions.
    #[command(subcommand)]
    Canonicalize(Canonicalize),
    /// Build grams-per-unit and calorie tables from mapping records.
    Tables {
        #[arg(long)]
        mappings: PathBuf,
        #[arg(long)]
        vocabulary: PathBuf,
        #[arg(long)]
        units: Option<PathBuf>,
        #[arg(long)]
        grams_out: PathBuf,
        #[arg(long)]
        calories_out: PathBuf,
    },
    /// Convert parsed lines to grams.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocabulary: PathBuf,
        #[arg(long)]
        grams: PathBuf,
        #[arg(long)]
        calories: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        drops: PathBuf,
        #[arg(long)]
        min_fraction: Option<f64>,
    },
    /// Sum converted lines into sparse amount and range vectors.
    Vectorize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocabulary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffle and split a vector file into train, validation and test.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
        /// Three comma-separated ratios summing to 1.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Train a dense or sparse head.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        /// Vocabulary fixing the output dimension (default: largest index seen).
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        #[arg(long, value_enum)]
        head: Head,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        log_out: Option<PathBuf>,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Predict amounts with a trained head.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Predict only the ids of this vector file.
        #[arg(long)]
        ids_from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Entries kept before renormalizing (dense default 10, sparse default all).
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Nearest-neighbor retrieval baseline.
    Retrieve {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        #[arg(long, conflicts_with = "exclude_gt", required_unless_present = "exclude_gt")]
        include_gt: bool,
        #[arg(long)]
        exclude_gt: bool,
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against reference vectors.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        vocabulary: PathBuf,
        #[arg(long)]
        calories: PathBuf,
        #[arg(long)]
        report_out: PathBuf,
        #[arg(long)]
        histogram_out: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, value_enum)]
        out_of_range: Option<OutOfRangeArg>,
    },
    /// Summary table and RCE histogram plot from evaluation reports.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        summary_out: PathBuf,
        #[arg(long)]
        plot_out: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Run every stage into one output directory.
    RunAll {
        #[arg(long)]
        recipes: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        units: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        hyper: Hyper,
    },
}

#[derive(Subcommand)]
enum Canonicalize {
    Propose {
        #[arg(long)]
        parsed: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
        #[arg(long)]
        frequencies_out: PathBuf,
        #[arg(long)]
        proposals_out: PathBuf,
        /// Also write a ledger with stem merges accepted and the rest rejected.
        #[arg(long)]
        draft_ledger: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        top_n: Option<usize>,
    },
    Apply {
        #[arg(long)]
        parsed: PathBuf,
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        vocabulary_out: PathBuf,
        #[arg(long)]
        coverage_out: PathBuf,
        #[arg(long)]
        recipes_out: PathBuf,
        #[arg(long)]
        drops: PathBuf,
        #[arg(long)]
        min_coverage: Option<f64>,
        #[arg(long)]
        top_n: Option<usize>,
    },
}

#[derive(Args)]
struct Hyper {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

impl Hyper {
    fn apply(&self, config: &mut Config) {
        set(&mut config.train.epochs, self.epochs);
        set(&mut config.train.batch_size, self.batch_size);
        set(&mut config.train.lr, self.lr);
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Head {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutOfRangeArg {
    ToValue,
    ToEdge,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn emit(manifest: &RunManifest, path: Option<&Path>) -> Result<(), PipelineError> {
    match path {
        Some(p) => manifest.write(p),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(manifest).expect("manifest serializes")
            );
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let manifest_path = cli.manifest.as_deref();
    let seed = cli.seed;
    let manifest = match cli.command {
        Command::Parse {
            input,
            units,
            out,
            drops,
        } => {
            let (m, log) = pipeline::cmd_parse(&pipeline::ParseArgs {
                input: &input,
                units: units.as_deref(),
                out: &out,
                drops: &drops,
            })?;
            log::info!(
                "parse kept {} of {} recipes (drop fraction {:.4})",
                log.kept,
                log.total,
                log.drop_fraction
            );
            m
        }
        Command::Canonicalize(Canonicalize::Propose {
            parsed,
            embeddings,
            mappings,
            frequencies_out,
            proposals_out,
            draft_ledger,
            threshold,
            top_n,
        }) => {
            set(&mut config.canonicalize.threshold, threshold);
            set(&mut config.canonicalize.top_n, top_n);
            pipeline::cmd_propose(
                &pipeline::ProposeArgs {
                    parsed: &parsed,
                    embeddings: &embeddings,
                    mappings: &mappings,
                    frequencies_out: &frequencies_out,
                    proposals_out: &proposals_out,
                    draft_ledger_out: draft_ledger.as_deref(),
                },
                &config.canonicalize,
            )?
        }
        Command::Canonicalize(Canonicalize::Apply {
            parsed,
            proposals,
            ledger,
            vocabulary_out,
            coverage_out,
            recipes_out,
            drops,
            min_coverage,
            top_n,
        }) => {
            set(&mut config.canonicalize.min_coverage, min_coverage);
            set(&mut config.canonicalize.top_n, top_n);
            pipeline::cmd_apply(
                &pipeline::ApplyArgs {
                    parsed: &parsed,
                    proposals: &proposals,
                    ledger: &ledger,
                    vocabulary_out: &vocabulary_out,
                    coverage_out: &coverage_out,
                    recipes_out: &recipes_out,
                    drops: &drops,
                },
                &config.canonicalize,
            )?
        }
        Command::Tables {
            mappings,
            vocabulary,
            units,
            grams_out,
            calories_out,
        } => pipeline::cmd_tables(&pipeline::TablesArgs {
            mappings: &mappings,
            vocabulary: &vocabulary,
            units: units.as_deref(),
            grams_out: &grams_out,
            calories_out: &calories_out,
        })?,
        Command::Convert {
            input,
            vocabulary,
            grams,
            calories,
            out,
            drops,
            min_fraction,
        } => {
            set(&mut config.convert.min_fraction, min_fraction);
            pipeline::cmd_convert(
                &pipeline::ConvertArgs {
                    input: &input,
                    vocabulary: &vocabulary,
                    grams: &grams,
                    calories: &calories,
                    out: &out,
                    drops: &drops,
                },
                &config.convert,
            )?
        }
        Command::Vectorize { input, vocabulary, out } => pipeline::cmd_vectorize(&input, &vocabulary, &out)?,
        Command::Split {
            input,
            train_out,
            val_out,
            test_out,
            ratios,
        } => {
            if let Some(r) = ratios {
                config.split.ratios = r.try_into().map_err(|r: Vec<f64>| {
                    PipelineError::Config(format!("--ratios takes 3 values, got {}", r.len()))
                })?;
            }
            pipeline::cmd_split(
                &pipeline::SplitArgs {
                    input: &input,
                    train_out: &train_out,
                    val_out: &val_out,
                    test_out: &test_out,
                },
                &config.split,
                seed,
            )?
        }
        Command::Train {
            features,
            train,
            validation,
            vocabulary,
            head,
            model_out,
            log_out,
            hyper,
        } => {
            hyper.apply(&mut config);
            pipeline::cmd_train(
                &pipeline::TrainArgs {
                    features: &features,
                    train: &train,
                    validation: validation.as_deref(),
                    vocabulary: vocabulary.as_deref(),
                    head: match head {
                        Head::Dense => HeadKind::Dense,
                        Head::Sparse => HeadKind::Sparse,
                    },
                    model_out: &model_out,
                    log_out: log_out.as_deref(),
                },
                &config.train,
                seed,
            )?
        }
        Command::Predict {
            model,
            features,
            ids_from,
            out,
            top_k,
        } => pipeline::cmd_predict(
            &pipeline::PredictArgs {
                model: &model,
                features: &features,
                ids_from: ids_from.as_deref(),
                out: &out,
            },
            top_k,
        )?,
        Command::Retrieve {
            features,
            queries,
            pool,
            vocabulary,
            include_gt,
            exclude_gt: _,
            pool_size,
            out,
        } => {
            set(&mut config.retrieve.pool_size, pool_size);
            pipeline::cmd_retrieve(
                &pipeline::RetrieveArgs {
                    features: &features,
                    queries: &queries,
                    pool: &pool,
                    vocabulary: vocabulary.as_deref(),
                    include_gt,
                    out: &out,
                },
                &config.retrieve,
                seed,
            )?
        }
        Command::Evaluate {
            predictions,
            references,
            vocabulary,
            calories,
            report_out,
            histogram_out,
            bins,
            out_of_range,
        } => {
            set(&mut config.evaluate.bins, bins);
            set(
                &mut config.evaluate.out_of_range,
                out_of_range.map(|o| match o {
                    OutOfRangeArg::ToValue => OutOfRange::ToValue,
                    OutOfRangeArg::ToEdge => OutOfRange::ToEdge,
                }),
            );
            let (m, report) = pipeline::cmd_evaluate(
                &pipeline::EvaluateArgs {
                    predictions: &predictions,
                    references: &references,
                    vocabulary: &vocabulary,
                    calories: &calories,
                    report_out: &report_out,
                    histogram_out: &histogram_out,
                },
                &config.evaluate,
            )?;
            log::info!(
                "recall {:.3} iou {:.3} l1 {:.1} rce {:.3}",
                report.recall.mean,
                report.iou.mean,
                report.l1_error.mean,
                report.rce.mean
            );
            m
        }
        Command::Report {
            reports,
            summary_out,
            plot_out,
            bins,
        } => {
            set(&mut config.evaluate.bins, bins);
            pipeline::cmd_report(
                &pipeline::ReportArgs {
                    reports: &reports,
                    summary_out: &summary_out,
                    plot_out: plot_out.as_deref(),
                },
                &config.evaluate,
            )?
        }
        Command::RunAll {
            recipes,
            embeddings,
            mappings,
            ledger,
            features,
            units,
            out_dir,
            hyper,
        } => {
            hyper.apply(&mut config);
            let manifests = pipeline::run_all(
                &pipeline::RunAllArgs {
                    recipes: &recipes,
                    embeddings: &embeddings,
                    mappings: &mappings,
                    ledger: &ledger,
                    features: &features,
                    units: units.as_deref(),
                    out_dir: &out_dir,
                },
                &config,
                seed,
            )?;
            println!("{} stages written to {}", manifests.len(), out_dir.display());
            return Ok(());
        }
    };
    emit(&manifest, manifest_path)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
