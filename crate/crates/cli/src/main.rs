use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sensorimotor_core::dataset::save_grids;
use sensorimotor_core::experiment::{
    csv_string, export_prediction_traces, first_corpus, run_accuracy_experiment, run_sensations_curve, synthetic_dataset,
    train_first, write_csv, write_results_jsonl, DataSource, ExperimentConfig,
};
use sensorimotor_core::{Error, Network};

#[derive(Parser)]
#[command(name = "sensorimotor", version, about = "Grid-cell sensorimotor recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network for the first seed and setting and save a snapshot.
    Train(Common),
    /// Accuracy per seed and setting, plus a mean and 95% CI summary.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Write per-example results as JSON lines.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Cumulative accuracy against the number of sensations.
    Curve(Common),
    /// Export per-sensation prediction traces for test examples.
    Traces {
        #[command(flatten)]
        common: Common,
        /// Test example ids.
        #[arg(long, value_delimiter = ',')]
        examples: Vec<usize>,
        /// Use a saved snapshot instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write a synthetic dataset (`.fgrd` or `.jsonl`).
    Synth(Common),
}

#[derive(Args, Default)]
struct Common {
    /// key=value file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training feature-grid file.
    #[arg(long)]
    data: Option<String>,
    /// Test feature-grid file; defaults to a held-out slice of --data.
    #[arg(long)]
    test_data: Option<String>,
    /// Synthetic data spec, e.g. `classes=10,pool=40,perturb=0.1`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, value_delimiter = ',')]
    examples_per_class: Vec<String>,
    /// fixed, arbitrary or partial:N.
    #[arg(long, value_delimiter = ',')]
    protocol: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    theta_loc: Vec<String>,
    #[arg(long)]
    theta_in: Option<String>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<String>,
    /// gridcellnet or knn.
    #[arg(long)]
    classifier: Option<String>,
    /// Neighbours for k-NN.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    test_offset: Option<String>,
    #[arg(long)]
    test_count: Option<String>,
    #[arg(long)]
    test_per_class: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Settings the experiment config does not own.
#[derive(Default)]
struct Extra {
    out: Option<PathBuf>,
    examples: Vec<usize>,
    results: Option<PathBuf>,
    model: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, Extra)> {
        let mut config = ExperimentConfig::default();
        let mut extra = Extra::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            for (k, v) in config.parse_file_contents(&text)? {
                match k.as_str() {
                    "out" => extra.out = Some(v.into()),
                    "results" => extra.results = Some(v.into()),
                    "model" => extra.model = Some(v.into()),
                    "examples" => {
                        extra.examples = v
                            .split(',')
                            .map(|s| s.trim().parse())
                            .collect::<std::result::Result<_, _>>()
                            .context("bad examples list")?
                    }
                    _ => bail!(Error::InvalidConfig(format!("unknown key {k:?}"))),
                }
            }
        }
        let single = [
            ("synthetic", &self.synthetic),
            ("data", &self.data),
            ("test_data", &self.test_data),
            ("theta_in", &self.theta_in),
            ("classifier", &self.classifier),
            ("k", &self.k),
            ("test_offset", &self.test_offset),
            ("test_count", &self.test_count),
            ("test_per_class", &self.test_per_class),
        ];
        for (key, value) in single {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        let lists = [
            ("examples_per_class", &self.examples_per_class),
            ("protocol", &self.protocol),
            ("theta_loc", &self.theta_loc),
            ("seed", &self.seed),
        ];
        for (key, values) in lists {
            if !values.is_empty() {
                config.set(key, &values.join(","))?;
            }
        }
        if self.out.is_some() {
            extra.out = self.out.clone();
        }
        config.validate()?;
        Ok((config, extra))
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let (config, extra) = common.resolve()?;
            let (net, corpus, _) = train_first(&config)?;
            let out = extra.out.unwrap_or_else(|| "model.json".into());
            net.save_snapshot(&out)?;
            println!(
                "trained {} examples ({} classes), {} location segments, {} sensory segments -> {}",
                net.objects_learned(),
                corpus.num_classes,
                net.location_segments.num_segments(),
                net.sensory.segments.num_segments(),
                out.display()
            );
        }
        Command::Eval { common, results } => {
            let (config, mut extra) = common.resolve()?;
            if results.is_some() {
                extra.results = results;
            }
            let report = run_accuracy_experiment(&config)?;
            match &extra.out {
                Some(out) => {
                    emit(Some(out), &csv_string(&report.rows)?)?;
                    emit(Some(&summary_path(out)), &csv_string(&report.summary)?)?;
                }
                None => {
                    emit(None, &csv_string(&report.rows)?)?;
                    println!();
                    emit(None, &csv_string(&report.summary)?)?;
                }
            }
            if let Some(path) = &extra.results {
                write_results_jsonl(BufWriter::new(fs::File::create(path)?), &report.results)?;
            }
        }
        Command::Curve(common) => {
            let (config, extra) = common.resolve()?;
            let rows = run_sensations_curve(&config)?;
            match &extra.out {
                Some(out) => write_csv(BufWriter::new(fs::File::create(out)?), &rows)?,
                None => write_csv(io::stdout().lock(), &rows)?,
            }
        }
        Command::Traces { common, examples, model } => {
            let (config, mut extra) = common.resolve()?;
            if !examples.is_empty() {
                extra.examples = examples;
            }
            if model.is_some() {
                extra.model = model;
            }
            let out = extra.out.context("traces needs --out <directory>")?;
            let (net, corpus, protocol) = match &extra.model {
                Some(path) => {
                    let (corpus, protocol) = first_corpus(&config)?;
                    (Network::load_snapshot(path)?, corpus, protocol)
                }
                None => train_first(&config)?,
            };
            let ids = if extra.examples.is_empty() { vec![0] } else { extra.examples };
            let traces = export_prediction_traces(&net, &corpus, &protocol, &ids, &out)?;
            let decodable = traces.iter().filter(|t| t.final_grid.decodable).count();
            println!("{} traces, {decodable} decodable -> {}", traces.len(), out.display());
        }
        Command::Synth(common) => {
            let (config, extra) = common.resolve()?;
            let DataSource::Synthetic(spec) = &config.data else {
                bail!(Error::InvalidConfig("synth takes --synthetic, not --data".into()));
            };
            let out = extra.out.context("synth needs --out <file>")?;
            let grids = synthetic_dataset(spec, config.examples_per_class[0], config.seeds[0])?;
            save_grids(&out, &grids, &spec.layout)?;
            println!("{} grids -> {}", grids.len(), out.display());
        }
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_)) => "io",
        Some(Error::Format(_)) | Some(Error::Json(_)) => "format",
        Some(Error::InvalidConfig(_)) => "config",
        Some(_) => "model",
        None if e.downcast_ref::<io::Error>().is_some() => "io",
        None => "usage",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // nested sources often repeat their cause's text
            let mut message = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !message.contains(&cause) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&cause);
                }
            }
            eprintln!("error kind={} message={message:?}", error_kind(&e));
            ExitCode::FAILURE
        }
    }
}
