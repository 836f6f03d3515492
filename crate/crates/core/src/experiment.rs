//! Experiment harness: few-shot accuracy across training-set sizes and
//! traversal protocols, cumulative accuracy against sensation count, and
//! prediction-trace export.
//!
//! Every random choice is drawn from a ChaCha stream keyed by the run seed,
//! and test examples are evaluated in parallel but merged by index, so a
//! config and seed fully determine every output byte.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{
    load_grids, save_fgrd, FeatureGrid, GridLayout, ProtocolKind, SequenceProtocol, Split, SyntheticObjects,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::inference::{classify, InferenceResult, InferenceSession, Status, Verdict};
use crate::knn::KnnClassifier;
use crate::network::{tuned_theta_loc, Network, NetworkConfig, DEFAULT_THETA_IN};
use crate::sdr::Sdr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    GridCellNet,
    Knn,
}

impl ClassifierKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gridcellnet" => Ok(Self::GridCellNet),
            "knn" => Ok(Self::Knn),
            _ => Err(Error::InvalidConfig(format!("unknown classifier {s:?}"))),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GridCellNet => "gridcellnet",
            Self::Knn => "knn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A feature-grid file. Without `test_data`, the test slice is cut from
    /// this file and the remainder is the training pool.
    File { data: PathBuf, test_data: Option<PathBuf> },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub examples_per_class: Vec<usize>,
    pub protocols: Vec<ProtocolKind>,
    /// Empty means the tuned value for each training-set size.
    pub theta_loc: Vec<u32>,
    pub theta_in: u32,
    pub seeds: Vec<u64>,
    pub classifier: ClassifierKind,
    /// Neighbours for k-NN; `None` means the tuned value per setting.
    pub knn_k: Option<usize>,
    pub test_offset: usize,
    pub test_count: usize,
    /// Test examples per class drawn for synthetic data.
    pub test_per_class: usize,
    pub network: NetworkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            examples_per_class: vec![1],
            protocols: vec![ProtocolKind::Arbitrary],
            theta_loc: Vec::new(),
            theta_in: DEFAULT_THETA_IN,
            seeds: vec![0],
            classifier: ClassifierKind::GridCellNet,
            knn_k: None,
            test_offset: 0,
            test_count: 1000,
            test_per_class: 10,
            network: NetworkConfig::default(),
        }
    }
}

/// Neighbour count tuned per training-set size: one neighbour for fixed
/// sequences, more for larger arbitrary-order training sets. Other sizes use
/// the nearest tabulated entry.
pub fn tuned_knn_k(examples_per_class: usize, protocol: ProtocolKind) -> usize {
    const ARBITRARY: [(usize, usize); 4] = [(1, 1), (5, 1), (10, 7), (20, 9)];
    match protocol {
        ProtocolKind::Fixed => 1,
        ProtocolKind::Arbitrary | ProtocolKind::Partial(_) => ARBITRARY
            .iter()
            .min_by_key(|(n, _)| n.abs_diff(examples_per_class))
            .map_or(1, |&(_, k)| k),
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad value for {key}: {v:?}")))
}

impl ExperimentConfig {
    /// Applies one `key=value` setting. List-valued keys take comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "data" => {
                let test_data = match &self.data {
                    DataSource::File { test_data, .. } => test_data.clone(),
                    DataSource::Synthetic(_) => None,
                };
                self.data = DataSource::File { data: value.into(), test_data };
            }
            "test_data" => match &mut self.data {
                DataSource::File { test_data, .. } => *test_data = Some(value.into()),
                DataSource::Synthetic(_) => {
                    return Err(Error::InvalidConfig("test_data requires data".into()));
                }
            },
            "synthetic" => self.data = DataSource::Synthetic(SyntheticSpec::parse(value)?),
            "examples_per_class" => self.examples_per_class = parse_list(value, |s| parse_num(key, s))?,
            "protocol" => self.protocols = parse_list(value, ProtocolKind::parse)?,
            "theta_loc" => self.theta_loc = parse_list(value, |s| parse_num(key, s))?,
            "theta_in" => self.theta_in = parse_num(key, value)?,
            "seed" => self.seeds = parse_list(value, |s| parse_num(key, s))?,
            "classifier" => self.classifier = ClassifierKind::parse(value)?,
            "k" => self.knn_k = Some(parse_num(key, value)?),
            "test_offset" => self.test_offset = parse_num(key, value)?,
            "test_count" => self.test_count = parse_num(key, value)?,
            "test_per_class" => self.test_per_class = parse_num(key, value)?,
            "modules" => self.network.num_modules = parse_num(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a config file of `key=value` lines; `#` starts a comment.
    /// Keys outside the experiment (such as `out`) are returned untouched.
    pub fn parse_file_contents(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut passthrough = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", n + 1)))?;
            match self.set(k, v) {
                Err(Error::InvalidConfig(msg)) if msg.starts_with("unknown key") => {
                    passthrough.push((k.trim().to_string(), v.trim().to_string()))
                }
                Err(Error::InvalidConfig(msg)) => {
                    return Err(Error::InvalidConfig(format!("line {}: {msg}", n + 1)))
                }
                other => other?,
            }
        }
        Ok(passthrough)
    }

    pub fn validate(&self) -> Result<()> {
        if self.examples_per_class.is_empty() || self.examples_per_class.contains(&0) {
            return Err(Error::InvalidConfig("examples_per_class must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.protocols.is_empty() {
            return Err(Error::InvalidConfig("at least one protocol is required".into()));
        }
        if self.knn_k == Some(0) {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        self.network.validate()
    }

    fn knn_k_for(&self, setting: &Setting, trained: &Trained<'_>) -> usize {
        self.knn_k.unwrap_or_else(|| tuned_knn_k(setting.examples_per_class, trained.protocol.kind))
    }

    fn thetas_for(&self, examples_per_class: usize) -> Vec<u32> {
        if self.theta_loc.is_empty() {
            vec![tuned_theta_loc(examples_per_class)]
        } else {
            self.theta_loc.clone()
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const STREAM_DATA: u64 = 1;
const STREAM_SELECT: u64 = 2;
const STREAM_NETWORK: u64 = 3;
const STREAM_LEARN: u64 = 4;

/// Training pool and test set, fixed per seed.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub layout: GridLayout,
    pub num_classes: usize,
    pub pool: Vec<FeatureGrid>,
    pub test: Vec<FeatureGrid>,
}

/// Loads or generates the data. File data is read once; synthetic data is
/// generated per seed, with enough pool examples per class for the largest
/// training-set size.
pub struct DataProvider {
    files: Option<(GridLayout, Vec<FeatureGrid>, Vec<FeatureGrid>)>,
    config: ExperimentConfig,
}

impl DataProvider {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let files = match &config.data {
            DataSource::Synthetic(_) => None,
            DataSource::File { data, test_data } => {
                let (layout, grids) = load_grids(data)?;
                let (pool, test) = match test_data {
                    Some(t) => {
                        let (tl, tg) = load_grids(t)?;
                        if tl != layout {
                            return Err(Error::InvalidConfig("train and test files differ in layout".into()));
                        }
                        let end = (config.test_offset + config.test_count).min(tg.len());
                        let test = tg.get(config.test_offset..end).unwrap_or_default().to_vec();
                        (grids, test)
                    }
                    None => {
                        let end = (config.test_offset + config.test_count).min(grids.len());
                        if config.test_offset >= end || end - config.test_offset >= grids.len() {
                            return Err(Error::InvalidConfig(
                                "test slice leaves no training data; supply test_data".into(),
                            ));
                        }
                        let test = grids[config.test_offset..end].to_vec();
                        let mut pool = grids[..config.test_offset].to_vec();
                        pool.extend_from_slice(&grids[end..]);
                        (pool, test)
                    }
                };
                if test.is_empty() {
                    return Err(Error::InvalidConfig("test set is empty".into()));
                }
                Some((layout, pool, test))
            }
        };
        Ok(Self { files, config: config.clone() })
    }

    pub fn corpus(&self, seed: u64) -> Result<Corpus> {
        match (&self.files, &self.config.data) {
            (Some((layout, pool, test)), _) => {
                let num_classes =
                    pool.iter().chain(test).map(|g| g.label() + 1).max().unwrap_or(1);
                Ok(Corpus { layout: *layout, num_classes, pool: pool.clone(), test: test.clone() })
            }
            (None, DataSource::Synthetic(spec)) => {
                let mut rng = stream_rng(seed, STREAM_DATA);
                let objects = SyntheticObjects::generate(spec, &mut rng)?;
                let max_epc = *self.config.examples_per_class.iter().max().expect("validated");
                let pool = objects.dataset(max_epc, &mut rng);
                let test = objects.dataset(self.config.test_per_class, &mut rng);
                Ok(Corpus { layout: spec.layout, num_classes: spec.num_classes, pool, test })
            }
            (None, DataSource::File { .. }) => unreachable!("files are loaded in new"),
        }
    }
}

/// Picks `per_class` training examples of every class, class-major.
pub fn select_training(pool: &[FeatureGrid], num_classes: usize, per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = stream_rng(seed, STREAM_SELECT);
    let mut chosen = Vec::with_capacity(num_classes * per_class);
    for y in 0..num_classes {
        let mut idx: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].label() == y).collect();
        if idx.len() < per_class {
            return Err(Error::InvalidConfig(format!(
                "class {y} has {} training examples, {per_class} requested",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        idx.truncate(per_class);
        idx.sort_unstable();
        chosen.extend(idx);
    }
    Ok(chosen)
}

pub fn network_config(config: &ExperimentConfig, corpus: &Corpus, theta_loc: u32) -> NetworkConfig {
    NetworkConfig {
        num_columns: corpus.layout.feature_dim,
        grid_side: corpus.layout.grid_side,
        num_classes: corpus.num_classes,
        theta_in: config.theta_in,
        theta_loc,
        ..config.network.clone()
    }
}

/// Trains one network on `train` (grids with their traversal orders).
pub fn train_network(net_config: NetworkConfig, train: &[(&FeatureGrid, Vec<usize>)], seed: u64) -> Result<Network> {
    let mut net = Network::new(net_config, &mut stream_rng(seed, STREAM_NETWORK))?;
    let mut rng = stream_rng(seed, STREAM_LEARN);
    for (g, order) in train {
        net.train_example(&g.features, g.label(), order, &mut rng)?;
    }
    Ok(net)
}

/// Per-example outcome of one evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub example: usize,
    pub label: usize,
    pub status: Status,
    pub predicted_class: Option<usize>,
    pub sensations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Setting {
    pub examples_per_class: usize,
    pub protocol: String,
    pub classifier: ClassifierKind,
    /// Absent for k-NN.
    pub theta_loc: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub seed: u64,
    pub examples_per_class: usize,
    pub protocol: String,
    pub classifier: ClassifierKind,
    pub theta_loc: Option<u32>,
    pub accuracy: f64,
    pub mean_sensations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub examples_per_class: usize,
    pub protocol: String,
    pub classifier: ClassifierKind,
    pub theta_loc: Option<u32>,
    pub seeds: usize,
    pub mean_accuracy: f64,
    /// Half-width of the 95% Student-t interval; NaN for a single seed.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub seed: u64,
    pub examples_per_class: usize,
    pub protocol: String,
    pub classifier: ClassifierKind,
    pub theta_loc: Option<u32>,
    pub n_sensations: usize,
    pub cumulative_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AccuracyReport {
    pub rows: Vec<AccuracyRow>,
    pub summary: Vec<SummaryRow>,
    /// Raw per-example results keyed by (seed, setting), for auditing.
    pub results: Vec<(u64, Setting, Vec<ExampleResult>)>,
}

pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Mean and 95% confidence half-width of the mean.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n > 1").inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// One trained configuration, ready to evaluate.
struct Trained<'a> {
    corpus: &'a Corpus,
    protocol: SequenceProtocol,
    train: Vec<(&'a FeatureGrid, Vec<usize>)>,
}

impl<'a> Trained<'a> {
    fn new(corpus: &'a Corpus, kind: ProtocolKind, per_class: usize, seed: u64) -> Result<Self> {
        let protocol = SequenceProtocol::new(kind, seed, corpus.layout.num_positions());
        let chosen = select_training(&corpus.pool, corpus.num_classes, per_class, seed)?;
        let train = chosen
            .iter()
            .enumerate()
            .map(|(i, &p)| (&corpus.pool[p], protocol.order(Split::Train, i)))
            .collect();
        Ok(Self { corpus, protocol, train })
    }

    fn test_order(&self, i: usize) -> Vec<usize> {
        self.protocol.order(Split::Test, i)
    }

    fn eval_network(&self, net: &Network, observe: &Observer<'_>) -> Result<Vec<ExampleResult>> {
        let max = self.protocol.max_sensations();
        self.corpus
            .test
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let r = net.run_inference(&g.features, g.label(), &self.test_order(i), max)?;
                observe(net, g, &r);
                Ok(ExampleResult {
                    example: i,
                    label: g.label(),
                    status: r.status,
                    predicted_class: r.predicted_class,
                    sensations_used: r.sensations_used,
                })
            })
            .collect()
    }

    fn eval_knn(&self, k: usize, prefix_len: usize) -> Result<Vec<ExampleResult>> {
        let train: Vec<(&FeatureGrid, &[usize])> = self.train.iter().map(|(g, o)| (*g, o.as_slice())).collect();
        let knn = KnnClassifier::fit(&train, k, prefix_len)?;
        self.corpus
            .test
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let y = knn.predict(g, &self.test_order(i))?;
                Ok(ExampleResult {
                    example: i,
                    label: g.label(),
                    status: if y == g.label() { Status::Correct } else { Status::WrongClass },
                    predicted_class: Some(y),
                    sensations_used: prefix_len,
                })
            })
            .collect()
    }
}

/// Sees every network inference: the trained network, the test grid and its result.
pub type Observer<'a> = dyn Fn(&Network, &FeatureGrid, &InferenceResult) + Sync + 'a;

fn accuracy(results: &[ExampleResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.status == Status::Correct).count() as f64 / results.len() as f64
}

fn mean_sensations(results: &[ExampleResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().map(|r| r.sensations_used).sum::<usize>() as f64 / results.len() as f64
}

/// Visits every (seed, examples per class, protocol, theta) combination.
/// The network is trained once per (seed, size, protocol) and evaluated at
/// each threshold, since recall thresholds do not affect learning.
fn for_each_setting<F>(config: &ExperimentConfig, mut visit: F) -> Result<()>
where
    F: FnMut(u64, Setting, &Trained<'_>, Option<&Network>) -> Result<()>,
{
    let provider = DataProvider::new(config)?;
    for &seed in &config.seeds {
        let corpus = provider.corpus(seed)?;
        for &epc in &config.examples_per_class {
            for &kind in &config.protocols {
                let trained = Trained::new(&corpus, kind, epc, seed)?;
                match config.classifier {
                    ClassifierKind::Knn => {
                        let setting = Setting {
                            examples_per_class: epc,
                            protocol: kind.to_string(),
                            classifier: ClassifierKind::Knn,
                            theta_loc: None,
                        };
                        visit(seed, setting, &trained, None)?;
                    }
                    ClassifierKind::GridCellNet => {
                        let thetas = config.thetas_for(epc);
                        let mut net = train_network(network_config(config, &corpus, thetas[0]), &trained.train, seed)?;
                        for theta in thetas {
                            net.config.theta_loc = theta;
                            let setting = Setting {
                                examples_per_class: epc,
                                protocol: kind.to_string(),
                                classifier: ClassifierKind::GridCellNet,
                                theta_loc: Some(theta),
                            };
                            visit(seed, setting, &trained, Some(&net))?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn run_accuracy_experiment(config: &ExperimentConfig) -> Result<AccuracyReport> {
    run_accuracy_experiment_observed(config, &|_, _, _| ())
}

pub fn run_accuracy_experiment_observed(config: &ExperimentConfig, observe: &Observer<'_>) -> Result<AccuracyReport> {
    let mut report = AccuracyReport::default();
    for_each_setting(config, |seed, setting, trained, net| {
        let results = match net {
            Some(net) => trained.eval_network(net, observe)?,
            None => trained.eval_knn(config.knn_k_for(&setting, trained), trained.protocol.max_sensations())?,
        };
        report.rows.push(AccuracyRow {
            seed,
            examples_per_class: setting.examples_per_class,
            protocol: setting.protocol.clone(),
            classifier: setting.classifier,
            theta_loc: setting.theta_loc,
            accuracy: accuracy(&results),
            mean_sensations: mean_sensations(&results),
        });
        report.results.push((seed, setting, results));
        Ok(())
    })?;

    let mut groups: BTreeMap<Setting, Vec<f64>> = BTreeMap::new();
    for (row, (_, setting, _)) in report.rows.iter().zip(&report.results) {
        groups.entry(setting.clone()).or_default().push(row.accuracy);
    }
    report.summary = groups
        .into_iter()
        .map(|(s, accs)| {
            let (mean, ci) = mean_ci95(&accs);
            SummaryRow {
                examples_per_class: s.examples_per_class,
                protocol: s.protocol,
                classifier: s.classifier,
                theta_loc: s.theta_loc,
                seeds: accs.len(),
                mean_accuracy: mean,
                ci95: ci,
            }
        })
        .collect();
    Ok(report)
}

/// Cumulative accuracy for n = 1..=max sensations. For the network an example
/// counts once it is classified correctly within n sensations; k-NN is refit
/// on n-feature prefixes.
pub fn run_sensations_curve(config: &ExperimentConfig) -> Result<Vec<CurveRow>> {
    run_sensations_curve_observed(config, &|_, _, _| ())
}

pub fn run_sensations_curve_observed(config: &ExperimentConfig, observe: &Observer<'_>) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for_each_setting(config, |seed, setting, trained, net| {
        let max = trained.protocol.max_sensations();
        let n_test = trained.corpus.test.len().max(1) as f64;
        let per_n: Vec<f64> = match net {
            Some(net) => {
                let results = trained.eval_network(net, observe)?;
                (1..=max)
                    .map(|n| {
                        results.iter().filter(|r| r.status == Status::Correct && r.sensations_used <= n).count()
                            as f64
                            / n_test
                    })
                    .collect()
            }
            None => (1..=max)
                .map(|n| trained.eval_knn(config.knn_k_for(&setting, trained), n).map(|r| accuracy(&r)))
                .collect::<Result<_>>()?,
        };
        rows.extend(per_n.into_iter().enumerate().map(|(i, a)| CurveRow {
            seed,
            examples_per_class: setting.examples_per_class,
            protocol: setting.protocol.clone(),
            classifier: setting.classifier,
            theta_loc: setting.theta_loc,
            n_sensations: i + 1,
            cumulative_accuracy: a,
        }));
        Ok(())
    })?;
    Ok(rows)
}

/// `per_class` examples of every synthetic class, generated from `seed` and
/// shuffled so that any contiguous slice mixes classes.
pub fn synthetic_dataset(spec: &SyntheticSpec, per_class: usize, seed: u64) -> Result<Vec<FeatureGrid>> {
    let mut rng = stream_rng(seed, STREAM_DATA);
    let mut grids = SyntheticObjects::generate(spec, &mut rng)?.dataset(per_class, &mut rng);
    grids.shuffle(&mut rng);
    Ok(grids)
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    seed: u64,
    #[serde(flatten)]
    setting: &'a Setting,
    #[serde(flatten)]
    result: &'a ExampleResult,
}

/// Dumps per-example results as JSON lines, one object per test example.
pub fn write_results_jsonl<W: Write>(mut w: W, results: &[(u64, Setting, Vec<ExampleResult>)]) -> Result<()> {
    for (seed, setting, rs) in results {
        for result in rs {
            serde_json::to_writer(&mut w, &ResultRecord { seed: *seed, setting, result })?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Test corpus and protocol for the first seed and protocol of `config`.
pub fn first_corpus(config: &ExperimentConfig) -> Result<(Corpus, SequenceProtocol)> {
    let corpus = DataProvider::new(config)?.corpus(config.seeds[0])?;
    let protocol = SequenceProtocol::new(config.protocols[0], config.seeds[0], corpus.layout.num_positions());
    Ok((corpus, protocol))
}

/// Trains the network for the first seed and setting of `config`.
pub fn train_first(config: &ExperimentConfig) -> Result<(Network, Corpus, SequenceProtocol)> {
    let (corpus, _) = first_corpus(config)?;
    let seed = config.seeds[0];
    let epc = config.examples_per_class[0];
    let trained = Trained::new(&corpus, config.protocols[0], epc, seed)?;
    let theta = config.thetas_for(epc)[0];
    let net = train_network(network_config(config, &corpus, theta), &trained.train, seed)?;
    let protocol = trained.protocol;
    Ok((net, corpus, protocol))
}

/// One prediction frame: the state after `sensation` sensations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub sensation: usize,
    pub sensed_positions: Vec<usize>,
    pub next_position: Option<usize>,
    /// Columns predicted at `next_position`.
    pub next_predicted: Vec<u32>,
    /// Per position: the sensed feature where sensed, else the predicted columns.
    pub grid: Vec<Vec<u32>>,
    /// The location activity holds more than one cell in some module.
    pub union: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalGrid {
    /// Predicted columns at every position.
    pub grid: Vec<Vec<u32>>,
    pub union: bool,
    /// Single location code with a full-size prediction at every position.
    pub decodable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub example: usize,
    pub label: usize,
    pub status: Status,
    pub predicted_class: Option<usize>,
    /// Frames from the second sensation onward.
    pub frames: Vec<TraceFrame>,
    #[serde(rename = "final")]
    pub final_grid: FinalGrid,
}

fn predicted_grid(net: &Network, session: &InferenceSession) -> Result<Vec<Sdr>> {
    (0..net.config.num_positions())
        .map(|p| match net.predict_feature_at(session, p) {
            Ok(pred) => Ok(pred.columns),
            Err(Error::EmptyLocation) => Ok(Sdr::empty(net.config.num_columns)),
            Err(e) => Err(e),
        })
        .collect()
}

/// Replays one test example, recording what the network predicts after each
/// sensation and the full predicted grid once inference ends.
pub fn trace_example(
    net: &Network,
    grid: &FeatureGrid,
    example: usize,
    order: &[usize],
    max_sensations: usize,
) -> Result<PredictionTrace> {
    crate::learning::validate_order(order, net.config.num_positions())?;
    let mut session = InferenceSession::new(net);
    let mut frames = Vec::new();
    let mut status = Status::NoConvergence;
    let mut predicted_class = None;
    let limit = max_sensations.min(order.len());
    for (step, &pos) in order[..limit].iter().enumerate() {
        let report = net.sense(&mut session, &grid.features[pos], pos)?;
        let n = step + 1;
        if n >= 2 {
            let predicted = predicted_grid(net, &session)?;
            let sensed = &order[..n];
            let next_position = order.get(n).copied();
            frames.push(TraceFrame {
                sensation: n,
                sensed_positions: sensed.to_vec(),
                next_position,
                next_predicted: next_position.map_or_else(Vec::new, |p| predicted[p].active().to_vec()),
                grid: (0..predicted.len())
                    .map(|p| {
                        if sensed.contains(&p) { &grid.features[p] } else { &predicted[p] }.active().to_vec()
                    })
                    .collect(),
                union: !session.location().is_single(),
            });
        }
        match report.classification.verdict {
            Verdict::Undecided => continue,
            Verdict::Unique(y) => {
                status = if y == grid.label() { Status::Correct } else { Status::WrongClass };
                predicted_class = Some(y);
            }
            Verdict::Multiple(_) => status = Status::Ambiguous,
        }
        break;
    }
    let predicted = predicted_grid(net, &session)?;
    let union = !session.location().is_single();
    let k = grid.features.first().map_or(0, Sdr::cardinality);
    let decodable = !union && predicted.iter().all(|p| p.cardinality() == k);
    Ok(PredictionTrace {
        example,
        label: grid.label(),
        status,
        predicted_class,
        frames,
        final_grid: FinalGrid {
            grid: predicted.iter().map(|p| p.active().to_vec()).collect(),
            union,
            decodable,
        },
    })
}

/// Writes `traces.jsonl` (one trace per example) and `final_grids.fgrd`
/// holding the decodable final grids, in trace order.
pub fn export_prediction_traces(
    net: &Network,
    corpus: &Corpus,
    protocol: &SequenceProtocol,
    example_ids: &[usize],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PredictionTrace>> {
    for &id in example_ids {
        if id >= corpus.test.len() {
            return Err(Error::IndexOutOfRange { index: id, dimension: corpus.test.len() });
        }
    }
    let traces: Vec<PredictionTrace> = example_ids
        .par_iter()
        .map(|&id| {
            trace_example(net, &corpus.test[id], id, &protocol.order(Split::Test, id), protocol.max_sensations())
        })
        .collect::<Result<_>>()?;

    let out = out_dir.as_ref();
    fs::create_dir_all(out)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out.join("traces.jsonl"))?);
    for t in &traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let decodable: Vec<FeatureGrid> = traces
        .iter()
        .filter(|t| t.final_grid.decodable)
        .map(|t| {
            Ok(FeatureGrid {
                label: t.predicted_class.unwrap_or(t.label) as u8,
                source: corpus.test[t.example].source,
                features: t
                    .final_grid
                    .grid
                    .iter()
                    .map(|cols| Sdr::from_sorted(corpus.layout.feature_dim, cols.clone()))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    save_fgrd(out.join("final_grids.fgrd"), &decodable, &corpus.layout)?;
    Ok(traces)
}

/// Re-checks a classification against memory by brute force: the classes
/// whose stored codes at `position`, taken per module, cover every active cell.
pub fn subset_oracle(net: &Network, location: &crate::grid::LocationActivity, position: usize) -> Vec<usize> {
    (0..net.config.num_classes)
        .filter(|&y| {
            let codes = net.memory.codes(y, position);
            !codes.is_empty()
                && location.modules.iter().enumerate().all(|(m, active)| {
                    active.active().iter().all(|c| codes.iter().any(|s| s.code.0[m] == *c))
                })
        })
        .collect()
}

/// Candidate classes after classifying `location` at `position`; see [`classify`].
pub fn candidates(net: &Network, location: &crate::grid::LocationActivity, position: usize) -> Vec<usize> {
    match classify(location, &net.memory, position).verdict {
        Verdict::Unique(y) => vec![y],
        Verdict::Multiple(ys) => ys,
        Verdict::Undecided => Vec::new(),
    }
}
