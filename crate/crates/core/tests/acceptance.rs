//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every line prints; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensorimotor_core::dataset::{FeatureGrid, ProtocolKind, SyntheticObjects, SyntheticSpec};
use sensorimotor_core::experiment::{
    run_accuracy_experiment, run_accuracy_experiment_observed, run_sensations_curve,
    run_sensations_curve_observed, train_network, ClassifierKind, DataSource, ExperimentConfig,
};
use sensorimotor_core::grid::random_init_location;
use sensorimotor_core::inference::{InferenceResult, Status};
use sensorimotor_core::knn::knn_classify;
use sensorimotor_core::learning::learn_object_anchored;
use sensorimotor_core::sensory::activate;
use sensorimotor_core::{GridModuleConfig, LocationActivity, Movement, Network, NetworkConfig, Sdr};

const CLOSURE_TOL: f64 = 1e-9;
const CLOSURE_LOOPS: usize = 1000;
const ORDER_OBJECTS: usize = 100;
const RECALL_ORDERS: usize = 10;
const PROTOCOL_TOL_PP: f64 = 0.0;
const EARLY_FRACTION: f64 = 0.5;
const EARLY_SENSATIONS: usize = 9;
const ACTIVATION_PAIRS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn permutation(r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut o: Vec<usize> = (0..25).collect();
    o.shuffle(r);
    o
}

/// Records every emitted classification with the brute-force verdict on it.
#[derive(Default)]
struct Audit {
    checked: usize,
    failures: Vec<String>,
}

impl Audit {
    fn record(&mut self, net: &Network, label: usize, r: &InferenceResult) {
        let Some(predicted) = r.predicted_class else { return };
        self.checked += 1;
        let pos = r.final_position.expect("a classification has a position");
        let satisfied = brute_force_classes(net, &r.final_location, pos);
        if satisfied != vec![predicted] {
            self.failures.push(format!("label {label}: predicted {predicted}, oracle {satisfied:?}"));
        }
    }
}

/// Classes whose stored codes at `pos`, read module by module, include every
/// active cell.
fn brute_force_classes(net: &Network, location: &LocationActivity, pos: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for y in 0..net.config.num_classes {
        let stored = net.memory.codes(y, pos);
        if stored.is_empty() {
            continue;
        }
        let mut ok = true;
        for (m, cells) in location.modules.iter().enumerate() {
            for &c in cells.active() {
                if !stored.iter().any(|s| s.code.0[m] == c) {
                    ok = false;
                }
            }
        }
        if ok {
            out.push(y);
        }
    }
    out
}

fn path_closure() -> Outcome {
    let mut r = rng(1);
    let configs = GridModuleConfig::random_ensemble(40, 50, (1.0, 2.0), &mut r).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..CLOSURE_LOOPS {
        let start = random_init_location(&configs, &mut r);
        let steps = r.gen_range(2..12);
        let mut loc = start.clone();
        let mut sum = Movement::ZERO;
        for _ in 0..steps {
            let m = Movement::new(r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
            sum = sum + m;
            loc = loc.path_integrate(&configs, m).unwrap();
        }
        loc = loc.path_integrate(&configs, -sum).unwrap();
        for (i, c) in configs.iter().enumerate() {
            let a = start.modules[i].phases(c).unwrap();
            let b = loc.modules[i].phases(c).unwrap();
            for (p, q) in a.iter().zip(&b) {
                worst = worst.max(p.torus_distance(*q));
            }
        }
    }
    outcome(worst <= CLOSURE_TOL, format!("{CLOSURE_LOOPS} loops x 40 modules, max phase error {worst:.3e}"))
}

fn order_invariance() -> Outcome {
    let mut r = rng(2);
    let mut net = Network::new(NetworkConfig::default(), &mut r).unwrap();
    let raster: Vec<usize> = (0..25).collect();
    let mut differing = 0;
    for _ in 0..ORDER_OBJECTS {
        let features: Vec<Sdr> = (0..25).map(|_| Sdr::random(128, 19, &mut r).unwrap()).collect();
        let anchor = random_init_location(&net.modules, &mut r);
        let shuffled = permutation(&mut r);
        let a = learn_object_anchored(&mut net, &features, &raster, anchor.clone(), 0, &mut r).unwrap();
        let b = learn_object_anchored(&mut net, &features, &shuffled, anchor, 0, &mut r).unwrap();
        if a.codes != b.codes {
            differing += 1;
        }
    }
    outcome(differing == 0, format!("{differing}/{ORDER_OBJECTS} objects with differing codes"))
}

fn recall(audit: &mut Audit) -> Outcome {
    let mut r = rng(3);
    let spec = SyntheticSpec { num_classes: 10, feature_pool_size: 40, ..Default::default() };
    let objects = SyntheticObjects::generate(&spec, &mut r).unwrap();
    let grids: Vec<FeatureGrid> = (0..10).map(|y| objects.prototype(y)).collect();
    let train: Vec<(&FeatureGrid, Vec<usize>)> = grids.iter().map(|g| (g, permutation(&mut r))).collect();
    let net = train_network(NetworkConfig::default(), &train, 3).unwrap();
    let (mut correct, mut wrong, mut runs) = (0, 0, 0);
    for g in &grids {
        let mut orders: Vec<Vec<usize>> = Vec::new();
        while orders.len() < RECALL_ORDERS {
            let o = permutation(&mut r);
            if !orders.contains(&o) {
                orders.push(o);
            }
        }
        for o in orders {
            let res = net.run_inference(&g.features, g.label(), &o, 25).unwrap();
            audit.record(&net, g.label(), &res);
            runs += 1;
            match res.status {
                Status::Correct => correct += 1,
                Status::WrongClass => wrong += 1,
                _ => {}
            }
        }
    }
    outcome(correct == runs && wrong == 0, format!("{correct}/{runs} correct, {wrong} wrong class"))
}

fn synthetic_config(epc: usize, protocols: Vec<ProtocolKind>) -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec { num_classes: 10, feature_pool_size: 40, ..Default::default() }),
        examples_per_class: vec![epc],
        protocols,
        seeds: vec![0, 1, 2],
        test_per_class: 10,
        ..Default::default()
    }
}

fn fixed_equals_arbitrary(audit: &Mutex<Audit>) -> Outcome {
    let config = synthetic_config(5, vec![ProtocolKind::Fixed, ProtocolKind::Arbitrary]);
    let report = run_accuracy_experiment_observed(&config, &|net, g, r| {
        audit.lock().unwrap().record(net, g.label(), r)
    })
    .unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for &seed in &config.seeds {
        let acc = |p: &str| {
            report.rows.iter().find(|r| r.seed == seed && r.protocol == p).map(|r| r.accuracy).unwrap()
        };
        let (f, a) = (acc("fixed"), acc("arbitrary"));
        worst = worst.max((f - a).abs() * 100.0);
        parts.push(format!("seed {seed}: {:.1}% vs {:.1}%", f * 100.0, a * 100.0));
    }
    outcome(worst <= PROTOCOL_TOL_PP, format!("{}; max gap {worst:.2} pp", parts.join(", ")))
}

fn early_convergence(audit: &Mutex<Audit>) -> Outcome {
    let config = synthetic_config(5, vec![ProtocolKind::Arbitrary]);
    let rows = run_sensations_curve_observed(&config, &|net, g, r| audit.lock().unwrap().record(net, g.label(), r))
        .unwrap();
    let mut worst = f64::INFINITY;
    for &seed in &config.seeds {
        let curve: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.cumulative_accuracy).collect();
        let total = curve[24];
        let early = curve[EARLY_SENSATIONS - 1];
        let frac = if total > 0.0 { early / total } else { 0.0 };
        worst = worst.min(frac);
    }
    outcome(
        worst >= EARLY_FRACTION,
        format!("min over seeds of correct-within-{EARLY_SENSATIONS} / correct = {worst:.3}"),
    )
}

fn activation_oracle() -> Outcome {
    let mut r = rng(7);
    let (cols, cpc) = (128usize, 32usize);
    let mut mismatches = 0;
    for _ in 0..ACTIVATION_PAIRS {
        let density = r.gen_range(0.0..0.05);
        let predictive = Sdr::from_indices(cols * cpc, (0..(cols * cpc) as u32).filter(|_| r.gen_bool(density))).unwrap();
        let input = if r.gen_bool(0.05) { Sdr::empty(cols) } else { Sdr::random(cols, 19, &mut r).unwrap() };
        let got = activate(&predictive, &input, cpc).unwrap();

        let mut expected = Vec::new();
        for col in 0..cols as u32 {
            if !input.contains(col) {
                continue;
            }
            let cells: Vec<u32> = (col * cpc as u32..(col + 1) * cpc as u32).collect();
            let predicted: Vec<u32> = cells.iter().copied().filter(|&c| predictive.contains(c)).collect();
            expected.extend(if predicted.is_empty() { cells } else { predicted });
        }
        if got.active() != expected.as_slice() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/{ACTIVATION_PAIRS} pairs differ from the per-column rule"))
}

fn knn_sanity() -> Outcome {
    // self-classification on distinct perturbed examples
    let mut r = rng(8);
    let spec = SyntheticSpec { num_classes: 10, feature_pool_size: 40, perturbation: 0.3, ..Default::default() };
    let grids = SyntheticObjects::generate(&spec, &mut r).unwrap().dataset(5, &mut r);
    let orders: Vec<Vec<usize>> = grids.iter().map(|_| permutation(&mut r)).collect();
    let train: Vec<(&FeatureGrid, &[usize])> = grids.iter().zip(&orders).map(|(g, o)| (g, o.as_slice())).collect();
    let self_correct = train.iter().filter(|(g, o)| knn_classify(&train, (g, o), 1, 25).unwrap() == g.label()).count();
    let self_acc = self_correct as f64 / train.len() as f64;

    // prefix curve on noiseless data with a small shared pool
    let config = ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec { num_classes: 10, feature_pool_size: 12, ..Default::default() }),
        examples_per_class: vec![2],
        protocols: vec![ProtocolKind::Fixed],
        seeds: vec![0, 1, 2],
        classifier: ClassifierKind::Knn,
        knn_k: Some(1),
        test_per_class: 5,
        ..Default::default()
    };
    let curve = run_sensations_curve(&config).unwrap();
    let accuracy = run_accuracy_experiment(&config).unwrap();
    let mut violations = 0;
    let mut mismatched_end = 0;
    for &seed in &config.seeds {
        let c: Vec<f64> = curve.iter().filter(|r| r.seed == seed).map(|r| r.cumulative_accuracy).collect();
        violations += c.windows(2).filter(|w| w[1] < w[0]).count();
        let acc = accuracy.rows.iter().find(|r| r.seed == seed).unwrap().accuracy;
        if c[24] != acc {
            mismatched_end += 1;
        }
    }
    outcome(
        self_acc == 1.0 && violations == 0 && mismatched_end == 0,
        format!(
            "k=1 self accuracy {self_acc:.3}; {violations} monotonicity violations; \
             {mismatched_end} seeds where prefix 25 differs from the accuracy run"
        ),
    )
}

fn main() -> ExitCode {
    let audit = Mutex::new(Audit::default());
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((name, o, t.elapsed().as_secs_f64()));
    };

    run("path-integration closure", &mut path_closure);
    run("order invariance of learning", &mut order_invariance);
    run("recall correctness", &mut || recall(&mut audit.lock().unwrap()));
    run("fixed equals arbitrary", &mut || fixed_equals_arbitrary(&audit));
    run("early convergence", &mut || early_convergence(&audit));
    run("classification subset audit", &mut || {
        let a = audit.lock().unwrap();
        let mut detail = format!("{} classifications re-checked, {} disagreements", a.checked, a.failures.len());
        if let Some(first) = a.failures.first() {
            detail.push_str(&format!(" (first: {first})"));
        }
        outcome(a.checked > 0 && a.failures.is_empty(), detail)
    });
    run("sensory activation oracle", &mut activation_oracle);
    run("k-NN sanity", &mut knn_sanity);

    let mut failed = 0;
    for (name, o, secs) in &results {
        println!("{} {name}: {} [{secs:.2}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
