//! Command implementations. Every command writes its artifacts plus a
//! `run_manifest_<command>.json` into `--out`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use evolm::benchfns::{self, BenchmarkFunction};
use evolm::cnn::{CnnArchitecture, CnnModel, PretrainConfig};
use evolm::dataset::{self, DatasetSplit, ImageRecord, Label};
use evolm::elm;
use evolm::evaluation::{median, time_action, EvalReport};
use evolm::exec::Execution;
use evolm::pipeline::{self, PipelineConfig, PipelineModel};
use evolm::sweep::{run_sweep, SweepLevels, FACTORS};
use evolm::RngStream;
use serde::{Deserialize, Serialize};

use crate::manifest::Artifacts;
use crate::{BenchArgs, DataArgs, EvalArgs, EvolveArgs, ExtractArgs, PretrainArgs, SweepArgs, SynthArgs};

/// Written next to the CNN file so later stages can record how it was trained.
pub const PRETRAIN_RECORD_FILE: &str = "pretrain.json";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or a missing upstream artifact.
    Usage(String),
    Run(evolm::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Run(evolm::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Run(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<evolm::Error> for CliError {
    fn from(e: evolm::Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("missing {what}: expected {}", path.display())))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Loads a dataset and appends augmented positives to the training split.
fn load_data(args: &DataArgs, seed: u64) -> CliResult<(DatasetSplit, Vec<ImageRecord>)> {
    require(&args.data, "dataset directory")?;
    if args.augment == 0 {
        return Err(usage("--augment must be at least 1"));
    }
    let loaded = dataset::load_directory(&args.data).map_err(|e| match e {
        evolm::Error::Domain(m) => usage(m),
        other => other.into(),
    })?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let mut train = loaded.split.train.clone();
    if args.augment > 1 {
        let positives: Vec<ImageRecord> = train.iter().filter(|r| r.label.is_positive()).cloned().collect();
        let mut stream = RngStream::new(seed, 0).child("augmentation");
        train.extend(dataset::augment(&positives, args.augment, &mut stream));
    }
    Ok((loaded.split, train))
}

fn parse_arch(s: &str) -> CliResult<CnnArchitecture> {
    CnnArchitecture::parse(s).map_err(|e| usage(format!("--arch {s}: {e}")))
}

pub fn bench(args: &BenchArgs, exec: Execution) -> CliResult {
    if args.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let functions = args
        .functions
        .iter()
        .map(|id| {
            let f = benchfns::lookup(id.trim()).map_err(|_| usage(format!("unknown function id {id:?} (tf1..tf9)")))?;
            match args.dim {
                Some(d) if !f.fixed_dim => f.with_dim(d).map_err(|e| usage(e.to_string())),
                _ => Ok(f),
            }
        })
        .collect::<CliResult<Vec<BenchmarkFunction>>>()?;

    let mut out = Artifacts::new(&args.out)?;
    let mut summary = String::from("function,dim,runs,median_final,best_final,f_min\n");
    let mut meta = Vec::new();
    for f in &functions {
        let config = evolm::sca::ScaConfig {
            record_history: args.history,
            ..benchfns::sca_config(f, args.pop, args.iters, args.a)
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        let runs = benchfns::run_many(f, &config, args.seeds, args.seed, exec)?;
        for (k, run) in runs.iter().enumerate() {
            out.write(&format!("{}/seed{k:02}.csv", f.id), &run.diagnostics.to_csv())?;
            if let Some(h) = run.diagnostics.history_csv() {
                out.write(&format!("{}/seed{k:02}_history.csv", f.id), &h)?;
            }
        }
        let finals: Vec<f64> = runs.iter().map(|r| r.best_fitness).collect();
        let med = median(&finals)?;
        let best = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let _ = writeln!(summary, "{},{},{},{med},{best},{}", f.id, f.dim, runs.len(), f.f_min);
        println!("{:<4} dim {:>2}  median {med:.6e}  best {best:.6e}  f_min {}", f.id, f.dim, f.f_min);
        meta.push(serde_json::json!({
            "id": f.id.as_str(),
            "name": f.name,
            "dim": f.dim,
            "range": [f.range.0, f.range.1],
            "f_min": f.f_min,
            "variant": f.variant(),
            "seeds": (0..args.seeds).map(|k| benchfns::run_seed(args.seed, f.id, k)).collect::<Vec<_>>(),
        }));
    }
    out.write("summary.csv", &summary)?;
    out.write("functions.json", &json(&meta)?)?;
    let config = serde_json::json!({
        "functions": functions.iter().map(|f| f.id.as_str()).collect::<Vec<_>>(),
        "dim": args.dim, "pop": args.pop, "iters": args.iters, "a": args.a,
        "seeds": args.seeds, "seed": args.seed, "history": args.history,
    });
    out.finish("bench", &config, exec)
}

fn json(v: &impl Serialize) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v).map_err(evolm::Error::from)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PretrainRecord {
    architecture: String,
    seed: u64,
    augment: usize,
    train_images: usize,
    pretrain: PretrainConfig,
}

pub fn pretrain(args: &PretrainArgs, exec: Execution) -> CliResult {
    let arch = parse_arch(&args.arch)?;
    if args.batch == 0 {
        return Err(usage("--batch must be at least 1"));
    }
    let (_, train) = load_data(&args.data, args.seed)?;
    let config = PretrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
    };
    let master = RngStream::new(args.seed, 0);
    let mut cnn = CnnModel::new(arch, elm::DEFAULT_OUTPUTS, &mut master.child("cnn-init"));
    let labels = dataset::class_indices(&train);
    let trace = cnn.pretrain_gdbp(&train, &labels, &config, &mut master.child("data-shuffle"), exec)?;
    let cnn = cnn.freeze();

    let mut out = Artifacts::new(&args.out)?;
    out.write("cnn.json", &cnn.to_json()?)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in trace.iter().enumerate() {
        let _ = writeln!(csv, "{},{l}", e + 1);
    }
    out.write("pretrain_loss.csv", &csv)?;
    let record = PretrainRecord {
        architecture: cnn.architecture().to_string(),
        seed: args.seed,
        augment: args.data.augment,
        train_images: train.len(),
        pretrain: config,
    };
    out.write(PRETRAIN_RECORD_FILE, &json(&record)?)?;
    if let Some(last) = trace.last() {
        println!("pretrained {} on {} images, final epoch loss {last:.6}", record.architecture, train.len());
    }
    out.finish("pretrain", &record, exec)
}

fn load_frozen_cnn(path: &Path) -> CliResult<CnnModel> {
    require(path, "CNN model file")?;
    let cnn = CnnModel::load(path)?;
    Ok(if cnn.is_frozen() { cnn } else { cnn.freeze() })
}

pub fn extract(args: &ExtractArgs, exec: Execution) -> CliResult {
    let cnn = load_frozen_cnn(&args.model)?;
    let (split, train) = load_data(&args.data, args.seed)?;
    let mut out = Artifacts::new(&args.out)?;
    for (name, records) in [("train_features.csv", &train), ("test_features.csv", &split.test)] {
        let features = cnn.extract_features(records, exec)?;
        out.write(name, &dataset::features_csv(records, &features)?)?;
    }
    println!(
        "extracted {} features for {} train / {} test images",
        cnn.feature_dim(),
        train.len(),
        split.test.len()
    );
    let config = serde_json::json!({
        "model": args.model, "data": args.data.data, "augment": args.data.augment, "seed": args.seed,
    });
    out.finish("extract", &config, exec)
}

pub fn evolve(args: &EvolveArgs, exec: Execution) -> CliResult {
    require(&args.features, "training features file")?;
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage("--threshold must lie in [0, 1]"));
    }
    let cnn = load_frozen_cnn(&args.cnn)?;
    let table = dataset::parse_features_csv(&read_text(&args.features)?)?;
    if table.features.cols() != cnn.feature_dim() {
        return Err(usage(format!(
            "features have {} columns but the CNN emits {}",
            table.features.cols(),
            cnn.feature_dim()
        )));
    }
    let labels: Vec<usize> = table.labels.iter().map(|l| l.index()).collect();
    let targets = elm::one_hot(&labels, elm::DEFAULT_OUTPUTS)?;
    let n = table.features.cols();
    let sca_config = evolm::sca::ScaConfig {
        loss_threshold: args.loss_threshold,
        record_history: args.history,
        ..pipeline::candidate_config(n, args.hidden, args.pop, args.iters, args.a, pipeline::sca_seed(args.seed))
    };
    sca_config.validate().map_err(|e| usage(e.to_string()))?;
    let evolved = pipeline::evolve_elm(&table.features, &targets, &sca_config, args.hidden, exec)?;
    let model = PipelineModel::new(cnn, evolved.model, args.threshold)?;

    let record_path = args.cnn.with_file_name(PRETRAIN_RECORD_FILE);
    let pretrain = if record_path.exists() {
        serde_json::from_str::<PretrainRecord>(&read_text(&record_path)?)
            .map_err(evolm::Error::from)?
            .pretrain
    } else {
        PretrainConfig::default()
    };
    let config = PipelineConfig {
        pretrain,
        population: args.pop,
        max_iterations: args.iters,
        a: args.a,
        hidden: args.hidden,
        loss_threshold: args.loss_threshold,
        threshold: args.threshold,
    };
    let mut out = Artifacts::new(&args.out)?;
    model.save_bundle(&args.out, args.seed, &config)?;
    for f in [pipeline::BUNDLE_CNN_FILE, pipeline::BUNDLE_ELM_FILE, pipeline::BUNDLE_MANIFEST_FILE] {
        out.record(f);
    }
    out.write("convergence.csv", &evolved.diagnostics.to_csv())?;
    if let Some(h) = evolved.diagnostics.history_csv() {
        out.write("history.csv", &h)?;
    }
    println!(
        "evolved ELM (n = {n}, L = {}) over {} iterations, training loss {:.6}",
        args.hidden,
        evolved.diagnostics.iterations(),
        evolved.best_fitness
    );
    let run_config = serde_json::json!({
        "features": args.features, "cnn": args.cnn, "seed": args.seed, "history": args.history, "pipeline": config,
    });
    out.finish("evolve", &run_config, exec)
}

pub fn eval(args: &EvalArgs, exec: Execution) -> CliResult {
    require(&args.bundle.join(pipeline::BUNDLE_MANIFEST_FILE), "model bundle manifest")?;
    require(&args.data, "dataset directory")?;
    if args.thresholds.is_empty() {
        return Err(usage("--thresholds needs at least one value"));
    }
    let (model, manifest) = PipelineModel::load_bundle(&args.bundle)?;
    let test = dataset::load_directory(&args.data)?.split.test;
    let labels: Vec<Label> = dataset::labels(&test);

    let (features, extract_time) = time_action(test.len(), || model.cnn.extract_features(&test, exec));
    let features = features?;
    let (grades, predict_time) = time_action(test.len(), || model.grades_from_features(&features));
    let grades = grades?;
    let report = EvalReport::build(&grades, &labels, &args.thresholds, args.z)?;

    let mut out = Artifacts::new(&args.out)?;
    let mut grades_csv = String::from("id,label,epg\n");
    for ((r, g), l) in test.iter().zip(&grades).zip(&labels) {
        let _ = writeln!(grades_csv, "{},{},{g}", r.id.replace(',', "_"), l.as_str());
    }
    out.write("grades.csv", &grades_csv)?;
    out.write("thresholds.csv", &report.thresholds_csv())?;
    out.write("roc.csv", &report.roc_csv())?;
    out.write("pr.csv", &report.pr_csv())?;
    out.write("summary.json", &report.summary_json()?)?;
    let timings = BTreeMap::from([("extract", extract_time), ("predict", predict_time)]);
    out.write("timing.json", &json(&timings)?)?;

    println!("{} test images, AUC {:.4}", test.len(), report.auc);
    println!("threshold  sensitivity      specificity      accuracy");
    for s in &report.intervals {
        let fmt = |r: &Option<evolm::evaluation::RateInterval>| {
            r.map(|r| format!("{:.2} ± {:.2}", 100.0 * r.rate, 100.0 * r.half_width))
                .unwrap_or_else(|| "undefined".into())
        };
        println!(
            "{:<9}  {:<15}  {:<15}  {}",
            s.threshold,
            fmt(&s.sensitivity),
            fmt(&s.specificity),
            fmt(&s.accuracy)
        );
    }
    let correct = grades
        .iter()
        .zip(&labels)
        .filter(|(g, l)| pipeline::decide(**g, model.threshold) == **l)
        .count();
    println!(
        "accuracy at bundle threshold {}: {:.2}%",
        model.threshold,
        100.0 * correct as f64 / test.len() as f64
    );
    let config = serde_json::json!({
        "bundle": args.bundle, "data": args.data, "thresholds": args.thresholds, "z": args.z,
        "architecture": manifest.architecture, "bundle_seed": manifest.seed,
    });
    out.finish("eval", &config, exec)
}

pub fn sweep(args: &SweepArgs, exec: Execution) -> CliResult {
    let levels = match &args.levels {
        Some(path) => {
            require(path, "levels file")?;
            SweepLevels::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => SweepLevels::default(),
    };
    levels.validate().map_err(|e| usage(e.to_string()))?;
    let (_, train) = load_data(&args.data, args.seed)?;
    let base = PipelineConfig {
        pretrain: PretrainConfig {
            learning_rate: args.lr,
            epochs: args.epochs,
            ..PretrainConfig::default()
        },
        population: args.pop,
        max_iterations: args.iters,
        hidden: args.hidden,
        ..PipelineConfig::default()
    };
    let result = run_sweep(&train, &levels, &base, args.seed, exec)?;
    let mut out = Artifacts::new(&args.out)?;
    out.write("sweep_rows.csv", &result.rows_csv())?;
    out.write("sweep_levels.csv", &result.levels_csv(&levels))?;
    for (f, name) in FACTORS.iter().enumerate() {
        let l = result.best_levels[f];
        println!("best {name}: level {} (mean loss {:.6})", l + 1, result.level_means[f][l]);
    }
    let config = serde_json::json!({
        "data": args.data.data, "augment": args.data.augment, "levels": levels, "base": base, "seed": args.seed,
    });
    out.finish("sweep", &config, exec)
}

fn collect_files(dir: &Path, acc: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, acc)?;
        } else {
            acc.push(p);
        }
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> CliResult {
    let mut stream = RngStream::new(args.seed, 0).child("synth");
    let split = match (args.train_per_class, args.test_per_class) {
        (Some(train), Some(test)) => dataset::synthesize_split(train, test, &mut stream)?,
        _ => dataset::synthesize(args.per_class, &mut stream).map_err(|e| usage(e.to_string()))?,
    };
    let mut out = Artifacts::new(&args.out)?;
    dataset::write_directory(&split, &args.out)?;
    let mut files = Vec::new();
    for sub in ["train", "test"] {
        collect_files(&args.out.join(sub), &mut files)?;
    }
    for f in &files {
        if let Ok(rel) = f.strip_prefix(&args.out) {
            out.record(&rel.to_string_lossy());
        }
    }
    let (tr, te) = (split.train_counts(), split.test_counts());
    println!(
        "wrote {} train ({} positive / {} negative) and {} test ({} positive / {} negative) images",
        split.train.len(),
        tr.positive,
        tr.negative,
        split.test.len(),
        te.positive,
        te.negative
    );
    let config = serde_json::json!({
        "per_class": args.per_class, "train_per_class": args.train_per_class,
        "test_per_class": args.test_per_class, "seed": args.seed,
    });
    out.finish("synth", &config, Execution::Sequential)
}
