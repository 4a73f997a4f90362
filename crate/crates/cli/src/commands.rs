//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dbljpeg::dataset::{
    build_class_subset, load_store, CompressionLabel, DatasetManifest, DirectorySource, DirectoryStore, ImageSource,
    Split, SyntheticSource,
};
use dbljpeg::jpeg_sim::io::{read_image, write_png};
use dbljpeg::jpeg_sim::{container, QualityFactor};
use dbljpeg::localize::{forge, localize, save_mask, score, select_qf2, Forgery, TruthGrid};
use dbljpeg::models::{ClassifierBank, Model, ModelConfig, ModelKind};
use dbljpeg::train_eval::{
    bank_seed, class_indices, encode_patches, evaluate, train, write_reports, BankReports, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{BuildArgs, Cli, Command, EvalArgs, ForgeArgs, InspectArgs, LocalizeArgs, TrainArgs};

#[derive(thiserror::Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dbljpeg::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt or unsupported data in {path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("{0}")]
    Input(String),
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Ground truth written by `forge` and read back by `localize --truth`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ForgeTruth {
    pub truth: TruthGrid,
    pub splice_label: CompressionLabel,
    pub background_label: CompressionLabel,
    pub offset: (usize, usize),
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    argv: &'a [String],
    seeds: BTreeMap<String, u64>,
    args: &'a Cli,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(dbljpeg::Error::from)? + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_run(dir: &Path, cli: &Cli, argv: &[String], seeds: BTreeMap<String, u64>) -> Result<()> {
    let record = RunRecord {
        tool: "dbljpeg",
        version: env!("CARGO_PKG_VERSION"),
        argv,
        seeds,
        args: cli,
    };
    write_json(&dir.join("run.json"), &record)
}

fn out_dir(cli: &Cli, explicit: &Option<PathBuf>, default: &str) -> Result<PathBuf> {
    let dir = explicit.clone().unwrap_or_else(|| cli.out_root.join(default));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::BuildDataset(a) => build_dataset(cli, argv, a),
        Command::Train(a) => train_models(cli, argv, a),
        Command::Eval(a) => eval(cli, argv, a),
        Command::Localize(a) => run_localize(cli, argv, a),
        Command::Forge(a) => run_forge(cli, argv, a),
        Command::Inspect(a) => inspect(a),
    }
}

fn build_one(source: &dyn ImageSource, out: &Path, qf2: QualityFactor, a: &BuildArgs) -> Result<DatasetManifest> {
    let classes: Vec<CompressionLabel> = if a.classes.is_empty() {
        CompressionLabel::all(qf2)
    } else {
        a.classes
            .iter()
            .copied()
            .filter(|&l| l != CompressionLabel::Double(qf2))
            .collect()
    };
    if classes.is_empty() {
        return Err(CliError::Input(format!(
            "no requested class exists in the qf2={qf2} bank"
        )));
    }
    let dir = out.join(qf2.to_string());
    if dir.join(DirectoryStore::MANIFEST).is_file() {
        std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    } else if dir.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false) {
        return Err(CliError::Input(format!(
            "{} exists and is not a patch store; refusing to overwrite it",
            dir.display()
        )));
    }
    let mut store = DirectoryStore::create(out, qf2)?;
    let manifest = build_class_subset(source, qf2, a.seed, &classes, &mut store)?;
    store.write_manifest(&manifest)?;
    Ok(manifest)
}

fn build_dataset(cli: &Cli, argv: &[String], a: &BuildArgs) -> Result<()> {
    let out = out_dir(cli, &a.out, "dataset")?;
    let source: Box<dyn ImageSource> = match (&a.source, a.synthetic) {
        (_, Some(n)) => Box::new(SyntheticSource::new(n, a.width, a.height, a.synthetic_seed)?),
        (Some(dir), None) => Box::new(DirectorySource::open(dir)?),
        (None, None) => return Err(CliError::Input("either --source or --synthetic is required".into())),
    };
    let qfs = a.qf2.values();
    let manifests: Vec<Result<DatasetManifest>> = if a.parallel {
        qfs.par_iter()
            .map(|&q| build_one(source.as_ref(), &out, q, a))
            .collect()
    } else {
        qfs.iter().map(|&q| build_one(source.as_ref(), &out, q, a)).collect()
    };
    for m in manifests {
        let m = m?;
        let train_per_class = m.classes.first().map_or(0, |&l| m.count(Split::Train, l));
        println!(
            "qf2={}: {}/{}/{} images, {} training patches per class, sha256 {}",
            m.qf2,
            m.ids(Split::Train).len(),
            m.ids(Split::Val).len(),
            m.ids(Split::Test).len(),
            train_per_class,
            m.content_sha256
        );
    }
    let mut seeds = BTreeMap::from([("split".to_string(), a.seed)]);
    if a.synthetic.is_some() {
        seeds.insert("synthetic".into(), a.synthetic_seed);
    }
    write_run(&out, cli, argv, seeds)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn train_one(a: &TrainArgs, base: &ModelConfig, out: &Path, qf2: QualityFactor) -> Result<(String, u64)> {
    let (manifest, store) = load_store(&a.data, qf2)?;
    let kind = base.kind;
    let cfg = ModelConfig {
        seed: bank_seed(a.seed, kind, qf2),
        ..base.clone()
    };
    let mut model = Model::build(&cfg)?;
    let tc = TrainConfig {
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: cfg.seed,
        weighted_loss: !a.unweighted,
        required_classes: Some(class_indices(&manifest.classes, qf2)?),
        ..TrainConfig::default()
    };
    let tr = encode_patches(&model, store.get(Split::Train), qf2)?;
    let va = encode_patches(&model, store.get(Split::Val), qf2)?;
    if va.is_empty() {
        return Err(CliError::Input(format!(
            "the qf2={qf2} store has no validation patches; build it from at least 3 images"
        )));
    }
    let started = Instant::now();
    let history = train(&mut model, &tr, &va, &tc)?;
    write_json(
        &timing_path(out, kind, qf2),
        &serde_json::json!({ "train_seconds": started.elapsed().as_secs_f64() }),
    )?;
    history.write_csv(&out.join(format!("history_{kind}_q{qf2}.csv")))?;
    let path = ClassifierBank::checkpoint_path(out, kind, qf2);
    model.save(
        &path,
        serde_json::json!({ "train": tc, "qf2": qf2, "dataset_sha256": manifest.content_sha256 }),
    )?;
    let best = history.best().expect("at least one epoch ran");
    println!(
        "{kind} qf2={qf2}: best epoch {} (val loss {:.4}, val accuracy {:.4}) -> {}",
        best.epoch,
        best.val_loss,
        best.val_acc,
        path.display()
    );
    Ok((format!("{kind}_q{qf2}"), cfg.seed))
}

fn train_models(cli: &Cli, argv: &[String], a: &TrainArgs) -> Result<()> {
    let out = out_dir(cli, &a.out, "models")?;
    let base = match &a.model_config {
        Some(p) => ModelConfig {
            kind: a.kind,
            ..ModelConfig::load(p)?
        },
        None => ModelConfig::new(a.kind),
    };
    let qfs = a.qf2.values();
    let results: Vec<Result<(String, u64)>> = if a.parallel {
        qfs.par_iter().map(|&q| train_one(a, &base, &out, q)).collect()
    } else {
        qfs.iter().map(|&q| train_one(a, &base, &out, q)).collect()
    };
    let mut seeds = BTreeMap::from([("master".to_string(), a.seed)]);
    for r in results {
        let (name, seed) = r?;
        seeds.insert(name, seed);
    }
    write_run(&out, cli, argv, seeds)
}

/// Wall-clock training time, kept beside the checkpoint rather than in it so
/// checkpoints stay reproducible.
fn timing_path(dir: &Path, kind: ModelKind, qf2: QualityFactor) -> PathBuf {
    dir.join(format!("timing_{kind}_q{qf2}.json"))
}

#[derive(Serialize)]
struct Timing {
    train_seconds: Option<f64>,
    eval_seconds: f64,
}

fn train_seconds(models: &Path, kind: ModelKind, qf2: QualityFactor) -> Option<f64> {
    let text = std::fs::read_to_string(timing_path(models, kind, qf2)).ok()?;
    serde_json::from_str::<serde_json::Value>(&text).ok()?["train_seconds"].as_f64()
}

fn eval(cli: &Cli, argv: &[String], a: &EvalArgs) -> Result<()> {
    let out = out_dir(cli, &a.out, "reports")?;
    let mut evals: BTreeMap<ModelKind, BankReports> = BTreeMap::new();
    let mut seeds = BTreeMap::new();
    let mut timings: BTreeMap<String, BTreeMap<String, Timing>> = BTreeMap::new();
    for qf2 in a.qf2.values() {
        let (_, store) = load_store(&a.data, qf2)?;
        let test = store.get(Split::Test);
        for &kind in &a.kind {
            let started = Instant::now();
            let path = ClassifierBank::checkpoint_path(&a.models, kind, qf2);
            let (model, _) = Model::load(&path)?;
            let examples = encode_patches(&model, test, qf2)?;
            if examples.is_empty() {
                return Err(CliError::Input(format!("the qf2={qf2} store has no test patches")));
            }
            let report = evaluate(&model, qf2, &examples)?;
            println!(
                "{kind} qf2={qf2}: accuracy {:.4} on {} patches",
                report.accuracy,
                examples.len()
            );
            seeds.insert((kind, qf2), model.config().seed);
            timings.entry(kind.to_string()).or_default().insert(
                qf2.to_string(),
                Timing {
                    train_seconds: train_seconds(&a.models, kind, qf2),
                    eval_seconds: started.elapsed().as_secs_f64(),
                },
            );
            evals.entry(kind).or_default().insert(qf2, report);
        }
    }
    for path in write_reports(&out, &evals, &seeds, a.qf2.is_all())? {
        println!("wrote {}", path.display());
    }
    // Runtimes vary between runs, so they live outside summary.json.
    write_json(&out.join("timings.json"), &timings)?;
    let run_seeds = seeds.iter().map(|((k, q), s)| (format!("{k}_q{q}"), *s)).collect();
    write_run(&out, cli, argv, run_seeds)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn run_localize(cli: &Cli, argv: &[String], a: &LocalizeArgs) -> Result<()> {
    let out = out_dir(cli, &a.out, "localize")?;
    let art = container::load(&a.input)?;
    let bank = ClassifierBank::load_dir(&a.models, a.kind)?;
    let map = localize(&art, &bank, a.stride)?;
    let sel = map.selection.clone().expect("localize records the selection");
    if let Some(w) = &sel.warning {
        eprintln!("warning: {w}");
    }
    let name = stem(&a.input);
    let (png, json) = (
        out.join(format!("{name}_mask.png")),
        out.join(format!("{name}_map.json")),
    );
    save_mask(&map, &png, &json)?;
    println!(
        "estimated qf {} -> {} model; {}x{} windows at stride {}",
        sel.raw_qf, sel.qf2, map.rows, map.cols, map.stride
    );
    println!("wrote {} and {}", png.display(), json.display());
    if let Some(truth_path) = &a.truth {
        let text = std::fs::read_to_string(truth_path).map_err(io_err(truth_path))?;
        let t: ForgeTruth = serde_json::from_str(&text).map_err(|e| CliError::Data {
            path: truth_path.clone(),
            reason: e.to_string(),
        })?;
        let forgery = Forgery {
            artifact: art,
            truth: t.truth,
            splice_label: t.splice_label,
            background_label: t.background_label,
        };
        let s = score(&map, &forgery)?;
        let path = out.join(format!("{name}_score.json"));
        write_json(&path, &s)?;
        println!(
            "window accuracy {:.4}, category accuracy {:.4}; wrote {}",
            s.window_accuracy,
            s.category_accuracy,
            path.display()
        );
    }
    write_run(&out, cli, argv, BTreeMap::new())
}

fn run_forge(cli: &Cli, argv: &[String], a: &ForgeArgs) -> Result<()> {
    let out = out_dir(cli, &a.out, "forge")?;
    let host = read_image(&a.host)?;
    let donor = read_image(&a.donor)?;
    let f = forge(&host, &donor, a.offset, a.qf1, a.qf2, a.mode.into())?;
    let art_path = out.join("forged.jcoef");
    container::save(&f.artifact, &art_path)?;
    write_png(&out.join("forged.png"), f.artifact.decoded())?;
    let truth = ForgeTruth {
        truth: f.truth,
        splice_label: f.splice_label,
        background_label: f.background_label,
        offset: a.offset,
    };
    write_json(&out.join("truth.json"), &truth)?;
    println!(
        "splice {} at {:?}, background {}; wrote {}",
        truth.splice_label,
        a.offset,
        truth.background_label,
        art_path.display()
    );
    write_run(&out, cli, argv, BTreeMap::new())
}

fn print_table(name: &str, table: &[u8; 64]) {
    println!("{name} table:");
    for row in table.chunks(8) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>3}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let art = container::load(&a.file)?;
    let (bw, bh) = art.block_grid();
    println!("file: {}", a.file.display());
    println!("dimensions: {}x{} ({bw}x{bh} blocks)", art.width(), art.height());
    print_table("luma", art.tables().luma());
    print_table("chroma", art.tables().chroma());
    let sel = select_qf2(&art);
    println!("estimated QF: {}", sel.raw_qf);
    println!("nearest trained QF: {}", sel.qf2);
    if let Some(w) = sel.warning {
        println!("warning: {w}");
    }
    Ok(())
}
