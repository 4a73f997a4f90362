//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion and fails when the criterion is not met.
//!
//! Tests hold a shared lock so their timings are not distorted by each
//! other. Outputs of the training runs are kept under the target directory
//! for inspection.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use dbljpeg::dataset::{
    build_class_set, build_class_subset, regenerate, CompressionLabel, DigestSink, MemoryStore, Patch, Split,
    SyntheticSource, PATCH_SIZE,
};
use dbljpeg::features::{dct_histograms, histogram_counts, FEATURE_LEN, NUM_BINS, NUM_FREQUENCIES};
use dbljpeg::jpeg_sim::{
    compress, estimate_qf, fdct, idct, tables_for_quality, QualityFactor, RawImage, BASE_CHROMA, BASE_LUMA,
};
use dbljpeg::localize::{forge, localize, render_mask, save_mask, score, window_truth, ForgeMode};
use dbljpeg::models::{ClassifierBank, Model, ModelConfig, ModelKind};
use dbljpeg::nn::gradcheck;
use dbljpeg::train_eval::{
    bank_seed, encode_patches, evaluate, train, write_reports, BankReports, EvalReport, TrainConfig,
};
use dbljpeg::{dataset::synth::synthetic_image, jpeg_sim::io::write_png};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn qf(v: u8) -> QualityFactor {
    QualityFactor::new(v).unwrap()
}

/// Writes straight to stderr so the line shows even when the harness
/// captures test output.
fn verdict(n: u32, pass: bool, detail: String) -> bool {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

fn mins(d: Duration) -> f64 {
    d.as_secs_f64() / 60.0
}

#[test]
fn criterion_1_codec() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_err = 0i32;
    for _ in 0..1000 {
        let px: [i32; 64] = std::array::from_fn(|_| rng.gen_range(0..=255));
        let shifted: [f64; 64] = std::array::from_fn(|i| px[i] as f64 - 128.0);
        let coeffs = fdct(&shifted).map(f64::round);
        let back = idct(&coeffs);
        for i in 0..64 {
            let v = (back[i] + 128.0).round().clamp(0.0, 255.0) as i32;
            max_err = max_err.max((v - px[i]).abs());
        }
    }
    let t50 = tables_for_quality(qf(50));
    let annex_k = t50.luma() == &BASE_LUMA && t50.chroma() == &BASE_CHROMA;
    let inverts = (1..=100).all(|q| estimate_qf(&tables_for_quality(qf(q))) == qf(q));
    let secs = t.elapsed().as_secs_f64();
    let pass = max_err <= 1 && annex_k && inverts && secs < 5.0;
    assert!(verdict(
        1,
        pass,
        format!("round-trip max error {max_err}, annex K {annex_k}, estimate inverts {inverts}, {secs:.2}s"),
    ));
}

#[test]
fn criterion_2_features() {
    let _g = serial();
    let t = Instant::now();
    let q90 = qf(90);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let img = synthetic_image(2, 0, 256, 192);
    let mut patches: Vec<Patch> = Vec::new();
    for tile in dbljpeg::dataset::extract_patches(&img, "a") {
        patches.push(Patch::uncompressed(tile.pixels().to_vec(), "a", tile.offset()).unwrap());
        patches.push(tile);
    }
    patches.extend(dbljpeg::dataset::artifact_patches(&compress(&img, qf(75)), "a", CompressionLabel::Single).unwrap());
    let noise: Vec<u8> = (0..PATCH_SIZE * PATCH_SIZE * 3).map(|_| rng.gen()).collect();
    patches.push(Patch::new(noise, "n", (0, 0), CompressionLabel::Uncompressed, None).unwrap());

    let mut lengths_ok = true;
    let mut sums_ok = true;
    for p in &patches {
        lengths_ok &= dct_histograms(p, q90).unwrap().values().len() == FEATURE_LEN;
        let blocks = match p.coeffs() {
            Some(a) => a.channel(0).to_vec(),
            None => compress(&p.to_image(), q90).channel(0).to_vec(),
        };
        let counts = histogram_counts(&blocks);
        sums_ok &= (0..NUM_FREQUENCIES).all(|f| counts[f * NUM_BINS..(f + 1) * NUM_BINS].iter().sum::<u32>() == 64);
    }
    let gray = Patch::new(
        RawImage::filled(PATCH_SIZE, PATCH_SIZE, [128; 3])
            .unwrap()
            .into_samples(),
        "g",
        (0, 0),
        CompressionLabel::Uncompressed,
        None,
    )
    .unwrap();
    let gf = dct_histograms(&gray, q90).unwrap();
    let center_ok = (0..NUM_FREQUENCIES).all(|f| (-50..=50).all(|m| gf.bin(f, m) == if m == 0 { 1.0 } else { 0.0 }));
    let secs = t.elapsed().as_secs_f64();
    let pass = lengths_ok && sums_ok && center_ok && secs < 1.0;
    assert!(verdict(
        2,
        pass,
        format!(
            "{} patches: lengths {lengths_ok}, slice sums {sums_ok}, gray center {center_ok}, {secs:.3}s",
            patches.len()
        ),
    ));
}

#[test]
fn criterion_3_gradients() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for (name, check) in gradcheck::all_checks() {
        let e = (0..20).map(|_| check(&mut rng)).fold(0.0, f64::max);
        worst.push((name, e));
    }
    let oracle = (0..20)
        .map(|_| gradcheck::conv2d_oracle_gap(&mut rng))
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    let grads_ok = worst.iter().all(|(_, e)| *e < 1e-3);
    let pass = grads_ok && oracle <= 1e-6 && secs < 120.0;
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n}={e:.1e}")).collect();
    assert!(verdict(
        3,
        pass,
        format!(
            "max rel errors [{}], conv oracle gap {oracle:.1e}, {secs:.1}s",
            detail.join(" ")
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criteria 4-7 share one training pipeline.

const EASY_IMAGES: usize = 400;
const EASY_SIZE: usize = 256;
const EASY_SEED: u64 = 4;
const FUSION_IMAGES: usize = 100;
const FUSION_SIZE: usize = 192;
const FUSION_SEED: u64 = 5;
const PROBE_IMAGES: usize = 10;
const FIXED_THREADS: usize = 4;

struct PipelineRun {
    dir: PathBuf,
    easy_tpr: [Option<f64>; 3],
    easy_time: Duration,
    fusion_acc: BTreeMap<ModelKind, f64>,
    fusion_time: Duration,
    splice_hits: (usize, usize),
    background_hits: (usize, usize),
    blue_on_green: usize,
    probe_time: Duration,
}

fn easy_model_config() -> ModelConfig {
    ModelConfig {
        seed: bank_seed(EASY_SEED, ModelKind::Frequency, qf(90)),
        ..ModelConfig::new(ModelKind::Frequency)
    }
}

fn fusion_model_config(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        spatial_filters: [16, 16, 32, 32],
        seed: bank_seed(FUSION_SEED, kind, qf(90)),
        ..ModelConfig::new(kind)
    }
}

fn train_and_test(cfg: &ModelConfig, store: &MemoryStore, tc: &TrainConfig, out: &Path) -> (Model, EvalReport) {
    let q90 = qf(90);
    let mut model = Model::build(cfg).unwrap();
    let tr = encode_patches(&model, store.get(Split::Train), q90).unwrap();
    let va = encode_patches(&model, store.get(Split::Val), q90).unwrap();
    let te = encode_patches(&model, store.get(Split::Test), q90).unwrap();
    let history = train(&mut model, &tr, &va, tc).unwrap();
    let kind = model.kind();
    history.write_csv(&out.join(format!("history_{kind}_q90.csv"))).unwrap();
    model
        .save(
            &ClassifierBank::checkpoint_path(out, kind, q90),
            serde_json::json!({ "train": tc }),
        )
        .unwrap();
    let report = evaluate(&model, q90, &te).unwrap();
    (model, report)
}

fn run_pipeline(dir: &Path) -> PipelineRun {
    let _ = std::fs::remove_dir_all(dir);
    std::fs::create_dir_all(dir).unwrap();
    let q90 = qf(90);
    let q60 = qf(60);

    // Easy cell: Uncompressed, Single@90, Double 60->90 with the frequency model.
    let t = Instant::now();
    let easy_dir = dir.join("easy");
    std::fs::create_dir_all(&easy_dir).unwrap();
    let src = SyntheticSource::new(EASY_IMAGES, EASY_SIZE, EASY_SIZE, EASY_SEED).unwrap();
    let labels = [
        CompressionLabel::Uncompressed,
        CompressionLabel::Single,
        CompressionLabel::Double(q60),
    ];
    let mut store = MemoryStore::default();
    let manifest = build_class_subset(&src, q90, EASY_SEED, &labels, &mut store).unwrap();
    manifest.save(&easy_dir.join("manifest.json")).unwrap();
    let tc = TrainConfig {
        max_epochs: 15,
        seed: EASY_SEED,
        required_classes: Some(vec![0, 1, 2]),
        ..TrainConfig::default()
    };
    let (easy_model, easy_report) = train_and_test(&easy_model_config(), &store, &tc, &easy_dir);
    drop(store);
    let easy_tpr = [easy_report.tpr[0], easy_report.tpr[1], easy_report.tpr[2]];
    let mut evals = BTreeMap::new();
    evals.insert(ModelKind::Frequency, BankReports::from([(q90, easy_report)]));
    write_reports(&easy_dir.join("reports"), &evals, &BTreeMap::new(), false).unwrap();
    let easy_time = t.elapsed();

    // Nine-class fusion comparison.
    let t = Instant::now();
    let fusion_dir = dir.join("fusion");
    std::fs::create_dir_all(&fusion_dir).unwrap();
    let src = SyntheticSource::new(FUSION_IMAGES, FUSION_SIZE, FUSION_SIZE, FUSION_SEED).unwrap();
    let mut store = MemoryStore::default();
    let manifest = build_class_set(&src, q90, FUSION_SEED, &mut store).unwrap();
    manifest.save(&fusion_dir.join("manifest.json")).unwrap();
    let mut evals = BTreeMap::new();
    let mut seeds = BTreeMap::new();
    let mut fusion_acc = BTreeMap::new();
    for kind in ModelKind::ALL {
        let cfg = fusion_model_config(kind);
        let tc = TrainConfig {
            max_epochs: 15,
            seed: FUSION_SEED,
            ..TrainConfig::default()
        };
        let (_, report) = train_and_test(&cfg, &store, &tc, &fusion_dir);
        fusion_acc.insert(kind, report.accuracy);
        seeds.insert((kind, q90), cfg.seed);
        evals.insert(kind, BankReports::from([(q90, report)]));
    }
    drop(store);
    write_reports(&fusion_dir.join("reports"), &evals, &seeds, false).unwrap();
    let fusion_time = t.elapsed();

    // Localization probe on held-out images: corpus indices past the
    // training range of the easy-cell source.
    let t = Instant::now();
    let probe_dir = dir.join("probe");
    std::fs::create_dir_all(&probe_dir).unwrap();
    let mut bank = ClassifierBank::new(ModelKind::Frequency);
    bank.insert(q90, easy_model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(EASY_SEED ^ 0x5052_4f42);
    let (mut splice_hits, mut background_hits, mut blue_on_green) = ((0, 0), (0, 0), 0);
    for i in 0..PROBE_IMAGES {
        let host = synthetic_image(EASY_SEED, EASY_IMAGES + 2 * i, EASY_SIZE, EASY_SIZE);
        let donor = synthetic_image(EASY_SEED, EASY_IMAGES + 2 * i + 1, EASY_SIZE, EASY_SIZE);
        let tiles = EASY_SIZE / PATCH_SIZE;
        let offset = (
            rng.gen_range(0..tiles) * PATCH_SIZE,
            rng.gen_range(0..tiles) * PATCH_SIZE,
        );
        let f = forge(&host, &donor, offset, q60, q90, ForgeMode::DoubleSplice).unwrap();
        let map = localize(&f.artifact, &bank, 64).unwrap();
        let truth = window_truth(&map, &f);
        for (w, label) in map.windows.iter().zip(&truth) {
            let predicted = map.label(w.class).unwrap();
            if *label == f.splice_label {
                splice_hits.1 += 1;
                splice_hits.0 += predicted.is_double() as usize;
            } else {
                background_hits.1 += 1;
                background_hits.0 += (predicted == CompressionLabel::Single) as usize;
            }
        }
        let mask = render_mask(&map);
        let mean = |inside: bool| {
            let mut sum = [0f64; 3];
            let mut n = 0.0;
            for y in 0..mask.height() {
                for x in 0..mask.width() {
                    if f.truth.covers(y, x) == inside {
                        let p = mask.pixel(x, y);
                        for k in 0..3 {
                            sum[k] += p[k] as f64;
                        }
                        n += 1.0;
                    }
                }
            }
            sum.map(|s| s / n)
        };
        let (splice, background) = (mean(true), mean(false));
        if splice[2] > splice[1] && background[1] > background[2] {
            blue_on_green += 1;
        }
        let stem = format!("probe{i:02}");
        save_mask(
            &map,
            &probe_dir.join(format!("{stem}_mask.png")),
            &probe_dir.join(format!("{stem}_map.json")),
        )
        .unwrap();
        write_png(&probe_dir.join(format!("{stem}_forged.png")), f.artifact.decoded()).unwrap();
        let s = score(&map, &f).unwrap();
        std::fs::write(
            probe_dir.join(format!("{stem}_score.json")),
            serde_json::to_string_pretty(&s).unwrap(),
        )
        .unwrap();
    }
    let probe_time = t.elapsed();

    PipelineRun {
        dir: dir.to_path_buf(),
        easy_tpr,
        easy_time,
        fusion_acc,
        fusion_time,
        splice_hits,
        background_hits,
        blue_on_green,
        probe_time,
    }
}

fn in_fixed_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(FIXED_THREADS)
        .build()
        .unwrap()
        .install(f)
}

fn output_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn first_run() -> &'static PipelineRun {
    static RUN: OnceLock<PipelineRun> = OnceLock::new();
    RUN.get_or_init(|| in_fixed_pool(|| run_pipeline(&output_root().join("run1"))))
}

#[test]
fn criterion_4_easy_cell() {
    let _g = serial();
    let run = first_run();
    let min = run.easy_tpr.iter().map(|t| t.unwrap_or(0.0)).fold(1.0, f64::min);
    let m = mins(run.easy_time);
    let pass = min >= 0.90 && m <= 30.0;
    let fmt = |t: Option<f64>| t.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    assert!(verdict(
        4,
        pass,
        format!(
            "test TPR uncompressed {} single {} double60 {}, {m:.1} min",
            fmt(run.easy_tpr[0]),
            fmt(run.easy_tpr[1]),
            fmt(run.easy_tpr[2])
        ),
    ));
}

#[test]
fn criterion_5_fusion_trend() {
    let _g = serial();
    let run = first_run();
    let acc = |k| run.fusion_acc[&k];
    let best_single = acc(ModelKind::Spatial).max(acc(ModelKind::Frequency));
    let m = mins(run.fusion_time);
    let pass = acc(ModelKind::MultiDomain) >= best_single - 0.02 && m <= 120.0;
    assert!(verdict(
        5,
        pass,
        format!(
            "accuracy spatial {:.3} frequency {:.3} multidomain {:.3}, {m:.1} min",
            acc(ModelKind::Spatial),
            acc(ModelKind::Frequency),
            acc(ModelKind::MultiDomain)
        ),
    ));
}

#[test]
fn criterion_6_localization() {
    let _g = serial();
    let run = first_run();
    let frac = |(h, n): (usize, usize)| h as f64 / n.max(1) as f64;
    let (s, b) = (frac(run.splice_hits), frac(run.background_hits));
    let m = mins(run.probe_time);
    let pass = s >= 0.80 && b >= 0.80 && run.blue_on_green == PROBE_IMAGES && m <= 5.0;
    assert!(verdict(
        6,
        pass,
        format!(
            "splice windows Double {}/{} ({s:.3}), background Single {}/{} ({b:.3}), blue-on-green masks {}/{PROBE_IMAGES}, {m:.2} min",
            run.splice_hits.0, run.splice_hits.1, run.background_hits.0, run.background_hits.1, run.blue_on_green
        ),
    ));
}

/// SHA-256 of every file under `dir`, keyed by relative path.
fn tree_digests(dir: &Path) -> BTreeMap<PathBuf, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, String>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let bytes = std::fs::read(&p).unwrap();
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    hex::encode(Sha256::digest(&bytes)),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn criterion_7_determinism() {
    let _g = serial();
    let first = first_run();
    let second = in_fixed_pool(|| run_pipeline(&output_root().join("run2")));
    let a = tree_digests(&first.dir);
    let b = tree_digests(&second.dir);
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let checkpoints = a.keys().filter(|k| k.extension().is_some_and(|e| e == "nnck")).count();
    let masks = a.keys().filter(|k| k.to_string_lossy().ends_with("_mask.png")).count();
    let pass = differing.is_empty() && !a.is_empty() && checkpoints == 4 && masks == PROBE_IMAGES;
    assert!(verdict(
        7,
        pass,
        format!(
            "{} files compared ({checkpoints} checkpoints, {masks} masks) with {FIXED_THREADS} threads, differing: {differing:?}",
            a.len()
        ),
    ));
}

#[test]
fn criterion_8_dataset_integrity() {
    let _g = serial();
    let t = Instant::now();
    let q90 = qf(90);
    let src = SyntheticSource::new(1338, 512, 384, 8).unwrap();
    let mut sink = DigestSink::default();
    let manifest = build_class_set(&src, q90, 8, &mut sink).unwrap();
    let split_sizes = Split::ALL.map(|s| manifest.ids(s).len());
    let per_class: Vec<usize> = CompressionLabel::all(q90)
        .into_iter()
        .map(|l| manifest.count(Split::Train, l))
        .collect();
    let sink_matches = CompressionLabel::all(q90)
        .into_iter()
        .all(|l| sink.count(Split::Train, l) == manifest.count(Split::Train, l));
    let mut again = DigestSink::default();
    let regenerated = regenerate(&manifest, &mut again).is_ok() && again.hex() == sink.hex();
    let m = mins(t.elapsed());
    let pass = split_sizes == [1204, 67, 67]
        && per_class.iter().all(|&c| c == 57_792)
        && sink_matches
        && regenerated
        && m <= 20.0;
    assert!(verdict(
        8,
        pass,
        format!(
            "split {split_sizes:?}, training patches per class {per_class:?}, regeneration identical {regenerated}, {m:.1} min"
        ),
    ));
}
