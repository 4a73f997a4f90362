//! Cross-module agreement: localization sees the same inputs as training,
//! whole-network gradients are right at full input size, tiny models can
//! memorize a handful of samples, and evaluation summaries agree.

use dbljpeg::dataset::synth::synthetic_image;
use dbljpeg::dataset::{artifact_patches, CompressionLabel};
use dbljpeg::jpeg_sim::{compress, double_compress, QualityFactor};
use dbljpeg::localize::{scan, window_inputs};
use dbljpeg::models::{pixels_chw, Model, ModelConfig, ModelKind};
use dbljpeg::nn::{ops, softmax_ce_backward, weighted_cross_entropy, CostMatrix, LayerSpec, Mode, Network, Sequential};
use dbljpeg::train_eval::{encode_patches, evaluate, loss_and_accuracy, train, Example, TrainConfig};
use rand::{Rng, SeedableRng};

fn qf(v: u8) -> QualityFactor {
    QualityFactor::new(v).unwrap()
}

fn tiny(kind: ModelKind, seed: u64) -> Model {
    Model::build(&ModelConfig {
        kind,
        spatial_filters: [4, 4, 8, 8],
        frequency_filters: [4, 8],
        fc_width: 16,
        dropout: 0.0,
        seed,
        ..ModelConfig::new(kind)
    })
    .unwrap()
}

#[test]
fn stride_64_windows_match_dataset_tiles() {
    let img = synthetic_image(41, 0, 256, 192);
    for art in [compress(&img, qf(85)), double_compress(&img, qf(65), qf(85))] {
        let tiles = artifact_patches(&art, "img", CompressionLabel::Single).unwrap();
        for kind in ModelKind::ALL {
            let model = tiny(kind, 3);
            let encoded = encode_patches(&model, &tiles, qf(85)).unwrap();
            for (tile, ex) in tiles.iter().zip(&encoded) {
                assert_eq!(
                    window_inputs(&art, kind, tile.offset()).unwrap(),
                    ex.inputs,
                    "{kind} {:?}",
                    tile.offset()
                );
            }
            let map = scan(&art, &model, 64).unwrap();
            assert_eq!(map.windows.len(), tiles.len());
            let direct = model
                .predict_batch(&encoded.iter().map(|e| e.inputs.clone()).collect::<Vec<_>>())
                .unwrap();
            for (w, p) in map.windows.iter().zip(&direct) {
                assert_eq!(&w.probs, p);
            }
        }
    }
}

#[test]
fn tiny_models_memorize_sixteen_samples() {
    // Sixteen distinct tiles with alternating labels: pure memorization.
    let img = synthetic_image(43, 0, 256, 256);
    let tiles = artifact_patches(&compress(&img, qf(70)), "s", CompressionLabel::Single).unwrap();
    assert_eq!(tiles.len(), 16);
    for kind in ModelKind::ALL {
        let mut model = tiny(kind, 5);
        let mut examples = encode_patches(&model, &tiles, qf(70)).unwrap();
        for (i, e) in examples.iter_mut().enumerate() {
            e.label = [0, 1, 4, 8][i % 4];
        }
        let cfg = TrainConfig {
            batch_size: 4,
            max_epochs: 200,
            patience: 200,
            seed: 5,
            weighted_loss: false,
            required_classes: Some(vec![0, 1, 4, 8]),
            ..TrainConfig::default()
        };
        let history = train(&mut model, &examples, &examples, &cfg).unwrap();
        assert!(
            history.epochs.iter().any(|e| e.train_loss < 0.01),
            "{kind}: {:?}",
            history.epochs.last()
        );
        let (loss, acc) = loss_and_accuracy(&model, &examples, &cfg.costs()).unwrap();
        assert!(loss < 0.01, "{kind}: kept parameters give loss {loss}");
        assert_eq!(acc, 1.0, "{kind}");
    }
}

#[test]
fn accuracy_is_trace_over_total_and_mean_tpr_when_balanced() {
    let img = synthetic_image(47, 0, 256, 256);
    let mut patches = artifact_patches(&compress(&img, qf(90)), "s", CompressionLabel::Single).unwrap();
    patches.extend(
        artifact_patches(
            &double_compress(&img, qf(60), qf(90)),
            "d",
            CompressionLabel::Double(qf(60)),
        )
        .unwrap(),
    );
    let model = tiny(ModelKind::Frequency, 9);
    let examples: Vec<Example> = encode_patches(&model, &patches, qf(90)).unwrap();
    let report = evaluate(&model, qf(90), &examples).unwrap();
    let c = &report.confusion;
    assert_eq!(c.total(), 32);
    assert!((report.accuracy - c.trace() as f64 / c.total() as f64).abs() < 1e-12);
    let present: Vec<f64> = report.tpr.iter().flatten().copied().collect();
    assert_eq!(present.len(), 2);
    let mean = present.iter().sum::<f64>() / 2.0;
    assert!((report.accuracy - mean).abs() < 1e-12, "{} vs {mean}", report.accuracy);
}

#[test]
fn full_spatial_network_gradients_on_real_patches() {
    // A narrow copy of the spatial architecture at full input size, in f64.
    let specs = vec![
        LayerSpec::Conv2d { filters: 4, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Conv2d { filters: 4, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d,
        LayerSpec::Conv2d { filters: 8, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Conv2d { filters: 8, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d,
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 16 },
        LayerSpec::Relu,
    ];
    let trunk = Sequential::<f64>::new(&[3, 64, 64], specs).unwrap();
    let head = Sequential::<f64>::new(&[16], vec![LayerSpec::Dense { units: 9 }]).unwrap();
    let mut net = Network::new(vec![trunk], head).unwrap();
    net.init(3);
    let img = synthetic_image(3, 0, 128, 64);
    let tiles = artifact_patches(
        &compress(&img, QualityFactor::new(80).unwrap()),
        "x",
        CompressionLabel::Single,
    )
    .unwrap();
    let x: Vec<f64> = tiles.iter().flat_map(pixels_chw).map(|v| v as f64).collect();
    let labels = [1usize, 4];
    let costs = CostMatrix::uniform();
    let loss = |net: &Network<f64>| -> f64 {
        let z = net.forward_eval(&[&x], 2).unwrap();
        z.chunks(9)
            .zip(labels)
            .map(|(z, l)| weighted_cross_entropy(&ops::softmax(z), l, &costs).0)
            .sum()
    };
    let (z, trace) = net.forward(&[&x], 2, Mode::Eval).unwrap();
    let mut dl = Vec::new();
    for (z, l) in z.chunks(9).zip(labels) {
        let p = ops::softmax(z);
        let (_, w) = weighted_cross_entropy(&p, l, &costs);
        dl.extend(softmax_ce_backward(&p, l, w));
    }
    let mut grads = net.zero_grads();
    net.backward(trace, dl, &mut grads);
    let names = net.param_names();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for (pi, name) in names.iter().enumerate() {
        let n = grads[pi].data().len();
        for _ in 0..6 {
            let j = rng.gen_range(0..n);
            let h = 1e-5;
            let orig = net.params().nth(pi).unwrap().data()[j];
            net.params_mut().nth(pi).unwrap().data_mut()[j] = orig + h;
            let lp = loss(&net);
            net.params_mut().nth(pi).unwrap().data_mut()[j] = orig - h;
            let lm = loss(&net);
            net.params_mut().nth(pi).unwrap().data_mut()[j] = orig;
            let num = (lp - lm) / (2.0 * h);
            let ana = grads[pi].data()[j];
            let rel = (num - ana).abs() / (num.abs().max(ana.abs()).max(1e-8));
            assert!(rel < 1e-5, "{name}[{j}]: analytic {ana:e}, numeric {num:e}");
        }
    }
}
