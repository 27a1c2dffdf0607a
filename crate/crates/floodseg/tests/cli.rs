use std::path::Path;
use std::process::{Command, Output};

use floodseg::core::imaging::Image;
use floodseg::io::{load_image, load_mask, save_image, save_mask};
use floodseg::report::{MetricReport, ModelFile};

fn floodseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floodseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = floodseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> MetricReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(floodseg(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(floodseg(&["classify-train"]).status.code(), Some(1));
    assert_eq!(floodseg(&["--help"]).status.code(), Some(0));
    let out = floodseg(&["ingest-check", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_check_reports_counts_and_missing_masks() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&[
        "synth-gen",
        "--kind",
        "classify",
        "--count",
        "6",
        "--out",
        s(&data),
        "--seed",
        "3",
    ]);
    let stdout = ok(&["ingest-check", "--manifest", s(&data.join("manifest.json"))]);
    assert!(stdout.contains("6 entries: 3 flood, 3 dry"), "{stdout}");
    // the directory layout works in place of a manifest file
    ok(&["ingest-check", "--manifest", s(&data)]);
    let out = floodseg(&["ingest-check", "--manifest", s(&data), "--require-masks"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flood/flood_0000.png"));
}

#[test]
fn embedding_feature_without_file_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&[
        "synth-gen",
        "--kind",
        "classify",
        "--count",
        "4",
        "--out",
        s(&data),
    ]);
    let out = floodseg(&[
        "classify-train",
        "--manifest",
        s(&data.join("manifest.json")),
        "--feature",
        "embedding",
        "--out",
        s(&d.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("embedding file"));
    assert!(!d.path().join("out").exists());
}

#[test]
fn overlay_blends_flood_pixels_toward_yellow() {
    let d = tempfile::tempdir().unwrap();
    let img = Image::new(2, 1, vec![[0, 0, 0], [10, 20, 30]]).unwrap();
    let mask = floodseg::core::imaging::LabelMask::new(2, 1, vec![1, 0]).unwrap();
    save_image(&d.path().join("i.png"), &img).unwrap();
    save_mask(&d.path().join("m.png"), &mask).unwrap();
    let out = d.path().join("o.png");
    ok(&[
        "overlay",
        "--image",
        s(&d.path().join("i.png")),
        "--mask",
        s(&d.path().join("m.png")),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        load_image(&out).unwrap().pixels(),
        &[[128, 128, 0], [10, 20, 30]]
    );
}

#[test]
fn classify_train_eval_predict_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&[
        "synth-gen",
        "--kind",
        "classify",
        "--count",
        "16",
        "--out",
        s(&data),
        "--seed",
        "5",
    ]);
    let manifest = data.join("manifest.json");
    let config = d.path().join("config.json");
    std::fs::write(&config, r#"{"seed": 1, "folds": 3, "classify_size": 64, "grid": {"kind": "logistic", "reg_strengths": [0.1, 1.0], "epochs": 50}}"#).unwrap();
    let train = d.path().join("train");
    ok(&[
        "classify-train",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--seed",
        "9",
        "--out",
        s(&train),
    ]);
    let r = report(&train);
    assert_eq!(r.config.seed, 9, "flags override the config file");
    assert_eq!(r.config.classify_size, 64);
    assert_eq!(r.cross_validation.as_ref().unwrap().candidates.len(), 2);
    assert_eq!(r.dataset.train_images + r.dataset.test_images, 16);
    assert!(r.reference.is_some());

    let model = train.join("model.json");
    let eval = d.path().join("eval");
    ok(&[
        "classify-eval",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--out",
        s(&eval),
    ]);
    let e = report(&eval);
    assert_eq!(e.results, r.results);
    assert_eq!(e.config_hash, r.config_hash);

    let mf = ModelFile::load(&model).unwrap();
    let first = &mf.split.test[0];
    let stdout = ok(&[
        "predict",
        "--model",
        s(&model),
        "--image",
        s(&data.join(first)),
    ]);
    let line: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    let expected = r.results[0]
        .predictions
        .iter()
        .find(|p| &p.image == first)
        .unwrap();
    assert_eq!(line["p_flood"].as_f64().unwrap(), expected.p_flood);
}

#[test]
fn embedding_csv_drives_the_classifier() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    let m = floodseg::synth::generate(floodseg::synth::SynthKind::Classify, 12, 2, &data).unwrap();
    // two summary statistics per image stand in for deep features
    let mut csv = String::from("path,f0,f1\n");
    for e in &m.entries {
        let img = load_image(&m.image_path(e)).unwrap();
        let g: Vec<f64> = img.pixels().iter().map(|p| p[0] as f64).collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let rough = g.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / g.len() as f64;
        csv += &format!("{},{mean},{rough}\n", e.image);
    }
    let emb = d.path().join("emb.csv");
    std::fs::write(&emb, csv).unwrap();
    let out = d.path().join("out");
    ok(&[
        "classify-train",
        "--manifest",
        s(&data.join("manifest.json")),
        "--feature",
        "embedding",
        "--embeddings",
        s(&emb),
        "--classifier",
        "knn",
        "--out",
        s(&out),
    ]);
    let r = report(&out);
    assert_eq!(r.results[0].f1, 1.0);
    let c = r.reference.unwrap();
    assert_eq!(
        (c.published.precision, c.published.recall, c.published.f1),
        (0.67, 0.89, 0.77)
    );
}

#[test]
fn segment_train_writes_binary_masks_and_eval_agrees() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(&[
        "synth-gen",
        "--kind",
        "segment",
        "--count",
        "6",
        "--out",
        s(&data),
        "--seed",
        "8",
    ]);
    let config = d.path().join("config.json");
    std::fs::write(&config, r#"{"pipeline": "segment", "folds": 2, "slic": {"n_segments": 80}, "grid": {"kind": "logistic", "reg_strengths": [1.0], "epochs": 60}}"#).unwrap();
    let train = d.path().join("train");
    let manifest = data.join("manifest.json");
    ok(&[
        "segment-train",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&train),
        "--workers",
        "2",
    ]);
    let r = report(&train);
    let names: Vec<&str> = r.results.iter().map(|x| x.name.as_str()).collect();
    assert_eq!(names, ["argmax", "crf"]);
    assert_eq!(
        r.result("crf").unwrap().per_image.len(),
        r.dataset.test_images
    );

    let mf = ModelFile::load(&train.join("model.json")).unwrap();
    for image in &mf.split.test {
        let name = floodseg::pipeline::output_name(image);
        let mask = load_mask(&train.join("masks").join(&name)).unwrap();
        let src = load_image(&data.join(image)).unwrap();
        assert_eq!((mask.width(), mask.height()), (src.width(), src.height()));
        assert!(train.join("overlays").join(&name).exists());
    }

    let eval = d.path().join("eval");
    ok(&[
        "segment-eval",
        "--manifest",
        s(&manifest),
        "--model",
        s(&train.join("model.json")),
        "--out",
        s(&eval),
    ]);
    assert_eq!(report(&eval).results, r.results);
    assert_eq!(
        std::fs::read(
            eval.join("masks")
                .join(floodseg::pipeline::output_name(&mf.split.test[0]))
        )
        .unwrap(),
        std::fs::read(
            train
                .join("masks")
                .join(floodseg::pipeline::output_name(&mf.split.test[0]))
        )
        .unwrap()
    );

    let pred = d.path().join("pred");
    let stdout = ok(&[
        "predict",
        "--model",
        s(&train.join("model.json")),
        "--image",
        s(&data.join(&mf.split.test[0])),
        "--out",
        s(&pred),
    ]);
    assert!(stdout.contains("pixels flooded"), "{stdout}");
    assert!(pred.join("masks").read_dir().unwrap().count() == 1);

    // a classification model cannot be evaluated as a segmenter
    let out = floodseg(&[
        "classify-eval",
        "--manifest",
        s(&manifest),
        "--model",
        s(&train.join("model.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
