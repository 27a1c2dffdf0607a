//! Classification and segmentation experiments: split, extract, cross-validate,
//! refit, evaluate.
//!
//! Per-image work runs on a bounded rayon pool and is collected in manifest
//! order, so the worker count never changes the output.

use std::path::{Path, PathBuf};

use floodseg_core::classifiers::{
    evaluate_candidate, kfold_split, select_best, CandidateScore, Dataset, HyperParams, Model,
};
use floodseg_core::crf::{icm_refine, unary_argmax, ProbMap};
use floodseg_core::eval::{confusion, ConfusionMatrix};
use floodseg_core::features::{
    hog_feature, lbp_feature, EmbeddingTable, ExtractorId, FeatureVector,
};
use floodseg_core::imaging::{resize_bilinear, to_grayscale, Image, LabelMask};
use floodseg_core::superpixels::{region_features, region_labels, slic, SuperpixelMap};
use rayon::prelude::*;

use crate::config::{seeds, FeatureKind, PipelineKind, RunConfig};
use crate::embeddings::load_embeddings;
use crate::error::CoreContext;
use crate::io::{load_image, load_mask, save_image, save_mask};
use crate::manifest::{split, DatasetManifest, ManifestEntry};
use crate::overlay::render_overlay;
use crate::report::{
    Aggregation, CvSummary, DatasetSummary, MetricReport, ModelFile, ModelResult, Prediction,
    SplitRecord, FORMAT_VERSION,
};
use crate::{Error, Result};

/// Result names used in reports.
pub const CLASSIFY_RESULT: &str = "test";
pub const ARGMAX_RESULT: &str = "argmax";
pub const CRF_RESULT: &str = "crf";

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub report: MetricReport,
    pub model: ModelFile,
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Validation(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn extractor(feature: FeatureKind) -> ExtractorId {
    match feature {
        FeatureKind::Lbp => ExtractorId::Lbp,
        FeatureKind::Hog => ExtractorId::Hog,
        FeatureKind::Embedding => ExtractorId::Embedding,
        FeatureKind::Region => ExtractorId::Region,
    }
}

fn load_table(cfg: &RunConfig) -> Result<Option<EmbeddingTable>> {
    match (cfg.feature(), &cfg.embeddings) {
        (FeatureKind::Embedding, Some(path)) => load_embeddings(path).map(Some),
        (FeatureKind::Embedding, None) => Err(Error::Validation(
            "embedding features need an embedding file (--embeddings)".into(),
        )),
        _ => Ok(None),
    }
}

fn ensure_embedded(table: &EmbeddingTable, entries: &[ManifestEntry]) -> Result<()> {
    let missing: Vec<&str> = entries
        .iter()
        .filter(|e| table.get(&e.image).is_none())
        .map(|e| e.image.as_str())
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    Err(Error::Validation(format!(
        "{} images have no embedding: {}",
        missing.len(),
        missing.join(", ")
    )))
}

/// Image-level feature vector for the LBP and HOG paths.
pub fn image_features(img: &Image, cfg: &RunConfig) -> floodseg_core::Result<FeatureVector> {
    let size = cfg.classify_size;
    let gray = to_grayscale(&resize_bilinear(img, size, size)?);
    match cfg.feature() {
        FeatureKind::Lbp => lbp_feature(&gray, &cfg.lbp),
        FeatureKind::Hog => hog_feature(&gray, &cfg.hog),
        other => Err(floodseg_core::Error::InvalidParameter(format!(
            "{other:?} is not an image-level feature"
        ))),
    }
}

fn entry_features(
    m: &DatasetManifest,
    e: &ManifestEntry,
    cfg: &RunConfig,
    table: Option<&EmbeddingTable>,
) -> Result<Vec<f64>> {
    if let Some(table) = table {
        return table
            .get(&e.image)
            .map(|v| v.values().to_vec())
            .ok_or_else(|| Error::Validation(format!("{}: no embedding", e.image)));
    }
    let img = load_image(&m.image_path(e))?;
    Ok(image_features(&img, cfg)
        .context(|| e.image.clone())?
        .into_values())
}

fn split_record(
    m: &DatasetManifest,
    cfg: &RunConfig,
    entries: &[ManifestEntry],
) -> Result<(SplitRecord, Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    let seed = m.split_seed.unwrap_or(cfg.stage_seed(seeds::SPLIT));
    let s = split(entries, seed, m.train_fraction)?;
    let names = |v: &[ManifestEntry]| v.iter().map(|e| e.image.clone()).collect();
    let record = SplitRecord {
        seed,
        train_fraction: m.train_fraction,
        train: names(&s.train),
        test: names(&s.test),
    };
    Ok((record, s.train, s.test))
}

/// Grid search with every (candidate, fold) pair evaluated in parallel,
/// then a refit of the winner on all of `data`.
pub fn cross_validate(data: &Dataset, cfg: &RunConfig) -> Result<(CvSummary, Model)> {
    let folds = kfold_split(
        data.len(),
        cfg.folds,
        cfg.stage_seed(seeds::CROSS_VALIDATION),
    )
    .context(|| "cross-validation".into())?;
    let candidates = cfg.grid().candidates();
    let pairs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let fold_scores = pairs
        .par_iter()
        .map(|&(c, f)| {
            evaluate_candidate(data, &folds[f..=f], &candidates[c], cfg.score)
                .map(|s| s.fold_scores[0])
                .context(|| format!("cross-validating {:?}", candidates[c]))
        })
        .collect::<Result<Vec<f64>>>()?;
    let scored: Vec<CandidateScore> = candidates
        .into_iter()
        .zip(fold_scores.chunks(folds.len()))
        .map(|(params, s)| CandidateScore {
            params,
            mean_score: s.iter().sum::<f64>() / s.len() as f64,
            fold_scores: s.to_vec(),
        })
        .collect();
    let best_index = select_best(&scored).context(|| "model selection".into())?;
    let model = scored[best_index]
        .params
        .fit(data)
        .context(|| "refitting the selected model".into())?;
    Ok((
        CvSummary {
            folds: cfg.folds,
            score: cfg.score,
            candidates: scored,
            best_index,
        },
        model,
    ))
}

fn require(cfg: &RunConfig, pipeline: PipelineKind) -> Result<()> {
    cfg.validate()?;
    if cfg.pipeline != pipeline {
        return Err(Error::Validation(format!(
            "config is for the {:?} pipeline",
            cfg.pipeline
        )));
    }
    Ok(())
}

fn classify_result(
    m: &DatasetManifest,
    test: &[ManifestEntry],
    model: &Model,
    cfg: &RunConfig,
    table: Option<&EmbeddingTable>,
) -> Result<ModelResult> {
    let predictions = test
        .par_iter()
        .map(|e| {
            let x = entry_features(m, e, cfg, table)?;
            let p_flood = model.predict_proba(&x).context(|| e.image.clone())?;
            Ok(Prediction {
                image: e.image.clone(),
                label: e.label,
                predicted: u8::from(p_flood >= 0.5),
                p_flood,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pred: Vec<u8> = predictions.iter().map(|p| p.predicted).collect();
    let truth: Vec<u8> = predictions.iter().map(|p| p.label).collect();
    let cm = confusion(&pred, &truth).context(|| "scoring test predictions".into())?;
    let mut r = ModelResult::new(CLASSIFY_RESULT, Aggregation::Image, cm);
    r.predictions = predictions;
    Ok(r)
}

/// Image-level flood/dry classification.
pub fn run_classify(m: &DatasetManifest, cfg: &RunConfig) -> Result<TrainOutput> {
    require(cfg, PipelineKind::Classify)?;
    let table = load_table(cfg)?;
    if let Some(t) = &table {
        ensure_embedded(t, &m.entries)?;
    }
    let (record, train, test) = split_record(m, cfg, &m.entries)?;
    log::info!(
        "classify: {} train / {} test images",
        train.len(),
        test.len()
    );
    let features = train
        .par_iter()
        .map(|e| entry_features(m, e, cfg, table.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let labels = train.iter().map(|e| e.label).collect();
    let data = Dataset::from_rows(extractor(cfg.feature()), features, labels)
        .context(|| "building the training set".into())?;
    let (cv, model) = cross_validate(&data, cfg)?;
    let best_params = cv.candidates[cv.best_index].params.clone();
    log::info!("classify: selected {best_params:?}");
    let result = classify_result(m, &test, &model, cfg, table.as_ref())?;
    let mut report = MetricReport {
        format_version: FORMAT_VERSION,
        pipeline: PipelineKind::Classify,
        feature: cfg.feature(),
        classifier: cfg.classifier,
        config_hash: cfg.hash(),
        config: cfg.canonical(),
        dataset: DatasetSummary {
            train_images: train.len(),
            test_images: test.len(),
            train_rows: Some(data.len()),
        },
        cross_validation: Some(cv),
        best_params: best_params.clone(),
        results: vec![result],
        reference: None,
    };
    report.attach_reference(CLASSIFY_RESULT);
    let model = ModelFile {
        format_version: FORMAT_VERSION,
        config: cfg.canonical(),
        split: record,
        best_params,
        model,
    };
    Ok(TrainOutput { report, model })
}

fn test_entries(m: &DatasetManifest, mf: &ModelFile) -> Result<Vec<ManifestEntry>> {
    let mut missing = Vec::new();
    let found = mf
        .split
        .test
        .iter()
        .filter_map(|name| {
            let e = m.entries.iter().find(|e| &e.image == name);
            if e.is_none() {
                missing.push(name.as_str());
            }
            e.cloned()
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "test images of the model are not in the manifest: {}",
            missing.join(", ")
        )));
    }
    Ok(found)
}

fn eval_report(mf: &ModelFile, results: Vec<ModelResult>, compared: &str) -> MetricReport {
    let cfg = &mf.config;
    let mut report = MetricReport {
        format_version: FORMAT_VERSION,
        pipeline: cfg.pipeline,
        feature: cfg.feature(),
        classifier: mf.model.kind(),
        config_hash: cfg.hash(),
        config: cfg.canonical(),
        dataset: DatasetSummary {
            train_images: mf.split.train.len(),
            test_images: mf.split.test.len(),
            train_rows: None,
        },
        cross_validation: None,
        best_params: mf.best_params.clone(),
        results,
        reference: None,
    };
    report.attach_reference(compared);
    report
}

/// Re-scores a saved classification model on the test images it recorded.
/// `embeddings` replaces the embedding file named in the model's config.
pub fn eval_classify(
    m: &DatasetManifest,
    mf: &ModelFile,
    embeddings: Option<&Path>,
) -> Result<MetricReport> {
    let mut cfg = mf.config.clone();
    if let Some(p) = embeddings {
        cfg.embeddings = Some(p.to_owned());
    }
    require(&cfg, PipelineKind::Classify)?;
    let table = load_table(&cfg)?;
    let test = test_entries(m, mf)?;
    if let Some(t) = &table {
        ensure_embedded(t, &test)?;
    }
    let result = classify_result(m, &test, &mf.model, &cfg, table.as_ref())?;
    Ok(eval_report(mf, vec![result], CLASSIFY_RESULT))
}

/// Probability of flood for one image under a classification model.
pub fn predict_classify(
    mf: &ModelFile,
    img: Option<&Image>,
    embedding: Option<&FeatureVector>,
) -> Result<f64> {
    let x = match (mf.config.feature(), img, embedding) {
        (FeatureKind::Embedding, _, Some(v)) => v.values().to_vec(),
        (FeatureKind::Embedding, _, None) => {
            return Err(Error::Validation(
                "embedding model needs the image's embedding".into(),
            ))
        }
        (_, Some(img), _) => image_features(img, &mf.config)
            .context(|| "feature extraction".into())?
            .into_values(),
        (_, None, _) => return Err(Error::Validation("no image given".into())),
    };
    mf.model.predict_proba(&x).context(|| "prediction".into())
}

fn superpixels(img: &Image, cfg: &RunConfig, name: &str) -> Result<(SuperpixelMap, Vec<Vec<f64>>)> {
    let sp = slic(img, &cfg.slic).context(|| format!("{name}: superpixels"))?;
    let feats = region_features(img, &sp)
        .context(|| format!("{name}: region features"))?
        .iter()
        .map(|r| r.to_feature_vector().into_values())
        .collect();
    Ok((sp, feats))
}

fn load_pair(m: &DatasetManifest, e: &ManifestEntry) -> Result<(Image, LabelMask)> {
    let img = load_image(&m.image_path(e))?;
    let path = m
        .mask_path(e)
        .ok_or_else(|| Error::Validation(format!("{}: flood entry has no mask", e.image)))?;
    let mask = load_mask(&path)?;
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(Error::Validation(format!(
            "{}: mask is {}x{} but image is {}x{}",
            e.image,
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    Ok((img, mask))
}

/// Pixel-level output of the segmentation model for one image.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub probabilities: ProbMap,
    pub argmax: LabelMask,
    pub refined: LabelMask,
}

pub fn segment_image(
    model: &Model,
    img: &Image,
    cfg: &RunConfig,
    name: &str,
) -> Result<Segmentation> {
    let (sp, feats) = superpixels(img, cfg, name)?;
    let p = feats
        .iter()
        .map(|x| model.predict_proba(x))
        .collect::<floodseg_core::Result<Vec<f64>>>()
        .context(|| format!("{name}: region prediction"))?;
    let painted = sp.paint(&p).context(|| name.to_owned())?;
    let probabilities =
        ProbMap::new(img.width(), img.height(), painted).context(|| name.to_owned())?;
    let argmax = unary_argmax(&probabilities);
    let refined = icm_refine(&probabilities, img, &cfg.crf).context(|| format!("{name}: CRF"))?;
    Ok(Segmentation {
        probabilities,
        argmax,
        refined,
    })
}

/// File name for an entry's output PNG: the relative image path with
/// separators flattened and the extension replaced.
pub fn output_name(image: &str) -> String {
    let p = Path::new(image);
    let stem = p.with_extension("");
    let flat: Vec<String> = stem
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    format!("{}.png", flat.join("__"))
}

/// Writes `masks/<name>.png` and `overlays/<name>.png` under `out`.
pub fn write_segmentation(
    out: &Path,
    image: &str,
    img: &Image,
    mask: &LabelMask,
    alpha: f64,
) -> Result<()> {
    let name = output_name(image);
    let masks = out.join("masks");
    let overlays = out.join("overlays");
    for d in [&masks, &overlays] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    save_mask(&masks.join(&name), mask)?;
    let overlay = render_overlay(img, mask, alpha)?;
    save_image(&overlays.join(&name), &overlay)
}

fn segment_results(
    m: &DatasetManifest,
    test: &[ManifestEntry],
    model: &Model,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<Vec<ModelResult>> {
    let per_image = test
        .par_iter()
        .map(|e| {
            let (img, truth) = load_pair(m, e)?;
            let s = segment_image(model, &img, cfg, &e.image)?;
            if let Some(out) = out {
                write_segmentation(out, &e.image, &img, &s.refined, cfg.overlay_alpha)?;
            }
            let score = |mask: &LabelMask| {
                confusion(mask.labels(), truth.labels()).context(|| e.image.clone())
            };
            Ok((e.image.clone(), score(&s.argmax)?, score(&s.refined)?))
        })
        .collect::<Result<Vec<(String, ConfusionMatrix, ConfusionMatrix)>>>()?;
    let build =
        |name: &str, pick: fn(&(String, ConfusionMatrix, ConfusionMatrix)) -> ConfusionMatrix| {
            let mut pooled = ConfusionMatrix::default();
            let rows: Vec<(String, ConfusionMatrix)> = per_image
                .iter()
                .map(|r| {
                    let cm = pick(r);
                    pooled.merge(&cm);
                    (r.0.clone(), cm)
                })
                .collect();
            ModelResult::new(name, Aggregation::Micro, pooled).with_per_image(rows)
        };
    Ok(vec![
        build(ARGMAX_RESULT, |r| r.1),
        build(CRF_RESULT, |r| r.2),
    ])
}

fn flood_entries(m: &DatasetManifest) -> Result<Vec<ManifestEntry>> {
    let entries: Vec<ManifestEntry> = m.entries.iter().filter(|e| e.label == 1).cloned().collect();
    let unmasked: Vec<&str> = entries
        .iter()
        .filter(|e| e.mask.is_none())
        .map(|e| e.image.as_str())
        .collect();
    if !unmasked.is_empty() {
        return Err(Error::Validation(format!(
            "segmentation needs a mask for every flood entry; missing: {}",
            unmasked.join(", ")
        )));
    }
    Ok(entries)
}

/// Superpixel segmentation of the flood images. Writes predicted masks and
/// overlays for the test images under `out` when given.
pub fn run_segment(
    m: &DatasetManifest,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<TrainOutput> {
    require(cfg, PipelineKind::Segment)?;
    let entries = flood_entries(m)?;
    let (record, train, test) = split_record(m, cfg, &entries)?;
    log::info!(
        "segment: {} train / {} test images",
        train.len(),
        test.len()
    );
    let per_image = train
        .par_iter()
        .map(|e| {
            let (img, mask) = load_pair(m, e)?;
            let (sp, feats) = superpixels(&img, cfg, &e.image)?;
            let labels = region_labels(&sp, &mask, cfg.region_label_threshold)
                .context(|| format!("{}: region labels", e.image))?;
            Ok((feats, labels))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut features, mut labels) = (Vec::new(), Vec::new());
    for (f, l) in per_image {
        features.extend(f);
        labels.extend(l);
    }
    let data = Dataset::from_rows(ExtractorId::Region, features, labels)
        .context(|| "building the region training set".into())?;
    log::info!("segment: {} training regions", data.len());
    let (cv, model) = cross_validate(&data, cfg)?;
    let best_params: HyperParams = cv.candidates[cv.best_index].params.clone();
    log::info!("segment: selected {best_params:?}");
    let results = segment_results(m, &test, &model, cfg, out)?;
    let mut report = MetricReport {
        format_version: FORMAT_VERSION,
        pipeline: PipelineKind::Segment,
        feature: FeatureKind::Region,
        classifier: cfg.classifier,
        config_hash: cfg.hash(),
        config: cfg.canonical(),
        dataset: DatasetSummary {
            train_images: train.len(),
            test_images: test.len(),
            train_rows: Some(data.len()),
        },
        cross_validation: Some(cv),
        best_params: best_params.clone(),
        results,
        reference: None,
    };
    report.attach_reference(CRF_RESULT);
    let model = ModelFile {
        format_version: FORMAT_VERSION,
        config: cfg.canonical(),
        split: record,
        best_params,
        model,
    };
    Ok(TrainOutput { report, model })
}

/// Re-scores a saved segmentation model on its recorded test images,
/// optionally rewriting masks and overlays.
pub fn eval_segment(
    m: &DatasetManifest,
    mf: &ModelFile,
    out: Option<&Path>,
) -> Result<MetricReport> {
    require(&mf.config, PipelineKind::Segment)?;
    let test = test_entries(m, mf)?;
    let results = segment_results(m, &test, &mf.model, &mf.config, out)?;
    Ok(eval_report(mf, results, CRF_RESULT))
}

/// Paths of the files a training run writes under `out`.
pub fn report_path(out: &Path) -> PathBuf {
    out.join("report.json")
}

pub fn model_path(out: &Path) -> PathBuf {
    out.join("model.json")
}
