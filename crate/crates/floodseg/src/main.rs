use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use floodseg::config::{FeatureKind, PipelineKind, RunConfig};
use floodseg::core::classifiers::ModelKind;
use floodseg::embeddings::load_embeddings;
use floodseg::io::{load_image, load_mask, save_image};
use floodseg::manifest::ingest;
use floodseg::overlay::render_overlay;
use floodseg::pipeline::{self, with_workers};
use floodseg::report::{MetricReport, ModelFile};
use floodseg::synth::{self, SynthKind};
use floodseg::{Error, Result};

/// Floodwater detection in road-scene images.
#[derive(Parser)]
#[command(name = "floodseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify that every image and mask in a manifest decodes and matches.
    IngestCheck {
        #[arg(long)]
        manifest: PathBuf,
        /// Require a mask for every flood entry.
        #[arg(long)]
        require_masks: bool,
    },
    /// Train and test an image classifier; writes report.json and model.json.
    ClassifyTrain(TrainArgs),
    /// Re-score a saved classifier on its test images.
    ClassifyEval(EvalArgs),
    /// Train and test a superpixel segmenter; writes report.json, model.json,
    /// masks/ and overlays/.
    SegmentTrain(TrainArgs),
    /// Re-score a saved segmenter on its test images.
    SegmentEval(EvalArgs),
    /// Apply a saved model to one image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Output directory for segmentation masks and overlays.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Embedding file, for embedding-based classifiers.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Embedding key of the image (default: the image path as given).
        #[arg(long)]
        key: Option<String>,
    },
    /// Paint a mask onto an image in yellow.
    Overlay {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Write a seeded synthetic dataset with a manifest.json.
    SynthGen {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest JSON file, or a directory with flood/, dry/ and masks/.
    #[arg(long)]
    manifest: PathBuf,
    /// JSON run configuration; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    feature: Option<FeatureKind>,
    #[arg(long, value_parser = parse_classifier)]
    classifier: Option<ModelKind>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_classifier(s: &str) -> std::result::Result<ModelKind, String> {
    match s {
        "logistic" => Ok(ModelKind::Logistic),
        "knn" => Ok(ModelKind::Knn),
        "tree" => Ok(ModelKind::Tree),
        _ => Err(format!("unknown classifier {s:?} (logistic, knn, tree)")),
    }
}

const DEFAULT_OUT: &str = "floodseg-out";

fn build_config(a: &TrainArgs, pipeline: PipelineKind) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig {
            pipeline,
            ..RunConfig::default()
        },
    };
    if cfg.pipeline != pipeline {
        return Err(Error::Validation(format!(
            "config is for the {:?} pipeline",
            cfg.pipeline
        )));
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    if a.embeddings.is_some() {
        cfg.embeddings = a.embeddings.clone();
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    if a.feature.is_some() {
        cfg.feature = a.feature;
    }
    if let Some(c) = a.classifier {
        if c != cfg.classifier {
            cfg.grid = None;
        }
        cfg.classifier = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &MetricReport) {
    for r in &report.results {
        println!(
            "{:<7} precision {:.4}  recall {:.4}  f1 {:.4}",
            r.name, r.precision, r.recall, r.f1
        );
    }
    if let Some(c) = &report.reference {
        println!(
            "published precision {:.2}  recall {:.2}  f1 {:.2}  (f1 delta {:+.4})",
            c.published.precision, c.published.recall, c.published.f1, c.delta.f1
        );
    }
}

fn train(a: &TrainArgs, pipeline: PipelineKind) -> Result<()> {
    let cfg = build_config(a, pipeline)?;
    let out = cfg.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
    let manifest = ingest(&a.manifest, pipeline == PipelineKind::Segment)?;
    let result = with_workers(cfg.workers, || match pipeline {
        PipelineKind::Classify => pipeline::run_classify(&manifest, &cfg),
        PipelineKind::Segment => pipeline::run_segment(&manifest, &cfg, Some(&out)),
    })??;
    result.report.write(&pipeline::report_path(&out))?;
    result.model.write(&pipeline::model_path(&out))?;
    print_summary(&result.report);
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(a: &EvalArgs, pipeline: PipelineKind) -> Result<()> {
    let mf = ModelFile::load(&a.model)?;
    if mf.config.pipeline != pipeline {
        return Err(Error::Validation(format!(
            "{} is a {:?} model",
            a.model.display(),
            mf.config.pipeline
        )));
    }
    let out = a.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
    let manifest = ingest(&a.manifest, pipeline == PipelineKind::Segment)?;
    let report = with_workers(a.workers, || match pipeline {
        PipelineKind::Classify => pipeline::eval_classify(&manifest, &mf, a.embeddings.as_deref()),
        PipelineKind::Segment => pipeline::eval_segment(&manifest, &mf, Some(&out)),
    })??;
    report.write(&pipeline::report_path(&out))?;
    print_summary(&report);
    Ok(())
}

fn predict(
    model: &Path,
    image: &Path,
    out: Option<&Path>,
    embeddings: Option<&Path>,
    key: Option<&str>,
) -> Result<()> {
    let mf = ModelFile::load(model)?;
    match mf.config.pipeline {
        PipelineKind::Classify => {
            let p = if mf.config.feature() == FeatureKind::Embedding {
                let path = embeddings
                    .or(mf.config.embeddings.as_deref())
                    .ok_or_else(|| Error::Validation("--embeddings is required".into()))?;
                let table = load_embeddings(path)?;
                let key = key
                    .map(str::to_owned)
                    .unwrap_or_else(|| image.display().to_string());
                let v = table
                    .get(&key)
                    .ok_or_else(|| Error::Validation(format!("no embedding for {key:?}")))?;
                pipeline::predict_classify(&mf, None, Some(v))?
            } else {
                pipeline::predict_classify(&mf, Some(&load_image(image)?), None)?
            };
            let line = serde_json::json!({
                "image": image.display().to_string(),
                "p_flood": p,
                "label": u8::from(p >= 0.5),
            });
            println!("{line}");
        }
        PipelineKind::Segment => {
            let img = load_image(image)?;
            let name = image.display().to_string();
            let s = pipeline::segment_image(&mf.model, &img, &mf.config, &name)?;
            let out = out.unwrap_or(Path::new(DEFAULT_OUT));
            let file = image
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            pipeline::write_segmentation(out, &file, &img, &s.refined, mf.config.overlay_alpha)?;
            let flood = s.refined.count_flood();
            println!(
                "{}: {flood} of {} pixels flooded; wrote {}",
                name,
                img.width() * img.height(),
                out.display()
            );
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck {
            manifest,
            require_masks,
        } => {
            let m = ingest(&manifest, require_masks)?;
            let (flood, dry) = m.counts();
            println!("{} entries: {flood} flood, {dry} dry", m.entries.len());
            Ok(())
        }
        Command::ClassifyTrain(a) => train(&a, PipelineKind::Classify),
        Command::ClassifyEval(a) => eval(&a, PipelineKind::Classify),
        Command::SegmentTrain(a) => train(&a, PipelineKind::Segment),
        Command::SegmentEval(a) => eval(&a, PipelineKind::Segment),
        Command::Predict {
            model,
            image,
            out,
            embeddings,
            key,
        } => predict(
            &model,
            &image,
            out.as_deref(),
            embeddings.as_deref(),
            key.as_deref(),
        ),
        Command::Overlay {
            image,
            mask,
            out,
            alpha,
        } => {
            let img = load_image(&image)?;
            let m = load_mask(&mask)?;
            let painted = render_overlay(&img, &m, alpha)
                .map_err(|e| Error::Validation(format!("{}: {e}", mask.display())))?;
            save_image(&out, &painted)
        }
        Command::SynthGen {
            kind,
            count,
            out,
            seed,
        } => {
            let m = synth::generate(kind, count, seed, &out)?;
            println!("wrote {} images to {}", m.entries.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
