use std::fs;

use anyhow::{bail, Context, Result};
use leaflife_core::adversarial::{epsilon_sweep_with, sweep_to_csv};
use leaflife_core::dataset::{decode_image, load_and_preprocess, resize_rgb, DatasetManifest, Subset};
use leaflife_core::eval::{comparison_table, evaluate, load_literature, render_markdown, EvaluationReport};
use leaflife_core::experiment::ExperimentConfig;
use leaflife_core::explain::{
    grad_cam, occlusion_sensitivity, render_overlay, write_explanation, CamScore, Colormap,
    LayerSelector, OcclusionGeometry, TargetClass,
};
use leaflife_core::model::{build_classifier, train as train_model, TrainedModelArtifact};
use leaflife_service::ServiceConfig;

use crate::args::{
    EvalArgs, ExplainArgs, Method, ReportArgs, RunArgs, ScanArgs, Score, ServeArgs, SweepArgs,
    TrainArgs, TrainOverrides,
};
use crate::run::{apply_overrides, scan_configured, Run};

pub fn scan(args: ScanArgs) -> Result<()> {
    let mut run = Run::start("scan", &args.run)?;
    let manifest = run.manifest()?;
    log::info!("{} images in {} classes", manifest.total, manifest.num_classes());
    manifest.save(run.path("manifest.json"))?;
    run.finish()
}

pub fn split(args: ScanArgs) -> Result<()> {
    let mut run = Run::start("split", &args.run)?;
    let manifest = run.manifest()?;
    let split = run.split(&manifest, None)?;
    log::info!(
        "train {} / val {} / test {}",
        split.count(Subset::Train),
        split.count(Subset::Val),
        split.count(Subset::Test)
    );
    manifest.save(run.path("manifest.json"))?;
    split.save(run.path("split.json"))?;
    run.finish()
}

fn start_training_run(command: &str, run: &RunArgs, overrides: &TrainOverrides) -> Result<(Run, DatasetManifest)> {
    let mut manifest = None;
    let run = Run::start_with(command, run, |config: &mut ExperimentConfig| {
        apply_overrides(&mut config.train, overrides);
        let m = scan_configured(config)?;
        if run.config.is_none() {
            config.train.num_classes = m.num_classes();
        }
        manifest = Some(m);
        Ok(())
    })?;
    Ok((run, manifest.expect("set by start_with")))
}

pub fn train(args: TrainArgs) -> Result<()> {
    let (mut run, manifest) = start_training_run("train", &args.run, &args.train)?;
    let split = run.split(&manifest, args.split.as_deref())?;
    let config = run.config.train.clone();
    log::info!(
        "training {} (width x{}) for up to {} epochs",
        config.backbone,
        config.width_multiplier,
        config.max_epochs
    );
    let network = build_classifier(&config)?;
    let (artifact, history) = train_model(network, &split, &manifest, &config)?;
    if let Some(best) = history.best() {
        log::info!(
            "best epoch {}: val_loss {:.4}, val_acc {:.4}",
            best.epoch,
            best.val_loss,
            best.val_accuracy
        );
    }
    manifest.save(run.path("manifest.json"))?;
    split.save(run.path("split.json"))?;
    history.save_csv(run.path("history.csv"))?;
    artifact.save(run.path("model"))?;
    run.finish()
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut run = Run::start("eval", &args.run)?;
    let artifact = TrainedModelArtifact::load(&args.model)?;
    let manifest = run.manifest()?;
    let split = run.split(&manifest, args.split.as_deref())?;
    let model_id = args
        .model_id
        .unwrap_or_else(|| artifact.metadata.backbone.to_string());
    let report = evaluate(&artifact, &split, &manifest, &model_id, args.batch_size)?;
    log::info!("{model_id}: accuracy {:.4}, macro F1 {:.4}", report.accuracy, report.macro_f1);
    for name in ["report.json", "confusion.csv", "confusion.png"] {
        run.path(name);
    }
    report.write(&run.dir)?;
    run.finish()
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let (mut run, manifest) = start_training_run("sweep", &args.run, &args.train)?;
    let split = run.split(&manifest, args.split.as_deref())?;
    let mut adv = run.config.adversarial_config();
    if let Some(e) = args.epsilons {
        adv.epsilons = e;
    }
    if let Some(f) = args.adv_fraction {
        adv.adv_fraction = f;
    }
    adv.validate()?;
    let dir = run.dir.clone();
    let save = args.save_models;
    let rows = epsilon_sweep_with(&split, &manifest, &adv, args.jobs, |eps, artifact, history| {
        if save {
            let sub = dir.join(format!("eps_{eps}"));
            artifact.save(sub.join("model"))?;
            history.save_csv(sub.join("history.csv"))?;
        }
        Ok(())
    })?;
    for r in &rows {
        log::info!(
            "epsilon {}: val_loss {:.4}, val_acc {:.4}, best epoch {}",
            r.epsilon,
            r.val_loss,
            r.val_accuracy,
            r.optimal_epochs
        );
    }
    fs::write(run.path("sweep.csv"), sweep_to_csv(&rows)?)?;
    split.save(run.path("split.json"))?;
    run.finish()
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    let mut run = Run::start("explain", &args.run)?;
    let artifact = TrainedModelArtifact::load(&args.model)?;
    let image = load_and_preprocess(&args.image, artifact.metadata.preprocessing_mode)?;
    let bytes = fs::read(&args.image).with_context(|| format!("cannot read {}", args.image.display()))?;
    let original = decode_image(&bytes, &args.image.display().to_string())?;
    let target = args.target.map_or(TargetClass::Auto, TargetClass::Index);
    let explanation = match args.method {
        Method::GradCam => {
            let layer = args.layer.map_or(LayerSelector::LastConv, LayerSelector::Named);
            let score = match args.score {
                Score::Logit => CamScore::Logit,
                Score::Probability => CamScore::Probability,
            };
            grad_cam(&artifact, &image, target, &layer, score)?
        }
        Method::Occlusion => {
            let fill_unit = args
                .fill
                .or(artifact.metadata.mean_pixel_unit)
                .unwrap_or(0.5);
            let geometry = OcclusionGeometry {
                patch: args.patch,
                stride: args.stride,
                fill_unit,
            };
            occlusion_sensitivity(&artifact, &image, target, geometry)?
        }
    };
    let overlay = render_overlay(&explanation, &resize_rgb(&original), args.alpha, Colormap::Jet)?;
    let stem = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    for suffix in ["_heatmap.png", "_overlay.png", ".json"] {
        run.path(&format!("{stem}{suffix}"));
    }
    write_explanation(&run.dir, &stem, &explanation, &artifact.metadata.class_names, Some(&overlay))?;
    log::info!(
        "explained class {} ({})",
        explanation.target_class,
        artifact.metadata.class_names[explanation.target_class]
    );
    run.finish()
}

pub fn serve(args: ServeArgs) -> Result<()> {
    if !(args.max_upload_mb.is_finite() && args.max_upload_mb > 0.0) {
        bail!("max_upload_mb: must be positive");
    }
    let mut config = ServiceConfig::new(args.model);
    config.port = args.port;
    config.bind = args.bind;
    config.max_upload_bytes = (args.max_upload_mb * 1024.0 * 1024.0) as usize;
    config.cors_origins = args.cors_origins;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(leaflife_service::run(config))
}

pub fn report(args: ReportArgs) -> Result<()> {
    let mut run = Run::start("report", &args.run)?;
    let reports = args
        .reports
        .iter()
        .map(|p| EvaluationReport::load(p).with_context(|| format!("report {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let literature = load_literature(args.literature.as_deref())?;
    let table = render_markdown(&comparison_table(&reports, &literature));
    print!("{table}");
    fs::write(run.path("comparison.md"), table)?;
    run.finish()
}
