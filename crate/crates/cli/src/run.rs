use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use leaflife_core::dataset::{scan_dataset, stratified_split, DatasetManifest, SplitAssignment};
use leaflife_core::experiment::{ExperimentConfig, RunRecord};
use leaflife_core::model::TrainConfig;

use crate::args::{RunArgs, TrainOverrides};

/// Resolved config plus the directory this invocation writes into.
pub struct Run {
    pub config: ExperimentConfig,
    pub dir: PathBuf,
    pub record: RunRecord,
}

impl Run {
    pub fn start(command: &str, args: &RunArgs) -> Result<Self> {
        Self::start_with(command, args, |_| Ok(()))
    }

    pub fn start_with(
        command: &str,
        args: &RunArgs,
        adjust: impl FnOnce(&mut ExperimentConfig) -> Result<()>,
    ) -> Result<Self> {
        let mut config = match &args.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(root) = &args.dataset_root {
            config.dataset_root = root.clone();
        }
        if let Some(out) = &args.output_dir {
            config.output_dir = out.clone();
        }
        if let Some(seed) = args.seed {
            config.split.seed = seed;
            config.train.seed = seed;
        }
        adjust(&mut config)?;
        config.validate()?;

        let run_id = match &args.run_id {
            Some(id) => id.clone(),
            None => format!("{command}-{}", chrono::Utc::now().format("%Y%m%d-%H%M%S")),
        };
        let dir = config.output_dir.join(&run_id);
        prepare_dir(&dir, args.overwrite)?;
        let mut record = RunRecord::start(command, &run_id, std::env::args().collect(), config.train.seed);
        record.config_digest = Some(config.digest());
        Ok(Self { config, dir, record })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.record.outputs.push(name.to_string());
        self.dir.join(name)
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        scan_configured(&self.config)
    }

    /// The saved split at `path` if given, else a fresh split of `manifest`.
    pub fn split(&self, manifest: &DatasetManifest, path: Option<&Path>) -> Result<SplitAssignment> {
        let split = match path {
            Some(p) => SplitAssignment::load(p)?,
            None => stratified_split(manifest, self.config.split_ratios(), self.config.split.seed)?,
        };
        split.check_consistent(manifest)?;
        Ok(split)
    }

    pub fn finish(mut self) -> Result<()> {
        self.record.finish();
        self.record.save(&self.dir)?;
        log::info!("outputs in {}", self.dir.display());
        Ok(())
    }
}

pub fn scan_configured(config: &ExperimentConfig) -> Result<DatasetManifest> {
    if config.dataset_root.as_os_str().is_empty() {
        bail!("dataset_root: not set (use --dataset-root or the config file)");
    }
    Ok(scan_dataset(&config.dataset_root)?)
}

fn prepare_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !overwrite {
            bail!("{} already exists; pass --overwrite to replace it", dir.display());
        }
        if non_empty {
            fs::remove_dir_all(dir).with_context(|| format!("cannot clear {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(())
}

pub fn apply_overrides(train: &mut TrainConfig, o: &TrainOverrides) {
    if let Some(b) = o.backbone {
        if b != train.backbone {
            let keep = train.clone();
            *train = TrainConfig::reference(b);
            train.seed = keep.seed;
            train.num_classes = keep.num_classes;
            train.width_multiplier = keep.width_multiplier;
            train.freeze_backbone = keep.freeze_backbone;
        }
    }
    if let Some(v) = o.epochs {
        train.max_epochs = v;
    }
    if let Some(v) = o.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = o.learning_rate {
        train.learning_rate = v;
    }
    if let Some(v) = o.patience {
        train.early_stop_patience = v;
    }
    if o.freeze_backbone {
        train.freeze_backbone = true;
    }
    if let Some(v) = o.width_multiplier {
        train.width_multiplier = v;
    }
    if let Some(v) = &o.pretrained {
        train.pretrained_weights = Some(v.clone());
    }
}
