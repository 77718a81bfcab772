use std::path::PathBuf;

use clap::Args as ClapArgs;
use framestack_core::trainer::{evaluate, load_checkpoint, LoadedSplit};
use framestack_core::types::Split;
use framestack_core::{ClassStats, DatasetManifest, Error, Result};

#[derive(ClapArgs)]
pub struct Args {
    /// Checkpoint to evaluate
    #[arg(long)]
    checkpoint: PathBuf,

    /// Manifest of the split to evaluate
    #[arg(long)]
    manifest: PathBuf,

    /// Stats TSV defining per-class train counts and groups (written by
    /// gen-data)
    #[arg(long)]
    stats: PathBuf,

    /// Root directory feature paths are relative to [default: the
    /// manifest's directory]
    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Frames uniformly subsampled per video [default: 150, reference
    /// protocol]
    #[arg(long, default_value_t = 150)]
    frames: usize,

    #[arg(long, default_value_t = 64)]
    batch_size: usize,

    /// Split label for the report [default: inferred from the manifest
    /// file name]
    #[arg(long, value_parser = ["train", "val", "test"])]
    split: Option<String>,

    /// Also write the report TSV here
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let state = load_checkpoint(&args.checkpoint)?;
    let stats_text = std::fs::read_to_string(&args.stats).map_err(|e| Error::io(&args.stats, e))?;
    let stats = ClassStats::parse_tsv(&stats_text, &args.stats)?;

    let root = args
        .data_root
        .clone()
        .or_else(|| args.manifest.parent().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut manifest = DatasetManifest::load(&args.manifest)?;
    let split_name = args.split.clone().unwrap_or_else(|| {
        args.manifest
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default()
    });
    manifest.split = match split_name.as_str() {
        "train" => Some(Split::Train),
        "val" => Some(Split::Val),
        "test" => Some(Split::Test),
        _ => None,
    };

    if manifest.classes != stats.classes() {
        return Err(Error::Config(format!(
            "manifest has {} classes but stats describe {}",
            manifest.classes,
            stats.classes()
        )));
    }
    if manifest.classes != state.model.classes() {
        return Err(Error::Config(format!(
            "manifest has {} classes but the checkpoint was trained on {}",
            manifest.classes,
            state.model.classes()
        )));
    }
    manifest.validate(*stats.thresholds(), Some(&root))?;

    let split = LoadedSplit::load(manifest, &root)?;
    let report = evaluate(
        &state.model,
        &split,
        &stats,
        args.frames,
        args.batch_size,
        state.epoch.saturating_sub(1),
    )?;
    let tsv = report.to_tsv(&stats);
    print!("{tsv}");
    if let Some(out) = &args.out {
        std::fs::write(out, &tsv).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}
