use std::path::PathBuf;

use clap::Args as ClapArgs;
use framestack_core::datagen::{generate_dataset, split_dataset};
use framestack_core::{Error, Result};

use super::{apply_sets, load_config};

#[derive(ClapArgs)]
pub struct Args {
    /// Configuration file (TOML); falls back to $FRAMESTACK_CONFIG, then
    /// built-in defaults
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,

    /// Dataset seed override
    #[arg(long)]
    seed: Option<u64>,

    /// Override any config key, repeatable: --set dataset.classes=10
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

pub fn run(args: Args) -> Result<()> {
    let mut config = load_config(args.config)?;
    apply_sets(&mut config, &args.set)?;
    if let Some(seed) = args.seed {
        config.dataset.seed = seed;
    }
    let synth = config.resolve_synth()?;
    let thresholds = config.resolve_thresholds()?;
    let ratios = config.resolve_split_ratios()?;

    let manifest = generate_dataset(&synth, &args.out)?;
    let (train, val, test) = split_dataset(&manifest, ratios, synth.seed)?;
    train.save(&args.out.join("train.tsv"))?;
    val.save(&args.out.join("val.tsv"))?;
    test.save(&args.out.join("test.tsv"))?;

    // groups come from the train-split counts
    let stats = train.validate(thresholds, Some(&args.out))?;
    let stats_path = args.out.join("stats.tsv");
    std::fs::write(&stats_path, stats.to_tsv()).map_err(|e| Error::io(&stats_path, e))?;

    let config_path = args.out.join("config.toml");
    std::fs::write(&config_path, config.to_toml()).map_err(|e| Error::io(&config_path, e))?;

    println!(
        "dataset: {} videos, {} classes ({} train / {} val / {} test) at {}",
        manifest.records.len(),
        manifest.classes,
        train.records.len(),
        val.records.len(),
        test.records.len(),
        args.out.display()
    );
    Ok(())
}
