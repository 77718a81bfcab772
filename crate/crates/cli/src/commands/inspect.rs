use std::path::PathBuf;

use clap::Args as ClapArgs;
use framestack_core::fseq::read_fseq;
use framestack_core::model::Arch;
use framestack_core::trainer::load_checkpoint;
use framestack_core::{DatasetManifest, Error, Result};

#[derive(ClapArgs)]
pub struct Args {
    /// Feature file (.fseq), checkpoint (.fsck), or manifest TSV
    path: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let head = {
        let bytes = std::fs::read(&args.path).map_err(|e| Error::io(&args.path, e))?;
        bytes.into_iter().take(8).collect::<Vec<u8>>()
    };
    if head.starts_with(b"FSEQ") {
        let seq = read_fseq(&args.path)?;
        let data = seq.data();
        let (min, max) = data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        let mean: f32 = data.iter().sum::<f32>() / data.len() as f32;
        println!(
            "feature sequence: {} frames x {} dims",
            seq.len(),
            seq.dim()
        );
        println!("values: min {min:.4}, max {max:.4}, mean {mean:.4}");
        return Ok(());
    }
    if head.starts_with(b"FSCK") {
        let state = load_checkpoint(&args.path)?;
        let arch = match state.model.arch() {
            Arch::Nonlinear { hidden } => format!("nonlinear (hidden {hidden})"),
            Arch::Netvlad { clusters, hidden } => {
                format!("netvlad ({clusters} clusters, hidden {hidden})")
            }
        };
        println!("checkpoint: {arch}");
        println!(
            "feature dim {}, {} classes, {} parameters",
            state.model.feature_dim(),
            state.model.classes(),
            state.model.param_count()
        );
        println!(
            "trained epochs: {}, adam steps: {}",
            state.epoch, state.adam.step
        );
        let rap = state.rap.values();
        let mean = rap.iter().sum::<f64>() / rap.len().max(1) as f64;
        let max = rap.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "running AP table: epoch {}, mean {:.4}, max {:.4}",
            state.rap.epoch(),
            mean,
            max
        );
        return Ok(());
    }

    let manifest = DatasetManifest::load(&args.path)?;
    println!(
        "manifest: {} records, {} classes",
        manifest.records.len(),
        manifest.classes
    );
    let mut counts = vec![0usize; manifest.classes];
    let mut multi = 0usize;
    for record in &manifest.records {
        if record.labels.len() > 1 {
            multi += 1;
        }
        for &c in &record.labels {
            if c < manifest.classes {
                counts[c] += 1;
            }
        }
    }
    let populated = counts.iter().filter(|&&c| c > 0).count();
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    println!("populated classes: {populated}; per-class count range: {min}..{max}");
    println!("multi-label records: {multi}");
    Ok(())
}
