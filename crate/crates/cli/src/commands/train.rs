use std::path::PathBuf;

use clap::Args as ClapArgs;
use framestack_core::trainer::{evaluate, fit, load_checkpoint, Dataset};
use framestack_core::{Error, Result};

use super::{apply_sets, load_config};

#[derive(ClapArgs)]
pub struct Args {
    /// Configuration file (TOML); falls back to $FRAMESTACK_CONFIG, then
    /// built-in defaults
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dataset directory (as produced by gen-data)
    #[arg(long)]
    data: PathBuf,

    /// Run output directory (history, checkpoints, reports)
    #[arg(long)]
    out: PathBuf,

    /// Resume from a checkpoint
    #[arg(long)]
    resume: Option<PathBuf>,

    /// Batch augmentation [default: none]
    #[arg(long, value_parser = ["none", "framestack", "mixup"])]
    aug: Option<String>,

    /// Fraction of each batch replaced by mixed pairs [default: 0.5,
    /// reference protocol]
    #[arg(long)]
    eta: Option<f64>,

    /// Clip length L of mixed outputs [default: 60, reference protocol]
    #[arg(long)]
    clip_len: Option<usize>,

    /// Budget rounding: exact_l keeps every output at L frames;
    /// strict_paper floors both budgets [default: exact_l]
    #[arg(long, value_parser = ["exact_l", "strict_paper"])]
    length_mode: Option<String>,

    /// Where pair budgets come from: rap (running AP, reference method),
    /// freq (class frequency), or const:<x> [default: rap]
    #[arg(long)]
    beta_source: Option<String>,

    /// Batch sampler [default: random]
    #[arg(long, value_parser = ["random", "cbs"])]
    sampler: Option<String>,

    /// Training loss [default: bce]
    #[arg(long, value_parser = ["bce", "focal", "cb", "ldam_drw", "eql"])]
    loss: Option<String>,

    /// Focal focusing exponent [default: 2, assumed]
    #[arg(long)]
    gamma_focal: Option<f64>,

    /// Effective-number beta for class-balanced weighting [default:
    /// 0.9999, assumed]
    #[arg(long)]
    beta_cb: Option<f64>,

    /// Epoch at which deferred re-weighting starts; negative = 60% of
    /// max_epochs [default: -1]
    #[arg(long)]
    drw_start: Option<i64>,

    /// Training seed [default: 1]
    #[arg(long)]
    seed: Option<u64>,

    /// Epoch budget [default: 30 desk-scale; reference protocol uses 100]
    #[arg(long)]
    epochs: Option<usize>,

    /// Batch size [default: 64 desk-scale; reference protocol uses 128]
    #[arg(long)]
    batch_size: Option<usize>,

    /// Classification head [default: nonlinear]
    #[arg(long, value_parser = ["nonlinear", "netvlad"])]
    arch: Option<String>,

    /// Initial learning rate [default: 1e-4, reference protocol]
    #[arg(long)]
    lr: Option<f64>,

    /// Override any config key, repeatable: --set loss.eql_lambda=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

pub fn run(args: Args) -> Result<()> {
    let mut config = load_config(args.config)?;
    apply_sets(&mut config, &args.set)?;
    let overrides: [(&str, Option<String>); 15] = [
        ("aug.kind", args.aug),
        ("aug.eta", args.eta.map(|v| v.to_string())),
        ("aug.clip_len", args.clip_len.map(|v| v.to_string())),
        ("aug.length_mode", args.length_mode),
        ("aug.beta_source", args.beta_source),
        ("train.sampler", args.sampler),
        ("loss.kind", args.loss),
        ("loss.gamma_focal", args.gamma_focal.map(|v| v.to_string())),
        ("loss.beta_cb", args.beta_cb.map(|v| v.to_string())),
        ("loss.drw_start", args.drw_start.map(|v| v.to_string())),
        ("train.seed", args.seed.map(|v| v.to_string())),
        ("train.max_epochs", args.epochs.map(|v| v.to_string())),
        ("train.batch_size", args.batch_size.map(|v| v.to_string())),
        ("train.arch", args.arch),
        ("train.lr", args.lr.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            config.set_key(key, &value)?;
        }
    }

    // group thresholds are a dataset property: prefer the ones gen-data
    // recorded in stats.tsv, fall back to the config
    let stats_path = args.data.join("stats.tsv");
    let thresholds = if stats_path.is_file() {
        let text = std::fs::read_to_string(&stats_path).map_err(|e| Error::io(&stats_path, e))?;
        let recorded = *framestack_core::ClassStats::parse_tsv(&text, &stats_path)?.thresholds();
        let configured = config.resolve_thresholds()?;
        if recorded != configured {
            log::info!(
                "using dataset thresholds {}/{} from stats.tsv (config says {}/{})",
                recorded.head_min,
                recorded.medium_min,
                configured.head_min,
                configured.medium_min
            );
        }
        recorded
    } else {
        config.resolve_thresholds()?
    };
    let train_config = config.resolve_train()?;
    let dataset = Dataset::load(&args.data, thresholds)?;
    let resume = args.resume.as_deref().map(load_checkpoint).transpose()?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let config_path = args.out.join("config.toml");
    std::fs::write(&config_path, config.to_toml()).map_err(|e| Error::io(&config_path, e))?;

    let (history, state) = fit(&dataset, &train_config, resume, Some(&args.out))?;

    if let Some(report) = history.last_eval() {
        let path = args.out.join("report_val.tsv");
        std::fs::write(&path, report.to_tsv(&dataset.stats)).map_err(|e| Error::io(&path, e))?;
    }
    if let Some(test) = &dataset.test {
        let report = evaluate(
            &state.model,
            test,
            &dataset.stats,
            train_config.test_frames,
            train_config.batch_size,
            state.epoch.saturating_sub(1),
        )?;
        let path = args.out.join("report_test.tsv");
        std::fs::write(&path, report.to_tsv(&dataset.stats)).map_err(|e| Error::io(&path, e))?;
    }

    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    if let Some(val) = history.last_eval() {
        println!(
            "val (epoch {}): overall {} head {} medium {} tail {} acc@1 {:.4} acc@5 {:.4}",
            val.epoch,
            fmt(val.map.overall),
            fmt(val.map.head),
            fmt(val.map.medium),
            fmt(val.map.tail),
            val.acc1,
            val.acc5
        );
    }
    if let Some(best) = history.best_val_epoch() {
        println!("best val epoch: {best}");
    }
    println!("run artifacts in {}", args.out.display());
    Ok(())
}
