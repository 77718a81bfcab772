use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::Args as ClapArgs;
use framestack_core::config::{FileConfig, GridCell, GridConfig};
use framestack_core::datagen::{generate_dataset, split_dataset};
use framestack_core::metrics::MetricsReport;
use framestack_core::trainer::{evaluate, fit, Dataset};
use framestack_core::{Error, Result};
use rayon::prelude::*;

use super::report::{render_table, sort_rows, RunSummary};

#[derive(ClapArgs)]
pub struct Args {
    /// Sweep definition (TOML: [grid] seeds, [base] config, [[axis]]
    /// key/values)
    #[arg(long)]
    grid: PathBuf,

    /// Output directory for datasets, per-cell runs, and the consolidated
    /// summary
    #[arg(long)]
    out: PathBuf,

    /// Parallel worker processes for sweep cells [default: rayon's choice]
    #[arg(long)]
    jobs: Option<usize>,
}

fn dataset_fingerprint(config: &FileConfig) -> String {
    // dataset identity = the dataset and thresholds sections
    let skeleton = FileConfig {
        dataset: config.dataset.clone(),
        thresholds: config.thresholds.clone(),
        ..FileConfig::default()
    };
    skeleton.to_toml()
}

fn run_cell(cell: &GridCell, dataset: &Dataset, out_dir: &Path) -> Result<(String, MetricsReport)> {
    let train_config = cell.config.resolve_train()?;
    let run_dir = out_dir.join("runs").join(&cell.name);
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let config_path = run_dir.join("config.toml");
    std::fs::write(&config_path, cell.config.to_toml()).map_err(|e| Error::io(&config_path, e))?;

    let (history, state) = fit(dataset, &train_config, None, Some(&run_dir))?;
    // consolidate on the test split when it exists, else the final val
    let report = match &dataset.test {
        Some(test) => {
            let report = evaluate(
                &state.model,
                test,
                &dataset.stats,
                train_config.test_frames,
                train_config.batch_size,
                state.epoch.saturating_sub(1),
            )?;
            let path = run_dir.join("report_test.tsv");
            std::fs::write(&path, report.to_tsv(&dataset.stats))
                .map_err(|e| Error::io(&path, e))?;
            report
        }
        None => history
            .last_eval()
            .cloned()
            .ok_or_else(|| Error::Config("run produced no evaluation".to_string()))?,
    };
    Ok((cell.name.clone(), report))
}

pub fn run(args: Args) -> Result<()> {
    let grid = GridConfig::load(&args.grid)?;
    let cells = grid.expand()?;
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size worker pool: {e}")))?;
    }

    // generate each distinct dataset once and share it across cells
    let mut datasets: BTreeMap<String, Arc<Dataset>> = BTreeMap::new();
    let mut cell_dataset = Vec::with_capacity(cells.len());
    for cell in &cells {
        let print = dataset_fingerprint(&cell.config);
        if !datasets.contains_key(&print) {
            let index = datasets.len();
            let dir = args.out.join("datasets").join(format!("d{index:02}"));
            let synth = cell.config.resolve_synth()?;
            let thresholds = cell.config.resolve_thresholds()?;
            let ratios = cell.config.resolve_split_ratios()?;
            log::info!("generating dataset d{index:02} for the sweep");
            let manifest = generate_dataset(&synth, &dir)?;
            let (train, val, test) = split_dataset(&manifest, ratios, synth.seed)?;
            train.save(&dir.join("train.tsv"))?;
            val.save(&dir.join("val.tsv"))?;
            test.save(&dir.join("test.tsv"))?;
            let stats = train.validate(thresholds, Some(&dir))?;
            std::fs::write(dir.join("stats.tsv"), stats.to_tsv())
                .map_err(|e| Error::io(&dir, e))?;
            let dataset = Dataset::load(&dir, thresholds)?;
            datasets.insert(print.clone(), Arc::new(dataset));
        }
        cell_dataset.push(Arc::clone(&datasets[&print]));
    }

    let results: Mutex<Vec<(String, MetricsReport)>> = Mutex::new(Vec::new());
    cells.par_iter().zip(cell_dataset.par_iter()).try_for_each(
        |(cell, dataset)| -> Result<()> {
            log::info!("running {}", cell.name);
            let row = run_cell(cell, dataset, &args.out)?;
            results.lock().expect("no poisoned lock").push(row);
            Ok(())
        },
    )?;

    let mut results = results.into_inner().expect("no poisoned lock");
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    let mut summary = String::from("cell\tsplit\toverall\thead\tmedium\ttail\tacc@1\tacc@5\n");
    for (name, report) in &results {
        summary.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\n",
            name,
            report.split,
            fmt(report.map.overall),
            fmt(report.map.head),
            fmt(report.map.medium),
            fmt(report.map.tail),
            report.acc1,
            report.acc5
        ));
    }
    let summary_path = args.out.join("summary.tsv");
    std::fs::write(&summary_path, &summary).map_err(|e| Error::io(&summary_path, e))?;

    // aggregate means over seeds per cell group for the stdout table
    let mut groups: BTreeMap<String, Vec<&MetricsReport>> = BTreeMap::new();
    for (name, report) in &results {
        let group = name
            .rsplit_once("_seed=")
            .map(|(g, _)| g.to_string())
            .unwrap_or_else(|| name.clone());
        groups.entry(group).or_default().push(report);
    }
    let mut rows: Vec<RunSummary> = groups
        .into_iter()
        .map(|(name, reports)| {
            let mean = |pick: &dyn Fn(&MetricsReport) -> Option<f64>| {
                let values: Vec<f64> = reports.iter().filter_map(|r| pick(r)).collect();
                if values.is_empty() {
                    None
                } else {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                }
            };
            RunSummary {
                name,
                metrics: [
                    mean(&|r| r.map.overall),
                    mean(&|r| r.map.head),
                    mean(&|r| r.map.medium),
                    mean(&|r| r.map.tail),
                    mean(&|r| Some(r.acc1)),
                    mean(&|r| Some(r.acc5)),
                ],
            }
        })
        .collect();
    sort_rows(&mut rows);
    print!("{}", render_table(&rows));
    eprintln!(
        "({} runs over {} seeds; means above, per-run rows in {})",
        results.len(),
        grid.grid.seeds.len(),
        summary_path.display()
    );
    Ok(())
}
