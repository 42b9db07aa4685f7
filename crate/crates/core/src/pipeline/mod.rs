//! Stage functions that connect the modules through files on disk.
//!
//! A run directory holds one subdirectory per characteristic:
//!
//! ```text
//! <out>/<characteristic>/
//!     <group>.jsonl  characteristic.json  excluded.json  oplog.json
//!     predictions/<group>.jsonl
//!     analysis.json  means.csv  deviations.csv
//!     heatmap.svg  table.md  table.csv  [age_plot.svg]
//!     baseline.json  baseline_counts.csv  baseline_deviations.csv  baseline_heatmap.svg
//! ```
//!
//! Every stage reads only what earlier stages wrote, so an expensive
//! prediction stage can be rerun without regenerating anything else.

mod config;
mod selftest;

pub use config::{ModelSource, RunConfig};
pub use selftest::{selftest, SelftestCase, SelftestReport, SELFTEST_NOTES};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::analysis::{
    age_curves, aggregate, baseline_distribution_with, AgeBucket, AnalysisFile, BaselineDistribution,
    ANALYSIS_FILE, BASELINE_FILE,
};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::inference::{
    check_complete, predict_mock_with, predict_remote, save_predictions, sort_records, PredictionRecord,
};
use crate::par::Execution;
use crate::perturb::{
    characteristic_dir, generate_groups_with, read_grouped_dataset, read_jsonl, write_grouped_dataset,
    CharacteristicSpec, GroupedDataset, SPEC_FILE,
};
use crate::report::{
    baseline_counts_csv, deviation_csv, emit_age_plot_svg, emit_group_table, emit_heatmap_svg, means_csv,
    write_text, HeatmapSpec, TableFormat, DEFAULT_TOP_K,
};

pub const PREDICTIONS_DIR: &str = "predictions";

/// Writes one altered dataset per group under `<out>/<characteristic>/`.
pub fn generate(corpus: &Corpus, spec: &CharacteristicSpec, out: &Path, exec: Execution) -> Result<GroupedDataset> {
    let compiled = spec.compile()?;
    let dataset = generate_groups_with(corpus, &compiled, exec)?;
    let dir = write_grouped_dataset(&dataset, spec, out)?;
    info!(
        "{}: {} groups x {} notes ({} excluded) -> {}",
        dataset.characteristic,
        dataset.groups.len(),
        dataset.cohort_size(),
        dataset.excluded.len(),
        dir.display()
    );
    Ok(dataset)
}

/// Predicts every sample of the dataset in `dir` and writes
/// `predictions/<group>.jsonl`. Fails unless every pair is covered.
pub fn predict(dir: &Path, source: &ModelSource, exec: Execution) -> Result<Vec<PredictionRecord>> {
    let (dataset, _) = read_grouped_dataset(dir)?;
    let mut records = match source {
        ModelSource::Mock(model) => predict_mock_with(&dataset, model, exec),
        ModelSource::Endpoint(endpoint) => predict_remote(&dataset, endpoint)?,
        ModelSource::Predictions(path) => {
            // a predictions file may cover more than this run (other
            // characteristics, excluded notes); keep only our pairs
            let wanted: std::collections::BTreeSet<(&str, &str)> = dataset
                .groups
                .iter()
                .flat_map(|g| g.samples.iter().map(move |s| (g.name.as_str(), s.id.as_str())))
                .collect();
            let mut all = crate::inference::load_predictions(path)?;
            all.retain(|r| wanted.contains(&(r.group.as_str(), r.sample_id.as_str())));
            all
        }
    };
    sort_records(&mut records);
    check_complete(&dataset, &records)?;
    let pred_dir = dir.join(PREDICTIONS_DIR);
    if pred_dir.exists() {
        fs::remove_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
    }
    for group in dataset.group_names() {
        let rows: Vec<PredictionRecord> = records.iter().filter(|r| r.group == group).cloned().collect();
        save_predictions(&rows, pred_dir.join(format!("{group}.jsonl")))?;
    }
    Ok(records)
}

/// Reads back the per-group predictions written by [`predict`].
pub fn read_predictions(dir: &Path) -> Result<Vec<PredictionRecord>> {
    let spec = CharacteristicSpec::load(dir.join(SPEC_FILE))?;
    let mut records = Vec::new();
    for group in spec.group_names() {
        records.extend(read_jsonl::<PredictionRecord>(
            &dir.join(PREDICTIONS_DIR).join(format!("{group}.jsonl")),
        )?);
    }
    sort_records(&mut records);
    Ok(records)
}

/// Aggregates the predictions in `dir` into `analysis.json`, `means.csv`
/// and `deviations.csv`. Groups are listed in spec order.
pub fn analyze(dir: &Path) -> Result<AnalysisFile> {
    let spec = CharacteristicSpec::load(dir.join(SPEC_FILE))?;
    let records = read_predictions(dir)?;
    let means = aggregate(&spec.name, &records)?.reorder_groups(&spec.group_names())?;
    let file = AnalysisFile::from_means(&means)?;
    file.save(dir.join(ANALYSIS_FILE))?;
    write_text(dir.join("means.csv"), &means_csv(&means)?)?;
    write_text(dir.join("deviations.csv"), &deviation_csv(&file.deviation_matrix()?)?)?;
    Ok(file)
}

/// Observed label prevalence per group of the unaltered corpus.
pub fn baseline(corpus: &Corpus, spec: &CharacteristicSpec, dir: &Path, exec: Execution) -> Result<BaselineDistribution> {
    let dist = baseline_distribution_with(corpus, &spec.compile()?, exec)?;
    let file = AnalysisFile::from_baseline(&dist)?;
    file.save(dir.join(BASELINE_FILE))?;
    write_text(dir.join("baseline_counts.csv"), &baseline_counts_csv(&dist)?)?;
    if dist.groups.len() >= 2 {
        let dev = file.deviation_matrix()?;
        write_text(dir.join("baseline_deviations.csv"), &deviation_csv(&dev)?)?;
        let spec = HeatmapSpec {
            frequencies: Some(label_frequencies(&dist)),
            title: Some(format!("Observed prevalence deviation by {}", dist.characteristic)),
            ..Default::default()
        };
        write_text(dir.join("baseline_heatmap.svg"), &emit_heatmap_svg(&dev, &spec)?)?;
    }
    Ok(dist)
}

fn label_frequencies(b: &BaselineDistribution) -> Vec<(String, usize)> {
    b.labels
        .iter()
        .enumerate()
        .map(|(l, label)| (label.clone(), b.counts.iter().map(|row| row[l]).sum()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub top_k: usize,
    /// Labels for the group table; defaults to `mortality` when present,
    /// otherwise the most frequent label.
    pub table_labels: Vec<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            top_k: DEFAULT_TOP_K,
            table_labels: Vec::new(),
        }
    }
}

/// Renders the figures and tables for the analysis in `dir`. Label
/// frequencies and the age-plot overlay come from `baseline.json` when it
/// exists. Returns the paths written.
pub fn report(dir: &Path, options: &ReportOptions) -> Result<Vec<PathBuf>> {
    let analysis_path = dir.join(ANALYSIS_FILE);
    if !analysis_path.exists() {
        return Err(Error::validation(format!(
            "{} not found; run analyze first",
            analysis_path.display()
        )));
    }
    let file = AnalysisFile::load(&analysis_path)?;
    let baseline_path = dir.join(BASELINE_FILE);
    let baseline = if baseline_path.exists() {
        AnalysisFile::load(&baseline_path)?.baseline()
    } else {
        None
    };
    let frequencies = baseline.as_ref().map(label_frequencies);
    let means = file.group_means()?;
    let dev = file.deviation_matrix()?;
    let mut written = Vec::new();

    let heatmap = HeatmapSpec {
        top_k: options.top_k,
        frequencies: frequencies.clone(),
        ..Default::default()
    };
    let path = dir.join("heatmap.svg");
    write_text(&path, &emit_heatmap_svg(&dev, &heatmap)?)?;
    written.push(path);

    let table_labels: Vec<String> = if !options.table_labels.is_empty() {
        options.table_labels.clone()
    } else if means.label_index(crate::corpus::MORTALITY).is_some() {
        vec![crate::corpus::MORTALITY.to_string()]
    } else {
        let by_freq: BTreeMap<&str, usize> = frequencies
            .iter()
            .flatten()
            .map(|(l, n)| (l.as_str(), *n))
            .collect();
        let top = means
            .labels
            .iter()
            .max_by(|a, b| {
                let fa = by_freq.get(a.as_str()).unwrap_or(&0);
                let fb = by_freq.get(b.as_str()).unwrap_or(&0);
                fa.cmp(fb).then_with(|| b.cmp(a))
            })
            .expect("analysis has labels");
        vec![top.clone()]
    };
    let refs: Vec<&str> = table_labels.iter().map(String::as_str).collect();
    for (name, format) in [("table.md", TableFormat::Markdown), ("table.csv", TableFormat::Csv)] {
        let path = dir.join(name);
        write_text(&path, &emit_group_table(&means, &refs, format)?)?;
        written.push(path);
    }

    if means.groups.iter().all(|g| AgeBucket::parse(g).is_some()) {
        let curves = age_curves(&means, baseline.as_ref())?;
        let path = dir.join("age_plot.svg");
        write_text(&path, &emit_age_plot_svg(&curves)?)?;
        written.push(path);
    }
    Ok(written)
}

/// What [`run_full`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub analysis: AnalysisFile,
    pub excluded: usize,
}

/// Runs generate, predict, baseline (for labeled corpora), analyze and
/// report for one characteristic.
pub fn run_full(
    corpus: &Corpus,
    spec: &CharacteristicSpec,
    source: &ModelSource,
    out: &Path,
    options: &ReportOptions,
    exec: Execution,
) -> Result<RunSummary> {
    let dataset = generate(corpus, spec, out, exec)?;
    let dir = characteristic_dir(out, &dataset.characteristic);
    predict(&dir, source, exec)?;
    if corpus.is_labeled() {
        baseline(corpus, spec, &dir, exec)?;
    }
    let analysis = analyze(&dir)?;
    report(&dir, options)?;
    Ok(RunSummary {
        dir,
        analysis,
        excluded: dataset.excluded.len(),
    })
}
