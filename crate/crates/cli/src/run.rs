//! The experiment pipeline and its file exports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use fraudlab_core::baselines::{cart_fit, logreg_fit, KnnModel};
use fraudlab_core::cleanse::{prune_class_outliers, RemovalReport};
use fraudlab_core::embed::{run_tsne, Embedding};
use fraudlab_core::gbdt::{save_model, train_gbdt};
use fraudlab_core::metrics::{evaluate, roc_curve, MetricsReport, RocCurve};
use fraudlab_core::resample::smote_balance;
use fraudlab_core::synth::generate;
use fraudlab_core::tabular::{
    correlation_matrix, load_csv, minmax_scale, stratified_split, subsample_keep_positives, write_csv,
};
use fraudlab_core::{Dataset, Scorer};

use crate::config::{seed_offset, DataSource, ExperimentConfig, ModelKind};
use crate::error::{io, CliError, Result, StageExt};

/// One (model, SMOTE on/off) cell of the comparison grid.
#[derive(Debug, Clone)]
pub struct VariantResult {
    pub model: ModelKind,
    pub smote: bool,
    pub metrics: MetricsReport,
    /// Test-set scores in test-partition order.
    pub scores: Vec<f64>,
    pub roc: RocCurve,
    /// Serialized model, for the boosted variants only.
    pub blob: Option<String>,
}

impl VariantResult {
    /// `<model>` or `<model>_smote`; used in file names.
    pub fn name(&self) -> String {
        if self.smote {
            format!("{}_smote", self.model)
        } else {
            self.model.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub rows_loaded: usize,
    pub rows_after_cleaning: usize,
    pub train_counts: [usize; 2],
    pub test_counts: [usize; 2],
    /// Training class counts after balancing, when SMOTE ran.
    pub smote_counts: Option<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// In config order: each model, plain first, then its SMOTE variant.
    pub variants: Vec<VariantResult>,
    pub provenance: Provenance,
    pub cleaning: RemovalReport,
    pub label_column: String,
    /// Pearson matrix over the cleaned features plus the label (last).
    pub correlation: Vec<Vec<f64>>,
    pub correlation_names: Vec<String>,
    /// The held-out partition exactly as scored.
    pub test: Dataset,
    /// Row of each test sample in the cleaned dataset.
    pub test_rows: Vec<usize>,
    pub embedding: Option<(Embedding, Vec<u8>)>,
}

/// Runs the pipeline and writes every artifact to the configured directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let report = execute(cfg)?;
    export_artifacts(&report, &cfg.output_dir)?;
    Ok(report)
}

/// Runs the pipeline without touching the filesystem (beyond loading data).
pub fn execute(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let raw = match &cfg.source {
        DataSource::Csv(path) => load_csv(path, &cfg.label_column).stage("load")?,
        DataSource::Synthetic(spec) => generate(spec).stage("load")?,
    };

    let (clean, cleaning) = if cfg.outlier_features.is_empty() {
        let n = raw.n_rows();
        let report = RemovalReport {
            features: Vec::new(),
            removed_row_indices: Vec::new(),
            rows_before: n,
            rows_after: n,
        };
        (raw.clone(), report)
    } else {
        prune_class_outliers(&raw, &cfg.outlier_features, &cfg.prune).stage("cleanse")?
    };

    let split =
        stratified_split(&clean, cfg.test_fraction, cfg.stage_seed(seed_offset::SPLIT)).stage("split")?;
    let (split, scaler) = if cfg.scale {
        let (s, p) = minmax_scale(&split).stage("scale")?;
        (s, Some(p))
    } else {
        (split, None)
    };

    let balanced = match &cfg.smote {
        Some(params) => Some(smote_balance(&split.train, params).stage("smote")?.dataset),
        None => None,
    };

    let mut jobs = Vec::new();
    for &model in &cfg.models {
        jobs.push((model, false));
        if balanced.is_some() {
            jobs.push((model, true));
        }
    }
    let variants = jobs
        .par_iter()
        .map(|&(model, smote)| {
            let train = if smote {
                balanced.as_ref().expect("smote job without data")
            } else {
                &split.train
            };
            run_variant(cfg, model, smote, train, &split.test)
        })
        .collect::<Result<Vec<_>>>()?;

    let embedding = match &cfg.tsne {
        Some(params) => {
            let data = match &scaler {
                Some(s) => s.transform(&clean),
                None => clean.clone(),
            };
            let idx = subsample_keep_positives(&data, cfg.tsne_max_points, params.seed);
            let sample = data.select(&idx);
            let rows: Vec<&[f64]> = sample.rows().collect();
            let emb = run_tsne(&rows, params).stage("tsne")?;
            Some((emb, sample.labels().to_vec()))
        }
        None => None,
    };

    let mut correlation_names = clean.feature_names().to_vec();
    correlation_names.push(cfg.label_column.clone());
    Ok(RunReport {
        variants,
        provenance: Provenance {
            seed: cfg.seed,
            rows_loaded: raw.n_rows(),
            rows_after_cleaning: clean.n_rows(),
            train_counts: split.train.class_counts(),
            test_counts: split.test.class_counts(),
            smote_counts: balanced.as_ref().map(Dataset::class_counts),
        },
        cleaning,
        label_column: cfg.label_column.clone(),
        correlation: correlation_matrix(&clean),
        correlation_names,
        test: split.test,
        test_rows: split.test_indices,
        embedding,
    })
}

fn run_variant(
    cfg: &ExperimentConfig,
    model: ModelKind,
    smote: bool,
    train: &Dataset,
    test: &Dataset,
) -> Result<VariantResult> {
    let (scorer, blob): (Box<dyn Scorer + Send>, Option<String>) = match model {
        ModelKind::Knn => (Box::new(KnnModel::fit(train, cfg.knn).stage("fit")?), None),
        ModelKind::LogReg => (Box::new(logreg_fit(train, &cfg.logreg).stage("fit")?), None),
        ModelKind::Cart => (Box::new(cart_fit(train, &cfg.cart).stage("fit")?), None),
        ModelKind::GbdtLeafWise | ModelKind::GbdtLevelWise => {
            let m = train_gbdt(train, &cfg.gbdt_params(model)).stage("fit")?;
            let blob = save_model(&m);
            (Box::new(m), Some(blob))
        }
    };
    let scores = scorer.score_dataset(test).stage("score")?;
    let metrics = evaluate(test.labels(), &scores, cfg.threshold).stage("metrics")?;
    let roc = roc_curve(test.labels(), &scores).stage("metrics")?;
    Ok(VariantResult {
        model,
        smote,
        metrics,
        scores,
        roc,
        blob,
    })
}

pub const REPORT_HEADER: &str = "model,smote,precision,recall,f1,roc_auc,tp,fp,fn,tn";

impl RunReport {
    pub fn variant(&self, model: ModelKind, smote: bool) -> Option<&VariantResult> {
        self.variants
            .iter()
            .find(|v| v.model == model && v.smote == smote)
    }

    /// The comparison grid, one row per variant.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for v in &self.variants {
            let m = &v.metrics;
            let c = &m.confusion;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                v.model,
                if v.smote { "on" } else { "off" },
                m.precision,
                m.recall,
                m.f1,
                m.roc_auc,
                c.tp,
                c.fp,
                c.fn_,
                c.tn
            );
        }
        out
    }

    pub fn provenance_csv(&self) -> String {
        let p = &self.provenance;
        let mut rows = vec![
            ("seed".to_string(), p.seed.to_string()),
            ("rows_loaded".into(), p.rows_loaded.to_string()),
            ("rows_after_cleaning".into(), p.rows_after_cleaning.to_string()),
            ("train_negative".into(), p.train_counts[0].to_string()),
            ("train_positive".into(), p.train_counts[1].to_string()),
            ("test_negative".into(), p.test_counts[0].to_string()),
            ("test_positive".into(), p.test_counts[1].to_string()),
        ];
        if let Some(c) = p.smote_counts {
            rows.push(("smote_negative".into(), c[0].to_string()));
            rows.push(("smote_positive".into(), c[1].to_string()));
        }
        let mut out = String::from("key,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn correlation_csv(&self) -> String {
        let mut out = String::from("feature");
        for n in &self.correlation_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in self.correlation_names.iter().zip(&self.correlation) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// `row,label,score` for one variant's test predictions.
    pub fn scores_csv(&self, v: &VariantResult) -> String {
        let mut out = String::from("row,label,score\n");
        for ((row, label), score) in self.test_rows.iter().zip(self.test.labels()).zip(&v.scores) {
            let _ = writeln!(out, "{row},{label},{score}");
        }
        out
    }
}

fn write(dir: &Path, name: &str, contents: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io(&path))?;
    written.push(path);
    Ok(())
}

/// Writes the report files; returns the paths written, in order.
pub fn export_artifacts(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    write(dir, "report.csv", report.to_csv().as_bytes(), &mut written)?;
    for v in &report.variants {
        let name = v.name();
        write(
            dir,
            &format!("roc_{name}.csv"),
            v.roc.to_csv().as_bytes(),
            &mut written,
        )?;
        write(
            dir,
            &format!("scores_{name}.csv"),
            report.scores_csv(v).as_bytes(),
            &mut written,
        )?;
        if let Some(blob) = &v.blob {
            write(dir, &format!("model_{name}.txt"), blob.as_bytes(), &mut written)?;
        }
    }
    write(
        dir,
        "correlation.csv",
        report.correlation_csv().as_bytes(),
        &mut written,
    )?;
    write(
        dir,
        "cleaning.csv",
        report.cleaning.to_csv().as_bytes(),
        &mut written,
    )?;
    write(
        dir,
        "provenance.csv",
        report.provenance_csv().as_bytes(),
        &mut written,
    )?;

    let mut partition = Vec::new();
    write_csv(&report.test, &mut partition, &report.label_column).stage("export")?;
    write(dir, "test_partition.csv", &partition, &mut written)?;

    let embedding_path = dir.join("embedding.csv");
    match &report.embedding {
        Some((emb, labels)) => write(dir, "embedding.csv", emb.to_csv(labels).as_bytes(), &mut written)?,
        // a stale file from an earlier run would misrepresent this one
        None if embedding_path.exists() => fs::remove_file(&embedding_path).map_err(io(&embedding_path))?,
        None => {}
    }
    Ok(written)
}

/// Reads a `row,label,score` file back into `(labels, scores)`.
pub fn read_scores(path: &Path) -> Result<(Vec<u8>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || CliError::Validation(format!("{}: malformed line {}", path.display(), i + 1));
        let mut parts = line.split(',');
        let (_, l, s) = (
            parts.next(),
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
        );
        labels.push(l.parse().map_err(|_| bad())?);
        scores.push(s.parse().map_err(|_| bad())?);
    }
    Ok((labels, scores))
}
