//! Experiment configuration: a flat INI-style text file.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Unknown sections and keys are rejected so typos surface before any work
//! starts. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fraudlab_core::baselines::{CartParams, KnnParams, LogRegParams};
use fraudlab_core::cleanse::PruneOptions;
use fraudlab_core::embed::TsneParams;
use fraudlab_core::gbdt::{GbdtParams, Growth};
use fraudlab_core::resample::SmoteParams;
use fraudlab_core::synth::SyntheticSpec;
use fraudlab_core::tabular::DEFAULT_LABEL_COLUMN;

use crate::error::{io, CliError, Result};

/// Offsets added to the master seed for each seeded stage.
pub mod seed_offset {
    pub const DATA: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const SMOTE: u64 = 2;
    pub const TSNE: u64 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Knn,
    LogReg,
    Cart,
    GbdtLeafWise,
    GbdtLevelWise,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Knn,
        ModelKind::LogReg,
        ModelKind::Cart,
        ModelKind::GbdtLeafWise,
        ModelKind::GbdtLevelWise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::LogReg => "logreg",
            ModelKind::Cart => "cart",
            ModelKind::GbdtLeafWise => "gbdt_leafwise",
            ModelKind::GbdtLevelWise => "gbdt_levelwise",
        }
    }

    pub fn is_gbdt(self) -> bool {
        matches!(self, ModelKind::GbdtLeafWise | ModelKind::GbdtLevelWise)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ModelKind::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ModelKind::ALL.iter().map(|m| m.name()).collect();
            format!("unknown model `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub label_column: String,
    pub test_fraction: f64,
    pub seed: u64,
    pub scale: bool,
    /// Features pruned for class outliers, in order; empty disables pruning.
    pub outlier_features: Vec<String>,
    pub prune: PruneOptions,
    /// When set, every model also runs on a SMOTE-balanced training set.
    pub smote: Option<SmoteParams>,
    pub models: Vec<ModelKind>,
    pub knn: KnnParams,
    pub logreg: LogRegParams,
    pub cart: CartParams,
    pub gbdt: GbdtParams,
    pub threshold: f64,
    pub tsne: Option<TsneParams>,
    pub tsne_max_points: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Seed for a stage, see [`seed_offset`].
    pub fn stage_seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }

    pub fn gbdt_params(&self, kind: ModelKind) -> GbdtParams {
        let growth = match kind {
            ModelKind::GbdtLevelWise => Growth::LevelWise,
            _ => Growth::LeafWise,
        };
        GbdtParams {
            growth,
            ..self.gbdt.clone()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut raw = Raw::parse(text)?;
        let cfg = build(&mut raw, base_dir)?;
        raw.reject_leftovers()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not depend on file contents.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.models.is_empty() {
            return bad("no models listed under [models]".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} not in (0, 1)", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} not in [0, 1]", self.threshold));
        }
        if let DataSource::Csv(p) = &self.source {
            if !p.is_file() {
                return bad(format!("data file {} does not exist", p.display()));
            }
        }
        if let Some(s) = &self.smote {
            if s.k == 0 || !(s.target_ratio > 0.0 && s.target_ratio <= 1.0) {
                return bad("smote needs k >= 1 and target_ratio in (0, 1]".into());
            }
        }
        if self.knn.k == 0 {
            return bad("knn k must be at least 1".into());
        }
        if self.cart.max_depth == 0 {
            return bad("cart max_depth must be at least 1".into());
        }
        self.gbdt
            .validate()
            .map_err(|e| CliError::Validation(format!("gbdt: {e}")))?;
        if let Some(t) = &self.tsne {
            if t.perplexity <= 1.0 || t.iterations == 0 || self.tsne_max_points < 3 {
                return bad("tsne needs perplexity > 1, iterations >= 1 and sample >= 3".into());
            }
        }
        Ok(())
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Section -> key -> value, consumed as the typed config is built.
struct Raw {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let err = |message: &str| CliError::Config {
                line: line_no,
                message: message.to_string(),
            };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header"))?;
                let name = name.trim().to_string();
                if sections.contains_key(&name) {
                    return Err(err(&format!("section [{name}] repeated")));
                }
                sections.insert(name.clone(), (line_no, BTreeMap::new()));
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`"))?;
            let section = current.as_ref().ok_or_else(|| err("key outside any [section]"))?;
            let key = key.trim().to_string();
            let entries = &mut sections.get_mut(section).expect("section inserted above").1;
            if entries.contains_key(&key) {
                return Err(err(&format!("key `{key}` repeated in [{section}]")));
            }
            entries.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
        }
        Ok(Self { sections })
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.sections.get_mut(section)?.1.remove(key)
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|err| CliError::Config {
                line: e.line,
                message: format!("[{section}] {key} = {:?}: {err}", e.value),
            }),
        }
    }

    fn flag(&mut self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.take(section, key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "on" => Ok(true),
                "false" | "no" | "off" => Ok(false),
                other => Err(CliError::Config {
                    line: e.line,
                    message: format!("[{section}] {key} = {other:?}: expected true or false"),
                }),
            },
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Option<(Vec<String>, usize)> {
        self.take(section, key).map(|e| {
            let items = e
                .value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            (items, e.line)
        })
    }

    fn reject_leftovers(&self) -> Result<()> {
        for (section, (line, entries)) in &self.sections {
            if !KNOWN_SECTIONS.contains(&section.as_str()) {
                return Err(CliError::Config {
                    line: *line,
                    message: format!("unknown section [{section}]"),
                });
            }
            if let Some((key, e)) = entries.iter().next() {
                return Err(CliError::Config {
                    line: e.line,
                    message: format!("unknown key `{key}` in [{section}]"),
                });
            }
        }
        Ok(())
    }
}

const KNOWN_SECTIONS: [&str; 12] = [
    "data",
    "synthetic",
    "cleanse",
    "smote",
    "models",
    "knn",
    "logreg",
    "cart",
    "gbdt",
    "evaluation",
    "tsne",
    "output",
];

fn build(raw: &mut Raw, base: &Path) -> Result<ExperimentConfig> {
    let seed = raw.get("data", "seed", 0u64)?;
    let source = match raw.take("data", "path") {
        Some(e) if e.value != "synthetic" => DataSource::Csv(base.join(e.value)),
        _ => {
            let d = SyntheticSpec::default();
            DataSource::Synthetic(SyntheticSpec {
                n_rows: raw.get("synthetic", "rows", d.n_rows)?,
                positive_fraction: raw.get("synthetic", "positive_fraction", d.positive_fraction)?,
                n_features: raw.get("synthetic", "features", d.n_features)?,
                n_informative: raw.get("synthetic", "informative", d.n_informative)?,
                cluster_pairs: raw.get("synthetic", "cluster_pairs", d.cluster_pairs)?,
                class_sep: raw.get("synthetic", "class_sep", d.class_sep)?,
                cluster_spread: raw.get("synthetic", "cluster_spread", d.cluster_spread)?,
                seed: seed.wrapping_add(seed_offset::DATA),
            })
        }
    };
    if matches!(source, DataSource::Csv(_)) && raw.has_section("synthetic") {
        return Err(CliError::Config {
            line: raw.sections["synthetic"].0,
            message: "[synthetic] given but [data] path names a file".into(),
        });
    }

    let prune_default = PruneOptions::default();
    let outlier_features = raw
        .list("cleanse", "features")
        .map(|(f, _)| f)
        .unwrap_or_default();
    let prune = PruneOptions {
        target_class: raw.get("cleanse", "target_class", prune_default.target_class)?,
        multiplier: raw.get("cleanse", "multiplier", prune_default.multiplier)?,
        recompute_fences: raw.flag("cleanse", "recompute_fences", prune_default.recompute_fences)?,
    };

    let smote_default = SmoteParams::default();
    let smote_on = raw.flag("smote", "enabled", false)?;
    let smote_params = SmoteParams {
        k: raw.get("smote", "k", smote_default.k)?,
        target_ratio: raw.get("smote", "target_ratio", smote_default.target_ratio)?,
        seed: seed.wrapping_add(seed_offset::SMOTE),
    };

    let models = match raw.list("models", "list") {
        None => Vec::new(),
        Some((names, line)) => {
            let mut out = Vec::new();
            for n in names {
                let kind: ModelKind = n.parse().map_err(|message| CliError::Config { line, message })?;
                if out.contains(&kind) {
                    return Err(CliError::Config {
                        line,
                        message: format!("model `{kind}` listed twice"),
                    });
                }
                out.push(kind);
            }
            out
        }
    };

    let knn = KnnParams {
        k: raw.get("knn", "k", KnnParams::default().k)?,
    };
    let lr = LogRegParams::default();
    let logreg = LogRegParams {
        learning_rate: raw.get("logreg", "learning_rate", lr.learning_rate)?,
        epochs: raw.get("logreg", "epochs", lr.epochs)?,
        l2: raw.get("logreg", "l2", lr.l2)?,
    };
    let cd = CartParams::default();
    let cart = CartParams {
        max_depth: raw.get("cart", "max_depth", cd.max_depth)?,
        min_samples_leaf: raw.get("cart", "min_samples_leaf", cd.min_samples_leaf)?,
    };
    let g = GbdtParams::default();
    let gbdt = GbdtParams {
        n_trees: raw.get("gbdt", "n_trees", g.n_trees)?,
        learning_rate: raw.get("gbdt", "learning_rate", g.learning_rate)?,
        max_leaves: raw.get("gbdt", "max_leaves", g.max_leaves)?,
        max_depth: raw.get("gbdt", "max_depth", g.max_depth)?,
        growth: g.growth,
        l1: raw.get("gbdt", "l1", g.l1)?,
        l2: raw.get("gbdt", "l2", g.l2)?,
        min_split_gain: raw.get("gbdt", "min_split_gain", g.min_split_gain)?,
        min_child_weight: raw.get("gbdt", "min_child_weight", g.min_child_weight)?,
        max_bins: raw.get("gbdt", "max_bins", g.max_bins)?,
    };

    let td = TsneParams::default();
    let tsne_on = raw.flag("tsne", "enabled", false)?;
    let tsne = TsneParams {
        perplexity: raw.get("tsne", "perplexity", td.perplexity)?,
        iterations: raw.get("tsne", "iterations", td.iterations)?,
        learning_rate: raw.get("tsne", "learning_rate", td.learning_rate)?,
        early_exaggeration: raw.get("tsne", "early_exaggeration", td.early_exaggeration)?,
        exaggeration_iterations: raw.get("tsne", "exaggeration_iterations", td.exaggeration_iterations)?,
        seed: seed.wrapping_add(seed_offset::TSNE),
        ..td
    };
    let tsne_max_points = raw.get("tsne", "sample", 1000usize)?;

    let output_dir = base.join(raw.get("output", "dir", String::from("out"))?);

    Ok(ExperimentConfig {
        source,
        label_column: raw.get("data", "label_column", DEFAULT_LABEL_COLUMN.to_string())?,
        test_fraction: raw.get("data", "test_fraction", 0.2)?,
        seed,
        scale: raw.flag("data", "scale", true)?,
        outlier_features,
        prune,
        smote: smote_on.then_some(smote_params),
        models,
        knn,
        logreg,
        cart,
        gbdt,
        threshold: raw.get("evaluation", "threshold", 0.5)?,
        tsne: tsne_on.then_some(tsne),
        tsne_max_points,
        output_dir,
    })
}
