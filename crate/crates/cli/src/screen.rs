//! Scoring incoming transactions with a saved boosted model.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use fraudlab_core::gbdt::{load_model, GbdtModel};
use fraudlab_core::Scorer;

use crate::error::{io, CliError, Result, StageExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Approve,
    /// Forwarded for manual fraud review.
    Review,
}

impl Decision {
    /// Ties at the threshold go to review.
    pub fn from_score(score: f64, threshold: f64) -> Self {
        if score >= threshold {
            Decision::Review
        } else {
            Decision::Approve
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Approve => "approve",
            Decision::Review => "review",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningDecision {
    /// Zero-based data row of the transaction.
    pub index: usize,
    pub score: f64,
    pub decision: Decision,
}

pub fn load_model_file(path: &Path) -> Result<GbdtModel> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    load_model(&text).stage("load model")
}

/// Rows of `reader` projected onto `names`, matched by header name.
/// Extra columns are ignored.
pub fn read_columns<R: Read>(reader: R, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("unreadable header: {e}")))?
        .clone();
    let mut positions = Vec::with_capacity(names.len());
    let mut missing = Vec::new();
    for n in names {
        match header.iter().position(|h| h == n) {
            Some(p) => positions.push(p),
            None => missing.push(n.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::SchemaMismatch { missing });
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Stage {
            stage: "read transactions",
            source: e.into(),
        })?;
        let row = positions
            .iter()
            .zip(names)
            .map(|(&p, name)| {
                let cell = record.get(p).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Stage {
                        stage: "read transactions",
                        source: fraudlab_core::Error::Parse {
                            line: i + 2,
                            column: name.clone(),
                            value: cell.to_string(),
                        },
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn screen_rows(model: &GbdtModel, rows: &[Vec<f64>], threshold: f64) -> Result<Vec<ScreeningDecision>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Validation(format!(
            "threshold {threshold} not in [0, 1]"
        )));
    }
    rows.iter()
        .enumerate()
        .map(|(index, row)| {
            let score = model.score(row).stage("score")?;
            Ok(ScreeningDecision {
                index,
                score,
                decision: Decision::from_score(score, threshold),
            })
        })
        .collect()
}

/// Loads the model and transactions and decides every row.
pub fn screen_transactions(
    model_path: &Path,
    csv_path: &Path,
    threshold: f64,
) -> Result<Vec<ScreeningDecision>> {
    let model = load_model_file(model_path)?;
    let file = fs::File::open(csv_path).map_err(io(csv_path))?;
    let rows = read_columns(file, &model.feature_names)?;
    screen_rows(&model, &rows, threshold)
}

pub fn decisions_csv(decisions: &[ScreeningDecision]) -> String {
    let mut out = String::from("index,score,decision\n");
    for d in decisions {
        let _ = writeln!(out, "{},{},{}", d.index, d.score, d.decision.as_str());
    }
    out
}

/// `(approved, review)` counts.
pub fn summary(decisions: &[ScreeningDecision]) -> (usize, usize) {
    let review = decisions
        .iter()
        .filter(|d| d.decision == Decision::Review)
        .count();
    (decisions.len() - review, review)
}
