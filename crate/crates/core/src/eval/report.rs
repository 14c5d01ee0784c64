//! Ranking reports and their text, CSV and JSON renderings.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::ModelSuite;
use crate::persic::FeatureAblationSpec;
use crate::recommender::ModelKind;

/// Raw per-user values behind the averages, for significance testing.
/// `ndcg[c][i]` is user `users[i]`'s nDCG at the c-th cutoff.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerUserMetrics {
    pub users: Vec<usize>,
    pub auc: Vec<f64>,
    pub ndcg: Vec<Vec<f64>>,
    pub f1: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub evaluable_users: usize,
    pub auc: f64,
    /// One value per cutoff.
    pub ndcg: Vec<f64>,
    pub f1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_auc: Option<f64>,
    pub per_user: PerUserMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub label: String,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<FeatureAblationSpec>,
    pub metrics: ModelMetrics,
    /// Per-epoch training objective.
    #[serde(default)]
    pub trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Evaluation,
    Comparison,
    Ablation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub kind: ReportKind,
    pub seed: u64,
    pub cutoffs: Vec<usize>,
    /// SHA-256 of the model settings' JSON.
    pub config_fingerprint: String,
    pub config: serde_json::Value,
    pub rows: Vec<RankingRow>,
}

pub(crate) fn fingerprint(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

impl RankingReport {
    pub fn new(
        kind: ReportKind,
        seed: u64,
        cutoffs: Vec<usize>,
        suite: &ModelSuite,
        rows: Vec<RankingRow>,
    ) -> Result<Self> {
        let config = serde_json::to_value(suite)?;
        Ok(RankingReport {
            kind,
            seed,
            cutoffs,
            config_fingerprint: fingerprint(&config),
            config,
            rows,
        })
    }

    pub fn row(&self, label: &str) -> Option<&RankingRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn headers(&self) -> Vec<String> {
        let mut h = vec!["Model".to_string(), "AUC".to_string()];
        h.extend(self.cutoffs.iter().map(|k| format!("nDCG@{k}")));
        h.extend(self.cutoffs.iter().map(|k| format!("F1@{k}")));
        h
    }

    fn cells(&self, row: &RankingRow) -> Vec<String> {
        let m = &row.metrics;
        let mut c = vec![row.label.clone(), format!("{:.4}", m.auc)];
        c.extend(m.ndcg.iter().chain(&m.f1).map(|v| format!("{v:.4}")));
        c
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let headers = self.headers();
        let rows: Vec<Vec<String>> = self.rows.iter().map(|r| self.cells(r)).collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([headers[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            for (c, cell) in cells.iter().enumerate() {
                if c == 0 {
                    let _ = write!(out, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(out, "  {cell:>w$}", w = widths[c]);
                }
            }
            out.push('\n');
        };
        line(&headers, &mut out);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&rule, &mut out);
        for r in &rows {
            line(r, &mut out);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut headers = self.headers();
        headers.push("evaluable_users".into());
        w.write_record(&headers).map_err(csv_err)?;
        for row in &self.rows {
            let m = &row.metrics;
            let mut rec = vec![row.label.clone(), m.auc.to_string()];
            rec.extend(m.ndcg.iter().chain(&m.f1).map(f64::to_string));
            rec.push(m.evaluable_users.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.txt`, `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<()> {
        crate::error::create_dir(dir)?;
        crate::error::write_text(&dir.join(format!("{stem}.txt")), &self.to_text())?;
        crate::error::write_text(&dir.join(format!("{stem}.csv")), &self.to_csv()?)?;
        crate::error::write_text(&dir.join(format!("{stem}.json")), &self.to_json()?)?;
        Ok(())
    }

    /// Checks the report's shape and ranges, e.g. after reading it back.
    pub fn validate(&self) -> Result<()> {
        let nc = self.cutoffs.len();
        for row in &self.rows {
            let m = &row.metrics;
            let bad = |what: &str| Error::Report(format!("row `{}`: {what}", row.label));
            if m.ndcg.len() != nc || m.f1.len() != nc {
                return Err(bad("metric count does not match the cutoffs"));
            }
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(m.auc) || !m.ndcg.iter().chain(&m.f1).all(|&v| in_unit(v)) {
                return Err(bad("metric outside [0, 1]"));
            }
            let p = &m.per_user;
            if p.users.len() != m.evaluable_users
                || p.auc.len() != m.evaluable_users
                || p.ndcg.len() != nc
                || p.f1.len() != nc
                || p.ndcg
                    .iter()
                    .chain(&p.f1)
                    .any(|v| v.len() != m.evaluable_users)
            {
                return Err(bad("per-user arrays do not line up"));
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(e.to_string())
}
