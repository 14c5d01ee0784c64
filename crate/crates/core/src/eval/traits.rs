//! Which post concepts go with which personality traits of the audience.
//!
//! For each post, the engaged audience is the set of labelled users who
//! liked it. Each trait pole gives a per-post fraction of that audience
//! carrying the pole, which is correlated (Pearson) with every concept column.

use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, TraitPole};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_N: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptCorrelation {
    pub concept: usize,
    pub name: String,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleCorrelations {
    /// Single letter, e.g. "E".
    pub pole: String,
    pub name: String,
    /// Highest correlations first.
    pub top: Vec<ConceptCorrelation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraitConceptReport {
    pub top_n: usize,
    /// Posts with at least one labelled engager.
    pub posts_used: usize,
    /// Concepts with zero variance over the used posts.
    pub skipped_concepts: Vec<usize>,
    pub poles: Vec<PoleCorrelations>,
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson needs equal lengths");
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let scale = mx.abs().max(my.abs()).max(1.0);
    if sxx <= 1e-24 * scale || syy <= 1e-24 * scale {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn trait_concept_correlation(
    ds: &InteractionDataset,
    concept_names: Option<&[String]>,
    top_n: usize,
) -> Result<TraitConceptReport> {
    let dim = ds.concept_dim();
    if dim == 0 {
        return Err(Error::InvalidDataset(
            "posts carry no concept vectors".into(),
        ));
    }
    if let Some(names) = concept_names {
        if names.len() != dim {
            return Err(Error::Dimension(format!(
                "{} concept names for {dim} concepts",
                names.len()
            )));
        }
    }
    let poles = TraitPole::all();
    // per post: labelled engagers and how many carry each pole
    let mut engaged = vec![0usize; ds.n_posts()];
    let mut with_pole = vec![vec![0usize; poles.len()]; ds.n_posts()];
    for it in ds.interactions() {
        if let Some(mbti) = ds.users()[it.user].mbti {
            engaged[it.post] += 1;
            for pole in &poles {
                if mbti.has(*pole) {
                    with_pole[it.post][pole.index()] += 1;
                }
            }
        }
    }
    let used: Vec<usize> = (0..ds.n_posts()).filter(|&p| engaged[p] > 0).collect();
    if used.len() < 2 {
        return Err(Error::InvalidDataset(
            "fewer than two posts have an engaged user with a trait label".into(),
        ));
    }
    let columns: Vec<Vec<f64>> = (0..dim)
        .map(|c| used.iter().map(|&p| ds.posts()[p].concepts[c]).collect())
        .collect();
    let skipped: Vec<usize> = (0..dim)
        .filter(|&c| pearson(&columns[c], &columns[c]).is_none())
        .collect();
    if !skipped.is_empty() {
        log::warn!(
            "{} concepts have zero variance and are skipped",
            skipped.len()
        );
    }
    let name = |c: usize| concept_names.map_or_else(|| format!("concept_{c}"), |n| n[c].clone());
    let mut report = Vec::with_capacity(poles.len());
    for pole in &poles {
        let fraction: Vec<f64> = used
            .iter()
            .map(|&p| with_pole[p][pole.index()] as f64 / engaged[p] as f64)
            .collect();
        let mut found: Vec<ConceptCorrelation> = (0..dim)
            .filter(|c| !skipped.contains(c))
            .filter_map(|c| {
                pearson(&fraction, &columns[c]).map(|r| ConceptCorrelation {
                    concept: c,
                    name: name(c),
                    r,
                })
            })
            .collect();
        if found.is_empty() {
            log::warn!("trait pole {} does not vary across posts", pole.letter());
        }
        found.sort_by(|a, b| b.r.total_cmp(&a.r).then(a.concept.cmp(&b.concept)));
        found.truncate(top_n);
        report.push(PoleCorrelations {
            pole: pole.letter().to_string(),
            name: pole.name().to_string(),
            top: found,
        });
    }
    Ok(TraitConceptReport {
        top_n,
        posts_used: used.len(),
        skipped_concepts: skipped,
        poles: report,
    })
}

impl TraitConceptReport {
    pub fn pole(&self, letter: char) -> Option<&PoleCorrelations> {
        self.poles.iter().find(|p| p.pole.starts_with(letter))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.poles {
            out.push_str(&format!("{} ({})\n", p.name, p.pole));
            for (rank, c) in p.top.iter().enumerate() {
                out.push_str(&format!("  {:>2}. {:<32} {:+.4}\n", rank + 1, c.name, c.r));
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Report(e.to_string());
        w.write_record(["pole", "rank", "concept", "name", "r"])
            .map_err(err)?;
        for p in &self.poles {
            for (rank, c) in p.top.iter().enumerate() {
                w.write_record([
                    p.pole.clone(),
                    (rank + 1).to_string(),
                    c.concept.to_string(),
                    c.name.clone(),
                    c.r.to_string(),
                ])
                .map_err(err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.poles.len() != 8 {
            return Err(Error::Report(format!(
                "expected 8 trait poles, got {}",
                self.poles.len()
            )));
        }
        for p in &self.poles {
            if p.top.len() > self.top_n || p.top.iter().any(|c| !(-1.0..=1.0).contains(&c.r)) {
                return Err(Error::Report(format!(
                    "pole {} has invalid correlations",
                    p.pole
                )));
            }
        }
        Ok(())
    }

    pub fn write_all(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        crate::error::create_dir(dir)?;
        crate::error::write_text(&dir.join(format!("{stem}.txt")), &self.to_text())?;
        crate::error::write_text(&dir.join(format!("{stem}.csv")), &self.to_csv()?)?;
        crate::error::write_text(
            &dir.join(format!("{stem}.json")),
            &serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}
