//! Paired t-test with Cohen's d, chi-square independence test with Pearson
//! residuals, and Cohen's kappa.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::percent;
use super::special::{chi_square_upper, student_t_two_tailed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    /// Bins |d| at 0.2 / 0.5 / 0.8.
    pub fn from_d(d: f64) -> Self {
        let d = d.abs();
        if d >= 0.8 {
            EffectSize::Large
        } else if d >= 0.5 {
            EffectSize::Medium
        } else if d >= 0.2 {
            EffectSize::Small
        } else {
            EffectSize::Negligible
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_two_tailed: f64,
    pub cohen_d: f64,
    pub label: EffectSize,
}

/// Paired samples t-test on already matched `pre[k]`/`post[k]` values.
pub fn paired_t(pre: &[f64], post: &[f64]) -> Result<PairedT> {
    if pre.len() != post.len() {
        return Err(Error::Input(format!(
            "pre has {} values, post has {}",
            pre.len(),
            post.len()
        )));
    }
    let n = pre.len();
    if n < 2 {
        return Err(Error::Input("paired t-test needs at least 2 matched pairs".into()));
    }
    let diffs: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;

    if sd == 0.0 {
        if mean != 0.0 {
            return Err(Error::Degenerate(
                "differences have zero variance but non-zero mean".into(),
            ));
        }
        return Ok(PairedT {
            n,
            mean_diff: 0.0,
            sd_diff: 0.0,
            t: 0.0,
            df,
            p_two_tailed: 1.0,
            cohen_d: 0.0,
            label: EffectSize::Negligible,
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let cohen_d = mean / sd;
    Ok(PairedT {
        n,
        mean_diff: mean,
        sd_diff: sd,
        t,
        df,
        p_two_tailed: student_t_two_tailed(t, df as f64),
        cohen_d,
        label: EffectSize::from_d(cohen_d),
    })
}

/// Inner-joins two keyed series and runs [`paired_t`] on the matched pairs.
pub fn paired_t_by_key<K: Ord>(pre: &BTreeMap<K, f64>, post: &BTreeMap<K, f64>) -> Result<PairedT> {
    let (a, b): (Vec<f64>, Vec<f64>) = pre
        .iter()
        .filter_map(|(k, v)| post.get(k).map(|w| (*v, *w)))
        .unzip();
    paired_t(&a, &b)
}

/// Labeled count matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(rows: Vec<String>, cols: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if rows.len() < 2 || cols.len() < 2 {
            return Err(Error::Input(format!(
                "contingency table must be at least 2x2, got {}x{}",
                rows.len(),
                cols.len()
            )));
        }
        if counts.len() != rows.len() || counts.iter().any(|r| r.len() != cols.len()) {
            return Err(Error::Input("count matrix does not match labels".into()));
        }
        if counts.iter().flatten().sum::<u64>() == 0 {
            return Err(Error::Input("contingency table is empty".into()));
        }
        Ok(Self { rows, cols, counts })
    }

    /// Unlabeled table; rows and columns are numbered from 0.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let r = counts.len();
        let c = counts.first().map_or(0, Vec::len);
        Self::new(
            (0..r).map(|i| i.to_string()).collect(),
            (0..c).map(|j| j.to_string()).collect(),
            counts,
        )
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.cols.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    pub expected: Vec<Vec<f64>>,
    /// Pearson residuals `(O - E) / sqrt(E)`; the sign drives mosaic shading.
    pub residuals: Vec<Vec<f64>>,
}

/// Pearson chi-square test of independence.
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquare> {
    let rt = table.row_totals();
    let ct = table.col_totals();
    let n = table.total() as f64;
    let mut chi2 = 0.0;
    let mut expected = Vec::with_capacity(rt.len());
    let mut residuals = Vec::with_capacity(rt.len());
    for (i, row) in table.counts.iter().enumerate() {
        let mut e_row = Vec::with_capacity(ct.len());
        let mut r_row = Vec::with_capacity(ct.len());
        for (j, &o) in row.iter().enumerate() {
            let e = rt[i] as f64 * ct[j] as f64 / n;
            if e <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "expected count is zero at ({}, {})",
                    table.rows[i], table.cols[j]
                )));
            }
            let diff = o as f64 - e;
            chi2 += diff * diff / e;
            e_row.push(e);
            r_row.push(diff / e.sqrt());
        }
        expected.push(e_row);
        residuals.push(r_row);
    }
    let df = (rt.len() - 1) * (ct.len() - 1);
    Ok(ChiSquare {
        chi2,
        df,
        p: chi_square_upper(chi2, df as f64),
        expected,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Agreement {
    /// Landis & Koch bins.
    pub fn from_kappa(kappa: f64) -> Self {
        if kappa <= 0.0 {
            Agreement::Poor
        } else if kappa <= 0.2 {
            Agreement::Slight
        } else if kappa <= 0.4 {
            Agreement::Fair
        } else if kappa <= 0.6 {
            Agreement::Moderate
        } else if kappa <= 0.8 {
            Agreement::Substantial
        } else {
            Agreement::AlmostPerfect
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Agreement::Poor => "poor",
            Agreement::Slight => "slight",
            Agreement::Fair => "fair",
            Agreement::Moderate => "moderate",
            Agreement::Substantial => "substantial",
            Agreement::AlmostPerfect => "almost perfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub agreement_pct: f64,
    pub landis_koch_label: Agreement,
}

/// Cohen's kappa for two raters labeling the same items.
pub fn cohens_kappa<L: Ord>(rater_a: &[L], rater_b: &[L]) -> Result<Kappa> {
    if rater_a.len() != rater_b.len() {
        return Err(Error::Input(format!(
            "rater sequences differ in length ({} vs {})",
            rater_a.len(),
            rater_b.len()
        )));
    }
    if rater_a.is_empty() {
        return Err(Error::Input("no labels to compare".into()));
    }
    let n = rater_a.len();
    let agree = rater_a.iter().zip(rater_b).filter(|(a, b)| a == b).count();
    let po = agree as f64 / n as f64;

    let mut marg_a: BTreeMap<&L, usize> = BTreeMap::new();
    let mut marg_b: BTreeMap<&L, usize> = BTreeMap::new();
    for (a, b) in rater_a.iter().zip(rater_b) {
        *marg_a.entry(a).or_default() += 1;
        *marg_b.entry(b).or_default() += 1;
    }
    let labels: BTreeSet<&L> = marg_a.keys().chain(marg_b.keys()).copied().collect();
    let pe: f64 = labels
        .iter()
        .map(|l| {
            let pa = marg_a.get(l).copied().unwrap_or(0) as f64 / n as f64;
            let pb = marg_b.get(l).copied().unwrap_or(0) as f64 / n as f64;
            pa * pb
        })
        .sum();

    // both raters constant and identical
    let kappa = if (1.0 - pe).abs() < 1e-15 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    };
    Ok(Kappa {
        kappa,
        observed_agreement: po,
        expected_agreement: pe,
        agreement_pct: percent(agree as u64, n as u64),
        landis_koch_label: Agreement::from_kappa(kappa),
    })
}
