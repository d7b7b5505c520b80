//! The JSON report written by `feedlab stats`.

use serde::Serialize;

use super::inference::{chi_square, cohens_kappa, ChiSquare, ContingencyTable, Kappa};
use super::summary::{
    category_distribution, likert_paired_t, likert_summary, transition_matrix,
    CategoryDistribution, LikertPairedT, LikertSummary, TransitionMatrix,
};
use super::survey::{Phase, Survey, SurveyRow, LIKERT_ITEMS, OPEN_QUESTIONS};
use crate::{Error, Result};

/// Either a computed value or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Computed<T> {
    Value(T),
    Failed { error: FailedWith },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedWith {
    pub code: &'static str,
    pub message: String,
}

impl<T> From<Result<T>> for Computed<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Computed::Value(v),
            Err(e) => Computed::Failed {
                error: FailedWith {
                    code: e.code(),
                    message: e.to_string(),
                },
            },
        }
    }
}

impl<T> Computed<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Computed::Value(v) => Some(v),
            Computed::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Restrict to one Likert item (1-based).
    pub item: Option<usize>,
    /// Restrict to one open question (1-based).
    pub question: Option<usize>,
    /// Two raters' labels for the same items.
    pub raters: Option<(Vec<String>, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemReport {
    pub item: usize,
    pub summary: Computed<LikertSummary>,
    pub paired_t: Computed<LikertPairedT>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosaicTable {
    pub table: ContingencyTable,
    pub test: ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionReport {
    pub question: usize,
    pub pre: Computed<CategoryDistribution>,
    pub post: Computed<CategoryDistribution>,
    pub transitions: Computed<TransitionMatrix>,
    pub chi_square: Computed<MosaicTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub pre_rows: usize,
    pub post_rows: usize,
    pub likert: Vec<ItemReport>,
    pub questions: Vec<QuestionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Computed<Kappa>>,
}

fn check_phase(rows: &[SurveyRow], phase: Phase, file: &str) -> Result<()> {
    match rows.iter().position(|r| r.phase != phase) {
        Some(pos) => Err(Error::Input(format!(
            "row {} of the {file} file is marked {:?}",
            pos + 1,
            rows[pos].phase
        ))),
        None => Ok(()),
    }
}

pub fn build_report(pre: Vec<SurveyRow>, post: Vec<SurveyRow>, opts: &ReportOptions) -> Result<StatsReport> {
    check_phase(&pre, Phase::Pre, "pre")?;
    check_phase(&post, Phase::Post, "post")?;
    let (pre_rows, post_rows) = (pre.len(), post.len());
    let survey = Survey::new(pre.into_iter().chain(post).collect())?;

    let items: Vec<usize> = match opts.item {
        Some(i) => vec![i],
        None => (1..=LIKERT_ITEMS).collect(),
    };
    let questions: Vec<usize> = match opts.question {
        Some(q) => vec![q],
        None => (1..=OPEN_QUESTIONS).collect(),
    };

    let likert = items
        .into_iter()
        .map(|item| ItemReport {
            item,
            summary: likert_summary(&survey, item).into(),
            paired_t: likert_paired_t(&survey, item).into(),
        })
        .collect();

    let questions = questions
        .into_iter()
        .map(|question| {
            let transitions = transition_matrix(&survey, question);
            let chi = transitions.as_ref().map_err(Clone::clone).and_then(|t| {
                let table = t.to_contingency()?;
                let test = chi_square(&table)?;
                Ok(MosaicTable { table, test })
            });
            QuestionReport {
                question,
                pre: category_distribution(&survey, question, Phase::Pre, None).into(),
                post: category_distribution(&survey, question, Phase::Post, None).into(),
                transitions: transitions.into(),
                chi_square: chi.into(),
            }
        })
        .collect();

    let kappa = opts
        .raters
        .as_ref()
        .map(|(a, b)| cohens_kappa(a, b).into());

    Ok(StatsReport {
        pre_rows,
        post_rows,
        likert,
        questions,
        kappa,
    })
}
