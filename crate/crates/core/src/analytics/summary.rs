//! Descriptive summaries: Likert distributions, category distributions and
//! pre/post transition matrices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::inference::{paired_t, ContingencyTable, PairedT};
use super::percent;
use super::survey::{Phase, Survey, SurveyRow, LIKERT_ITEMS, OPEN_QUESTIONS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    pub n: u64,
    /// Counts of responses 1..=5.
    pub counts: [u64; 5],
    /// Share of responses >= 4, in percent.
    pub pct_positive: f64,
    pub missing: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertSummary {
    pub item: usize,
    pub pre: PhaseDistribution,
    pub post: PhaseDistribution,
}

fn check_item(item: usize) -> Result<()> {
    if (1..=LIKERT_ITEMS).contains(&item) {
        Ok(())
    } else {
        Err(Error::Input(format!("likert item {item} is outside 1..={LIKERT_ITEMS}")))
    }
}

fn check_question(question: usize) -> Result<()> {
    if (1..=OPEN_QUESTIONS).contains(&question) {
        Ok(())
    } else {
        Err(Error::Input(format!("question {question} is outside 1..={OPEN_QUESTIONS}")))
    }
}

fn phase_distribution<'a>(
    rows: impl Iterator<Item = &'a SurveyRow>,
    item: usize,
    phase: Phase,
) -> Result<PhaseDistribution> {
    let mut counts = [0u64; 5];
    let mut missing = 0;
    for r in rows {
        match r.item(item) {
            Some(v) => counts[(v - 1) as usize] += 1,
            None => missing += 1,
        }
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::Input(format!("no {phase:?} responses for item {item}")));
    }
    Ok(PhaseDistribution {
        n,
        counts,
        pct_positive: percent(counts[3] + counts[4], n),
        missing,
    })
}

pub fn likert_summary(survey: &Survey, item: usize) -> Result<LikertSummary> {
    check_item(item)?;
    Ok(LikertSummary {
        item,
        pre: phase_distribution(survey.phase(Phase::Pre), item, Phase::Pre)?,
        post: phase_distribution(survey.phase(Phase::Post), item, Phase::Post)?,
    })
}

/// Students present in both phases, with the counts left out on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub pre_only: usize,
    pub post_only: usize,
    /// Matched students dropped because a needed field was blank.
    pub dropped_missing: usize,
}

fn join(survey: &Survey) -> (Vec<(&SurveyRow, &SurveyRow)>, usize, usize) {
    let pre: BTreeMap<&str, &SurveyRow> = survey
        .phase(Phase::Pre)
        .map(|r| (r.student_id.as_str(), r))
        .collect();
    let post: BTreeMap<&str, &SurveyRow> = survey
        .phase(Phase::Post)
        .map(|r| (r.student_id.as_str(), r))
        .collect();
    let pairs: Vec<_> = pre
        .iter()
        .filter_map(|(id, a)| post.get(id).map(|b| (*a, *b)))
        .collect();
    let pre_only = pre.len() - pairs.len();
    let post_only = post.len() - pairs.len();
    (pairs, pre_only, post_only)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertPairedT {
    pub item: usize,
    pub matching: MatchCounts,
    pub test: PairedT,
}

/// Paired t-test on one Likert item over students answering in both phases.
pub fn likert_paired_t(survey: &Survey, item: usize) -> Result<LikertPairedT> {
    check_item(item)?;
    let (pairs, pre_only, post_only) = join(survey);
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut dropped = 0;
    for (a, b) in &pairs {
        match (a.item(item), b.item(item)) {
            (Some(x), Some(y)) => {
                pre.push(x as f64);
                post.push(y as f64);
            }
            _ => dropped += 1,
        }
    }
    let test = paired_t(&pre, &post)?;
    Ok(LikertPairedT {
        item,
        matching: MatchCounts {
            matched: pre.len(),
            pre_only,
            post_only,
            dropped_missing: dropped,
        },
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub question: usize,
    pub phase: Phase,
    pub n: u64,
    pub counts: BTreeMap<u8, u64>,
    /// Percent of `n`, rounded half-up to two decimals.
    pub pct: BTreeMap<u8, f64>,
}

/// Category counts for one question and phase, optionally for one grade.
pub fn category_distribution(
    survey: &Survey,
    question: usize,
    phase: Phase,
    grade: Option<u8>,
) -> Result<CategoryDistribution> {
    check_question(question)?;
    let max = super::survey::MAX_CATEGORY[question - 1];
    let mut counts: BTreeMap<u8, u64> = (0..=max).map(|c| (c, 0)).collect();
    for r in survey.phase(phase) {
        if grade.is_some() && r.grade != grade {
            continue;
        }
        if let Some(c) = r.category(question) {
            *counts.entry(c).or_default() += 1;
        }
    }
    let n: u64 = counts.values().sum();
    if n == 0 {
        return Err(Error::Input(format!("no {phase:?} answers for question {question}")));
    }
    let pct = counts.iter().map(|(&c, &k)| (c, percent(k, n))).collect();
    Ok(CategoryDistribution {
        question,
        phase,
        n,
        counts,
        pct,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub from: u8,
    pub to: u8,
    pub count: u64,
}

/// Pre-to-post category moves for matched students: the data behind an
/// alluvial plot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub question: usize,
    pub matching: MatchCounts,
    pub flows: Vec<Flow>,
}

impl TransitionMatrix {
    pub fn count(&self, from: u8, to: u8) -> u64 {
        self.flows
            .iter()
            .find(|f| f.from == from && f.to == to)
            .map_or(0, |f| f.count)
    }

    pub fn total(&self) -> u64 {
        self.flows.iter().map(|f| f.count).sum()
    }

    pub fn row_sums(&self) -> BTreeMap<u8, u64> {
        let mut out = BTreeMap::new();
        for f in &self.flows {
            *out.entry(f.from).or_default() += f.count;
        }
        out
    }

    pub fn col_sums(&self) -> BTreeMap<u8, u64> {
        let mut out = BTreeMap::new();
        for f in &self.flows {
            *out.entry(f.to).or_default() += f.count;
        }
        out
    }

    /// Contingency table over the categories that actually occur; absent
    /// categories would only contribute zero expected counts.
    pub fn to_contingency(&self) -> Result<ContingencyTable> {
        let rows: Vec<u8> = self.row_sums().into_keys().collect();
        let cols: Vec<u8> = self.col_sums().into_keys().collect();
        let counts = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| self.count(r, c)).collect())
            .collect();
        ContingencyTable::new(
            rows.iter().map(|r| format!("pre:{r}")).collect(),
            cols.iter().map(|c| format!("post:{c}")).collect(),
            counts,
        )
    }
}

pub fn transition_matrix(survey: &Survey, question: usize) -> Result<TransitionMatrix> {
    check_question(question)?;
    let (pairs, pre_only, post_only) = join(survey);
    let mut counts: BTreeMap<(u8, u8), u64> = BTreeMap::new();
    let mut dropped = 0;
    for (a, b) in &pairs {
        match (a.category(question), b.category(question)) {
            (Some(x), Some(y)) => *counts.entry((x, y)).or_default() += 1,
            _ => dropped += 1,
        }
    }
    let matched = pairs.len() - dropped;
    if matched == 0 {
        return Err(Error::Input(format!("no matched students for question {question}")));
    }
    Ok(TransitionMatrix {
        question,
        matching: MatchCounts {
            matched,
            pre_only,
            post_only,
            dropped_missing: dropped,
        },
        flows: counts
            .into_iter()
            .map(|((from, to), count)| Flow { from, to, count })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, phase: Phase, l1: Option<u8>, q1: Option<u8>) -> SurveyRow {
        let mut likert = [Some(3); LIKERT_ITEMS];
        likert[0] = l1;
        SurveyRow {
            student_id: id.into(),
            phase,
            grade: Some(5),
            likert,
            open_cats: [q1, Some(0), Some(0)],
        }
    }

    #[test]
    fn all_fives_fully_positive() {
        let s = Survey::new(vec![
            row("a", Phase::Pre, Some(5), None),
            row("a", Phase::Post, Some(5), None),
        ])
        .unwrap();
        let sum = likert_summary(&s, 1).unwrap();
        assert_eq!(sum.pre.pct_positive, 100.0);
        assert_eq!(sum.post.counts, [0, 0, 0, 0, 1]);
    }

    #[test]
    fn one_through_five() {
        let mut rows: Vec<_> = (1..=5)
            .map(|v| row(&format!("s{v}"), Phase::Pre, Some(v), None))
            .collect();
        rows.push(row("s1", Phase::Post, None, None));
        rows.push(row("s2", Phase::Post, Some(4), None));
        let s = Survey::new(rows).unwrap();
        let sum = likert_summary(&s, 1).unwrap();
        assert_eq!(sum.pre.pct_positive, 40.0);
        assert_eq!(sum.pre.counts, [1, 1, 1, 1, 1]);
        assert_eq!(sum.post.missing, 1);
        assert!(likert_summary(&s, 12).is_err());
    }

    #[test]
    fn missing_phase_is_error() {
        let s = Survey::new(vec![row("a", Phase::Pre, Some(4), None)]).unwrap();
        assert!(matches!(likert_summary(&s, 1), Err(Error::Input(_))));
    }

    #[test]
    fn single_transition() {
        let s = Survey::new(vec![row("a", Phase::Pre, None, Some(1)), row("a", Phase::Post, None, Some(2))]).unwrap();
        let t = transition_matrix(&s, 1).unwrap();
        assert_eq!(t.flows, vec![Flow { from: 1, to: 2, count: 1 }]);
        assert_eq!(t.matching.matched, 1);
    }

    #[test]
    fn pre_only_student_excluded() {
        let s = Survey::new(vec![row("a", Phase::Pre, None, Some(1)), row("b", Phase::Post, None, Some(2))]).unwrap();
        assert!(matches!(transition_matrix(&s, 1), Err(Error::Input(_))));
    }

    #[test]
    fn likert_join_counts() {
        let s = Survey::new(vec![
            row("a", Phase::Pre, Some(2), None),
            row("a", Phase::Post, Some(4), None),
            row("b", Phase::Pre, Some(3), None),
            row("b", Phase::Post, Some(4), None),
            row("c", Phase::Pre, Some(3), None),
            row("c", Phase::Post, None, None),
            row("d", Phase::Pre, Some(3), None),
            row("e", Phase::Post, Some(5), None),
        ])
        .unwrap();
        let r = likert_paired_t(&s, 1).unwrap();
        assert_eq!(
            r.matching,
            MatchCounts { matched: 2, pre_only: 1, post_only: 1, dropped_missing: 1 }
        );
        assert_eq!(r.test.mean_diff, 1.5);
    }

    #[test]
    fn contingency_drops_empty_categories() {
        let mut rows = vec![];
        for (i, (a, b)) in [(0, 0), (0, 2), (2, 2), (2, 0), (2, 2)].iter().enumerate() {
            rows.push(row(&format!("s{i}"), Phase::Pre, None, Some(*a)));
            rows.push(row(&format!("s{i}"), Phase::Post, None, Some(*b)));
        }
        let t = transition_matrix(&Survey::new(rows).unwrap(), 1).unwrap();
        let c = t.to_contingency().unwrap();
        assert_eq!(c.rows, ["pre:0", "pre:2"]);
        assert_eq!(c.counts, vec![vec![1, 1], vec![1, 2]]);
    }
}
