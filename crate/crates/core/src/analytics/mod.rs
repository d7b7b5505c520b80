//! Evaluation toolkit for the pre/post questionnaires: Likert summaries,
//! paired t-tests with Cohen's d, category transitions, chi-square with
//! Pearson residuals, and inter-rater kappa.

pub mod inference;
pub mod report;
pub mod special;
pub mod summary;
pub mod survey;

pub use inference::{
    chi_square, cohens_kappa, paired_t, paired_t_by_key, Agreement, ChiSquare, ContingencyTable,
    EffectSize, Kappa, PairedT,
};
pub use report::{build_report, ReportOptions, StatsReport};
pub use summary::{
    category_distribution, likert_paired_t, likert_summary, transition_matrix,
    CategoryDistribution, LikertSummary, TransitionMatrix,
};
pub use survey::{load_survey_csv, read_survey_csv, Phase, Survey, SurveyRow};

/// `count / total` as a percentage, rounded half-up to two decimals.
///
/// Evaluated in integer arithmetic so that ties round the same way on every
/// platform.
pub fn percent(count: u64, total: u64) -> f64 {
    assert!(total > 0, "percent of an empty total");
    let hundredths = (2 * count as u128 * 10_000 + total as u128) / (2 * total as u128);
    hundredths as f64 / 100.0
}

#[cfg(test)]
mod tests {
    use super::percent;

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent(28, 183), 15.3);
        assert_eq!(percent(137, 183), 74.86);
        assert_eq!(percent(18, 183), 9.84);
        assert_eq!(percent(59, 191), 30.89);
        // 1/8 = 12.5% exactly; 1/800 = 0.125% is a tie that rounds up
        assert_eq!(percent(1, 800), 0.13);
        assert_eq!(percent(2, 3), 66.67);
        assert_eq!(percent(5, 5), 100.0);
    }
}
