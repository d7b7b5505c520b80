//! Pre/post questionnaire rows and the CSV format they are read from.
//!
//! Header: `student_id,phase,grade,l1,...,l11,q1,q2,q3`. Blank cells are
//! missing values; a row with a missing field is dropped only from the
//! analyses that need that field.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::ValidationError;
use crate::{Error, Result};

pub const LIKERT_ITEMS: usize = 11;
pub const OPEN_QUESTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub student_id: String,
    pub phase: Phase,
    pub grade: Option<u8>,
    /// Responses on a 1..=5 scale.
    pub likert: [Option<u8>; LIKERT_ITEMS],
    /// Coded categories: q1 in 0..=2, q2 and q3 in 0..=4.
    pub open_cats: [Option<u8>; OPEN_QUESTIONS],
}

/// Highest category code per open question.
pub const MAX_CATEGORY: [u8; OPEN_QUESTIONS] = [2, 4, 4];

impl SurveyRow {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.student_id.trim().is_empty() {
            return Err(ValidationError::new("student_id", "must not be empty"));
        }
        if let Some(g) = self.grade {
            if g != 5 && g != 8 {
                return Err(ValidationError::new("grade", format!("{g} is not 5 or 8")));
            }
        }
        if let Some(v) = self.likert.iter().flatten().find(|v| !(1..=5).contains(*v)) {
            return Err(ValidationError::new("likert", format!("{v} is outside 1..=5")));
        }
        for (q, (cat, max)) in self.open_cats.iter().zip(MAX_CATEGORY).enumerate() {
            if let Some(c) = cat {
                if *c > max {
                    return Err(ValidationError::new(
                        ["q1", "q2", "q3"][q],
                        format!("category {c} is outside 0..={max}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Likert response for 1-based `item`.
    pub fn item(&self, item: usize) -> Option<u8> {
        self.likert.get(item.checked_sub(1)?).copied().flatten()
    }

    /// Coded category for 1-based `question`.
    pub fn category(&self, question: usize) -> Option<u8> {
        self.open_cats.get(question.checked_sub(1)?).copied().flatten()
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    student_id: String,
    phase: Phase,
    grade: Option<u8>,
    l1: Option<u8>,
    l2: Option<u8>,
    l3: Option<u8>,
    l4: Option<u8>,
    l5: Option<u8>,
    l6: Option<u8>,
    l7: Option<u8>,
    l8: Option<u8>,
    l9: Option<u8>,
    l10: Option<u8>,
    l11: Option<u8>,
    q1: Option<u8>,
    q2: Option<u8>,
    q3: Option<u8>,
}

impl From<CsvRow> for SurveyRow {
    fn from(r: CsvRow) -> Self {
        SurveyRow {
            student_id: r.student_id,
            phase: r.phase,
            grade: r.grade,
            likert: [r.l1, r.l2, r.l3, r.l4, r.l5, r.l6, r.l7, r.l8, r.l9, r.l10, r.l11],
            open_cats: [r.q1, r.q2, r.q3],
        }
    }
}

pub fn read_survey_csv(reader: impl Read) -> Result<Vec<SurveyRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.deserialize::<CsvRow>().enumerate() {
        // header is line 1
        let line = idx + 2;
        let row: SurveyRow = rec
            .map_err(|e| Error::Parse {
                line: e.position().map_or(line, |p| p.line() as usize),
                message: e.to_string(),
            })?
            .into();
        row.validate().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_survey_csv(path: &Path) -> Result<Vec<SurveyRow>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_survey_csv(file)
}

pub fn write_survey_csv(rows: &[SurveyRow], mut out: impl std::io::Write) -> Result<()> {
    let mut header = vec!["student_id".to_string(), "phase".into(), "grade".into()];
    header.extend((1..=LIKERT_ITEMS).map(|i| format!("l{i}")));
    header.extend((1..=OPEN_QUESTIONS).map(|i| format!("q{i}")));
    writeln!(out, "{}", header.join(","))?;
    let cell = |v: Option<u8>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let mut fields = vec![
            r.student_id.clone(),
            match r.phase {
                Phase::Pre => "pre".into(),
                Phase::Post => "post".into(),
            },
            cell(r.grade),
        ];
        fields.extend(r.likert.iter().map(|v| cell(*v)));
        fields.extend(r.open_cats.iter().map(|v| cell(*v)));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Validated collection of rows with unique (student_id, phase).
#[derive(Debug, Clone, Default)]
pub struct Survey {
    rows: Vec<SurveyRow>,
}

impl Survey {
    pub fn new(rows: Vec<SurveyRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            r.validate()?;
            if !seen.insert((r.student_id.clone(), r.phase)) {
                return Err(ValidationError::new(
                    "student_id",
                    format!("duplicate row for {} in phase {:?}", r.student_id, r.phase),
                )
                .into());
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[SurveyRow] {
        &self.rows
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &SurveyRow> {
        self.rows.iter().filter(move |r| r.phase == phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "student_id,phase,grade,l1,l2,l3,l4,l5,l6,l7,l8,l9,l10,l11,q1,q2,q3";

    #[test]
    fn parses_with_blanks() {
        let csv = format!("{HEADER}\ns1,pre,5,1,2,3,4,5,1,2,3,4,5,,0,4,\n");
        let rows = read_survey_csv(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].item(1), Some(1));
        assert_eq!(rows[0].item(11), None);
        assert_eq!(rows[0].category(1), Some(0));
        assert_eq!(rows[0].category(3), None);
        assert_eq!(rows[0].item(0), None);
        assert_eq!(rows[0].item(12), None);
    }

    #[test]
    fn out_of_range_reports_line() {
        let csv = format!("{HEADER}\ns1,pre,5,1,2,3,4,5,1,2,3,4,5,5,0,4,1\ns2,post,8,1,2,3,4,5,1,2,3,4,5,5,3,0,0\n");
        match read_survey_csv(csv.as_bytes()).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("q1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let csv = format!("{HEADER}\ns1,pre,6,1,2,3,4,5,1,2,3,4,5,5,0,4,1\n");
        assert!(read_survey_csv(csv.as_bytes()).is_err());
        let csv = format!("{HEADER}\ns1,later,5,1,2,3,4,5,1,2,3,4,5,5,0,4,1\n");
        assert!(read_survey_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn duplicate_student_phase() {
        let row = SurveyRow {
            student_id: "s".into(),
            phase: Phase::Pre,
            grade: Some(5),
            likert: [Some(3); LIKERT_ITEMS],
            open_cats: [Some(0); OPEN_QUESTIONS],
        };
        assert!(Survey::new(vec![row.clone(), row.clone()]).is_err());
        let mut post = row.clone();
        post.phase = Phase::Post;
        assert!(Survey::new(vec![row, post]).is_ok());
    }

    #[test]
    fn csv_write_read_round_trip() {
        let row = SurveyRow {
            student_id: "s9".into(),
            phase: Phase::Post,
            grade: None,
            likert: [Some(4), None, Some(1), Some(2), Some(3), Some(4), Some(5), None, Some(2), Some(2), Some(1)],
            open_cats: [Some(2), None, Some(4)],
        };
        let mut buf = Vec::new();
        write_survey_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(HEADER));
        assert_eq!(read_survey_csv(buf.as_slice()).unwrap(), vec![row]);
    }
}
