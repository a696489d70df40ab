//! Comma-separated response tables with a header row. A leading
//! `respondent`, `participant` or `id` column is ignored; every other
//! column is an item (or, for vote tables, a category).

use crate::chi_square::CategoricalVotes;
use crate::sus::{SusResponse, SUS_ITEMS};
use crate::ueq::{UeqResponse, UEQ_ITEMS};
use crate::{QuestionnaireError, Result};

const ID_COLUMNS: [&str; 3] = ["respondent", "participant", "id"];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<i64>>,
}

fn read_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let skip_id = header
        .first()
        .is_some_and(|h| ID_COLUMNS.iter().any(|id| h.eq_ignore_ascii_case(id)));
    if skip_id {
        header.remove(0);
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let cells = record.iter().skip(usize::from(skip_id));
        let row = cells
            .map(|c| {
                c.parse::<i64>().map_err(|_| {
                    QuestionnaireError::Table(format!("row {}: {c:?} is not an integer", line + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn expect_columns(table: &Table, n: usize) -> Result<()> {
    if table.header.len() != n {
        return Err(QuestionnaireError::WrongItemCount {
            expected: n,
            got: table.header.len(),
        });
    }
    Ok(())
}

pub fn parse_sus_csv(text: &str) -> Result<Vec<SusResponse>> {
    let table = read_table(text)?;
    expect_columns(&table, SUS_ITEMS)?;
    table.rows.iter().map(|r| SusResponse::new(r)).collect()
}

pub fn parse_ueq_csv(text: &str) -> Result<Vec<UeqResponse>> {
    let table = read_table(text)?;
    expect_columns(&table, UEQ_ITEMS)?;
    table.rows.iter().map(|r| UeqResponse::new(r)).collect()
}

/// One row per respondent, one 0/1 column per category (multi-select).
pub fn parse_votes_csv(text: &str) -> Result<CategoricalVotes> {
    let table = read_table(text)?;
    if table.header.is_empty() {
        return Err(QuestionnaireError::Table("no category columns".into()));
    }
    let mut counts = vec![0u64; table.header.len()];
    for (line, row) in table.rows.iter().enumerate() {
        if row.len() != counts.len() {
            return Err(QuestionnaireError::LengthMismatch {
                what: "row vs header",
                left: row.len(),
                right: counts.len(),
            });
        }
        for (count, &v) in counts.iter_mut().zip(row) {
            match v {
                0 => {}
                1 => *count += 1,
                other => {
                    return Err(QuestionnaireError::Table(format!(
                        "row {}: vote must be 0 or 1, got {other}",
                        line + 1
                    )))
                }
            }
        }
    }
    CategoricalVotes::new(table.header, counts, table.rows.len() as u64)
}
