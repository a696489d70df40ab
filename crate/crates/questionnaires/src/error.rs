use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuestionnaireError {
    #[error("item {item} has value {value}, expected {min}..={max}")]
    RangeViolation { item: usize, value: i64, min: u8, max: u8 },
    #[error("expected {expected} items, got {got}")]
    WrongItemCount { expected: usize, got: usize },
    #[error("no responses to aggregate")]
    EmptyInput,
    #[error("unknown UEQ scale {0:?}")]
    UnknownScale(String),
    #[error("expected count for category {0} is not positive")]
    ZeroExpected(usize),
    #[error("{what}: {left} vs {right} entries")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("group {0} has no observations")]
    DegenerateGroup(usize),
    #[error("table: {0}")]
    Table(String),
}

impl From<csv::Error> for QuestionnaireError {
    fn from(e: csv::Error) -> Self {
        QuestionnaireError::Table(e.to_string())
    }
}
