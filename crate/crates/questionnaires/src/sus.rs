use serde::{Deserialize, Serialize};

use crate::{QuestionnaireError, Result};

pub const SUS_ITEMS: usize = 10;

/// One System Usability Scale questionnaire: ten ratings on 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SusResponse([u8; SUS_ITEMS]);

impl SusResponse {
    pub fn new(items: &[i64]) -> Result<Self> {
        if items.len() != SUS_ITEMS {
            return Err(QuestionnaireError::WrongItemCount {
                expected: SUS_ITEMS,
                got: items.len(),
            });
        }
        let mut out = [0u8; SUS_ITEMS];
        for (i, &v) in items.iter().enumerate() {
            if !(1..=5).contains(&v) {
                return Err(QuestionnaireError::RangeViolation {
                    item: i + 1,
                    value: v,
                    min: 1,
                    max: 5,
                });
            }
            out[i] = v as u8;
        }
        Ok(Self(out))
    }

    pub fn items(&self) -> &[u8; SUS_ITEMS] {
        &self.0
    }
}

/// Odd items (positively worded) contribute `rating - 1`, even items
/// `5 - rating`; the sum is scaled by 2.5 onto 0..=100.
pub fn score_sus(response: &SusResponse) -> f64 {
    let adjusted: u32 = response
        .0
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let r = u32::from(r);
            if i % 2 == 0 {
                r - 1
            } else {
                5 - r
            }
        })
        .sum();
    f64::from(adjusted) * 2.5
}

/// Mean score and sample standard deviation across respondents.
pub fn summarize_sus(responses: &[SusResponse]) -> Result<(f64, f64)> {
    if responses.is_empty() {
        return Err(QuestionnaireError::EmptyInput);
    }
    let scores: Vec<f64> = responses.iter().map(score_sus).collect();
    Ok(crate::ueq::mean_sd(&scores))
}
