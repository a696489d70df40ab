use serde::{Deserialize, Serialize};

use crate::special::chi_square_sf;
use crate::{QuestionnaireError, Result};

/// Vote counts per category. Multi-select answers are allowed, so the
/// counts may sum to more than `n_respondents`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalVotes {
    pub categories: Vec<String>,
    pub counts: Vec<u64>,
    pub n_respondents: u64,
}

impl CategoricalVotes {
    pub fn new(categories: Vec<String>, counts: Vec<u64>, n_respondents: u64) -> Result<Self> {
        if categories.len() != counts.len() {
            return Err(QuestionnaireError::LengthMismatch {
                what: "categories vs counts",
                left: categories.len(),
                right: counts.len(),
            });
        }
        Ok(Self {
            categories,
            counts,
            n_respondents,
        })
    }

    /// Per-category `(votes, respondents)` pairs for proportion tests.
    pub fn proportions(&self) -> Vec<(u64, u64)> {
        self.counts.iter().map(|&c| (c, self.n_respondents)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Uniform,
    Counts(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub df: u32,
    pub p: f64,
}

pub fn chi_square_gof(votes: &CategoricalVotes, expected: &Expected) -> Result<GoodnessOfFit> {
    let k = votes.counts.len();
    let expected: Vec<f64> = match expected {
        Expected::Uniform => {
            let total: u64 = votes.counts.iter().sum();
            vec![total as f64 / k as f64; k]
        }
        Expected::Counts(e) => {
            if e.len() != k {
                return Err(QuestionnaireError::LengthMismatch {
                    what: "observed vs expected",
                    left: k,
                    right: e.len(),
                });
            }
            e.clone()
        }
    };
    if k == 0 {
        return Err(QuestionnaireError::EmptyInput);
    }
    if let Some(i) = expected.iter().position(|&e| !(e > 0.0)) {
        return Err(QuestionnaireError::ZeroExpected(i));
    }
    let chi2: f64 = votes
        .counts
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let df = (k - 1) as u32;
    let p = if df == 0 { 1.0 } else { chi_square_sf(chi2, df) };
    Ok(GoodnessOfFit { chi2, df, p })
}
