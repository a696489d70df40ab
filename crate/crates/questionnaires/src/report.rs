use serde::{Deserialize, Serialize};

use crate::chi_square::{chi_square_gof, CategoricalVotes, Expected, GoodnessOfFit};
use crate::proportions::{pairwise_proportion_tests, Correction, PairwiseMatrix};
use crate::sus::{score_sus, summarize_sus, SusResponse};
use crate::ueq::{score_ueq, BenchmarkCategory, BenchmarkTable, ScaleMap, UeqResponse, UeqScale};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusReport {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeqScaleReport {
    pub scale: UeqScale,
    pub mean: f64,
    pub sd: f64,
    pub category: BenchmarkCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotesReport {
    pub votes: CategoricalVotes,
    pub goodness_of_fit: GoodnessOfFit,
    pub pairwise: PairwiseMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sus: Option<SusReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ueq: Option<Vec<UeqScaleReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<VotesReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub category: BenchmarkCategory,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotScale {
    pub scale: UeqScale,
    pub mean: f64,
    pub sd: f64,
    pub bands: Vec<Band>,
}

/// Per-scale means drawn over the benchmark bands, one entry per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeqPlotData {
    pub range: (f64, f64),
    pub scales: Vec<PlotScale>,
}

#[derive(Debug, Default)]
pub struct ReportInputs {
    pub sus: Option<Vec<SusResponse>>,
    pub ueq: Option<Vec<UeqResponse>>,
    pub votes: Option<CategoricalVotes>,
}

pub fn build_report(inputs: &ReportInputs, map: &ScaleMap, table: &BenchmarkTable) -> Result<QuestionnaireReport> {
    let sus = match &inputs.sus {
        Some(rs) => {
            let (mean, sd) = summarize_sus(rs)?;
            Some(SusReport {
                n: rs.len(),
                mean,
                sd,
                scores: rs.iter().map(score_sus).collect(),
            })
        }
        None => None,
    };
    let ueq = match &inputs.ueq {
        Some(rs) => Some(
            score_ueq(rs, map)?
                .into_iter()
                .map(|s| {
                    Ok(UeqScaleReport {
                        scale: s.scale,
                        mean: s.mean,
                        sd: s.sd,
                        category: table.classify(s.scale, s.mean)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let votes = match &inputs.votes {
        Some(v) => Some(VotesReport {
            goodness_of_fit: chi_square_gof(v, &Expected::Uniform)?,
            pairwise: pairwise_proportion_tests(&v.proportions(), Correction::Holm)?,
            votes: v.clone(),
        }),
        None => None,
    };
    Ok(QuestionnaireReport { sus, ueq, votes })
}

pub fn ueq_plot_data(scales: &[UeqScaleReport], table: &BenchmarkTable) -> UeqPlotData {
    const CATEGORIES: [BenchmarkCategory; 5] = [
        BenchmarkCategory::Excellent,
        BenchmarkCategory::Good,
        BenchmarkCategory::AboveAverage,
        BenchmarkCategory::BelowAverage,
        BenchmarkCategory::Bad,
    ];
    let scales = scales
        .iter()
        .map(|s| {
            let bands = match table.bounds(s.scale) {
                Some(b) => {
                    let uppers = [3.0, b[0], b[1], b[2], b[3]];
                    let lowers = [b[0], b[1], b[2], b[3], -3.0];
                    CATEGORIES
                        .iter()
                        .zip(lowers.iter().zip(uppers))
                        .map(|(&category, (&lower, upper))| Band { category, lower, upper })
                        .collect()
                }
                None => Vec::new(),
            };
            PlotScale {
                scale: s.scale,
                mean: s.mean,
                sd: s.sd,
                bands,
            }
        })
        .collect();
    UeqPlotData {
        range: (-3.0, 3.0),
        scales,
    }
}
