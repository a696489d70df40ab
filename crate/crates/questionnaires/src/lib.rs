//! Scoring and statistics for the study instruments: the System Usability
//! Scale, the User Experience Questionnaire with benchmark classification,
//! chi-square goodness of fit on categorical votes, and pairwise
//! two-proportion z-tests with Holm adjustment.
//!
//! Everything here is a pure function over in-memory data; p-values come
//! from the in-crate regularized incomplete gamma in [`special`].

mod error;
pub mod chi_square;
pub mod proportions;
pub mod report;
pub mod special;
pub mod sus;
pub mod tables;
pub mod ueq;

pub use chi_square::{chi_square_gof, CategoricalVotes, Expected, GoodnessOfFit};
pub use error::QuestionnaireError;
pub use proportions::{holm_adjust, pairwise_proportion_tests, two_proportion_z, Correction, PairwiseMatrix, ProportionTest};
pub use report::{build_report, ueq_plot_data, QuestionnaireReport, ReportInputs, UeqPlotData};
pub use sus::{score_sus, SusResponse};
pub use ueq::{classify_benchmark, score_ueq, BenchmarkCategory, BenchmarkTable, ScaleMap, ScaleSummary, UeqResponse, UeqScale};

pub type Result<T, E = QuestionnaireError> = std::result::Result<T, E>;
