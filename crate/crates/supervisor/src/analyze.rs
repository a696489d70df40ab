//! Offline analysis of a finished session plus questionnaire tables.

use std::path::{Path, PathBuf};

use narravine_core::store::{compute_metrics, load_session, SessionMeta, SessionMetrics};
use narravine_questionnaires::tables::{parse_sus_csv, parse_ueq_csv, parse_votes_csv};
use narravine_questionnaires::{build_report, BenchmarkTable, QuestionnaireReport, ReportInputs, ScaleMap};
use serde::Serialize;

use crate::error::SupervisorError;

#[derive(Debug, Default, Clone)]
pub struct AnalyzeInputs {
    pub sus: Option<PathBuf>,
    pub ueq: Option<PathBuf>,
    pub votes: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<SessionMeta>,
    pub metrics: SessionMetrics,
    pub questionnaires: QuestionnaireReport,
}

fn read(path: &Path) -> Result<String, SupervisorError> {
    std::fs::read_to_string(path)
        .map_err(|e| SupervisorError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn analyze(session_dir: &Path, inputs: &AnalyzeInputs) -> Result<AnalysisReport, SupervisorError> {
    let data = load_session(session_dir)?;
    let metrics = compute_metrics(&data.records)?;
    let report_inputs = ReportInputs {
        sus: inputs.sus.as_deref().map(|p| read(p).and_then(|t| Ok(parse_sus_csv(&t)?))).transpose()?,
        ueq: inputs.ueq.as_deref().map(|p| read(p).and_then(|t| Ok(parse_ueq_csv(&t)?))).transpose()?,
        votes: inputs.votes.as_deref().map(|p| read(p).and_then(|t| Ok(parse_votes_csv(&t)?))).transpose()?,
    };
    let questionnaires = build_report(&report_inputs, &ScaleMap::standard(), &BenchmarkTable::standard())?;
    Ok(AnalysisReport {
        meta: data.meta,
        metrics,
        questionnaires,
    })
}
