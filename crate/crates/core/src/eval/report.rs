use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{io_err, EvalError, Result};
use crate::session::Session;

/// Per-round knowledge states of one learner, round 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeTrace {
    pub trace_id: String,
    pub concept_ids: Vec<String>,
    pub concept_names: Vec<String>,
    pub theta: Vec<Vec<f64>>,
}

impl KnowledgeTrace {
    /// State before the first turn, then after every turn.
    pub fn from_session(session: &Session) -> Self {
        let mut theta = vec![session.initial_theta.values().to_vec()];
        theta.extend(
            session
                .transcript
                .iter()
                .map(|t| t.result.theta_after.values().to_vec()),
        );
        if session.transcript.is_empty() && session.theta != session.initial_theta {
            theta.push(session.theta.values().to_vec());
        }
        Self {
            trace_id: session.session_id.clone(),
            concept_ids: session.concept_set.ids(),
            concept_names: session.concept_set.names(),
            theta,
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.concept_ids.len();
        if k == 0 || self.concept_names.len() != k {
            return Err(EvalError::Argument(format!(
                "trace `{}` has mismatched concept lists",
                self.trace_id
            )));
        }
        if self.theta.is_empty() || self.theta.iter().any(|row| row.len() != k) {
            return Err(EvalError::Argument(format!(
                "trace `{}` needs rows of length {k}",
                self.trace_id
            )));
        }
        if self.trace_id.is_empty() || self.trace_id.contains(['/', '\\']) {
            return Err(EvalError::Argument(format!(
                "unusable trace id `{}`",
                self.trace_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub trace_id: String,
    pub csv: PathBuf,
    pub radar: PathBuf,
}

/// Writes `<trace_id>.csv` (`round,concept_id,theta`) and
/// `<trace_id>.radar.json` (`{concepts, theta, trace_id}` at the final round)
/// into `out_dir` for every trace.
pub fn export_knowledge_report(
    traces: &[KnowledgeTrace],
    out_dir: &Path,
) -> Result<Vec<ReportFiles>> {
    if traces.is_empty() {
        return Err(EvalError::Argument("no traces to report".into()));
    }
    let mut seen = BTreeSet::new();
    for t in traces {
        t.validate()?;
        if !seen.insert(t.trace_id.as_str()) {
            return Err(EvalError::Argument(format!(
                "duplicate trace id `{}`",
                t.trace_id
            )));
        }
    }
    let mut files = Vec::with_capacity(traces.len());
    for t in traces {
        let mut csv = String::from("round,concept_id,theta\n");
        for (round, row) in t.theta.iter().enumerate() {
            for (id, v) in t.concept_ids.iter().zip(row) {
                csv.push_str(&format!("{round},{id},{v}\n"));
            }
        }
        let radar = json!({
            "concepts": t.concept_names,
            "theta": t.theta.last().expect("validated"),
            "trace_id": t.trace_id,
        });
        let csv_path = out_dir.join(format!("{}.csv", t.trace_id));
        let radar_path = out_dir.join(format!("{}.radar.json", t.trace_id));
        std::fs::write(&csv_path, csv).map_err(io_err(&csv_path))?;
        let mut radar_text = serde_json::to_string_pretty(&radar).expect("radar serializes");
        radar_text.push('\n');
        std::fs::write(&radar_path, radar_text).map_err(io_err(&radar_path))?;
        files.push(ReportFiles {
            trace_id: t.trace_id.clone(),
            csv: csv_path,
            radar: radar_path,
        });
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(id: &str, rounds: usize) -> KnowledgeTrace {
        KnowledgeTrace {
            trace_id: id.into(),
            concept_ids: vec!["eor".into(), "steam".into()],
            concept_names: vec!["EOR".into(), "steam injection".into()],
            theta: (0..=rounds)
                .map(|r| vec![1.44 + r as f64 * 0.1, 0.0])
                .collect(),
        }
    }

    #[test]
    fn twenty_round_shape() {
        let dir = tempfile::tempdir().unwrap();
        let files = export_knowledge_report(&[trace("t1", 20)], dir.path()).unwrap();
        let csv = std::fs::read_to_string(&files[0].csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "round,concept_id,theta");
        assert_eq!(lines.len(), 1 + 21 * 2);
        assert_eq!(lines[1], "0,eor,1.44");
        let radar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&files[0].radar).unwrap()).unwrap();
        assert_eq!(radar["trace_id"], "t1");
        assert_eq!(radar["concepts"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn two_traces_two_files_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let files = export_knowledge_report(&[trace("a", 1), trace("b", 1)], dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert_ne!(files[0].csv, files[1].csv);
        assert!(export_knowledge_report(&[], dir.path()).is_err());
        assert!(export_knowledge_report(&[trace("a", 1), trace("a", 2)], dir.path()).is_err());
    }
}
