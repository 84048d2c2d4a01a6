use std::fmt;

/// Pipeline stage that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Simulate,
    Train,
    Reconstruct,
    Compare,
    Render,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Simulate => "simulate",
            Stage::Train => "train",
            Stage::Reconstruct => "reconstruct",
            Stage::Compare => "compare",
            Stage::Render => "render",
        })
    }
}

/// Failure of a pipeline stage. Displays as a single
/// `stage=… code=… detail=…` line.
#[derive(Debug, thiserror::Error)]
#[error("stage={stage} code={code} detail={}", one_line(detail))]
pub struct PipelineError {
    pub stage: Stage,
    pub code: &'static str,
    pub detail: String,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl PipelineError {
    pub fn new(stage: Stage, code: &'static str, detail: impl fmt::Display) -> Self {
        Self { stage, code, detail: detail.to_string() }
    }
}

/// Attaches a stage and code to any displayable error.
pub trait Context<T> {
    fn ctx(self, stage: Stage, code: &'static str) -> Result<T, PipelineError>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn ctx(self, stage: Stage, code: &'static str) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, code, e))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
}
