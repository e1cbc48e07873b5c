use std::fs;
use std::path::Path;

use pathwise_problems::frameworks::{signature_for, HeuristicSignature};
use pathwise_problems::{Framework, Problem, ProblemError};
use serde::{Deserialize, Serialize};

use crate::SandboxError;

const HEADER: &str = "// pathwise-heuristic:";
const DESCRIPTION: &str = "// description:";

/// A candidate heuristic: script source plus the (framework, problem) pair
/// whose entry signature it implements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeuristicProgram {
    pub source: String,
    pub framework: Framework,
    pub problem: Problem,
    pub description: String,
}

impl HeuristicProgram {
    pub fn new(
        source: impl Into<String>,
        framework: Framework,
        problem: Problem,
        description: impl Into<String>,
    ) -> Self {
        Self { source: source.into(), framework, problem, description: description.into() }
    }

    pub fn signature(&self) -> Result<&'static HeuristicSignature, ProblemError> {
        signature_for(self.framework, self.problem)
    }

    /// File form: a `// pathwise-heuristic: framework/problem` line, an
    /// optional `// description:` line, then the source.
    pub fn to_file_text(&self) -> String {
        let mut text = format!("{HEADER} {}/{}\n", self.framework, self.problem);
        let description = self.description.split_whitespace().collect::<Vec<_>>().join(" ");
        if !description.is_empty() {
            text.push_str(&format!("{DESCRIPTION} {description}\n"));
        }
        text.push_str(&self.source);
        if !self.source.ends_with('\n') {
            text.push('\n');
        }
        text
    }

    /// Parses the file form. `fallback` supplies the pair when the header is absent.
    pub fn from_file_text(text: &str, fallback: Option<(Framework, Problem)>) -> Result<Self, SandboxError> {
        let mut lines = text.split_inclusive('\n').peekable();
        let mut pair = None;
        let mut description = String::new();
        if let Some(rest) = lines.peek().and_then(|l| l.trim_end().strip_prefix(HEADER)) {
            let (f, p) = rest.trim().split_once('/').ok_or_else(|| SandboxError::Header(rest.trim().to_string()))?;
            pair = Some((f.trim().parse()?, p.trim().parse()?));
            lines.next();
            if let Some(rest) = lines.peek().and_then(|l| l.trim_end().strip_prefix(DESCRIPTION)) {
                description = rest.trim().to_string();
                lines.next();
            }
        }
        let (framework, problem) = pair.or(fallback).ok_or(SandboxError::MissingHeader)?;
        signature_for(framework, problem)?;
        Ok(Self { source: lines.collect(), framework, problem, description })
    }

    pub fn load(path: &Path, fallback: Option<(Framework, Problem)>) -> Result<Self, SandboxError> {
        let text =
            fs::read_to_string(path).map_err(|e| SandboxError::Io { path: path.display().to_string(), source: e })?;
        Self::from_file_text(&text, fallback)
    }

    pub fn save(&self, path: &Path) -> Result<(), SandboxError> {
        fs::write(path, self.to_file_text())
            .map_err(|e| SandboxError::Io { path: path.display().to_string(), source: e })
    }
}
