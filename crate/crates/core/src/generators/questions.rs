use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One entry of a question-set file (JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub question: String,
    pub references: Vec<String>,
    pub tier: String,
}

/// Reads a JSON-lines question set. Blank lines and lines starting with `#`
/// are skipped.
pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<Question>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let q: Question = serde_json::from_str(trimmed)
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if q.references.is_empty() {
            return Err(Error::Config(format!(
                "{}:{}: question {} has no references",
                path.display(),
                lineno + 1,
                q.id
            )));
        }
        out.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_set_loads() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/questions.jsonl");
        let qs = load_questions(path).unwrap();
        assert!(qs.len() >= 9);
        for tier in ["easy", "medium", "hard"] {
            assert!(qs.iter().any(|q| q.tier == tier), "missing tier {tier}");
        }
    }

    #[test]
    fn bad_lines_report_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"question\":\"q\",\"references\":[\"x\"],\"tier\":\"easy\"}\n{oops}\n",
        )
        .unwrap();
        let err = load_questions(&p).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }
}
