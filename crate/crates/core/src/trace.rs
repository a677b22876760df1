//! Line-oriented trace files: one JSON object per inference.
//!
//! ```text
//! {"step":1,"role":"base","input_tokens":13953,"output_tokens":125,"logprobs":[-0.01747,...]}
//! ```
//!
//! Keys appear in the order `step, role, input_tokens, output_tokens,
//! logprobs[, confidence]`, with shortest round-trip float formatting. Files
//! written by [`write_trace`] read back byte-for-byte.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::entropy::InferenceRecord;
use crate::error::{Error, Result};

/// Canonical single-line encoding, without the trailing newline.
pub fn to_line(record: &InferenceRecord) -> String {
    serde_json::to_string(record).expect("inference records always serialize")
}

pub fn parse_line(line: &str, line_no: usize) -> Result<InferenceRecord> {
    let record: InferenceRecord = serde_json::from_str(line).map_err(|e| Error::MalformedTrace {
        line: Some(line_no),
        reason: e.to_string(),
    })?;
    record.validate().map_err(|reason| Error::MalformedTrace {
        line: Some(line_no),
        reason,
    })?;
    Ok(record)
}

/// Streams records from a reader; blank lines are skipped.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<InferenceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_line(&line, self.line_no));
        }
    }
}

pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<InferenceRecord>> {
    TraceReader::new(reader).collect()
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<InferenceRecord>> {
    read_trace(BufReader::new(File::open(path)?))
}

pub fn write_trace<W: Write>(mut writer: W, records: &[InferenceRecord]) -> Result<()> {
    for record in records {
        writeln!(writer, "{}", to_line(record))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::Role;

    #[test]
    fn empty_input_is_an_empty_session() {
        assert!(read_trace(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn output_token_mismatch_is_rejected() {
        let bad = br#"{"step":1,"role":"base","input_tokens":5,"output_tokens":3,"logprobs":[-0.1,-0.2]}"#;
        let err = read_trace(&bad[..]).unwrap_err();
        match err {
            Error::MalformedTrace { line, reason } => {
                assert_eq!(line, Some(1));
                assert!(reason.contains("output_tokens"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line_number() {
        let text = "{\"step\":1,\"role\":\"base\",\"input_tokens\":1,\"output_tokens\":1,\"logprobs\":[-0.1]}\n{oops\n";
        match read_trace(text.as_bytes()).unwrap_err() {
            Error::MalformedTrace { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn positive_logprob_and_unknown_role_rejected() {
        let pos = br#"{"step":1,"role":"base","input_tokens":1,"output_tokens":1,"logprobs":[0.1]}"#;
        assert!(read_trace(&pos[..]).is_err());
        let role = br#"{"step":1,"role":"oracle","input_tokens":1,"output_tokens":1,"logprobs":[-0.1]}"#;
        assert!(read_trace(&role[..]).is_err());
    }

    #[test]
    fn confidence_is_optional_and_last() {
        let r = InferenceRecord {
            sequence_id: 3,
            role: Role::Support,
            input_tokens: 7,
            output_tokens: 2,
            token_logprobs: vec![-0.5, -0.25],
            task_confidence: Some(0.75),
        };
        assert_eq!(
            to_line(&r),
            r#"{"step":3,"role":"support","input_tokens":7,"output_tokens":2,"logprobs":[-0.5,-0.25],"confidence":0.75}"#
        );
    }
}
