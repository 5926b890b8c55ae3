use std::sync::Mutex;
use std::time::Duration;

use super::scorers::{DecodeContext, TokenScorer};
use super::vocab::TokenId;
use crate::retrieve::{LineProcess, ScorerError, DEFAULT_TIMEOUT};

/// Token scorer backed by a child process speaking
/// `NEXT \t <context ids> \t <prefix ids>` (ids comma-joined) and answering
/// one line of space-separated log-probabilities, one per vocabulary id.
#[derive(Debug)]
pub struct ExternalTokenScorer {
    process: Mutex<LineProcess>,
    size: usize,
}

fn join(ids: &[TokenId]) -> String {
    ids.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

impl ExternalTokenScorer {
    pub fn spawn(command: &str, vocab_size: usize) -> Result<Self, ScorerError> {
        Self::with_timeout(command, vocab_size, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(command: &str, vocab_size: usize, timeout: Duration) -> Result<Self, ScorerError> {
        Ok(ExternalTokenScorer { process: Mutex::new(LineProcess::spawn(command, timeout)?), size: vocab_size })
    }
}

impl TokenScorer for ExternalTokenScorer {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_log_probs(&self, ctx: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let request = format!("NEXT\t{}\t{}", join(&ctx.tokens), join(prefix));
        let reply = self.process.lock().unwrap_or_else(|e| e.into_inner()).request(&request)?;
        let row = reply
            .split_whitespace()
            .map(|f| f.parse::<f64>().ok().filter(|v| !v.is_nan() && *v != f64::INFINITY))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| ScorerError::Protocol(format!("unparsable log-probability row: `{reply}`")))?;
        if row.len() != self.size {
            return Err(ScorerError::Protocol(format!("expected {} log-probabilities, got {}", self.size, row.len())));
        }
        Ok(row)
    }

    fn is_reentrant(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows_from_child() {
        let s = ExternalTokenScorer::spawn("while read -r l; do echo '-1.0986 -1.0986 -1.0986'; done", 3).unwrap();
        let row = s.next_log_probs(&DecodeContext::new("q", vec![4, 5]), &[1]).unwrap();
        assert_eq!(row, [-1.0986; 3]);
    }

    #[test]
    fn request_format() {
        // echoes the request back; the row length check then fails and reports it
        let s = ExternalTokenScorer::spawn("while read -r l; do echo \"$l\"; done", 1).unwrap();
        match s.next_log_probs(&DecodeContext::new("q", vec![4, 5]), &[1, 2]) {
            Err(ScorerError::Protocol(msg)) => assert!(msg.contains("NEXT\t4,5\t1,2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_length_is_a_protocol_error() {
        let s = ExternalTokenScorer::spawn("while read -r l; do echo '0 0'; done", 3).unwrap();
        assert!(matches!(s.next_log_probs(&DecodeContext::default(), &[]), Err(ScorerError::Protocol(_))));
    }
}
