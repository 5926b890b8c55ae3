use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{Question, Scorer, ScorerError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// A child process driven over stdin/stdout, one request line and one
/// response line at a time.
#[derive(Debug)]
pub struct LineProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl LineProcess {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(LineProcess { child, stdin, lines: rx, timeout })
    }

    pub fn request(&mut self, line: &str) -> Result<String, ScorerError> {
        writeln!(self.stdin, "{line}")?;
        self.stdin.flush()?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => Ok(reply),
            Ok(Err(e)) => Err(ScorerError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(ScorerError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ScorerError::Protocol("scorer process closed its output".into())),
        }
    }
}

impl Drop for LineProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Tabs and newlines would break the line protocol.
pub(crate) fn protocol_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Scorer backed by a child process speaking
/// `SCORE \t <question> \t <candidate>` → one number per line.
#[derive(Debug)]
pub struct ExternalScorer {
    process: Mutex<LineProcess>,
}

impl ExternalScorer {
    pub fn spawn(command: &str) -> Result<Self, ScorerError> {
        Self::with_timeout(command, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(command: &str, timeout: Duration) -> Result<Self, ScorerError> {
        Ok(ExternalScorer { process: Mutex::new(LineProcess::spawn(command, timeout)?) })
    }
}

impl Scorer for ExternalScorer {
    fn score(&self, question: &Question, candidate: &str) -> Result<f64, ScorerError> {
        let request = format!("SCORE\t{}\t{}", protocol_field(&question.text), protocol_field(candidate));
        let reply = self.process.lock().unwrap_or_else(|e| e.into_inner()).request(&request)?;
        reply
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ScorerError::Protocol(format!("expected a number, got `{reply}`")))
    }

    fn is_reentrant(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_from_child_process() {
        // answers the candidate's length
        let s = ExternalScorer::spawn("while IFS=\"$(printf '\\t')\" read -r tag q c; do echo ${#c}; done").unwrap();
        assert_eq!(s.score(&Question::new("q"), "abcd").unwrap(), 4.0);
        assert_eq!(s.score(&Question::new("q"), "ab").unwrap(), 2.0);
    }

    #[test]
    fn malformed_reply_is_a_protocol_error() {
        let s = ExternalScorer::spawn("while read -r l; do echo nope; done").unwrap();
        assert!(matches!(s.score(&Question::new("q"), "a"), Err(ScorerError::Protocol(_))));
    }

    #[test]
    fn silent_process_times_out() {
        let s = ExternalScorer::with_timeout("sleep 5", Duration::from_millis(100)).unwrap();
        assert!(matches!(s.score(&Question::new("q"), "a"), Err(ScorerError::Timeout(_))));
    }
}
