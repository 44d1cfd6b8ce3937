//! External problems driven over a child process's standard streams.
//!
//! Protocol: for each evaluation the parent writes the candidate point as
//! one line of `d` space-separated decimals to the child's stdin, and the
//! child answers with one line of `M + C` space-separated decimals
//! (objectives in the maximization convention, then constraints with
//! `<= 0` feasible).

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::{check_bounds, Problem, ProblemSpec};
use crate::{Error, Result};

pub struct SubprocessProblem {
    spec: ProblemSpec,
    child: Mutex<ChildIo>,
}

struct ChildIo {
    process: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl SubprocessProblem {
    /// Spawns `command` (program plus arguments) and evaluates through it.
    pub fn spawn(command: &[String], spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidConfig("empty subprocess command".into()))?;
        let mut process = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Evaluation(format!("failed to spawn {program}: {e}")))?;
        let stdin = process.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(process.stdout.take().expect("piped stdout"));
        Ok(Self { spec, child: Mutex::new(ChildIo { process, stdin, stdout }) })
    }
}

impl Problem for SubprocessProblem {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_bounds(&self.spec, x)?;
        let mut io = self.child.lock().expect("child io lock");
        let line: String =
            x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ") + "\n";
        io.stdin
            .write_all(line.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| Error::Evaluation(format!("writing to problem subprocess: {e}")))?;
        let mut reply = String::new();
        io.stdout
            .read_line(&mut reply)
            .map_err(|e| Error::Evaluation(format!("reading from problem subprocess: {e}")))?;
        if reply.is_empty() {
            return Err(Error::Evaluation("problem subprocess closed its output".into()));
        }
        let values: Vec<f64> = reply
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Evaluation(format!("bad value from subprocess: {e}")))?;
        let expected = self.spec.num_objectives + self.spec.num_constraints;
        if values.len() != expected {
            return Err(Error::Evaluation(format!(
                "subprocess returned {} values, expected {expected}",
                values.len()
            )));
        }
        let (objectives, constraints) = values.split_at(self.spec.num_objectives);
        Ok((objectives.to_vec(), constraints.to_vec()))
    }
}

impl Drop for SubprocessProblem {
    fn drop(&mut self) {
        if let Ok(mut io) = self.child.lock() {
            let _ = io.process.kill();
            let _ = io.process.wait();
        }
    }
}
