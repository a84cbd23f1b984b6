//! One JSON object per line, one line per planner run. Infinite times and
//! costs (unsuccessful runs) are written as `null`.

use std::io::{BufRead, Write};

use fdit::PlanOutcome;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub schema_version: u32,
    pub planner: String,
    pub env: String,
    pub dimension: usize,
    pub seed: u64,
    pub success: bool,
    /// Seconds from planner start to the first solution.
    #[serde(with = "infinite_as_null")]
    pub t_init: f64,
    #[serde(with = "infinite_as_null")]
    pub c_init: f64,
    /// Incumbent cost when the budget expired.
    #[serde(with = "infinite_as_null")]
    pub c_final: f64,
    /// `(time, cost)` of every emitted solution.
    pub trace: Vec<(f64, f64)>,
}

impl RunRecord {
    pub fn from_outcome(
        planner: &str,
        env: &str,
        dimension: usize,
        seed: u64,
        outcome: &PlanOutcome,
    ) -> Self {
        let first = outcome.first();
        let best = outcome.best();
        RunRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            planner: planner.to_string(),
            env: env.to_string(),
            dimension,
            seed,
            success: first.is_some(),
            t_init: first.map_or(f64::INFINITY, |s| s.time),
            c_init: first.map_or(f64::INFINITY, |s| s.cost),
            c_final: best.map_or(f64::INFINITY, |s| s.cost),
            trace: outcome.solutions.iter().map(|s| (s.time, s.cost)).collect(),
        }
    }

    /// Checks the record's internal consistency.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.schema_version != RECORD_SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema version {}",
                self.schema_version
            ));
        }
        if self.success != self.c_init.is_finite() || self.success == self.trace.is_empty() {
            return Err("success flag disagrees with costs".into());
        }
        if !self.success && (self.t_init.is_finite() || self.c_final.is_finite()) {
            return Err("unsuccessful run with finite time or cost".into());
        }
        if self.trace.windows(2).any(|w| !(w[1].1 < w[0].1)) {
            return Err("trace costs are not strictly decreasing".into());
        }
        if let (Some(first), Some(last)) = (self.trace.first(), self.trace.last()) {
            if first.1 != self.c_init || last.1 != self.c_final || first.0 != self.t_init {
                return Err("trace endpoints disagree with summary fields".into());
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

pub fn write_record<W: Write>(out: &mut W, record: &RunRecord) -> std::io::Result<()> {
    out.write_all(record.to_json_line().as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Parses JSON lines, skipping blank lines. Every record is validated.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line).map_err(|e| BenchError::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        record.validate().map_err(|reason| BenchError::Record {
            line: i + 1,
            reason,
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn failed() -> RunRecord {
        RunRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            planner: "fdit".into(),
            env: "dw".into(),
            dimension: 4,
            seed: 3,
            success: false,
            t_init: f64::INFINITY,
            c_init: f64::INFINITY,
            c_final: f64::INFINITY,
            trace: vec![],
        }
    }

    #[test]
    fn infinities_are_null() {
        let line = failed().to_json_line();
        assert!(line.contains(r#""t_init":null,"c_init":null,"c_final":null"#));
        let back = read_records(line.as_bytes()).unwrap();
        assert_eq!(back, vec![failed()]);
    }

    #[test]
    fn successful_record_round_trips() {
        let r = RunRecord {
            success: true,
            t_init: 0.012,
            c_init: 1.3,
            c_final: 1.1000000000000003,
            trace: vec![(0.012, 1.3), (0.2, 1.1000000000000003)],
            ..failed()
        };
        r.validate().unwrap();
        let text = format!("{}\n\n{}\n", r.to_json_line(), failed().to_json_line());
        assert_eq!(read_records(text.as_bytes()).unwrap(), vec![r, failed()]);
    }

    #[test]
    fn inconsistent_rows_are_rejected() {
        let mut r = failed();
        r.success = true;
        assert!(read_records(r.to_json_line().as_bytes()).is_err());
        let rising = RunRecord {
            success: true,
            t_init: 0.1,
            c_init: 1.0,
            c_final: 1.2,
            trace: vec![(0.1, 1.0), (0.2, 1.2)],
            ..failed()
        };
        assert!(rising.validate().is_err());
        let bad = r#"{"schema_version":1,"planner":"fdit"}"#;
        assert!(matches!(
            read_records(bad.as_bytes()),
            Err(BenchError::Record { line: 1, .. })
        ));
    }
}
