//! Decision output.
//!
//! Decisions are written as JSON lines, one object per line, flushed per
//! line so an interrupted run leaves only complete records. Fields:
//!
//! | field            | type            | meaning                                   |
//! |------------------|-----------------|-------------------------------------------|
//! | `schema_version` | integer         | currently 1                               |
//! | `stream_id`      | string          | stream the frames came from               |
//! | `decision_id`    | integer         | 0-based, per run                          |
//! | `summary_seq`    | integer         | summary used, -1 on a cold start          |
//! | `frame_ids`      | integer array   | adjacent frames, chronological            |
//! | `subject`        | string          | behavior subject                          |
//! | `location`       | string          | location                                  |
//! | `cause`          | string          | likely cause or motivation                |
//! | `is_anomalous`   | bool            | `score >= threshold`                      |
//! | `score`          | number in [0,1] | reasoner confidence                       |
//! | `emitted_ts`     | number          | stream seconds when the decision was made |

use std::io::{self, Write};

use crate::model::Decision;

pub trait DecisionSink {
    fn emit(&mut self, decision: &Decision) -> io::Result<()>;
}

/// Writes one JSON object per line.
pub struct JsonlSink<W: Write> {
    out: W,
    written: u64,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out, written: 0 }
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn to_json_line(decision: &Decision) -> String {
    let mut line = serde_json::to_string(decision).expect("decision serializes");
    line.push('\n');
    line
}

impl<W: Write> DecisionSink for JsonlSink<W> {
    fn emit(&mut self, decision: &Decision) -> io::Result<()> {
        self.out.write_all(to_json_line(decision).as_bytes())?;
        self.out.flush()?;
        self.written += 1;
        Ok(())
    }
}

/// Collects decisions in memory.
impl DecisionSink for Vec<Decision> {
    fn emit(&mut self, decision: &Decision) -> io::Result<()> {
        self.push(decision.clone());
        Ok(())
    }
}
