use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::DaySummary;

/// One line of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: usize,
    pub day: u32,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub outcome: Option<DaySummary>,
}

/// Newline-delimited JSON writer.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
