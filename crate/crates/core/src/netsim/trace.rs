use std::io::Write;

use serde::Serialize;

use super::DelayBreakdown;
use crate::constellation::SatelliteId;
use crate::error::{Error, Result};
use crate::features::Action;
use crate::traffic::Outcome;

/// One line of the episode trace: a single decision epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub slot: usize,
    pub request_id: u64,
    pub node: SatelliteId,
    pub action: Action,
    pub reward: f64,
    pub delay_breakdown: Option<DelayBreakdown>,
    pub outcome: Outcome,
}

pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;
}

/// JSON-lines trace writer.
pub struct JsonlTrace<W: Write> {
    out: W,
}

impl<W: Write> JsonlTrace<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for JsonlTrace<W> {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n").map_err(|e| Error::io("trace", e))
    }
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}
