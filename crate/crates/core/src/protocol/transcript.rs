//! Round-stamped log of every message, with per-direction bit costs.
//!
//! Serialized as JSON lines with 0-based worker, group, sample and
//! coordinate indices.

use std::io::{self, Write};

use serde_json::{json, Value};

use crate::alphabet::GradientVec;
use crate::assignment::WorkerId;
use crate::workers::{EncodingRequest, WorkerResponse};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Message {
        request: EncodingRequest,
        response: WorkerResponse,
    },
    LocalComputation {
        sample: usize,
        coord: usize,
        value: GradientVec,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptRecord {
    pub round: u64,
    pub group: usize,
    pub worker: Option<WorkerId>,
    pub entry: Entry,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
}

impl TranscriptRecord {
    pub fn kind(&self) -> &'static str {
        match &self.entry {
            Entry::Message { request, .. } => match request {
                EncodingRequest::InitialSum => "initial_sum",
                EncodingRequest::PartialSum { .. } => "partial_sum",
                EncodingRequest::Vote { .. } => "vote",
            },
            Entry::LocalComputation { .. } => "local_computation",
        }
    }

    pub fn to_json(&self) -> Value {
        let payload = match &self.entry {
            Entry::Message { request, response } => {
                let response = response_json(response);
                match request {
                    EncodingRequest::InitialSum => json!({ "response": response }),
                    EncodingRequest::PartialSum { range, coord } => json!({
                        "lo": range.lo - 1, "hi": range.hi - 1, "coord": coord - 1, "response": response,
                    }),
                    EncodingRequest::Vote {
                        proposed,
                        range,
                        coord,
                    } => json!({
                        "lo": range.lo - 1, "hi": range.hi - 1, "coord": coord - 1,
                        "proposed": proposed.value(), "response": response,
                    }),
                }
            }
            Entry::LocalComputation {
                sample,
                coord,
                value,
            } => {
                json!({ "sample": sample - 1, "coord": coord - 1, "value": value.values() })
            }
        };
        json!({
            "round": self.round,
            "group": self.group - 1,
            "worker": self.worker.map(|w| w.0 - 1),
            "kind": self.kind(),
            "payload": payload,
            "uplink_bits": self.uplink_bits,
            "downlink_bits": self.downlink_bits,
        })
    }
}

fn response_json(r: &WorkerResponse) -> Value {
    match r {
        WorkerResponse::Gradient(g) => json!({ "gradient": g.values() }),
        WorkerResponse::Sym(s) => json!({ "symbol": s.value() }),
        WorkerResponse::Bit(b) => json!({ "bit": b }),
        WorkerResponse::Silent => Value::Null,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
    local_indices: Vec<usize>,
    local_values: Vec<GradientVec>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TranscriptRecord) {
        if let Entry::LocalComputation { sample, value, .. } = &record.entry {
            self.local_indices.push(*sample);
            self.local_values.push(value.clone());
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    /// Sample indices computed locally by the main node, in order.
    pub fn local_indices(&self) -> &[usize] {
        &self.local_indices
    }

    pub fn local_values(&self) -> &[GradientVec] {
        &self.local_values
    }

    /// Uplink bits sent after the initial round.
    pub fn kappa_bits(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| r.round > 0)
            .map(|r| r.uplink_bits)
            .sum()
    }

    pub fn initial_bits(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| r.round == 0)
            .map(|r| r.uplink_bits)
            .sum()
    }

    pub fn downlink_bits(&self) -> u64 {
        self.records.iter().map(|r| r.downlink_bits).sum()
    }

    pub fn last_round(&self) -> u64 {
        self.records.iter().map(|r| r.round).max().unwrap_or(0)
    }

    pub fn write_json_lines<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, &r.to_json())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}
