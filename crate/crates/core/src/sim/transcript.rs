//! Message log of one protocol run and the costs metered from it.

use std::fmt;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::codec::{Frame, Topology};

use super::{AdversaryPlan, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Sharing,
    Computing,
    Reconstruction,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Sharing => "sharing",
            Phase::Computing => "computing",
            Phase::Reconstruction => "reconstruction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Source(usize),
    User,
    Worker(usize),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Source(i) => write!(f, "source:{i}"),
            Party::User => write!(f, "user"),
            Party::Worker(k) => write!(f, "worker:{k}"),
        }
    }
}

/// One message. The payload itself is kept as a wire frame so the whole run
/// can be dumped and replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub seq: usize,
    pub phase: Phase,
    pub from: Party,
    pub to: Party,
    /// Abstract time at which the message is delivered.
    pub tick: u64,
    pub elements: usize,
    pub digest: [u8; 32],
    /// For responses: whether the decoder consumed this message.
    pub used: bool,
    pub frame: Frame,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Decoded { used_workers: Vec<usize> },
    Failed { error: String },
}

/// Ordered log of every message in a run, together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub seed: u64,
    pub modulus: u64,
    pub topology: Topology,
    pub plan: AdversaryPlan,
    pub events: Vec<Event>,
    pub outcome: Outcome,
    /// Tick at which the decoder had everything it used.
    pub completion_tick: u64,
}

pub(crate) fn digest(frame: &Frame) -> [u8; 32] {
    Sha256::digest(frame.to_bytes()).into()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Transcript {
    /// One line per message plus a header and an outcome line.
    pub fn log_lines(&self) -> String {
        let t = &self.topology;
        let mut out = format!(
            "run seed={} q={} N={} K={} S={} X={} A={} B={} plan={}\n",
            self.seed, self.modulus, t.workers, t.blocks, t.sources, t.privacy, t.byzantine, t.stragglers, self.plan
        );
        for e in &self.events {
            let _ = writeln!(
                out,
                "{:>5} t={:<4} {:<9} {} -> {} elements={} used={} sha256={}",
                e.seq,
                e.tick,
                e.phase,
                e.from,
                e.to,
                e.elements,
                e.used,
                hex(&e.digest)
            );
        }
        match &self.outcome {
            Outcome::Decoded { used_workers } => {
                let _ = writeln!(out, "outcome decoded t={} used={used_workers:?}", self.completion_tick);
            }
            Outcome::Failed { error } => {
                let _ = writeln!(out, "outcome failed t={} error={error}", self.completion_tick);
            }
        }
        out
    }

    /// All message payloads, back to back, in wire format.
    pub fn dump_frames(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.events {
            e.frame.write_to(&mut out);
        }
        out
    }

    /// Digest over every event digest, in order.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for e in &self.events {
            h.update(e.digest);
            h.update([e.used as u8]);
        }
        h.finalize().into()
    }

    /// Confirms the communication pattern: sources and the user talk only to
    /// workers during sharing, workers talk only to the user afterwards.
    pub fn check_topology(&self) -> Result<(), SimError> {
        for e in &self.events {
            let ok = match (e.from, e.to) {
                (Party::Source(_) | Party::User, Party::Worker(_)) => e.phase == Phase::Sharing,
                (Party::Worker(_), Party::User) => e.phase == Phase::Computing,
                _ => false,
            };
            if !ok {
                return Err(SimError::Topology {
                    seq: e.seq,
                    from: e.from.to_string(),
                    to: e.to.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Communication metered from a transcript, in field elements.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// Elements uploaded by each source.
    pub source_upload: Vec<usize>,
    pub user_upload: usize,
    /// Elements of the responses the decoder consumed.
    pub user_download: usize,
    pub responses_used: usize,
    pub ticks: u64,
    pub bits_per_element: f64,
}

impl CostReport {
    /// Upload of the largest source; all sources upload the same in honest runs.
    pub fn max_source_upload(&self) -> usize {
        self.source_upload.iter().copied().max().unwrap_or(0)
    }

    pub fn user_download_bits(&self) -> f64 {
        self.user_download as f64 * self.bits_per_element
    }

    pub fn user_upload_bits(&self) -> f64 {
        self.user_upload as f64 * self.bits_per_element
    }
}

/// Counts elements per party. Every share is marginally uniform, so the
/// entropy of a message is its element count times `log2 q`.
pub fn meter_costs(transcript: &Transcript) -> Result<CostReport, SimError> {
    transcript.check_topology()?;
    let mut source_upload = vec![0; transcript.topology.sources];
    let mut user_upload = 0;
    let mut user_download = 0;
    let mut responses_used = 0;
    for e in &transcript.events {
        if e.elements != e.frame.residues.len() {
            return Err(SimError::Malformed(format!(
                "event {} claims {} elements but carries {}",
                e.seq,
                e.elements,
                e.frame.residues.len()
            )));
        }
        match e.from {
            Party::Source(i) => {
                let slot = source_upload
                    .get_mut(i)
                    .ok_or_else(|| SimError::Malformed(format!("event {} from unknown source {i}", e.seq)))?;
                *slot += e.elements;
            }
            Party::User => user_upload += e.elements,
            Party::Worker(_) if e.used => {
                user_download += e.elements;
                responses_used += 1;
            }
            Party::Worker(_) => {}
        }
    }
    if let Outcome::Decoded { used_workers } = &transcript.outcome {
        if used_workers.len() != responses_used {
            return Err(SimError::Malformed(format!(
                "outcome lists {} workers but {} responses are marked used",
                used_workers.len(),
                responses_used
            )));
        }
    }
    let bits_per_element = crate::field::PrimeField::new(transcript.modulus)
        .map_err(|e| SimError::Malformed(e.to_string()))?
        .bits_per_element();
    Ok(CostReport {
        source_upload,
        user_upload,
        user_download,
        responses_used,
        ticks: transcript.completion_tick,
        bits_per_element,
    })
}
