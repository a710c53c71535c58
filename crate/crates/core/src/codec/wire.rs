//! Binary framing for shares and responses.
//!
//! Every frame is a sequence of little-endian `u64` words:
//!
//! ```text
//! q | rows | cols | worker_id | alpha | len | residue_0 .. residue_{len-1}
//! ```
//!
//! with `len == rows * cols` and every residue `< q`.

use thiserror::Error;

use crate::field::{FieldMatrix, PrimeField};

use super::{Share, WorkerResponse};

const HEADER_WORDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("length prefix {len} disagrees with shape {rows}x{cols}")]
    LengthMismatch { len: u64, rows: u64, cols: u64 },
    #[error("invalid frame: {0}")]
    Invalid(String),
}

/// A decoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub modulus: u64,
    pub rows: u64,
    pub cols: u64,
    pub worker_id: u64,
    pub alpha: u64,
    pub residues: Vec<u64>,
}

impl Frame {
    pub fn new(worker_id: usize, alpha: u64, payload: &FieldMatrix) -> Self {
        Self {
            modulus: payload.field().modulus(),
            rows: payload.rows() as u64,
            cols: payload.cols() as u64,
            worker_id: worker_id as u64,
            alpha,
            residues: payload.as_slice().to_vec(),
        }
    }

    pub fn from_share(share: &Share, alpha: u64) -> Self {
        Self::new(share.worker, alpha, &share.payload)
    }

    /// `None` for stragglers, which send nothing.
    pub fn from_response(resp: &WorkerResponse) -> Option<Self> {
        resp.payload().map(|y| Self::new(resp.worker, resp.alpha.value(), y))
    }

    pub fn encoded_len(&self) -> usize {
        (HEADER_WORDS + self.residues.len()) * 8
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        for word in [
            self.modulus,
            self.rows,
            self.cols,
            self.worker_id,
            self.alpha,
            self.residues.len() as u64,
        ] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for r in &self.residues {
            out.extend_from_slice(&r.to_le_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }

    /// Parses one frame from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn read_from(bytes: &[u8]) -> Result<(Self, usize), WireError> {
        let word = |i: usize| -> Result<u64, WireError> {
            let start = i * 8;
            let chunk = bytes.get(start..start + 8).ok_or(WireError::Truncated {
                needed: start + 8,
                available: bytes.len(),
            })?;
            Ok(u64::from_le_bytes(chunk.try_into().expect("8-byte slice")))
        };
        let (modulus, rows, cols, worker_id, alpha, len) = (word(0)?, word(1)?, word(2)?, word(3)?, word(4)?, word(5)?);
        if rows.checked_mul(cols) != Some(len) {
            return Err(WireError::LengthMismatch { len, rows, cols });
        }
        let total = (len as usize)
            .checked_add(HEADER_WORDS)
            .and_then(|w| w.checked_mul(8))
            .ok_or_else(|| WireError::Invalid("length overflow".into()))?;
        if bytes.len() < total {
            return Err(WireError::Truncated {
                needed: total,
                available: bytes.len(),
            });
        }
        let residues = (0..len as usize)
            .map(|i| word(HEADER_WORDS + i))
            .collect::<Result<Vec<_>, _>>()?;
        let frame = Self {
            modulus,
            rows,
            cols,
            worker_id,
            alpha,
            residues,
        };
        frame.validate()?;
        Ok((frame, total))
    }

    fn validate(&self) -> Result<(), WireError> {
        let field = PrimeField::new(self.modulus).map_err(|e| WireError::Invalid(e.to_string()))?;
        if self.alpha >= field.modulus() {
            return Err(WireError::Invalid(format!("alpha {} >= q", self.alpha)));
        }
        if let Some(r) = self.residues.iter().find(|&&r| r >= field.modulus()) {
            return Err(WireError::Invalid(format!("residue {r} >= q")));
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> Result<FieldMatrix, WireError> {
        let field = PrimeField::new(self.modulus).map_err(|e| WireError::Invalid(e.to_string()))?;
        FieldMatrix::new(field, self.rows as usize, self.cols as usize, self.residues.clone())
            .map_err(|e| WireError::Invalid(e.to_string()))
    }
}

/// Parses a concatenation of frames.
pub fn decode_frames(mut bytes: &[u8]) -> Result<Vec<Frame>, WireError> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        let (frame, used) = Frame::read_from(bytes)?;
        frames.push(frame);
        bytes = &bytes[used..];
    }
    Ok(frames)
}
