use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::CovarianceMatrix;
use crate::numeric::{Op, Real, TraceRecorder};

pub const MAGIC: &[u8; 4] = b"PACS";
pub const VERSION: u8 = 1;

/// SHA-256 digest of a covariance encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Commitment(pub [u8; 32]);

impl Commitment {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Self(Sha256::digest(bytes).into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("commitment must be 64 lowercase hex characters")]
pub struct ParseCommitmentError;

impl FromStr for Commitment {
    type Err = ParseCommitmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.len() != 64 || !s.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(ParseCommitmentError);
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte =
                u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| ParseCommitmentError)?;
        }
        Ok(Self(out))
    }
}

impl Serialize for Commitment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Commitment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of 64-byte compression blocks SHA-256 spends on `len` bytes.
fn sha256_blocks(len: usize) -> usize {
    (len + 9).div_ceil(64)
}

/// Hashes the canonical encoding of `sigma`, charging one hash-block op per
/// compression block.
pub fn commit_sigma<T: Real>(sigma: &CovarianceMatrix<T>, rec: &mut TraceRecorder) -> Commitment {
    let bytes = sigma.serialize();
    for _ in 0..sha256_blocks(bytes.len()) {
        rec.record(Op::HashBlock, &[64]);
    }
    Commitment::of_bytes(&bytes)
}
