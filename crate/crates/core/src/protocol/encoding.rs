//! Canonical bytes for the public part of mechanism inputs.
//!
//! Layout: `u32` input count, then per input a tag byte and its body, all
//! integers little-endian and scalars as `f64` bits.
//!
//! * `1` filter box: `u32` bound count, bounds.
//! * `2` public points: `u32 n`, `u32 d`, `u8 labeled`, `n·d` coordinates,
//!   then `n` `u32` labels when labeled.
//! * `3` private points: `u32 n`, `u32 d`, `u8 labeled`.

use super::{ProtocolError, Visibility};
use crate::mechanisms::{Dataset, MechanismInput};
use crate::numeric::Real;
use crate::query::Formula;

const TAG_FILTER: u8 = 1;
const TAG_PUBLIC_POINTS: u8 = 2;
const TAG_PRIVATE_POINTS: u8 = 3;

/// One decoded public input.
#[derive(Debug, Clone, PartialEq)]
pub enum PublicInput {
    Filter(Formula<f64>),
    Points(Dataset<f64>),
    /// Only the shape of a private training set.
    Hidden {
        n: usize,
        d: usize,
        labeled: bool,
    },
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_inputs(inputs: &[MechanismInput<f64>], visibility: Visibility) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, inputs.len());
    for input in inputs {
        match input {
            MechanismInput::Filter(f) => {
                out.push(TAG_FILTER);
                put_u32(&mut out, f.bounds().len());
                for &b in f.bounds() {
                    b.write_le(&mut out);
                }
            }
            MechanismInput::Points(x) => {
                let public = visibility == Visibility::Public;
                out.push(if public {
                    TAG_PUBLIC_POINTS
                } else {
                    TAG_PRIVATE_POINTS
                });
                put_u32(&mut out, x.len());
                put_u32(&mut out, x.dim());
                out.push(u8::from(x.labels().is_some()));
                if public {
                    for &v in x.flat() {
                        v.write_le(&mut out);
                    }
                    for &l in x.labels().unwrap_or(&[]) {
                        put_u32(&mut out, l);
                    }
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ProtocolError::Encoding("truncated public inputs".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, ProtocolError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ProtocolError> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| ProtocolError::Encoding("length overflow".into()))?;
        Ok(self.take(len)?.chunks_exact(8).map(f64::read_le).collect())
    }

    fn flag(&mut self) -> Result<bool, ProtocolError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(ProtocolError::Encoding(format!("bad flag byte {other}"))),
        }
    }
}

pub fn decode_inputs(bytes: &[u8]) -> Result<Vec<PublicInput>, ProtocolError> {
    let bad = |e: &dyn std::fmt::Display| ProtocolError::Encoding(e.to_string());
    let mut r = Reader { bytes, at: 0 };
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        match r.u8()? {
            TAG_FILTER => {
                let len = r.u32()?;
                let bounds = r.f64s(len)?;
                out.push(PublicInput::Filter(
                    Formula::new(bounds).map_err(|e| bad(&e))?,
                ));
            }
            TAG_PUBLIC_POINTS => {
                let n = r.u32()?;
                let d = r.u32()?;
                let labeled = r.flag()?;
                let total = n
                    .checked_mul(d)
                    .ok_or_else(|| ProtocolError::Encoding("shape overflow".into()))?;
                let points = r.f64s(total)?;
                let labels = if labeled {
                    Some((0..n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?)
                } else {
                    None
                };
                let x = Dataset::from_flat(d, points, labels).map_err(|e| bad(&e))?;
                out.push(PublicInput::Points(x));
            }
            TAG_PRIVATE_POINTS => {
                let n = r.u32()?;
                let d = r.u32()?;
                let labeled = r.flag()?;
                out.push(PublicInput::Hidden { n, d, labeled });
            }
            tag => return Err(ProtocolError::Encoding(format!("unknown input tag {tag}"))),
        }
    }
    if r.at != bytes.len() {
        return Err(ProtocolError::Encoding(
            "trailing bytes in public inputs".into(),
        ));
    }
    Ok(out)
}
