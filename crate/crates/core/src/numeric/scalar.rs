//! Scalar abstraction shared by every traced computation.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Binary floating-point scalar usable inside a traced computation.
///
/// Circuit-side code only touches `+`, `-`, `*`, `/` and `sqrt`, all of which
/// are correctly rounded, so results are bit-reproducible for a given width.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Width of the little-endian encoding in bytes.
    const BYTES: usize;

    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads exactly `Self::BYTES` bytes. Panics on a short slice.
    fn read_le(bytes: &[u8]) -> Self;

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

macro_rules! impl_real {
    ($t:ty, $n:expr) => {
        impl Real for $t {
            const BYTES: usize = $n;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                let mut buf = [0u8; $n];
                buf.copy_from_slice(&bytes[..$n]);
                <$t>::from_le_bytes(buf)
            }
        }
    };
}

impl_real!(f32, 4);
impl_real!(f64, 8);

/// Rejects NaN and infinities before a value enters a traced computation.
pub fn ensure_finite<T: Real>(values: &[T]) -> Result<(), super::NumericError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(super::NumericError::NonFinite { index }),
        None => Ok(()),
    }
}
