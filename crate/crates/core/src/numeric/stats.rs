use super::{NumericError, Real, TraceRecorder};

/// Unbiased sample variance `Σ(x − x̄)² / (m − 1)`, two-pass, traced.
pub fn variance<T: Real>(samples: &[T], rec: &mut TraceRecorder) -> Result<T, NumericError> {
    let m = samples.len();
    if m < 2 {
        return Err(NumericError::TooFewSamples {
            needed: 2,
            found: m,
        });
    }
    let mut sum = T::zero();
    for &x in samples {
        sum = rec.add(sum, x);
    }
    let mean = rec.div(sum, T::from_count(m));
    let mut ss = T::zero();
    for &x in samples {
        let d = rec.sub(x, mean);
        let sq = rec.mul(d, d);
        ss = rec.add(ss, sq);
    }
    Ok(rec.div(ss, T::from_count(m - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(xs: &[f64]) -> Result<f64, NumericError> {
        variance(xs, &mut TraceRecorder::new())
    }

    #[test]
    fn examples() {
        assert_eq!(var(&[3.5, 3.5, 3.5]).unwrap(), 0.0);
        assert_eq!(var(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(var(&[0.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            var(&[1.0]),
            Err(NumericError::TooFewSamples {
                needed: 2,
                found: 1
            })
        );
    }

    #[test]
    fn trace_depends_only_on_length() {
        let mut a = TraceRecorder::new();
        let mut b = TraceRecorder::new();
        variance(&[1.0, 5.0, -2.0], &mut a).unwrap();
        variance(&[0.0, 0.0, 0.0], &mut b).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut c = TraceRecorder::new();
        variance(&[1.0, 5.0, -2.0, 4.0], &mut c).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
