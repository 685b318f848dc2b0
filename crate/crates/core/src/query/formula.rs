use serde::{Deserialize, Serialize};

use super::{AttributeKind, AttributeSchema, Filter, QueryError};
use crate::numeric::{Real, SeededRng, TraceRecorder};

/// Interval box over all attributes: attribute `k` is accepted when
/// `bounds[2k] <= value < bounds[2k + 1]`.
///
/// Serialized as a flat JSON array in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(
        serialize = "T: Real + Serialize",
        deserialize = "T: Real + Deserialize<'de>"
    )
)]
pub struct Formula<T = f64> {
    bounds: Vec<T>,
}

impl<T: Real> TryFrom<Vec<T>> for Formula<T> {
    type Error = QueryError;

    fn try_from(bounds: Vec<T>) -> Result<Self, Self::Error> {
        Self::new(bounds)
    }
}

impl<T> From<Formula<T>> for Vec<T> {
    fn from(f: Formula<T>) -> Self {
        f.bounds
    }
}

impl<T: Real> Formula<T> {
    pub fn new(bounds: Vec<T>) -> Result<Self, QueryError> {
        if bounds.is_empty() || !bounds.len().is_multiple_of(2) {
            return Err(QueryError::InvalidFormula(format!(
                "expected an even, non-zero number of bounds, found {}",
                bounds.len()
            )));
        }
        for (k, pair) in bounds.chunks_exact(2).enumerate() {
            if pair.iter().any(|b| b.is_nan()) || pair[0] > pair[1] {
                return Err(QueryError::InvalidFormula(format!(
                    "attribute {k}: lower bound {} exceeds upper bound {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// Box accepting every row within the schema spans.
    pub fn full(schema: &AttributeSchema) -> Self {
        let bounds = schema
            .attributes()
            .iter()
            .flat_map(|a| [T::lit(a.min), T::lit(a.max + 1.0)])
            .collect();
        Self { bounds }
    }

    pub fn bounds(&self) -> &[T] {
        &self.bounds
    }

    pub fn attribute_count(&self) -> usize {
        self.bounds.len() / 2
    }

    pub fn lower(&self, k: usize) -> T {
        self.bounds[2 * k]
    }

    pub fn upper(&self, k: usize) -> T {
        self.bounds[2 * k + 1]
    }

    /// Untraced acceptance test.
    pub fn accepts(&self, row: &[T]) -> bool {
        row.len() == self.attribute_count()
            && row
                .iter()
                .enumerate()
                .all(|(k, &v)| self.lower(k) <= v && v < self.upper(k))
    }

    pub fn ensure_schema(&self, schema: &AttributeSchema) -> Result<(), QueryError> {
        if self.bounds.len() == 2 * schema.len() {
            Ok(())
        } else {
            Err(QueryError::DimensionMismatch {
                expected: 2 * schema.len(),
                found: self.bounds.len(),
            })
        }
    }
}

/// Branch-free acceptance indicator (1 or 0), traced.
pub fn eval_formula<T: Real>(
    f: &Formula<T>,
    row: &[T],
    rec: &mut TraceRecorder,
) -> Result<T, QueryError> {
    if row.len() != f.attribute_count() {
        return Err(QueryError::DimensionMismatch {
            expected: f.attribute_count(),
            found: row.len(),
        });
    }
    Ok(accept_indicator(f, row, rec))
}

/// [`eval_formula`] without the dimension check, for callers that validated
/// shapes up front.
pub(crate) fn accept_indicator<T: Real>(f: &Formula<T>, row: &[T], rec: &mut TraceRecorder) -> T {
    let mut acc = T::one();
    for (k, &v) in row.iter().enumerate() {
        let above = rec.le(f.lower(k), v);
        let below = rec.lt(v, f.upper(k));
        let a: T = rec.indicator(above);
        let b: T = rec.indicator(below);
        acc = rec.mul(acc, a);
        acc = rec.mul(acc, b);
    }
    acc
}

#[derive(Debug, Clone, Copy)]
enum Literal<'a> {
    Gt(&'a str, f64),
    AtMost(&'a str, f64),
    Eq(&'a str, f64),
}

fn collect_literals<'a>(filter: &'a Filter, out: &mut Vec<Literal<'a>>) -> Result<(), QueryError> {
    match filter {
        Filter::Empty => Ok(()),
        Filter::Gt(a, c) => {
            out.push(Literal::Gt(a, *c));
            Ok(())
        }
        Filter::Eq(a, c) => {
            out.push(Literal::Eq(a, *c));
            Ok(())
        }
        Filter::And(l, r) => {
            collect_literals(l, out)?;
            collect_literals(r, out)
        }
        Filter::Not(inner) => match inner.as_ref() {
            Filter::Gt(a, c) => {
                out.push(Literal::AtMost(a, *c));
                Ok(())
            }
            Filter::Eq(..) => Err(QueryError::NotBoxReducible(format!(
                "`{filter}`: negated equality is a union of intervals"
            ))),
            _ => Err(QueryError::NotBoxReducible(format!(
                "`{filter}`: NOT is only allowed directly above a comparison"
            ))),
        },
    }
}

/// Smallest admissible value strictly greater than `c` for the attribute kind.
fn strictly_above(kind: AttributeKind, c: f64) -> f64 {
    match kind {
        AttributeKind::Integer => c.floor() + 1.0,
        AttributeKind::Real => c.next_up(),
    }
}

/// Compiles a conjunction of (possibly negated) comparisons into an interval
/// box. Unconstrained attributes get `[min, max + 1)`.
pub fn compile_to_formula<T: Real>(
    filter: &Filter,
    schema: &AttributeSchema,
) -> Result<Formula<T>, QueryError> {
    let mut literals = Vec::new();
    collect_literals(filter, &mut literals)?;

    let mut lo: Vec<f64> = schema.attributes().iter().map(|a| a.min).collect();
    let mut hi: Vec<f64> = schema.attributes().iter().map(|a| a.max + 1.0).collect();
    for lit in literals {
        let (name, c) = match lit {
            Literal::Gt(a, c) | Literal::AtMost(a, c) | Literal::Eq(a, c) => (a, c),
        };
        let k = schema.require(name)?;
        let kind = schema.attribute(k).kind;
        match lit {
            Literal::Gt(..) => lo[k] = lo[k].max(strictly_above(kind, c)),
            Literal::AtMost(..) => hi[k] = hi[k].min(strictly_above(kind, c)),
            Literal::Eq(..) => {
                if kind == AttributeKind::Real {
                    return Err(QueryError::NotBoxReducible(format!(
                        "equality on real attribute `{name}`"
                    )));
                }
                if c.fract() == 0.0 {
                    lo[k] = lo[k].max(c);
                    hi[k] = hi[k].min(c + 1.0);
                } else {
                    // no integer equals c
                    hi[k] = lo[k];
                }
            }
        }
    }
    let mut bounds = Vec::with_capacity(2 * schema.len());
    for k in 0..schema.len() {
        // an empty intersection collapses to the empty interval [lo, lo)
        let upper = if hi[k] < lo[k] { lo[k] } else { hi[k] };
        bounds.push(T::lit(lo[k]));
        bounds.push(T::lit(upper));
    }
    Formula::new(bounds)
}

/// Random box: per attribute, two uniform draws on the integer span, sorted.
/// Verifier-side.
pub fn random_formula<T: Real>(schema: &AttributeSchema, rng: &mut SeededRng) -> Formula<T> {
    let mut bounds = Vec::with_capacity(2 * schema.len());
    for attr in schema.attributes() {
        let lo_int = attr.min.ceil();
        let hi_int = attr.max.floor();
        let (a, b) = if lo_int <= hi_int {
            (
                rng.int_inclusive(lo_int as i64, hi_int as i64) as f64,
                rng.int_inclusive(lo_int as i64, hi_int as i64) as f64,
            )
        } else {
            // span contains no integer
            let width = attr.max - attr.min;
            (
                attr.min + width * rng.next_f64(),
                attr.min + width * rng.next_f64(),
            )
        };
        bounds.push(T::lit(a.min(b)));
        bounds.push(T::lit(a.max(b)));
    }
    Formula { bounds }
}
