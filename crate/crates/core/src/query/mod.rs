//! Query text, filter ASTs and fixed-size `Formula` interval boxes.
//!
//! Query syntax:
//!
//! ```text
//! query   := function "of" attribute "with" filter
//! filter  := unary ("AND" unary)*
//! unary   := "NOT" unary | primary
//! primary := "true" | "∅" | "(" filter ")" | attribute (">" | "=") number
//! ```
//!
//! Keywords are case-insensitive, attribute names are not. `AND` is
//! left-associative and `NOT` binds tighter than `AND`.

mod formula;
mod parser;
mod schema;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub(crate) use formula::accept_indicator;
pub use formula::{compile_to_formula, eval_formula, random_formula, Formula};
pub use parser::{parse_filter, parse_query};
pub use schema::{Attribute, AttributeKind, AttributeSchema};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("filter is not reducible to an interval box: {0}")]
    NotBoxReducible(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid formula: {0}")]
    InvalidFormula(String),
}

/// Aggregate functions a query may apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatFunction {
    Average,
    Median,
}

impl StatFunction {
    pub const ALL: [StatFunction; 2] = [StatFunction::Average, StatFunction::Median];

    pub fn name(self) -> &'static str {
        match self {
            StatFunction::Average => "average",
            StatFunction::Median => "median",
        }
    }
}

impl fmt::Display for StatFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatFunction {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| QueryError::UnknownFunction(s.to_string()))
    }
}

/// Filter syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Filter {
    Empty,
    Gt(String, f64),
    Eq(String, f64),
    Not(Box<Filter>),
    And(Box<Filter>, Box<Filter>),
}

impl Filter {
    pub fn gt(attr: &str, value: f64) -> Self {
        Filter::Gt(attr.to_string(), value)
    }

    pub fn eq(attr: &str, value: f64) -> Self {
        Filter::Eq(attr.to_string(), value)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Filter) -> Self {
        Filter::Not(Box::new(inner))
    }

    pub fn and(lhs: Filter, rhs: Filter) -> Self {
        Filter::And(Box::new(lhs), Box::new(rhs))
    }

    /// Direct evaluation against a row in schema order. Verifier-side oracle,
    /// not traced.
    pub fn matches(&self, schema: &AttributeSchema, row: &[f64]) -> Result<bool, QueryError> {
        if row.len() != schema.len() {
            return Err(QueryError::DimensionMismatch {
                expected: schema.len(),
                found: row.len(),
            });
        }
        self.eval(schema, row)
    }

    fn eval(&self, schema: &AttributeSchema, row: &[f64]) -> Result<bool, QueryError> {
        Ok(match self {
            Filter::Empty => true,
            Filter::Gt(a, c) => row[schema.require(a)?] > *c,
            Filter::Eq(a, c) => row[schema.require(a)?] == *c,
            Filter::Not(inner) => !inner.eval(schema, row)?,
            Filter::And(l, r) => {
                let left = l.eval(schema, row)?;
                let right = r.eval(schema, row)?;
                left && right
            }
        })
    }

    fn fmt_unary(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::And(..) => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::Empty => f.write_str("true"),
            Filter::Gt(a, c) => write!(f, "{a}>{c}"),
            Filter::Eq(a, c) => write!(f, "{a}={c}"),
            Filter::Not(inner) => {
                f.write_str("NOT ")?;
                inner.fmt_unary(f)
            }
            Filter::And(l, r) => {
                write!(f, "{l} AND ")?;
                r.fmt_unary(f)
            }
        }
    }
}

/// `function of attribute with filter`.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub function: StatFunction,
    pub attribute: String,
    pub filter: Filter,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} of {} with {}",
            self.function, self.attribute, self.filter
        )
    }
}
