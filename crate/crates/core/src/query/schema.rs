use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::QueryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Integer,
    Real,
}

/// One column of a table: name, kind and inclusive span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    pub min: f64,
    pub max: f64,
}

impl Attribute {
    pub fn new(name: &str, kind: AttributeKind, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            min,
            max,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min
            && value <= self.max
            && (self.kind == AttributeKind::Real || value.fract() == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SchemaRepr {
    attributes: Vec<Attribute>,
}

/// Ordered attribute list; JSON form is `{"attributes": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

impl TryFrom<SchemaRepr> for AttributeSchema {
    type Error = QueryError;

    fn try_from(repr: SchemaRepr) -> Result<Self, Self::Error> {
        Self::new(repr.attributes)
    }
}

impl From<AttributeSchema> for SchemaRepr {
    fn from(schema: AttributeSchema) -> Self {
        SchemaRepr {
            attributes: schema.attributes,
        }
    }
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, QueryError> {
        if attributes.is_empty() {
            return Err(QueryError::InvalidSchema("no attributes".into()));
        }
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(QueryError::InvalidSchema(format!(
                    "duplicate attribute `{}`",
                    a.name
                )));
            }
            if !a.min.is_finite() || !a.max.is_finite() || a.min > a.max {
                return Err(QueryError::InvalidSchema(format!(
                    "attribute `{}` has invalid span [{}, {}]",
                    a.name, a.min, a.max
                )));
            }
        }
        Ok(Self { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, QueryError> {
        self.position(name)
            .ok_or_else(|| QueryError::UnknownAttribute(name.to_string()))
    }

    pub fn attribute(&self, index: usize) -> &Attribute {
        &self.attributes[index]
    }
}
