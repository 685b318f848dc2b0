//! Filtered table statistics evaluated without data-dependent branches.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MechanismError;
use crate::numeric::{ensure_finite, Real, TraceRecorder, Vector};
use crate::query::{accept_indicator, AttributeSchema, Formula, QueryError, StatFunction};

/// Rows of a table with a fixed schema, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DbTable<T = f64> {
    schema: AttributeSchema,
    cells: Vec<T>,
}

impl<T: Real> DbTable<T> {
    pub fn new(schema: AttributeSchema, rows: Vec<Vec<T>>) -> Result<Self, MechanismError> {
        let width = schema.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(MechanismError::DimensionMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            for (attr, &v) in schema.attributes().iter().zip(row) {
                if !attr.contains(v.to_f64_lossy()) {
                    return Err(MechanismError::SchemaMismatch(format!(
                        "row {r}: {} = {v} outside [{}, {}]",
                        attr.name, attr.min, attr.max
                    )));
                }
            }
            cells.extend_from_slice(row);
        }
        ensure_finite(&cells)?;
        Ok(Self { schema, cells })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.cells.len() / self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.schema.len();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.cells.chunks_exact(self.schema.len())
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = T> + '_ {
        self.rows().map(move |r| r[k])
    }

    /// Same schema, different cell values.
    pub fn with_rows(&self, rows: Vec<Vec<T>>) -> Result<Self, MechanismError> {
        Self::new(self.schema.clone(), rows)
    }
}

/// One `function of attribute` output coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpecEntry {
    pub function: StatFunction,
    pub attribute: String,
}

impl SpecEntry {
    pub fn new(function: StatFunction, attribute: &str) -> Self {
        Self {
            function,
            attribute: attribute.to_string(),
        }
    }
}

impl fmt::Display for SpecEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {}", self.function, self.attribute)
    }
}

impl FromStr for SpecEntry {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        match words.as_slice() {
            [function, of, attribute] if of.eq_ignore_ascii_case("of") => Ok(Self {
                function: function.parse()?,
                attribute: attribute.to_string(),
            }),
            _ => Err(QueryError::Syntax {
                position: 0,
                message: format!("expected `function of attribute`, got `{s}`"),
            }),
        }
    }
}

impl TryFrom<String> for SpecEntry {
    type Error = QueryError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SpecEntry> for String {
    fn from(e: SpecEntry) -> Self {
        e.to_string()
    }
}

/// Ordered list of statistics; one output coordinate per entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MechanismSpec {
    pub entries: Vec<SpecEntry>,
}

impl MechanismSpec {
    pub fn new(entries: Vec<SpecEntry>) -> Result<Self, MechanismError> {
        let spec = Self { entries };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        if self.entries.is_empty() {
            return Err(MechanismError::InvalidConfig(
                "empty statistics spec".into(),
            ));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.entries.len()
    }

    fn columns(&self, schema: &AttributeSchema) -> Result<Vec<usize>, MechanismError> {
        self.entries
            .iter()
            .map(|e| {
                schema.position(&e.attribute).ok_or_else(|| {
                    MechanismError::SchemaMismatch(format!(
                        "attribute `{}` is not in the table",
                        e.attribute
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbStatsConfig {
    pub spec: MechanismSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbStats<T = f64> {
    pub values: Vector<T>,
    pub match_count: usize,
    /// False when no row matched; every value is then 0.
    pub valid: bool,
}

/// In-place ascending bitonic sort; `keys.len()` must be a power of two.
pub fn bitonic_sort<T: Real>(keys: &mut [T], rec: &mut TraceRecorder) {
    let n = keys.len();
    assert!(
        n.is_power_of_two(),
        "bitonic sort needs a power-of-two length"
    );
    let mut k = 2;
    while k <= n {
        let mut j = k / 2;
        while j > 0 {
            for i in 0..n {
                let l = i ^ j;
                if l <= i {
                    continue;
                }
                let (a, b) = (keys[i], keys[l]);
                let swap = if i & k == 0 {
                    rec.lt(b, a)
                } else {
                    rec.lt(a, b)
                };
                keys[i] = rec.select(swap, b, a);
                keys[l] = rec.select(swap, a, b);
            }
            j /= 2;
        }
        k *= 2;
    }
}

/// Evaluates every spec entry over the rows accepted by `f`.
///
/// Averages divide the masked sum by `max(count, 1)`. Medians sort the
/// column with rejected rows mapped to `+∞` and pick rank `⌈count/2⌉ − 1`.
pub fn db_stat_eval<T: Real>(
    table: &DbTable<T>,
    spec: &MechanismSpec,
    f: &Formula<T>,
    rec: &mut TraceRecorder,
) -> Result<DbStats<T>, MechanismError> {
    spec.validate()?;
    let columns = spec.columns(table.schema())?;
    if f.attribute_count() != table.schema().len() {
        return Err(MechanismError::SchemaMismatch(format!(
            "filter has {} attributes, table has {}",
            f.attribute_count(),
            table.schema().len()
        )));
    }

    let mut indicators = Vec::with_capacity(table.len());
    let mut count = T::zero();
    for row in table.rows() {
        let ind = accept_indicator(f, row, rec);
        count = rec.add(count, ind);
        indicators.push(ind);
    }
    let nonempty = rec.le(T::one(), count);

    let mut values = Vec::with_capacity(columns.len());
    for (entry, &k) in spec.entries.iter().zip(&columns) {
        let v = match entry.function {
            StatFunction::Average => {
                let mut sum = T::zero();
                for (row, &ind) in table.rows().zip(&indicators) {
                    let t = rec.mul(ind, row[k]);
                    sum = rec.add(sum, t);
                }
                let denom = rec.select(nonempty, count, T::one());
                rec.div(sum, denom)
            }
            StatFunction::Median => masked_lower_median(table, k, &indicators, count, rec),
        };
        values.push(v);
    }

    Ok(DbStats {
        values: Vector::from_trusted(values),
        match_count: count.to_f64_lossy() as usize,
        valid: nonempty,
    })
}

fn masked_lower_median<T: Real>(
    table: &DbTable<T>,
    k: usize,
    indicators: &[T],
    count: T,
    rec: &mut TraceRecorder,
) -> T {
    let padded = table.len().next_power_of_two();
    let mut keys = vec![T::infinity(); padded];
    for ((slot, row), &ind) in keys.iter_mut().zip(table.rows()).zip(indicators) {
        let hit = rec.eq(ind, T::one());
        *slot = rec.select(hit, row[k], T::infinity());
    }
    bitonic_sort(&mut keys, rec);

    // rank i is selected when 2i < count <= 2i + 2; nothing matches count 0
    let mut acc = T::zero();
    for (i, &key) in keys.iter().enumerate() {
        let lower = rec.lt(T::from_count(2 * i), count);
        let upper = rec.le(count, T::from_count(2 * i + 2));
        let hit = rec.and(lower, upper);
        acc = rec.select(hit, key, acc);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;
    use crate::query::{compile_to_formula, parse_query, random_formula, Attribute, AttributeKind};

    fn schema() -> AttributeSchema {
        AttributeSchema::new(vec![
            Attribute::new("Age", AttributeKind::Integer, 17.0, 65.0),
            Attribute::new("Wealth", AttributeKind::Integer, 6000.0, 140000.0),
        ])
        .unwrap()
    }

    fn people() -> DbTable<f64> {
        DbTable::new(
            schema(),
            vec![
                vec![17.0, 10000.0],
                vec![65.0, 140000.0],
                vec![19.0, 6000.0],
                vec![47.0, 50000.0],
            ],
        )
        .unwrap()
    }

    fn spec(text: &[&str]) -> MechanismSpec {
        MechanismSpec::new(text.iter().map(|s| s.parse().unwrap()).collect()).unwrap()
    }

    /// Filter first, then aggregate in row order.
    fn brute_force(
        table: &DbTable<f64>,
        spec: &MechanismSpec,
        f: &Formula<f64>,
    ) -> (Vec<f64>, usize) {
        let hits: Vec<&[f64]> = table.rows().filter(|r| f.accepts(r)).collect();
        let values = spec
            .entries
            .iter()
            .map(|e| {
                let k = table.schema().position(&e.attribute).unwrap();
                let mut col: Vec<f64> = hits.iter().map(|r| r[k]).collect();
                if col.is_empty() {
                    return 0.0;
                }
                match e.function {
                    StatFunction::Average => {
                        let mut s = 0.0;
                        for v in &col {
                            s += v;
                        }
                        s / col.len() as f64
                    }
                    StatFunction::Median => {
                        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        col[col.len().div_ceil(2) - 1]
                    }
                }
            })
            .collect();
        (values, hits.len())
    }

    #[test]
    fn four_row_table() {
        let t = people();
        let s = spec(&["average of Age", "median of Wealth"]);
        let q = parse_query("average of Age with Age>25", &schema()).unwrap();
        let f = compile_to_formula(&q.filter, &schema()).unwrap();
        let out = db_stat_eval(&t, &s, &f, &mut TraceRecorder::new()).unwrap();
        assert_eq!(out.values.as_slice(), &[56.0, 50000.0]);
        assert_eq!(out.match_count, 2);
        assert!(out.valid);

        let q = parse_query("average of Age with Wealth>11000", &schema()).unwrap();
        let f = compile_to_formula(&q.filter, &schema()).unwrap();
        let out = db_stat_eval(
            &t,
            &spec(&["average of Age"]),
            &f,
            &mut TraceRecorder::new(),
        )
        .unwrap();
        assert_eq!(out.values.as_slice(), &[56.0]);
        assert_eq!(out.match_count, 2);
    }

    #[test]
    fn empty_match_is_zero_and_invalid() {
        let f = Formula::new(vec![70.0, 71.0, 6000.0, 140001.0]).unwrap();
        let s = spec(&["average of Age", "median of Wealth"]);
        let out = db_stat_eval(&people(), &s, &f, &mut TraceRecorder::new()).unwrap();
        assert_eq!(out.values.as_slice(), &[0.0, 0.0]);
        assert_eq!(out.match_count, 0);
        assert!(!out.valid);
    }

    #[test]
    fn schema_mismatch() {
        let f = Formula::full(&schema());
        let err = db_stat_eval(
            &people(),
            &spec(&["median of Height"]),
            &f,
            &mut TraceRecorder::new(),
        );
        assert!(matches!(err, Err(MechanismError::SchemaMismatch(_))));
        let short = Formula::new(vec![0.0, 1.0]).unwrap();
        let err = db_stat_eval(
            &people(),
            &spec(&["median of Age"]),
            &short,
            &mut TraceRecorder::new(),
        );
        assert!(matches!(err, Err(MechanismError::SchemaMismatch(_))));
    }

    #[test]
    fn table_validation() {
        assert!(DbTable::new(schema(), vec![vec![16.0, 10000.0]]).is_err());
        assert!(DbTable::new(schema(), vec![vec![20.0]]).is_err());
    }

    #[test]
    fn bitonic_sorts() {
        let mut rng = SeededRng::from_u64(9);
        for n in [1usize, 2, 4, 8, 32] {
            let mut keys: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            keys[0] = f64::INFINITY;
            let mut expected = keys.clone();
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            bitonic_sort(&mut keys, &mut TraceRecorder::new());
            assert_eq!(keys, expected);
        }
    }

    #[test]
    fn random_tables_match_brute_force() {
        let mut rng = SeededRng::from_u64(21);
        let s = spec(&["average of Age", "median of Wealth", "median of Age"]);
        for _ in 0..200 {
            let n = 1 + rng.below(64) as usize;
            let rows = (0..n)
                .map(|_| {
                    vec![
                        rng.int_inclusive(17, 65) as f64,
                        rng.int_inclusive(6000, 140000) as f64,
                    ]
                })
                .collect();
            let t = DbTable::new(schema(), rows).unwrap();
            let f = random_formula(&schema(), &mut rng);
            let out = db_stat_eval(&t, &s, &f, &mut TraceRecorder::new()).unwrap();
            let (want, count) = brute_force(&t, &s, &f);
            assert_eq!(out.values.as_slice(), want.as_slice());
            assert_eq!(out.match_count, count);
        }
    }

    #[test]
    fn trace_depends_only_on_shape() {
        let mut rng = SeededRng::from_u64(3);
        let s = spec(&["average of Wealth", "median of Age"]);
        let mut digests = std::collections::BTreeSet::new();
        for _ in 0..20 {
            let rows = (0..10)
                .map(|_| {
                    vec![
                        rng.int_inclusive(17, 65) as f64,
                        rng.int_inclusive(6000, 140000) as f64,
                    ]
                })
                .collect();
            let t = DbTable::new(schema(), rows).unwrap();
            let f = random_formula(&schema(), &mut rng);
            let mut rec = TraceRecorder::new();
            db_stat_eval(&t, &s, &f, &mut rec).unwrap();
            digests.insert(rec.digest());
        }
        assert_eq!(digests.len(), 1);
    }

    #[test]
    fn spec_entry_text() {
        let e: SpecEntry = "Median of Wealth".parse().unwrap();
        assert_eq!(e, SpecEntry::new(StatFunction::Median, "Wealth"));
        assert_eq!(e.to_string(), "median of Wealth");
        assert!("median Wealth".parse::<SpecEntry>().is_err());
        assert!(MechanismSpec::new(vec![]).is_err());
    }
}
