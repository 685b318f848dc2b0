//! Execution-trace recorder.
//!
//! Every circuit-side operation is routed through a [`TraceRecorder`], which
//! folds the `(opcode, operand shape)` sequence into a 64-bit FNV-1a digest and
//! accumulates a cycle count from a [`CostTable`]. Operand values never reach
//! the digest, so two runs over same-shape inputs must produce equal digests
//! whenever the code path is data-independent.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Real;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Opcodes understood by the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    /// One compression of the commitment hash.
    HashBlock,
    /// Floating-point or index comparison producing a boolean.
    Cmp,
    /// Conditional move.
    Select,
    /// Boolean and/or/not.
    Logic,
    /// Memory access at a data-dependent index.
    Index,
}

impl Op {
    pub const ALL: [Op; 10] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Sqrt,
        Op::HashBlock,
        Op::Cmp,
        Op::Select,
        Op::Logic,
        Op::Index,
    ];

    fn code(self) -> u8 {
        match self {
            Op::Add => 1,
            Op::Sub => 2,
            Op::Mul => 3,
            Op::Div => 4,
            Op::Sqrt => 5,
            Op::HashBlock => 6,
            Op::Cmp => 7,
            Op::Select => 8,
            Op::Logic => 9,
            Op::Index => 10,
        }
    }
}

/// Per-opcode cycle weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    weights: BTreeMap<Op, u64>,
}

impl Default for CostTable {
    fn default() -> Self {
        let weights = [
            (Op::Add, 1),
            (Op::Sub, 1),
            (Op::Mul, 1),
            (Op::Div, 4),
            (Op::Sqrt, 8),
            (Op::HashBlock, 24),
            (Op::Cmp, 1),
            (Op::Select, 1),
            (Op::Logic, 1),
            (Op::Index, 1),
        ]
        .into_iter()
        .collect();
        Self { weights }
    }
}

impl CostTable {
    /// Overrides one weight. Weights must be positive.
    pub fn with_weight(mut self, op: Op, weight: u64) -> Self {
        assert!(weight > 0, "cost weights must be positive");
        self.weights.insert(op, weight);
        self
    }

    pub fn weight(&self, op: Op) -> u64 {
        self.weights.get(&op).copied().unwrap_or(1)
    }
}

/// 64-bit trace digest, rendered as 16 lowercase hex characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceDigest(pub u64);

impl fmt::Display for TraceDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace digest must be 16 lowercase hex characters")]
pub struct ParseDigestError;

impl FromStr for TraceDigest {
    type Err = ParseDigestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(ParseDigestError);
        }
        u64::from_str_radix(s, 16)
            .map(TraceDigest)
            .map_err(|_| ParseDigestError)
    }
}

impl Serialize for TraceDigest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TraceDigest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Final state of a recorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceSummary {
    pub digest: TraceDigest,
    pub cycles: u64,
    pub ops: u64,
}

/// Append-only log of circuit operations.
///
/// Single-owner: a recorder must not be shared between concurrent tasks.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    state: u64,
    cycles: u64,
    ops: u64,
    costs: CostTable,
}

impl Default for TraceRecorder {
    fn default() -> Self {
        Self::new()
    }
}

impl TraceRecorder {
    pub fn new() -> Self {
        Self::with_costs(CostTable::default())
    }

    pub fn with_costs(costs: CostTable) -> Self {
        Self {
            state: FNV_OFFSET,
            cycles: 0,
            ops: 0,
            costs,
        }
    }

    #[inline]
    fn absorb(&mut self, byte: u8) {
        self.state ^= u64::from(byte);
        self.state = self.state.wrapping_mul(FNV_PRIME);
    }

    /// Logs one operation with its operand shape.
    pub fn record(&mut self, op: Op, shape: &[u32]) {
        self.absorb(op.code());
        self.absorb(shape.len() as u8);
        for dim in shape {
            for b in dim.to_le_bytes() {
                self.absorb(b);
            }
        }
        self.cycles += self.costs.weight(op);
        self.ops += 1;
    }

    #[inline]
    fn scalar(&mut self, op: Op) {
        self.absorb(op.code());
        self.absorb(0);
        self.cycles += self.costs.weight(op);
        self.ops += 1;
    }

    pub fn digest(&self) -> TraceDigest {
        TraceDigest(self.state)
    }

    pub fn cycle_count(&self) -> u64 {
        self.cycles
    }

    pub fn op_count(&self) -> u64 {
        self.ops
    }

    pub fn finalize(self) -> TraceSummary {
        TraceSummary {
            digest: self.digest(),
            cycles: self.cycles,
            ops: self.ops,
        }
    }

    #[inline]
    pub fn add<T: Real>(&mut self, a: T, b: T) -> T {
        self.scalar(Op::Add);
        a + b
    }

    #[inline]
    pub fn sub<T: Real>(&mut self, a: T, b: T) -> T {
        self.scalar(Op::Sub);
        a - b
    }

    #[inline]
    pub fn mul<T: Real>(&mut self, a: T, b: T) -> T {
        self.scalar(Op::Mul);
        a * b
    }

    #[inline]
    pub fn div<T: Real>(&mut self, a: T, b: T) -> T {
        self.scalar(Op::Div);
        a / b
    }

    #[inline]
    pub fn sqrt<T: Real>(&mut self, a: T) -> T {
        self.scalar(Op::Sqrt);
        a.sqrt()
    }

    #[inline]
    pub fn lt<T: PartialOrd>(&mut self, a: T, b: T) -> bool {
        self.scalar(Op::Cmp);
        a < b
    }

    #[inline]
    pub fn le<T: PartialOrd>(&mut self, a: T, b: T) -> bool {
        self.scalar(Op::Cmp);
        a <= b
    }

    #[inline]
    pub fn eq<T: PartialEq>(&mut self, a: T, b: T) -> bool {
        self.scalar(Op::Cmp);
        a == b
    }

    #[inline]
    pub fn select<V>(&mut self, cond: bool, if_true: V, if_false: V) -> V {
        self.scalar(Op::Select);
        if cond {
            if_true
        } else {
            if_false
        }
    }

    #[inline]
    pub fn and(&mut self, a: bool, b: bool) -> bool {
        self.scalar(Op::Logic);
        a & b
    }

    #[inline]
    pub fn or(&mut self, a: bool, b: bool) -> bool {
        self.scalar(Op::Logic);
        a | b
    }

    #[inline]
    pub fn not(&mut self, a: bool) -> bool {
        self.scalar(Op::Logic);
        !a
    }

    /// 1 if `cond`, else 0, as a scalar.
    #[inline]
    pub fn indicator<T: Real>(&mut self, cond: bool) -> T {
        self.select(cond, T::one(), T::zero())
    }

    /// Accounts for one data-dependent memory access.
    #[inline]
    pub fn index(&mut self) {
        self.scalar(Op::Index);
    }

    /// Dot product accumulated left to right from zero.
    pub fn dot<T: Real>(&mut self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = T::zero();
        for (&x, &y) in a.iter().zip(b) {
            let p = self.mul(x, y);
            acc = self.add(acc, p);
        }
        acc
    }

    /// Squared Euclidean distance accumulated left to right from zero.
    pub fn sq_dist<T: Real>(&mut self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = T::zero();
        for (&x, &y) in a.iter().zip(b) {
            let diff = self.sub(x, y);
            let sq = self.mul(diff, diff);
            acc = self.add(acc, sq);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_initial_state() {
        let rec = TraceRecorder::new();
        assert_eq!(rec.digest(), TraceDigest(FNV_OFFSET));
        assert_eq!(rec.cycle_count(), 0);
        assert_eq!(rec.digest().to_string(), "cbf29ce484222325");
    }

    #[test]
    fn digest_ignores_values() {
        let mut a = TraceRecorder::new();
        let mut b = TraceRecorder::new();
        let s = a.add(1.0, 2.0);
        let x = a.mul(s, 3.0);
        let t = b.add(-7.5, 0.25);
        let y = b.mul(t, 1e9);
        assert_ne!(x, y);
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.cycle_count(), 2);
    }

    #[test]
    fn digest_depends_on_order_and_shape() {
        let mut a = TraceRecorder::new();
        a.add(1.0, 1.0);
        a.mul(1.0, 1.0);
        let mut b = TraceRecorder::new();
        b.mul(1.0, 1.0);
        b.add(1.0, 1.0);
        assert_ne!(a.digest(), b.digest());

        let mut c = TraceRecorder::new();
        c.record(Op::HashBlock, &[2]);
        let mut d = TraceRecorder::new();
        d.record(Op::HashBlock, &[3]);
        assert_ne!(c.digest(), d.digest());
    }

    #[test]
    fn cycles_follow_cost_table() {
        let mut rec = TraceRecorder::new();
        rec.div(1.0, 2.0);
        rec.sqrt(4.0);
        rec.record(Op::HashBlock, &[]);
        assert_eq!(rec.cycle_count(), 4 + 8 + 24);

        let costs = CostTable::default().with_weight(Op::Div, 10);
        let mut rec = TraceRecorder::with_costs(costs);
        rec.div(1.0f32, 2.0);
        assert_eq!(rec.cycle_count(), 10);
        assert_eq!(rec.op_count(), 1);
    }

    #[test]
    fn digest_hex_roundtrip() {
        let d = TraceDigest(0x0123_4567_89ab_cdef);
        assert_eq!(d.to_string().parse::<TraceDigest>().unwrap(), d);
        assert!("abc".parse::<TraceDigest>().is_err());
        assert_eq!(serde_json::to_string(&d).unwrap(), "\"0123456789abcdef\"");
        assert!(serde_json::from_str::<TraceDigest>("\"0123456789ABCDEF\"").is_err());
    }
}
