//! Record of every objective evaluation in a run.
//!
//! Each distinct point is evaluated at most once; identity is the exact bit
//! pattern of the point's coordinates, never a floating-point tolerance.
//! Callers that can recompute a candidate point with the identical sequence
//! of arithmetic operations can therefore find its value again, and sample
//! reuse works by carrying ledger indices around instead of comparing
//! coordinates.

use nalgebra::DVector;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct EvaluationRecord {
    pub point: DVector<f64>,
    pub value: f64,
}

/// Append-only evaluation history with bit-exact point lookup.
#[derive(Debug, Default)]
pub struct EvaluationLedger {
    records: Vec<EvaluationRecord>,
    index: HashMap<Vec<u64>, usize>,
}

fn key(point: &DVector<f64>) -> Vec<u64> {
    point.iter().map(|v| v.to_bits()).collect()
}

impl EvaluationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of evaluations performed so far.
    pub fn nf(&self) -> usize {
        self.records.len()
    }

    /// Index of a previously evaluated point, by exact bit pattern.
    pub fn lookup(&self, point: &DVector<f64>) -> Option<usize> {
        self.index.get(&key(point)).copied()
    }

    pub fn point(&self, idx: usize) -> &DVector<f64> {
        &self.records[idx].point
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.records[idx].value
    }

    /// Record a fresh evaluation and return its index.
    ///
    /// Panics if the point was already recorded: callers must check
    /// [`lookup`](Self::lookup) first, so no point is ever evaluated twice.
    pub fn record(&mut self, point: DVector<f64>, value: f64) -> usize {
        let idx = self.records.len();
        let previous = self.index.insert(key(&point), idx);
        assert!(previous.is_none(), "point evaluated twice: {point:?}");
        debug_assert!(value.is_finite(), "caller must reject non-finite values before recording");
        self.records.push(EvaluationRecord { point, value });
        idx
    }

    pub fn iter(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.records.iter()
    }
}
