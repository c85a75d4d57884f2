//! Decision history `H_t` and per-arm sufficient statistics.

use crate::error::{Error, Result};
use crate::linalg::{check_len, Matrix, Vector};

/// One row of the decision history: `[A_t, h_{t,A_t}, x_{A_t}, V_t(A_t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub round: usize,
    pub arm_id: usize,
    pub historical_rating: f64,
    pub features: Vec<f64>,
    pub feedback_value: f64,
}

impl DecisionRecord {
    /// `[h; x]`
    pub fn augmented(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.features.len() + 1);
        out.push(self.historical_rating);
        out.extend_from_slice(&self.features);
        out
    }
}

/// Sums over one arm's records, enough to evaluate every Gibbs conditional
/// without revisiting the records.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub n: usize,
    /// Σ x xᵀ
    pub xx: Matrix,
    /// Σ h x
    pub hx: Vector,
    /// Σ V x
    pub vx: Vector,
    /// Σ h²
    pub hh: f64,
    /// Σ V h
    pub vh: f64,
    /// Σ V²
    pub vv: f64,
}

impl ArmStats {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            xx: Matrix::zeros(dim, dim),
            hx: Vector::zeros(dim),
            vx: Vector::zeros(dim),
            hh: 0.0,
            vh: 0.0,
            vv: 0.0,
        }
    }

    fn add(&mut self, record: &DecisionRecord) {
        let x = Vector::from_column_slice(&record.features);
        let (h, v) = (record.historical_rating, record.feedback_value);
        self.n += 1;
        self.xx.ger(1.0, &x, &x, 1.0);
        self.hx.axpy(h, &x, 1.0);
        self.vx.axpy(v, &x, 1.0);
        self.hh += h * h;
        self.vh += v * h;
        self.vv += v * v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    dim: usize,
    records: Vec<DecisionRecord>,
    stats: Vec<ArmStats>,
}

impl History {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
            stats: Vec::new(),
        }
    }

    pub fn from_records(
        dim: usize,
        records: impl IntoIterator<Item = DecisionRecord>,
    ) -> Result<Self> {
        let mut h = Self::new(dim);
        for r in records {
            h.push(r)?;
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    pub fn push(&mut self, record: DecisionRecord) -> Result<()> {
        check_len(&record.features, self.dim)?;
        if !record.feedback_value.is_finite()
            || !record.historical_rating.is_finite()
            || record.features.iter().any(|v| !v.is_finite())
        {
            return Err(Error::ContractViolation(format!(
                "record for round {} has non-finite values",
                record.round
            )));
        }
        if self.stats.len() <= record.arm_id {
            self.stats
                .resize_with(record.arm_id + 1, || ArmStats::new(self.dim));
        }
        self.stats[record.arm_id].add(&record);
        self.records.push(record);
        Ok(())
    }

    /// Statistics for `arm_id`, or `None` if it was never pulled.
    pub fn arm_stats(&self, arm_id: usize) -> Option<&ArmStats> {
        self.stats.get(arm_id).filter(|s| s.n > 0)
    }

    /// Arms that have at least one record, with their statistics.
    pub fn pulled_arms(&self) -> impl Iterator<Item = (usize, &ArmStats)> {
        self.stats.iter().enumerate().filter(|(_, s)| s.n > 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_accumulate_per_arm() {
        let mut h = History::new(2);
        h.push(DecisionRecord {
            round: 1,
            arm_id: 2,
            historical_rating: 3.0,
            features: vec![1.0, 2.0],
            feedback_value: 4.0,
        })
        .unwrap();
        h.push(DecisionRecord {
            round: 2,
            arm_id: 2,
            historical_rating: 1.0,
            features: vec![0.0, 1.0],
            feedback_value: -1.0,
        })
        .unwrap();
        assert!(h.arm_stats(0).is_none());
        let s = h.arm_stats(2).unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.xx, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]));
        assert_eq!(s.hx, Vector::from_vec(vec![3.0, 7.0]));
        assert_eq!(s.vx, Vector::from_vec(vec![4.0, 7.0]));
        assert_eq!((s.hh, s.vh, s.vv), (10.0, 11.0, 17.0));
        assert_eq!(h.pulled_arms().count(), 1);
        assert!(h
            .push(DecisionRecord {
                round: 3,
                arm_id: 0,
                historical_rating: 1.0,
                features: vec![0.0],
                feedback_value: 0.0
            })
            .is_err());
    }
}
