//! DEMATEL: normalization, total-relation matrix, cause/effect split,
//! threshold, influence edges and the prominence ranking.
//!
//! All values stay at full `f64` precision. Rounding to three decimals
//! happens only when a report is rendered.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Lu};
use crate::model::{InfluenceMatrix, MatrixRole};

/// Values of T in `[-CLAMP, 0)` are round-off and are stored as zero.
const CLAMP: f64 = 1e-12;

/// |R−C| at or below this (relative to max(1, R+C)) counts as zero relation.
pub const ZERO_RELATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Largest row or column sum of the average matrix.
    pub divisor: f64,
    pub matrix: InfluenceMatrix,
}

/// D = A / s with s the largest row or column sum of A.
pub fn normalize(avg: &InfluenceMatrix) -> Result<Normalization> {
    avg.require_role(MatrixRole::Average)?;
    let divisor = avg
        .row_sums()
        .into_iter()
        .chain(avg.column_sums())
        .fold(0.0, f64::max);
    if divisor == 0.0 {
        return Err(Error::DegenerateData(
            "average matrix is all zero, so the normalization divisor is undefined".into(),
        ));
    }
    let values = avg.values().iter().map(|v| v / divisor).collect();
    let matrix = InfluenceMatrix::new(avg.n(), values, MatrixRole::Normalized)?;
    Ok(Normalization { divisor, matrix })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalRelation {
    pub matrix: InfluenceMatrix,
    /// 1-norm condition number of I − D.
    pub condition_number: f64,
}

/// T = D (I − D)^{-1}.
///
/// Each row t of T solves (I − D)ᵀ tᵀ = dᵀ for the matching row d of D.
/// Refuses D unless its spectral radius is certifiably below one.
pub fn total_relation(d: &InfluenceMatrix) -> Result<TotalRelation> {
    d.require_role(MatrixRole::Normalized)?;
    let n = d.n();
    let dv = d.values();
    let fast = linalg::norm_inf(dv, n) < 1.0 || linalg::norm_1(dv, n) < 1.0;
    if !fast && !linalg::spectral_radius_below_one(dv, n) {
        return Err(Error::Spectral(
            "spectral radius of D is not below 1, so the series D + D² + … diverges".into(),
        ));
    }

    // (I − D)ᵀ
    let mut a = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let id = if r == c { 1.0 } else { 0.0 };
            a[r * n + c] = id - dv[c * n + r];
        }
    }
    let lu = Lu::factor(a.clone(), n)?;
    // κ₁(I − D) = κ∞((I − D)ᵀ)
    let condition_number = linalg::norm_inf(&a, n) * linalg::norm_inf(&lu.inverse(), n);

    let mut values = Vec::with_capacity(n * n);
    for row in d.rows() {
        values.extend(lu.solve(row));
    }
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(Error::Singular("total-relation solve produced a non-finite value".into()));
        }
        if *v < 0.0 {
            if *v < -CLAMP {
                return Err(Error::Spectral(format!(
                    "total-relation entry {v:e} is negative beyond round-off"
                )));
            }
            *v = 0.0;
        }
    }
    let matrix = InfluenceMatrix::new(n, values, MatrixRole::TotalRelation)?;
    Ok(TotalRelation { matrix, condition_number })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Cause,
    Effect,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseEffectRow {
    pub index: usize,
    pub r: f64,
    pub c: f64,
    pub prominence: f64,
    pub relation: f64,
    pub group: Group,
    /// R−C was zero within tolerance; the factor is grouped as a cause.
    pub zero_relation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseEffectTable {
    /// Registry order.
    pub rows: Vec<CauseEffectRow>,
}

impl CauseEffectTable {
    pub fn group_members(&self, group: Group) -> Vec<usize> {
        self.rows.iter().filter(|r| r.group == group).map(|r| r.index).collect()
    }

    pub fn causes(&self) -> Vec<usize> {
        self.group_members(Group::Cause)
    }

    pub fn effects(&self) -> Vec<usize> {
        self.group_members(Group::Effect)
    }

    pub fn zero_relation_flags(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.zero_relation).map(|r| r.index).collect()
    }

    /// Causes by descending R−C, ties by ascending index.
    pub fn strongest_causes(&self) -> Vec<usize> {
        let mut causes: Vec<&CauseEffectRow> =
            self.rows.iter().filter(|r| r.group == Group::Cause).collect();
        causes.sort_by(|a, b| b.relation.total_cmp(&a.relation).then(a.index.cmp(&b.index)));
        causes.into_iter().map(|r| r.index).collect()
    }
}

pub fn cause_effect(t: &InfluenceMatrix) -> CauseEffectTable {
    let rows = t
        .row_sums()
        .into_iter()
        .zip(t.column_sums())
        .enumerate()
        .map(|(k, (r, c))| {
            let prominence = r + c;
            let relation = r - c;
            let zero_relation = relation.abs() <= ZERO_RELATION_TOLERANCE * prominence.max(1.0);
            let group = if zero_relation || relation > 0.0 {
                Group::Cause
            } else {
                Group::Effect
            };
            CauseEffectRow { index: k + 1, r, c, prominence, relation, group, zero_relation }
        })
        .collect();
    CauseEffectTable { rows }
}

/// Mean of all n² entries, diagonal included.
pub fn threshold(t: &InfluenceMatrix) -> f64 {
    let n = t.n() as f64;
    t.values().iter().sum::<f64>() / (n * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdgeSet {
    pub threshold: f64,
    pub edges: Vec<InfluenceEdge>,
}

/// Off-diagonal cells strictly above `threshold`, by descending value, then
/// by (from, to).
pub fn influence_edges(t: &InfluenceMatrix, threshold: f64) -> InfluenceEdgeSet {
    let n = t.n();
    let mut edges: Vec<InfluenceEdge> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|&(r, c)| r != c && t.at(r, c) > threshold)
        .map(|(r, c)| InfluenceEdge { from: r + 1, to: c + 1, value: t.at(r, c) })
        .collect();
    edges.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.from.cmp(&b.from))
            .then(a.to.cmp(&b.to))
    });
    InfluenceEdgeSet { threshold, edges }
}

/// 1-based indices by descending prominence, ties by ascending index.
pub fn final_ranking(table: &CauseEffectTable) -> Vec<usize> {
    let mut rows: Vec<&CauseEffectRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.index.cmp(&b.index)));
    rows.into_iter().map(|r| r.index).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DematelResult {
    pub average: InfluenceMatrix,
    pub normalization: Normalization,
    pub total: TotalRelation,
    pub cause_effect: CauseEffectTable,
    pub edges: InfluenceEdgeSet,
    pub ranking: Vec<usize>,
}

impl DematelResult {
    pub fn threshold(&self) -> f64 {
        self.edges.threshold
    }
}

/// Runs every DEMATEL step from the average matrix.
pub fn analyze(average: &InfluenceMatrix) -> Result<DematelResult> {
    let normalization = normalize(average)?;
    let total = total_relation(&normalization.matrix)?;
    let cause_effect = cause_effect(&total.matrix);
    let edges = influence_edges(&total.matrix, threshold(&total.matrix));
    let ranking = final_ranking(&cause_effect);
    Ok(DematelResult {
        average: average.clone(),
        normalization,
        total,
        cause_effect,
        edges,
        ranking,
    })
}
