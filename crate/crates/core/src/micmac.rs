//! MICMAC quadrant classification from driving and dependence powers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ReachabilityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    Autonomous,
    Dependent,
    Linkage,
    Independent,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::Autonomous,
        Quadrant::Dependent,
        Quadrant::Linkage,
        Quadrant::Independent,
    ];

    /// A power equal to `mid` counts as weak.
    pub fn from_powers(driving: f64, dependence: f64, mid: f64) -> Self {
        match (driving > mid, dependence > mid) {
            (false, false) => Quadrant::Autonomous,
            (false, true) => Quadrant::Dependent,
            (true, true) => Quadrant::Linkage,
            (true, false) => Quadrant::Independent,
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicmacPoint {
    pub index: usize,
    pub driving: usize,
    pub dependence: usize,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantAssignment {
    pub mid: f64,
    /// Registry order.
    pub points: Vec<MicmacPoint>,
}

impl QuadrantAssignment {
    /// 1-based indices in `quadrant`, ascending.
    pub fn members(&self, quadrant: Quadrant) -> Vec<usize> {
        self.points
            .iter()
            .filter(|p| p.quadrant == quadrant)
            .map(|p| p.index)
            .collect()
    }

    /// Scatter coordinates (dependence, driving) in registry order.
    pub fn chart_coordinates(&self) -> Vec<(usize, usize)> {
        self.points.iter().map(|p| (p.dependence, p.driving)).collect()
    }
}

/// Classifies every factor against `mid`, which defaults to n / 2.
pub fn classify(frm: &ReachabilityMatrix, mid: Option<f64>) -> QuadrantAssignment {
    let mid = mid.unwrap_or(frm.n() as f64 / 2.0);
    let points = frm
        .driving_power()
        .iter()
        .zip(frm.dependence_power())
        .enumerate()
        .map(|(k, (&driving, &dependence))| MicmacPoint {
            index: k + 1,
            driving,
            dependence,
            quadrant: Quadrant::from_powers(driving as f64, dependence as f64, mid),
        })
        .collect();
    QuadrantAssignment { mid, points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ism::{initial_reachability, transitive_closure};
    use crate::model::{RelationSymbol, SsimMatrix};

    #[test]
    fn boundary_counts_as_weak() {
        assert_eq!(Quadrant::from_powers(2.0, 2.0, 2.0), Quadrant::Autonomous);
        assert_eq!(Quadrant::from_powers(2.0, 3.0, 2.0), Quadrant::Dependent);
        assert_eq!(Quadrant::from_powers(3.0, 2.0, 2.0), Quadrant::Independent);
        assert_eq!(Quadrant::from_powers(3.0, 3.0, 2.0), Quadrant::Linkage);
    }

    #[test]
    fn even_n_midpoint_tie() {
        // n = 4, chain 1→2→3→4: driving (4,3,2,1), dependence (1,2,3,4), mid = 2
        let ssim = crate::ism::chain_ssim(4);
        let frm = transitive_closure(&initial_reachability(&ssim));
        let q = classify(&frm, None);
        assert_eq!(q.mid, 2.0);
        let quadrants: Vec<_> = q.points.iter().map(|p| p.quadrant).collect();
        assert_eq!(
            quadrants,
            vec![
                Quadrant::Independent,
                Quadrant::Independent,
                Quadrant::Dependent,
                Quadrant::Dependent
            ]
        );
    }

    #[test]
    fn all_x_is_linkage() {
        let ssim = SsimMatrix::from_fn(5, |_, _| RelationSymbol::X).unwrap();
        let frm = transitive_closure(&initial_reachability(&ssim));
        let q = classify(&frm, None);
        assert!(q.points.iter().all(|p| p.quadrant == Quadrant::Linkage));
        assert_eq!(q.chart_coordinates()[0], (5, 5));
    }

    #[test]
    fn mid_override() {
        let frm = transitive_closure(&initial_reachability(&crate::ism::chain_ssim(4)));
        let q = classify(&frm, Some(0.5));
        assert!(q.points.iter().all(|p| p.quadrant == Quadrant::Linkage));
    }
}
