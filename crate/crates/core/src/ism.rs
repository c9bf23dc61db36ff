//! Interpretive structural modeling: SSIM → initial reachability → transitive
//! closure → level partition → conical matrix → digraph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    LevelPartition, LevelRecord, Reach, ReachabilityMatrix, RelationSymbol, SsimMatrix,
};

/// Substitutes V/A/X/O into 0/1 cells with a reflexive diagonal.
pub fn initial_reachability(ssim: &SsimMatrix) -> ReachabilityMatrix {
    let n = ssim.n();
    let mut cells = vec![Reach::Zero; n * n];
    for d in 0..n {
        cells[d * n + d] = Reach::One;
    }
    for (i, j, symbol) in ssim.iter() {
        let (forward, backward) = symbol.directions();
        if forward {
            cells[(i - 1) * n + (j - 1)] = Reach::One;
        }
        if backward {
            cells[(j - 1) * n + (i - 1)] = Reach::One;
        }
    }
    ReachabilityMatrix::new(n, cells).expect("diagonal is set")
}

/// Warshall closure over a dense boolean matrix, in place.
fn warshall(reach: &mut [bool], n: usize) {
    for k in 0..n {
        for i in 0..n {
            if !reach[i * n + k] {
                continue;
            }
            for j in 0..n {
                if reach[k * n + j] {
                    reach[i * n + j] = true;
                }
            }
        }
    }
}

/// Closes the non-zero support under transitivity. Cells that become reachable
/// are marked `OneStar`; existing cells are left as they are, so the
/// operation is idempotent.
pub fn transitive_closure(matrix: &ReachabilityMatrix) -> ReachabilityMatrix {
    let n = matrix.n();
    let mut reach: Vec<bool> = matrix.cells().iter().map(|c| c.is_reachable()).collect();
    warshall(&mut reach, n);
    let cells = matrix
        .cells()
        .iter()
        .zip(&reach)
        .map(|(&cell, &r)| match cell {
            Reach::Zero if r => Reach::OneStar,
            other => other,
        })
        .collect();
    ReachabilityMatrix::new(n, cells).expect("diagonal preserved")
}

/// Iterative level partition of a closed reachability matrix.
///
/// Each round computes, over the factors not yet assigned, the reachability
/// set R and antecedent set A of every factor and assigns the current level
/// to those with R = R ∩ A.
pub fn level_partition(frm: &ReachabilityMatrix) -> Result<LevelPartition> {
    if !frm.is_transitively_closed() {
        return Err(Error::NotClosed);
    }
    let n = frm.n();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut records: Vec<Option<LevelRecord>> = vec![None; n];
    let mut level = 1;
    while !remaining.is_empty() {
        let mut assigned = Vec::new();
        for &i in &remaining {
            let reachability: Vec<usize> =
                remaining.iter().copied().filter(|&j| frm.reaches(i, j)).collect();
            let antecedent: Vec<usize> =
                remaining.iter().copied().filter(|&j| frm.reaches(j, i)).collect();
            let intersection: Vec<usize> = reachability
                .iter()
                .copied()
                .filter(|j| antecedent.contains(j))
                .collect();
            if intersection == reachability {
                let one_based = |v: Vec<usize>| v.into_iter().map(|x| x + 1).collect();
                assigned.push(i);
                records[i] = Some(LevelRecord {
                    index: i + 1,
                    level,
                    reachability: one_based(reachability),
                    antecedent: one_based(antecedent),
                    intersection: one_based(intersection),
                });
            }
        }
        if assigned.is_empty() {
            return Err(Error::PartitionFailure {
                stuck: remaining.iter().map(|i| i + 1).collect(),
            });
        }
        remaining.retain(|i| !assigned.contains(i));
        level += 1;
    }
    LevelPartition::new(records.into_iter().map(|r| r.expect("every factor assigned")).collect())
}

/// The final reachability matrix with rows and columns ordered by ascending
/// level, ascending index within a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConicalMatrix {
    /// 1-based factor index at each position.
    pub order: Vec<usize>,
    /// Level at each position.
    pub levels: Vec<usize>,
    pub rows: Vec<Vec<Reach>>,
    pub driving_power: Vec<usize>,
    pub dependence_power: Vec<usize>,
}

pub fn conical_matrix(frm: &ReachabilityMatrix, levels: &LevelPartition) -> Result<ConicalMatrix> {
    let n = frm.n();
    if levels.records().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: levels.records().len(),
        });
    }
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by_key(|&i| (levels.level_of(i).expect("covered"), i));
    let rows = order
        .iter()
        .map(|&r| order.iter().map(|&c| frm.at(r - 1, c - 1)).collect())
        .collect();
    Ok(ConicalMatrix {
        levels: order.iter().map(|&i| levels.level_of(i).expect("covered")).collect(),
        driving_power: order.iter().map(|&i| frm.driving_power()[i - 1]).collect(),
        dependence_power: order.iter().map(|&i| frm.dependence_power()[i - 1]).collect(),
        rows,
        order,
    })
}

/// A strongly connected group of factors (a single factor when acyclic).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigraphNode {
    pub id: usize,
    /// 1-based member indices, ascending.
    pub members: Vec<usize>,
    pub level: usize,
    /// Direct links between distinct members.
    pub internal_links: Vec<(usize, usize)>,
}

/// Edge of the reduced condensation, with the direct links that realize it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigraphEdge {
    pub from: usize,
    pub to: usize,
    pub links: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsmDigraph {
    pub nodes: Vec<DigraphNode>,
    pub edges: Vec<DigraphEdge>,
}

impl IsmDigraph {
    /// Node id holding 1-based factor `index`.
    pub fn node_of(&self, index: usize) -> Option<usize> {
        self.nodes
            .iter()
            .find(|node| node.members.contains(&index))
            .map(|node| node.id)
    }
}

/// Builds the ISM digraph from the direct (`One`) links of `frm`.
///
/// Transitivity-derived cells are dropped, mutually reachable factors are
/// condensed into one node, and the condensation is transitively reduced.
/// Nodes are ordered by (level, smallest member).
pub fn ism_digraph(frm: &ReachabilityMatrix, levels: &LevelPartition) -> Result<IsmDigraph> {
    let n = frm.n();
    if levels.records().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: levels.records().len(),
        });
    }
    let direct = |r: usize, c: usize| r != c && frm.at(r, c) == Reach::One;

    let mut reach: Vec<bool> = (0..n * n).map(|k| k / n == k % n || direct(k / n, k % n)).collect();
    warshall(&mut reach, n);

    // strongly connected components = classes of mutual reachability
    let mut grouped = vec![false; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if grouped[i] {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| reach[i * n + j] && reach[j * n + i])
            .collect();
        for &m in &members {
            grouped[m] = true;
        }
        groups.push(members);
    }

    let level_of = |group: &[usize]| levels.level_of(group[0] + 1).expect("covered");
    let mut sorted: Vec<usize> = (0..groups.len()).collect();
    sorted.sort_by_key(|&g| (level_of(&groups[g]), groups[g][0]));

    let nodes: Vec<DigraphNode> = sorted
        .iter()
        .enumerate()
        .map(|(id, &g)| {
            let members = &groups[g];
            let internal_links = members
                .iter()
                .flat_map(|&a| members.iter().map(move |&b| (a, b)))
                .filter(|&(a, b)| direct(a, b))
                .map(|(a, b)| (a + 1, b + 1))
                .collect();
            DigraphNode {
                id,
                members: members.iter().map(|m| m + 1).collect(),
                level: level_of(members),
                internal_links,
            }
        })
        .collect();

    let k = nodes.len();
    let rep = |id: usize| nodes[id].members[0] - 1;
    let reaches = |a: usize, b: usize| a != b && reach[rep(a) * n + rep(b)];
    let mut edges = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if !reaches(a, b) {
                continue;
            }
            let covered = (0..k).any(|c| c != a && c != b && reaches(a, c) && reaches(c, b));
            if covered {
                continue;
            }
            let links = nodes[a]
                .members
                .iter()
                .flat_map(|&u| nodes[b].members.iter().map(move |&v| (u, v)))
                .filter(|&(u, v)| direct(u - 1, v - 1))
                .collect();
            edges.push(DigraphEdge { from: a, to: b, links });
        }
    }
    Ok(IsmDigraph { nodes, edges })
}

/// Every stage of the structural model, as produced from one SSIM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsmResult {
    pub ssim: SsimMatrix,
    pub irm: ReachabilityMatrix,
    pub frm: ReachabilityMatrix,
    pub levels: LevelPartition,
    pub conical: ConicalMatrix,
    pub digraph: IsmDigraph,
}

pub fn analyze(ssim: &SsimMatrix) -> Result<IsmResult> {
    let irm = initial_reachability(ssim);
    let frm = transitive_closure(&irm);
    let levels = level_partition(&frm)?;
    let conical = conical_matrix(&frm, &levels)?;
    let digraph = ism_digraph(&frm, &levels)?;
    Ok(IsmResult {
        ssim: ssim.clone(),
        irm,
        frm,
        levels,
        conical,
        digraph,
    })
}

/// SSIM whose relations form the chain 1 → 2 → ... → n.
#[doc(hidden)]
pub fn chain_ssim(n: usize) -> SsimMatrix {
    SsimMatrix::from_fn(n, |i, j| {
        if j == i + 1 {
            RelationSymbol::V
        } else {
            RelationSymbol::O
        }
    })
    .expect("n >= 2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use Reach::*;

    fn uniform(n: usize, symbol: RelationSymbol) -> SsimMatrix {
        SsimMatrix::from_fn(n, |_, _| symbol).unwrap()
    }

    #[test]
    fn all_o_gives_identity_and_all_x_gives_ones() {
        let id = initial_reachability(&uniform(4, RelationSymbol::O));
        for i in 1..=4 {
            for j in 1..=4 {
                assert_eq!(id.get(i, j).unwrap(), if i == j { One } else { Zero });
            }
        }
        let full = initial_reachability(&uniform(4, RelationSymbol::X));
        assert!(full.cells().iter().all(|&c| c == One));
    }

    #[test]
    fn closure_of_identity_is_identity() {
        let id = initial_reachability(&uniform(3, RelationSymbol::O));
        let closed = transitive_closure(&id);
        assert_eq!(closed, id);
        assert!(!closed.has_stars());
    }

    #[test]
    fn chain_closure_adds_star() {
        let closed = transitive_closure(&initial_reachability(&chain_ssim(3)));
        assert_eq!(closed.get(1, 3).unwrap(), OneStar);
        assert_eq!(closed.get(1, 2).unwrap(), One);
        assert_eq!(closed.get(3, 1).unwrap(), Zero);
        assert_eq!(closed.driving_power(), &[3, 2, 1]);
    }

    #[test]
    fn chain_levels_and_conical_order() {
        let frm = transitive_closure(&initial_reachability(&chain_ssim(3)));
        let levels = level_partition(&frm).unwrap();
        assert_eq!(levels.levels(), vec![3, 2, 1]);
        let conical = conical_matrix(&frm, &levels).unwrap();
        assert_eq!(conical.order, vec![3, 2, 1]);
        assert_eq!(conical.driving_power, vec![1, 2, 3]);
    }

    #[test]
    fn identity_is_single_level_in_index_order() {
        let frm = initial_reachability(&uniform(3, RelationSymbol::O));
        let levels = level_partition(&frm).unwrap();
        assert_eq!(levels.levels(), vec![1, 1, 1]);
        assert_eq!(conical_matrix(&frm, &levels).unwrap().order, vec![1, 2, 3]);
    }

    #[test]
    fn partition_requires_closure() {
        let irm = initial_reachability(&chain_ssim(3));
        assert!(matches!(level_partition(&irm), Err(Error::NotClosed)));
    }

    #[test]
    fn reduction_drops_shortcut() {
        // 1 → 2, 2 → 3 and a direct 1 → 3
        let ssim = SsimMatrix::from_fn(3, |_, _| RelationSymbol::V).unwrap();
        let frm = transitive_closure(&initial_reachability(&ssim));
        let levels = level_partition(&frm).unwrap();
        let g = ism_digraph(&frm, &levels).unwrap();
        let pairs: Vec<(Vec<usize>, Vec<usize>)> = g
            .edges
            .iter()
            .map(|e| (g.nodes[e.from].members.clone(), g.nodes[e.to].members.clone()))
            .collect();
        assert_eq!(pairs, vec![(vec![2], vec![3]), (vec![1], vec![2])]);
    }

    #[test]
    fn mutual_pair_condenses() {
        let frm = transitive_closure(&initial_reachability(&uniform(2, RelationSymbol::X)));
        let levels = level_partition(&frm).unwrap();
        let g = ism_digraph(&frm, &levels).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].members, vec![1, 2]);
        assert_eq!(g.nodes[0].internal_links, vec![(1, 2), (2, 1)]);
        assert!(g.edges.is_empty());
    }
}
