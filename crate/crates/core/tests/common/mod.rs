//! Shared generators, fixture loaders and independent oracles for the
//! integration, property and acceptance suites.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use ism_dematel::dematel::DematelResult;
use ism_dematel::io;
use ism_dematel::ism::IsmResult;
use ism_dematel::survey::ExpertResponse;
use ism_dematel::{
    BarrierRegistry, InfluenceMatrix, LevelPartition, MatrixRole, Reach, ReachabilityMatrix,
    RelationSymbol, SsimMatrix,
};
use rand::Rng;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/cold-chain")
}

pub fn fixture_text(relative: &str) -> String {
    let path = fixture_dir().join(relative);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn fixture_registry() -> BarrierRegistry {
    io::parse_registry(&fixture_text("registry.csv"), "registry.csv").unwrap()
}

pub fn fixture_matrix(name: &str, role: MatrixRole) -> InfluenceMatrix {
    io::parse_matrix(&fixture_text(name), name, &fixture_registry(), role).unwrap()
}

pub fn fixture_reachability(name: &str) -> ReachabilityMatrix {
    io::parse_reachability(&fixture_text(name), name, &fixture_registry()).unwrap()
}

pub fn fixture_responses() -> Vec<ExpertResponse> {
    let registry = fixture_registry();
    let dir = fixture_dir().join("responses");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap().to_string_lossy().into_owned();
            let text = fs::read_to_string(p).unwrap();
            io::parse_response(&id, &text, &id, &registry).unwrap()
        })
        .collect()
}

/// Simple CSV rows with the header removed.
pub fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| f.trim().to_owned()).collect())
        .collect()
}

pub fn registry(n: usize) -> BarrierRegistry {
    BarrierRegistry::from_pairs((1..=n).map(|i| (format!("F{i}"), format!("Factor {i}")))).unwrap()
}

pub fn random_symbol(rng: &mut impl Rng) -> RelationSymbol {
    // sparse enough that levels and cycles both occur
    match rng.gen_range(0..10) {
        0..=2 => RelationSymbol::V,
        3..=5 => RelationSymbol::A,
        6 => RelationSymbol::X,
        _ => RelationSymbol::O,
    }
}

pub fn random_ssim(rng: &mut impl Rng, n: usize) -> SsimMatrix {
    SsimMatrix::from_fn(n, |_, _| random_symbol(rng)).unwrap()
}

/// Scores that satisfy every consistency rule for `ssim`.
pub fn consistent_scores(rng: &mut impl Rng, ssim: &SsimMatrix) -> InfluenceMatrix {
    let n = ssim.n();
    let mut values = vec![0.0; n * n];
    for (i, j, s) in ssim.iter() {
        let (fwd, back) = match s {
            RelationSymbol::V => (rng.gen_range(1..=4), rng.gen_range(0..=4)),
            RelationSymbol::A => (rng.gen_range(0..=4), rng.gen_range(1..=4)),
            RelationSymbol::X => (rng.gen_range(1..=4), rng.gen_range(1..=4)),
            RelationSymbol::O => (0, 0),
        };
        values[(i - 1) * n + (j - 1)] = fwd as f64;
        values[(j - 1) * n + (i - 1)] = back as f64;
    }
    InfluenceMatrix::new(n, values, MatrixRole::ExpertResponse).unwrap()
}

/// `experts` responses around a shared base SSIM, each consistent with itself.
pub fn random_responses(rng: &mut impl Rng, n: usize, experts: usize) -> Vec<ExpertResponse> {
    let base = random_ssim(rng, n);
    (0..experts)
        .map(|e| {
            let ssim = SsimMatrix::from_fn(n, |i, j| {
                if rng.gen_bool(0.2) {
                    random_symbol(rng)
                } else {
                    base.get(i, j).unwrap()
                }
            })
            .unwrap();
            let scores = consistent_scores(rng, &ssim);
            ExpertResponse::new(format!("expert{:02}", e + 1), ssim, scores).unwrap()
        })
        .collect()
}

/// Writes `registry.csv` and `responses/` under `dir`.
pub fn write_inputs(dir: &Path, registry: &BarrierRegistry, responses: &[ExpertResponse]) {
    fs::write(dir.join("registry.csv"), io::registry_to_csv(registry)).unwrap();
    let rdir = dir.join("responses");
    fs::create_dir_all(&rdir).unwrap();
    for r in responses {
        fs::write(
            rdir.join(format!("{}.txt", r.expert_id())),
            io::response_to_text(r, registry),
        )
        .unwrap();
    }
}

/// Boolean support of a reachability matrix, row-major.
pub fn support(m: &ReachabilityMatrix) -> Vec<bool> {
    m.cells().iter().map(|c| c.is_reachable()).collect()
}

/// Closure by repeated squaring of the boolean matrix until it stops changing.
pub fn naive_closure(adj: &[bool], n: usize) -> Vec<bool> {
    let mut cur = adj.to_vec();
    loop {
        let mut next = cur.clone();
        for i in 0..n {
            for j in 0..n {
                if !next[i * n + j] {
                    next[i * n + j] = (0..n).any(|k| cur[i * n + k] && cur[k * n + j]);
                }
            }
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Star soundness: a cell is `1*` exactly when it was zero in `irm` and is
/// reachable in `frm`; `1` cells are exactly the `irm` ones.
pub fn check_stars(irm: &ReachabilityMatrix, frm: &ReachabilityMatrix) -> Result<(), String> {
    for (k, (a, b)) in irm.cells().iter().zip(frm.cells()).enumerate() {
        let ok = match b {
            Reach::OneStar => *a == Reach::Zero,
            Reach::One => *a == Reach::One,
            Reach::Zero => *a == Reach::Zero,
        };
        if !ok {
            return Err(format!("cell {k}: irm {a} vs frm {b}"));
        }
    }
    Ok(())
}

/// Levels cover 1..=L, each factor once, and the recorded sets are those of
/// the remaining factors at assignment time.
pub fn check_partition(frm: &ReachabilityMatrix, levels: &LevelPartition) -> Result<(), String> {
    let n = frm.n();
    let reach = support(frm);
    let all = levels.levels();
    if all.len() != n {
        return Err(format!("{} assignments for {n} factors", all.len()));
    }
    let l = levels.level_count();
    for level in 1..=l {
        if !all.contains(&level) {
            return Err(format!("level {level} empty"));
        }
    }
    for rec in levels.records() {
        let remaining: Vec<usize> = (1..=n).filter(|&j| all[j - 1] >= rec.level).collect();
        let r: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&j| reach[(rec.index - 1) * n + j - 1])
            .collect();
        let a: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&j| reach[(j - 1) * n + rec.index - 1])
            .collect();
        let inter: Vec<usize> = r.iter().copied().filter(|x| a.contains(x)).collect();
        if r != rec.reachability || a != rec.antecedent || inter != rec.intersection {
            return Err(format!("factor {} sets differ", rec.index));
        }
        if r != inter {
            return Err(format!("factor {} assigned with R != R∩A", rec.index));
        }
    }
    Ok(())
}

/// Re-partitioning after removing level-1 factors yields the remaining levels
/// shifted down by one.
pub fn check_partition_shift(result: &IsmResult) -> Result<(), String> {
    let levels = result.levels.levels();
    let keep: Vec<usize> = (1..=levels.len()).filter(|&i| levels[i - 1] > 1).collect();
    if keep.len() < 2 {
        return Ok(());
    }
    let n = result.frm.n();
    let m = keep.len();
    let cells: Vec<Reach> = keep
        .iter()
        .flat_map(|&r| keep.iter().map(move |&c| (r, c)))
        .map(|(r, c)| result.frm.cells()[(r - 1) * n + c - 1])
        .collect();
    let sub = ReachabilityMatrix::new(m, cells).map_err(|e| e.to_string())?;
    let sub_levels = ism_dematel::ism::level_partition(&sub).map_err(|e| e.to_string())?;
    for (p, &i) in keep.iter().enumerate() {
        if sub_levels.levels()[p] + 1 != levels[i - 1] {
            return Err(format!("factor {i} shifted inconsistently"));
        }
    }
    Ok(())
}

/// Expands the digraph back to factors (members of a node reach each other,
/// edges connect every member pair) and compares its closure with `frm`
/// off the diagonal.
pub fn check_digraph_equivalence(result: &IsmResult) -> Result<(), String> {
    let n = result.frm.n();
    let mut adj = vec![false; n * n];
    for node in &result.digraph.nodes {
        for &a in &node.members {
            for &b in &node.members {
                adj[(a - 1) * n + b - 1] = true;
            }
        }
    }
    for e in &result.digraph.edges {
        for &a in &result.digraph.nodes[e.from].members {
            for &b in &result.digraph.nodes[e.to].members {
                adj[(a - 1) * n + b - 1] = true;
            }
        }
    }
    let closed = naive_closure(&adj, n);
    let expected = support(&result.frm);
    for i in 0..n {
        for j in 0..n {
            if i != j && closed[i * n + j] != expected[i * n + j] {
                return Err(format!("({}, {}) differs", i + 1, j + 1));
            }
        }
    }
    Ok(())
}

/// Ensures the digraph has no edge implied by a two-step path.
pub fn check_reduced(result: &IsmResult) -> Result<(), String> {
    let k = result.digraph.nodes.len();
    let mut adj = vec![false; k * k];
    for e in &result.digraph.edges {
        adj[e.from * k + e.to] = true;
    }
    let closed = naive_closure(&adj, k);
    for e in &result.digraph.edges {
        if (0..k).any(|c| c != e.from && c != e.to && closed[e.from * k + c] && closed[c * k + e.to]) {
            return Err(format!("edge {} -> {} is transitive", e.from, e.to));
        }
    }
    Ok(())
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// ‖T − (D + D·T)‖∞.
pub fn fixpoint_residual(d: &InfluenceMatrix, t: &InfluenceMatrix) -> f64 {
    let n = d.n();
    let dt = matmul(d.values(), t.values(), n);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (t.values()[i * n + j] - d.values()[i * n + j] - dt[i * n + j]).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Σ_{p=1..P} D^p, or `None` if the terms are still significant after
/// `max_terms`.
pub fn neumann_series(d: &InfluenceMatrix, max_terms: usize) -> Option<Vec<f64>> {
    let n = d.n();
    let mut term = d.values().to_vec();
    let mut sum = term.clone();
    for _ in 0..max_terms {
        term = matmul(&term, d.values(), n);
        let size = term.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        if size < 1e-17 {
            return Some(sum);
        }
    }
    None
}

pub fn relation_sum(result: &DematelResult) -> f64 {
    result.cause_effect.rows.iter().map(|r| r.relation).sum()
}
