//! Property tests over random instances. Each case draws a seed and a size and
//! builds its instance from a seeded ChaCha generator.

mod common;

use common::*;
use ism_dematel::dematel::{self, Group};
use ism_dematel::io::{self, Precision};
use ism_dematel::ism;
use ism_dematel::micmac::{self, Quadrant};
use ism_dematel::survey;
use ism_dematel::{Error, InfluenceMatrix, MatrixRole, Reach, ReachabilityMatrix, RelationSymbol, SsimMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(256)
}

/// Random non-zero average matrix.
fn raw_average(rng: &mut ChaCha8Rng, n: usize) -> InfluenceMatrix {
    let experts = rng.gen_range(1..=5);
    let responses = random_responses(rng, n, experts);
    let avg = survey::aggregate_average(responses.iter().map(|r| r.scores())).unwrap();
    if avg.values().iter().any(|&v| v > 0.0) {
        avg
    } else {
        let mut values = vec![0.0; n * n];
        values[1] = 1.0;
        InfluenceMatrix::new(n, values, MatrixRole::Average).unwrap()
    }
}

/// An average whose normalized matrix has a convergent power series, so the
/// total-relation matrix exists. Random draws occasionally hit spectral
/// radius 1 (e.g. a uniformly weighted cycle); those are redrawn.
fn random_average(rng: &mut ChaCha8Rng, n: usize) -> InfluenceMatrix {
    loop {
        let avg = raw_average(rng, n);
        let d = dematel::normalize(&avg).unwrap().matrix;
        if neumann_series(&d, 20_000).is_some() {
            return avg;
        }
    }
}

/// SSIM for factors relabelled by `perm` (new position p holds old factor perm[p]).
fn permuted_ssim(ssim: &SsimMatrix, perm: &[usize]) -> SsimMatrix {
    let irm = ism::initial_reachability(ssim);
    let reach = |a: usize, b: usize| irm.get(a, b).unwrap().is_reachable();
    SsimMatrix::from_fn(ssim.n(), |i, j| {
        let (a, b) = (perm[i - 1], perm[j - 1]);
        match (reach(a, b), reach(b, a)) {
            (true, true) => RelationSymbol::X,
            (true, false) => RelationSymbol::V,
            (false, true) => RelationSymbol::A,
            (false, false) => RelationSymbol::O,
        }
    })
    .unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn closure_is_idempotent_and_matches_oracle(seed in any::<u64>(), n in 3usize..=20) {
        let ssim = random_ssim(&mut rng(seed), n);
        let irm = ism::initial_reachability(&ssim);
        let frm = ism::transitive_closure(&irm);
        prop_assert_eq!(&ism::transitive_closure(&frm), &frm);
        prop_assert_eq!(naive_closure(&support(&irm), n), support(&frm));
        prop_assert!(frm.is_transitively_closed());
        prop_assert!(!irm.has_stars());
        check_stars(&irm, &frm).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn powers_count_nonzero_cells(seed in any::<u64>(), n in 3usize..=20) {
        let result = ism::analyze(&random_ssim(&mut rng(seed), n)).unwrap();
        let frm = &result.frm;
        let nonzero = frm.reachable_count();
        prop_assert_eq!(frm.driving_power().iter().sum::<usize>(), nonzero);
        prop_assert_eq!(frm.dependence_power().iter().sum::<usize>(), nonzero);
        for i in 1..=n {
            let row = (1..=n).filter(|&j| frm.get(i, j).unwrap().is_reachable()).count();
            let col = (1..=n).filter(|&j| frm.get(j, i).unwrap().is_reachable()).count();
            prop_assert_eq!(frm.driving_power()[i - 1], row);
            prop_assert_eq!(frm.dependence_power()[i - 1], col);
        }
    }

    #[test]
    fn partition_is_exhaustive_and_shifts(seed in any::<u64>(), n in 3usize..=20) {
        let result = ism::analyze(&random_ssim(&mut rng(seed), n)).unwrap();
        check_partition(&result.frm, &result.levels).map_err(TestCaseError::fail)?;
        check_partition_shift(&result).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn conical_view_permutes_cells(seed in any::<u64>(), n in 3usize..=20) {
        let result = ism::analyze(&random_ssim(&mut rng(seed), n)).unwrap();
        let c = &result.conical;
        let mut order = c.order.clone();
        order.sort();
        prop_assert_eq!(order, (1..=n).collect::<Vec<_>>());
        let count = |cells: &mut dyn Iterator<Item = Reach>| {
            let mut counts = [0usize; 3];
            for cell in cells {
                counts[cell as usize] += 1;
            }
            counts
        };
        prop_assert_eq!(
            count(&mut c.rows.iter().flatten().copied()),
            count(&mut result.frm.cells().iter().copied())
        );
        prop_assert!(c.levels.windows(2).all(|w| w[0] <= w[1]));
        for (p, &i) in c.order.iter().enumerate() {
            for (q, &j) in c.order.iter().enumerate() {
                prop_assert_eq!(c.rows[p][q], result.frm.get(i, j).unwrap());
            }
        }
    }

    #[test]
    fn digraph_preserves_reachability(seed in any::<u64>(), n in 3usize..=20) {
        let result = ism::analyze(&random_ssim(&mut rng(seed), n)).unwrap();
        check_digraph_equivalence(&result).map_err(TestCaseError::fail)?;
        check_reduced(&result).map_err(TestCaseError::fail)?;
        let mut members: Vec<usize> =
            result.digraph.nodes.iter().flat_map(|node| node.members.clone()).collect();
        members.sort();
        prop_assert_eq!(members, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn quadrants_partition_and_follow_mid_rule(seed in any::<u64>(), n in 3usize..=20) {
        let result = ism::analyze(&random_ssim(&mut rng(seed), n)).unwrap();
        let q = micmac::classify(&result.frm, None);
        let mid = n as f64 / 2.0;
        let total: usize = Quadrant::ALL.iter().map(|&quad| q.members(quad).len()).sum();
        prop_assert_eq!(total, n);
        for p in &q.points {
            let strong_drive = p.driving as f64 > mid;
            let strong_dep = p.dependence as f64 > mid;
            let expected = match (strong_drive, strong_dep) {
                (false, false) => Quadrant::Autonomous,
                (false, true) => Quadrant::Dependent,
                (true, true) => Quadrant::Linkage,
                (true, false) => Quadrant::Independent,
            };
            prop_assert_eq!(p.quadrant, expected);
        }
    }

    #[test]
    fn quadrants_invariant_under_relabelling(seed in any::<u64>(), n in 3usize..=20) {
        let mut r = rng(seed);
        let ssim = random_ssim(&mut r, n);
        let mut perm: Vec<usize> = (1..=n).collect();
        perm.shuffle(&mut r);
        let original = micmac::classify(&ism::analyze(&ssim).unwrap().frm, None);
        let relabelled = micmac::classify(&ism::analyze(&permuted_ssim(&ssim, &perm)).unwrap().frm, None);
        for (p, &old) in perm.iter().enumerate() {
            prop_assert_eq!(relabelled.points[p].quadrant, original.points[old - 1].quadrant);
        }
    }

    #[test]
    fn dematel_identities(seed in any::<u64>(), n in 3usize..=20) {
        let avg = random_average(&mut rng(seed), n);
        let result = dematel::analyze(&avg).unwrap();
        let t = &result.total.matrix;
        prop_assert!(fixpoint_residual(&result.normalization.matrix, t) < 1e-10);
        let ce = &result.cause_effect;
        prop_assert!(relation_sum(&result).abs() <= 1e-9);
        let n2 = (n * n) as f64;
        let sum_r: f64 = ce.rows.iter().map(|r| r.r).sum();
        let sum_c: f64 = ce.rows.iter().map(|r| r.c).sum();
        prop_assert!((result.threshold() - sum_r / n2).abs() <= 1e-12);
        prop_assert!((result.threshold() - sum_c / n2).abs() <= 1e-12);
        for row in &ce.rows {
            prop_assert_eq!(row.group == Group::Cause, row.zero_relation || row.relation > 0.0);
        }
        let mut ranking = result.ranking.clone();
        ranking.sort();
        prop_assert_eq!(ranking, (1..=n).collect::<Vec<_>>());
        for e in &result.edges.edges {
            prop_assert!(e.from != e.to && e.value > result.threshold());
        }
        prop_assert!(result.normalization.matrix.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn total_relation_matches_neumann_series(seed in any::<u64>(), n in 3usize..=8) {
        let avg = random_average(&mut rng(seed), n);
        let norm = dematel::normalize(&avg).unwrap();
        let t = dematel::total_relation(&norm.matrix).unwrap();
        let series = neumann_series(&norm.matrix, 20_000);
        prop_assume!(series.is_some());
        let series = series.unwrap();
        prop_assert!(max_abs_diff(t.matrix.values(), &series) < 1e-9);
    }

    #[test]
    fn spectral_rejection_agrees_with_series(seed in any::<u64>(), n in 2usize..=8) {
        let avg = raw_average(&mut rng(seed), n);
        let d = dematel::normalize(&avg).unwrap().matrix;
        match dematel::total_relation(&d) {
            Ok(t) => prop_assert!(fixpoint_residual(&d, &t.matrix) < 1e-10),
            Err(Error::Spectral(_)) => prop_assert!(neumann_series(&d, 20_000).is_none()),
            Err(other) => prop_assert!(false, "unexpected error {}", other),
        }
    }

    #[test]
    fn dematel_scale_invariance(seed in any::<u64>(), n in 3usize..=20, scale in 0.1f64..10.0) {
        let avg = random_average(&mut rng(seed), n);
        let scaled = InfluenceMatrix::new(
            n,
            avg.values().iter().map(|v| v * scale).collect(),
            MatrixRole::Average,
        )
        .unwrap();
        let a = dematel::analyze(&avg).unwrap();
        let b = dematel::analyze(&scaled).unwrap();
        prop_assert!(max_abs_diff(a.normalization.matrix.values(), b.normalization.matrix.values()) <= 1e-12);
        prop_assert!(max_abs_diff(a.total.matrix.values(), b.total.matrix.values()) <= 1e-12);
        for (x, y) in a.cause_effect.rows.iter().zip(&b.cause_effect.rows) {
            if x.relation.abs() > 1e-12 {
                prop_assert_eq!(x.group, y.group);
            }
        }
        let th = a.threshold();
        let clear = |v: f64| (v - th).abs() > 1e-12;
        let edges = |r: &dematel::DematelResult| -> Vec<(usize, usize)> {
            let mut v: Vec<_> = r.edges.edges.iter().filter(|e| clear(e.value)).map(|e| (e.from, e.to)).collect();
            v.sort();
            v
        };
        prop_assert_eq!(edges(&a), edges(&b));
        // ranking agrees wherever prominences are not tied within 1e-12
        let prom = |i: usize| a.cause_effect.rows[i - 1].prominence;
        for w in b.ranking.windows(2) {
            prop_assert!(prom(w[0]) >= prom(w[1]) - 1e-12);
        }
    }

    #[test]
    fn average_is_linear_over_partitions(seed in any::<u64>(), n in 3usize..=10, experts in 2usize..=8) {
        let mut r = rng(seed);
        let responses = random_responses(&mut r, n, experts);
        let split = r.gen_range(1..experts);
        let all = survey::aggregate_average(responses.iter().map(|x| x.scores())).unwrap();
        let a = survey::aggregate_average(responses[..split].iter().map(|x| x.scores())).unwrap();
        let b = survey::aggregate_average(responses[split..].iter().map(|x| x.scores())).unwrap();
        let (wa, wb) = (split as f64, (experts - split) as f64);
        let combined: Vec<f64> = a.values().iter().zip(b.values())
            .map(|(x, y)| (x * wa + y * wb) / experts as f64)
            .collect();
        prop_assert!(max_abs_diff(all.values(), &combined) <= 1e-12);
    }

    #[test]
    fn constructed_responses_are_consistent(seed in any::<u64>(), n in 3usize..=20) {
        for response in random_responses(&mut rng(seed), n, 3) {
            prop_assert!(survey::check_consistency(&response).is_consistent());
        }
    }

    #[test]
    fn alpha_matches_naive_formula(seed in any::<u64>(), respondents in 2usize..=12, k in 2usize..=30) {
        let mut r = rng(seed);
        let table: Vec<Vec<f64>> = (0..respondents)
            .map(|_| (0..k).map(|_| r.gen_range(0..=4) as f64).collect())
            .collect();
        let totals: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
        let var = |xs: &[f64]| {
            let mut mean = 0.0;
            for x in xs { mean += x; }
            mean /= xs.len() as f64;
            let mut acc = 0.0;
            for x in xs { acc += (x - mean) * (x - mean); }
            acc / xs.len() as f64
        };
        let total_var = var(&totals);
        prop_assume!(total_var > 0.0);
        let mut item_sum = 0.0;
        for item in 0..k {
            let column: Vec<f64> = table.iter().map(|row| row[item]).collect();
            item_sum += var(&column);
        }
        let expected = k as f64 / (k as f64 - 1.0) * (1.0 - item_sum / total_var);
        let result = survey::cronbach_alpha(&table, k).unwrap();
        prop_assert!((result.alpha - expected).abs() <= 1e-12);
        prop_assert_eq!(result.acceptable, result.alpha >= 0.7);
    }

    #[test]
    fn text_round_trips(seed in any::<u64>(), n in 2usize..=20) {
        let mut r = rng(seed);
        let reg = registry(n);
        let ssim = random_ssim(&mut r, n);
        prop_assert_eq!(&io::parse_ssim(&io::ssim_to_csv(&ssim), "s", n).unwrap(), &ssim);
        prop_assert_eq!(&io::parse_registry(&io::registry_to_csv(&reg), "r").unwrap(), &reg);
        let avg = random_average(&mut r, n.max(3));
        let reg3 = registry(n.max(3));
        let csv = io::matrix_to_csv(&avg, &reg3, Precision::Exact);
        let back = io::parse_matrix(&csv, "m", &reg3, MatrixRole::Average).unwrap();
        prop_assert_eq!(back.values(), avg.values());
        prop_assert_eq!(io::matrix_to_csv(&back, &reg3, Precision::Exact), csv);
        let frm = ism::transitive_closure(&ism::initial_reachability(&ssim));
        let back: ReachabilityMatrix =
            io::parse_reachability(&io::reachability_to_csv(&frm, &reg), "f", &reg).unwrap();
        prop_assert_eq!(&back, &frm);
        let json = serde_json::to_string(&frm).unwrap();
        prop_assert_eq!(&serde_json::from_str::<ReachabilityMatrix>(&json).unwrap(), &frm);
        let response = &random_responses(&mut r, n, 1)[0];
        let text = io::response_to_text(response, &reg);
        let parsed = io::parse_response(response.expert_id(), &text, "x", &reg).unwrap();
        prop_assert_eq!(&parsed, response);
    }

    #[test]
    fn singleton_mode_is_identity(seed in any::<u64>(), n in 2usize..=20) {
        let ssim = random_ssim(&mut rng(seed), n);
        prop_assert_eq!(survey::aggregate_ssim([&ssim]).unwrap(), ssim);
    }
}
