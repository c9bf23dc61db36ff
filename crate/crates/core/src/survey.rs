//! Expert responses: aggregation into the SSIM and the average matrix,
//! cross-consistency checks between the two halves of a response, and
//! Cronbach's alpha.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InfluenceMatrix, MatrixRole, RelationSymbol, SsimMatrix};

/// Alpha at or above this value is acceptable.
pub const ACCEPTABLE_ALPHA: f64 = 0.7;

/// One expert's answers: V/A/X/O judgments plus 0..=4 influence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertResponse {
    expert_id: String,
    judgments: SsimMatrix,
    scores: InfluenceMatrix,
}

impl ExpertResponse {
    pub fn new(
        expert_id: impl Into<String>,
        judgments: SsimMatrix,
        scores: InfluenceMatrix,
    ) -> Result<Self> {
        scores.require_role(MatrixRole::ExpertResponse)?;
        if judgments.n() != scores.n() {
            return Err(Error::DimensionMismatch {
                expected: judgments.n(),
                found: scores.n(),
            });
        }
        Ok(ExpertResponse {
            expert_id: expert_id.into(),
            judgments,
            scores,
        })
    }

    pub fn expert_id(&self) -> &str {
        &self.expert_id
    }

    pub fn judgments(&self) -> &SsimMatrix {
        &self.judgments
    }

    pub fn scores(&self) -> &InfluenceMatrix {
        &self.scores
    }

    pub fn n(&self) -> usize {
        self.scores.n()
    }
}

/// Cell-wise mode of the judgments. Ties resolve in the order V > A > X > O.
pub fn aggregate_ssim<'a>(judgments: impl IntoIterator<Item = &'a SsimMatrix>) -> Result<SsimMatrix> {
    let judgments: Vec<&SsimMatrix> = judgments.into_iter().collect();
    let first = judgments.first().ok_or(Error::NoResponses)?;
    let n = first.n();
    if let Some(bad) = judgments.iter().find(|m| m.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.n(),
        });
    }
    let mut votes: Vec<[usize; 4]> = vec![[0; 4]; n * (n - 1) / 2];
    for m in &judgments {
        for (slot, (_, _, symbol)) in votes.iter_mut().zip(m.iter()) {
            slot[symbol_rank(symbol)] += 1;
        }
    }
    let mut cells = votes.into_iter();
    SsimMatrix::from_fn(n, |_, _| {
        let counts = cells.next().expect("one vote tally per pair");
        modal_symbol(&counts)
    })
}

fn symbol_rank(symbol: RelationSymbol) -> usize {
    RelationSymbol::ALL
        .iter()
        .position(|&s| s == symbol)
        .expect("symbol is listed")
}

/// Highest count wins; the first symbol in V, A, X, O order wins a tie.
fn modal_symbol(counts: &[usize; 4]) -> RelationSymbol {
    let mut best = 0;
    for k in 1..4 {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    RelationSymbol::ALL[best]
}

/// Arithmetic mean of the expert score matrices.
pub fn aggregate_average<'a>(
    scores: impl IntoIterator<Item = &'a InfluenceMatrix>,
) -> Result<InfluenceMatrix> {
    let scores: Vec<&InfluenceMatrix> = scores.into_iter().collect();
    let first = scores.first().ok_or(Error::NoResponses)?;
    let n = first.n();
    let mut sums = vec![0.0; n * n];
    for m in &scores {
        if m.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.n(),
            });
        }
        for (s, v) in sums.iter_mut().zip(m.values()) {
            *s += v;
        }
    }
    let h = scores.len() as f64;
    let values = sums.into_iter().map(|s| s / h).collect();
    InfluenceMatrix::new(n, values, MatrixRole::Average)
}

/// Which cross-check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "V_RULE")]
    VRule,
    #[serde(rename = "A_RULE")]
    ARule,
    #[serde(rename = "O_RULE")]
    ORule,
    #[serde(rename = "X_RULE")]
    XRule,
}

impl RuleId {
    fn for_symbol(symbol: RelationSymbol) -> Self {
        match symbol {
            RelationSymbol::V => RuleId::VRule,
            RelationSymbol::A => RuleId::ARule,
            RelationSymbol::X => RuleId::XRule,
            RelationSymbol::O => RuleId::ORule,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleId::VRule => "V_RULE",
            RuleId::ARule => "A_RULE",
            RuleId::ORule => "O_RULE",
            RuleId::XRule => "X_RULE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub expert_id: String,
    pub i: usize,
    pub j: usize,
    pub rule: RuleId,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks each judgment against the expert's own scores:
/// V needs x_ij ≥ 1, A needs x_ji ≥ 1, X needs both ≥ 1, O needs both = 0.
/// Every failed implication is reported separately.
pub fn check_consistency(response: &ExpertResponse) -> ConsistencyReport {
    let scores = response.scores();
    let mut violations = Vec::new();
    for (i, j, symbol) in response.judgments().iter() {
        let forward = scores.at(i - 1, j - 1);
        let backward = scores.at(j - 1, i - 1);
        let rule = RuleId::for_symbol(symbol);
        let mut report = |a: usize, b: usize, value: f64, requirement: &str| {
            violations.push(Violation {
                expert_id: response.expert_id().to_owned(),
                i,
                j,
                rule,
                detail: format!("{symbol} requires x_{a}_{b} {requirement}, found {value}"),
            });
        };
        match symbol {
            RelationSymbol::O => {
                if forward != 0.0 {
                    report(i, j, forward, "= 0");
                }
                if backward != 0.0 {
                    report(j, i, backward, "= 0");
                }
            }
            _ => {
                let (needs_forward, needs_backward) = symbol.directions();
                if needs_forward && forward < 1.0 {
                    report(i, j, forward, ">= 1");
                }
                if needs_backward && backward < 1.0 {
                    report(j, i, backward, ">= 1");
                }
            }
        }
    }
    ConsistencyReport { violations }
}

/// Cronbach's alpha with population variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    pub k: usize,
    pub respondents: usize,
    /// Empty when computed from summary statistics.
    pub item_variances: Vec<f64>,
    pub item_variance_sum: f64,
    pub total_variance: f64,
    pub alpha: f64,
    pub acceptable: bool,
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = values.clone().fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    let mean = sum / count as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64
}

/// `score_table[r][item]` is respondent r's score on an item; every row must
/// hold exactly `k` items.
pub fn cronbach_alpha(score_table: &[Vec<f64>], k: usize) -> Result<ReliabilityResult> {
    if score_table.len() < 2 {
        return Err(Error::invalid("score table", "at least two respondents are required"));
    }
    if k < 2 {
        return Err(Error::invalid("score table", "at least two items are required"));
    }
    if let Some(r) = score_table.iter().position(|row| row.len() != k) {
        return Err(Error::invalid(
            "score table",
            format!(
                "respondent {} scored {} items, expected k = {k}",
                r + 1,
                score_table[r].len()
            ),
        ));
    }
    let item_variances: Vec<f64> = (0..k)
        .map(|item| population_variance(score_table.iter().map(move |row| row[item])))
        .collect();
    let totals = score_table.iter().map(|row| row.iter().sum::<f64>());
    let total_variance = population_variance(totals);
    let mut result = reliability_from_summary(k, item_variances.iter().sum(), total_variance)?;
    result.respondents = score_table.len();
    result.item_variances = item_variances;
    Ok(result)
}

/// Alpha from k, the sum of item variances and the variance of total scores.
pub fn reliability_from_summary(
    k: usize,
    item_variance_sum: f64,
    total_variance: f64,
) -> Result<ReliabilityResult> {
    if k < 2 {
        return Err(Error::invalid("score table", "at least two items are required"));
    }
    // NaN fails this check too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(total_variance > 0.0) {
        return Err(Error::DegenerateData(
            "total-score variance is zero; alpha is undefined".into(),
        ));
    }
    let kf = k as f64;
    let alpha = kf / (kf - 1.0) * (1.0 - item_variance_sum / total_variance);
    Ok(ReliabilityResult {
        k,
        respondents: 0,
        item_variances: Vec::new(),
        item_variance_sum,
        total_variance,
        alpha,
        acceptable: alpha >= ACCEPTABLE_ALPHA,
    })
}

/// Off-diagonal scores of each response in row-major order, one row per expert.
pub fn score_items(responses: &[ExpertResponse]) -> Vec<Vec<f64>> {
    responses
        .iter()
        .map(|r| {
            let n = r.n();
            (0..n * n)
                .filter(|k| k / n != k % n)
                .map(|k| r.scores().values()[k])
                .collect()
        })
        .collect()
}

/// Which responses enter aggregation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screening {
    pub strict: bool,
    pub retained: Vec<String>,
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

/// In strict mode responses with any violation are dropped; otherwise they
/// are kept and a warning is recorded for each.
pub fn screen(responses: &[ExpertResponse], reports: &[ConsistencyReport], strict: bool) -> Screening {
    let mut screening = Screening {
        strict,
        ..Screening::default()
    };
    for (response, report) in responses.iter().zip(reports) {
        let id = response.expert_id().to_owned();
        if report.is_consistent() {
            screening.retained.push(id);
        } else if strict {
            screening.excluded.push(id);
        } else {
            screening.warnings.push(format!(
                "{id}: {} consistency violation(s); retained",
                report.violations.len()
            ));
            screening.retained.push(id);
        }
    }
    screening
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelationSymbol::*;

    fn ssim2(symbol: RelationSymbol) -> SsimMatrix {
        SsimMatrix::from_fn(2, |_, _| symbol).unwrap()
    }

    fn scores2(x12: f64, x21: f64) -> InfluenceMatrix {
        InfluenceMatrix::new(2, vec![0.0, x12, x21, 0.0], MatrixRole::ExpertResponse).unwrap()
    }

    fn response(symbol: RelationSymbol, x12: f64, x21: f64) -> ExpertResponse {
        ExpertResponse::new("e", ssim2(symbol), scores2(x12, x21)).unwrap()
    }

    #[test]
    fn mode_of_singleton_is_identity() {
        let m = SsimMatrix::from_fn(4, |i, j| RelationSymbol::ALL[(i + 2 * j) % 4]).unwrap();
        assert_eq!(aggregate_ssim([&m]).unwrap(), m);
    }

    #[test]
    fn mode_tie_break_prefers_v_then_a_then_x() {
        let mut votes = Vec::new();
        votes.extend(std::iter::repeat_n(ssim2(V), 5));
        votes.extend(std::iter::repeat_n(ssim2(A), 5));
        votes.extend(std::iter::repeat_n(ssim2(X), 2));
        assert_eq!(aggregate_ssim(&votes).unwrap().get(1, 2).unwrap(), V);

        let ax = [ssim2(X), ssim2(A), ssim2(O), ssim2(O), ssim2(X), ssim2(A)];
        assert_eq!(aggregate_ssim(&ax).unwrap().get(1, 2).unwrap(), A);
        let xo = [ssim2(O), ssim2(X)];
        assert_eq!(aggregate_ssim(&xo).unwrap().get(1, 2).unwrap(), X);
        let strict = [ssim2(O), ssim2(O), ssim2(V)];
        assert_eq!(aggregate_ssim(&strict).unwrap().get(1, 2).unwrap(), O);
    }

    #[test]
    fn aggregation_errors() {
        assert!(matches!(aggregate_ssim(&[] as &[SsimMatrix]), Err(Error::NoResponses)));
        assert!(matches!(aggregate_average(&[] as &[InfluenceMatrix]), Err(Error::NoResponses)));
        let three = SsimMatrix::from_fn(3, |_, _| O).unwrap();
        assert!(matches!(
            aggregate_ssim([&ssim2(V), &three]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn average_is_arithmetic_mean() {
        let avg = aggregate_average([&scores2(1.0, 0.0), &scores2(4.0, 2.0)]).unwrap();
        assert_eq!(avg.get(1, 2).unwrap(), 2.5);
        assert_eq!(avg.get(2, 1).unwrap(), 1.0);
        assert_eq!(avg.get(1, 1).unwrap(), 0.0);
        assert_eq!(avg.role(), MatrixRole::Average);
        let single = aggregate_average([&scores2(3.0, 1.0)]).unwrap();
        assert_eq!(single.values(), scores2(3.0, 1.0).values());
    }

    #[test]
    fn consistency_rules() {
        assert!(check_consistency(&response(V, 3.0, 0.0)).is_consistent());
        // the reverse direction of V is not constrained
        assert!(check_consistency(&response(V, 3.0, 2.0)).is_consistent());

        let o = check_consistency(&response(O, 1.0, 0.0));
        assert_eq!(o.violations.len(), 1);
        assert_eq!(o.violations[0].rule, RuleId::ORule);
        assert!(o.violations[0].detail.contains("x_1_2"));

        let x = check_consistency(&response(X, 2.0, 0.0));
        assert_eq!(x.violations.len(), 1);
        assert_eq!(x.violations[0].rule, RuleId::XRule);
        assert!(x.violations[0].detail.contains("x_2_1"));

        let a = check_consistency(&response(A, 4.0, 0.0));
        assert_eq!(a.violations[0].rule, RuleId::ARule);
        let v = check_consistency(&response(V, 0.0, 4.0));
        assert_eq!(v.violations[0].rule, RuleId::VRule);

        let both = check_consistency(&response(O, 1.0, 2.0));
        assert_eq!(both.violations.len(), 2);
    }

    #[test]
    fn alpha_from_summary_statistics() {
        let r = reliability_from_summary(156, 67.88, 270.52).unwrap();
        assert!((r.alpha - 0.7534).abs() < 0.002, "{}", r.alpha);
        assert!(r.acceptable);
    }

    #[test]
    fn alpha_perfect_correlation_is_one() {
        let table = vec![vec![1.0, 1.0], vec![3.0, 3.0], vec![4.0, 4.0]];
        let r = cronbach_alpha(&table, 2).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_degenerate_totals() {
        let table = vec![vec![0.0, 4.0], vec![4.0, 0.0]];
        assert!(matches!(cronbach_alpha(&table, 2), Err(Error::DegenerateData(_))));
        assert!(cronbach_alpha(&[vec![1.0, 2.0]], 2).is_err());
        assert!(cronbach_alpha(&[vec![1.0, 2.0], vec![2.0]], 2).is_err());
    }

    #[test]
    fn screening_modes() {
        let good = response(V, 1.0, 0.0);
        let bad = ExpertResponse::new("bad", ssim2(O), scores2(2.0, 0.0)).unwrap();
        let responses = [good, bad];
        let reports: Vec<_> = responses.iter().map(check_consistency).collect();
        let strict = screen(&responses, &reports, true);
        assert_eq!(strict.retained, vec!["e"]);
        assert_eq!(strict.excluded, vec!["bad"]);
        let lenient = screen(&responses, &reports, false);
        assert_eq!(lenient.retained.len(), 2);
        assert_eq!(lenient.warnings.len(), 1);
    }
}
