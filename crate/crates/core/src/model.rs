//! Domain types shared by every stage of the analysis.
//!
//! All matrices are square over the factors of a [`BarrierRegistry`] and use
//! the registry's declaration order for rows and columns. Public accessors
//! take 1-based indices; storage is row-major.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One factor under analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Barrier {
    pub index: usize,
    pub abbr: String,
    pub name: String,
}

/// The ordered factor set. Its order is the row/column order of every matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Barrier>", into = "Vec<Barrier>")]
pub struct BarrierRegistry {
    entries: Vec<Barrier>,
}

impl BarrierRegistry {
    /// Validates contiguous 1-based indices and unique, non-empty names.
    /// Errors carry the 1-based row of the offending entry.
    pub fn new(entries: Vec<Barrier>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Registry {
                row: 0,
                reason: "registry is empty".into(),
            });
        }
        let mut abbrs = HashSet::new();
        let mut names = HashSet::new();
        for (pos, entry) in entries.iter().enumerate() {
            let row = pos + 1;
            if entry.index != row {
                return Err(Error::Registry {
                    row,
                    reason: format!("expected index {row}, found {}", entry.index),
                });
            }
            if entry.abbr.trim().is_empty() {
                return Err(Error::Registry {
                    row,
                    reason: "empty abbreviation".into(),
                });
            }
            if entry.name.trim().is_empty() {
                return Err(Error::Registry {
                    row,
                    reason: "empty name".into(),
                });
            }
            if !abbrs.insert(entry.abbr.as_str()) {
                return Err(Error::Registry {
                    row,
                    reason: format!("duplicate abbreviation `{}`", entry.abbr),
                });
            }
            if !names.insert(entry.name.as_str()) {
                return Err(Error::Registry {
                    row,
                    reason: format!("duplicate name `{}`", entry.name),
                });
            }
        }
        if entries.len() < 2 {
            return Err(Error::Registry {
                row: 1,
                reason: "at least two factors are required".into(),
            });
        }
        Ok(BarrierRegistry { entries })
    }

    /// Builds a registry from (abbreviation, name) pairs, numbering them 1..n.
    pub fn from_pairs<A, N>(pairs: impl IntoIterator<Item = (A, N)>) -> Result<Self>
    where
        A: Into<String>,
        N: Into<String>,
    {
        let entries = pairs
            .into_iter()
            .enumerate()
            .map(|(pos, (abbr, name))| Barrier {
                index: pos + 1,
                abbr: abbr.into(),
                name: name.into(),
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Barrier] {
        &self.entries
    }

    /// 1-based lookup.
    pub fn get(&self, index: usize) -> Option<&Barrier> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    /// 1-based index of an abbreviation.
    pub fn index_of(&self, abbr: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.abbr == abbr)
            .map(|p| p + 1)
    }

    pub fn abbr(&self, index: usize) -> &str {
        &self.entries[index - 1].abbr
    }

    pub fn abbrs(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.abbr.as_str())
    }
}

impl TryFrom<Vec<Barrier>> for BarrierRegistry {
    type Error = Error;

    fn try_from(entries: Vec<Barrier>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<BarrierRegistry> for Vec<Barrier> {
    fn from(registry: BarrierRegistry) -> Self {
        registry.entries
    }
}

/// Contextual relation between factors i < j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationSymbol {
    /// i influences j
    V,
    /// j influences i
    A,
    /// mutual influence
    X,
    /// no relation
    O,
}

impl RelationSymbol {
    pub const ALL: [RelationSymbol; 4] = [
        RelationSymbol::V,
        RelationSymbol::A,
        RelationSymbol::X,
        RelationSymbol::O,
    ];

    pub fn as_char(self) -> char {
        match self {
            RelationSymbol::V => 'V',
            RelationSymbol::A => 'A',
            RelationSymbol::X => 'X',
            RelationSymbol::O => 'O',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'V' => Some(RelationSymbol::V),
            'A' => Some(RelationSymbol::A),
            'X' => Some(RelationSymbol::X),
            'O' => Some(RelationSymbol::O),
            _ => None,
        }
    }

    /// Whether the relation asserts i → j and j → i respectively.
    pub fn directions(self) -> (bool, bool) {
        match self {
            RelationSymbol::V => (true, false),
            RelationSymbol::A => (false, true),
            RelationSymbol::X => (true, true),
            RelationSymbol::O => (false, false),
        }
    }
}

impl fmt::Display for RelationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for RelationSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_char(c),
            _ => None,
        }
        .ok_or_else(|| Error::invalid("relation symbol", format!("`{s}` is not one of V, A, X, O")))
    }
}

/// Upper-triangular SSIM: one symbol for every pair i < j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SsimRepr", into = "SsimRepr")]
pub struct SsimMatrix {
    n: usize,
    cells: Vec<RelationSymbol>,
}

impl SsimMatrix {
    /// Builds from a function of 1-based (i, j), called for every i < j.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> RelationSymbol) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("ssim", "at least two factors are required"));
        }
        let mut cells = Vec::with_capacity(n * (n - 1) / 2);
        for i in 1..=n {
            for j in (i + 1)..=n {
                cells.push(f(i, j));
            }
        }
        Ok(SsimMatrix { n, cells })
    }

    /// Builds from a sparse listing; every pair i < j must appear exactly once.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, RelationSymbol)>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("ssim", "at least two factors are required"));
        }
        let mut cells: Vec<Option<RelationSymbol>> = vec![None; n * (n - 1) / 2];
        for (i, j, symbol) in entries {
            if !(1 <= i && i < j && j <= n) {
                return Err(Error::invalid(
                    "ssim",
                    format!("pair ({i}, {j}) is not in the upper triangle of 1..={n}"),
                ));
            }
            let slot = &mut cells[Self::offset(n, i, j)];
            if slot.is_some() {
                return Err(Error::invalid("ssim", format!("pair ({i}, {j}) given twice")));
            }
            *slot = Some(symbol);
        }
        let mut complete = Vec::with_capacity(cells.len());
        for i in 1..=n {
            for j in (i + 1)..=n {
                match cells[Self::offset(n, i, j)] {
                    Some(s) => complete.push(s),
                    None => {
                        return Err(Error::invalid("ssim", format!("pair ({i}, {j}) missing")))
                    }
                }
            }
        }
        Ok(SsimMatrix { n, cells: complete })
    }

    fn offset(n: usize, i: usize, j: usize) -> usize {
        // rows 1..i-1 hold (n-1) + (n-2) + ... cells
        let before = (i - 1) * n - (i - 1) * i / 2;
        before + (j - i - 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Symbol for 1-based i < j.
    pub fn get(&self, i: usize, j: usize) -> Result<RelationSymbol> {
        if !(1 <= i && i < j && j <= self.n) {
            return Err(Error::IndexOutOfRange { i, j, n: self.n });
        }
        Ok(self.cells[Self::offset(self.n, i, j)])
    }

    /// All cells as (i, j, symbol), row-major over the upper triangle.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, RelationSymbol)> + '_ {
        let n = self.n;
        (1..=n)
            .flat_map(move |i| ((i + 1)..=n).map(move |j| (i, j)))
            .zip(self.cells.iter().copied())
            .map(|((i, j), s)| (i, j, s))
    }
}

#[derive(Serialize, Deserialize)]
struct SsimRepr {
    n: usize,
    /// row i lists the symbols for j = i+1..=n
    rows: Vec<String>,
}

impl TryFrom<SsimRepr> for SsimMatrix {
    type Error = Error;

    fn try_from(repr: SsimRepr) -> Result<Self> {
        if repr.rows.len() != repr.n.saturating_sub(1) {
            return Err(Error::invalid("ssim", "row count does not match n"));
        }
        let mut entries = Vec::new();
        for (r, row) in repr.rows.iter().enumerate() {
            let i = r + 1;
            let symbols: Vec<char> = row.chars().collect();
            if symbols.len() != repr.n - i {
                return Err(Error::invalid("ssim", format!("row {i} has wrong length")));
            }
            for (k, c) in symbols.into_iter().enumerate() {
                let symbol = RelationSymbol::from_char(c)
                    .ok_or_else(|| Error::invalid("ssim", format!("bad symbol `{c}`")))?;
                entries.push((i, i + 1 + k, symbol));
            }
        }
        SsimMatrix::from_entries(repr.n, entries)
    }
}

impl From<SsimMatrix> for SsimRepr {
    fn from(m: SsimMatrix) -> Self {
        let rows = (1..m.n)
            .map(|i| {
                ((i + 1)..=m.n)
                    .map(|j| m.cells[SsimMatrix::offset(m.n, i, j)].as_char())
                    .collect()
            })
            .collect();
        SsimRepr { n: m.n, rows }
    }
}

/// What an [`InfluenceMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixRole {
    ExpertResponse,
    Average,
    Normalized,
    TotalRelation,
}

impl fmt::Display for MatrixRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MatrixRole::ExpertResponse => "expert_response",
            MatrixRole::Average => "average",
            MatrixRole::Normalized => "normalized",
            MatrixRole::TotalRelation => "total_relation",
        };
        f.write_str(s)
    }
}

/// Square non-negative score matrix.
///
/// Values are `f64`. Parsing goes through the standard correctly-rounded
/// decimal conversion and serialization uses the shortest representation that
/// parses back to the same value, so text round-trips are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct InfluenceMatrix {
    n: usize,
    role: MatrixRole,
    values: Vec<f64>,
}

impl InfluenceMatrix {
    /// Row-major values; checks the invariants of `role`.
    pub fn new(n: usize, values: Vec<f64>, role: MatrixRole) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("matrix", "at least two factors are required"));
        }
        if values.len() != n * n {
            return Err(Error::invalid(
                "matrix",
                format!("expected {} values, found {}", n * n, values.len()),
            ));
        }
        for (k, &v) in values.iter().enumerate() {
            let (i, j) = (k / n + 1, k % n + 1);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(
                    "matrix",
                    format!("{role} cell ({i}, {j}) = {v} is not a finite non-negative score"),
                ));
            }
            if i == j && v != 0.0 && matches!(role, MatrixRole::ExpertResponse | MatrixRole::Average)
            {
                return Err(Error::invalid(
                    "matrix",
                    format!("{role} diagonal cell ({i}, {i}) must be 0, found {v}"),
                ));
            }
            if role == MatrixRole::ExpertResponse && !(v.fract() == 0.0 && v <= 4.0) {
                return Err(Error::invalid(
                    "matrix",
                    format!("expert score ({i}, {j}) = {v} is not an integer in 0..=4"),
                ));
            }
        }
        Ok(InfluenceMatrix { n, role, values })
    }

    pub fn from_rows(rows: &[Vec<f64>], role: MatrixRole) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(
                "matrix",
                format!("row {} has {} values, expected {n}", bad + 1, rows[bad].len()),
            ));
        }
        Self::new(n, rows.concat(), role)
    }

    pub fn zeros(n: usize, role: MatrixRole) -> Result<Self> {
        Self::new(n, vec![0.0; n * n], role)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn role(&self) -> MatrixRole {
        self.role
    }

    /// Stored value at 1-based (i, j).
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || j == 0 || i > self.n || j > self.n {
            return Err(Error::IndexOutOfRange { i, j, n: self.n });
        }
        Ok(self.values[(i - 1) * self.n + (j - 1)])
    }

    /// 0-based, unchecked beyond slice bounds.
    pub(crate) fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub(crate) fn require_role(&self, expected: MatrixRole) -> Result<()> {
        if self.role != expected {
            return Err(Error::invalid(
                "matrix",
                format!("expected a {expected} matrix, found {}", self.role),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    role: MatrixRole,
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for InfluenceMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        let m = InfluenceMatrix::from_rows(&repr.rows, repr.role)?;
        if m.n != repr.n {
            return Err(Error::DimensionMismatch {
                expected: repr.n,
                found: m.n,
            });
        }
        Ok(m)
    }
}

impl From<InfluenceMatrix> for MatrixRepr {
    fn from(m: InfluenceMatrix) -> Self {
        MatrixRepr {
            role: m.role,
            n: m.n,
            rows: m.to_rows(),
        }
    }
}

/// Reachability cell. `OneStar` marks a link derived by transitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reach {
    Zero,
    One,
    OneStar,
}

impl Reach {
    pub fn is_reachable(self) -> bool {
        self != Reach::Zero
    }

    pub fn literal(self) -> &'static str {
        match self {
            Reach::Zero => "0",
            Reach::One => "1",
            Reach::OneStar => "1*",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        match s.trim() {
            "0" => Some(Reach::Zero),
            "1" => Some(Reach::One),
            "1*" => Some(Reach::OneStar),
            _ => None,
        }
    }
}

impl fmt::Display for Reach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

impl Serialize for Reach {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.literal())
    }
}

impl<'de> Deserialize<'de> for Reach {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Reach::from_literal(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad reachability literal `{s}`")))
    }
}

/// Boolean reachability matrix with per-cell provenance and row/column powers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ReachRepr", into = "ReachRepr")]
pub struct ReachabilityMatrix {
    n: usize,
    cells: Vec<Reach>,
    driving_power: Vec<usize>,
    dependence_power: Vec<usize>,
}

impl ReachabilityMatrix {
    /// Row-major cells; the diagonal must be `One`.
    pub fn new(n: usize, cells: Vec<Reach>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("reachability matrix", "at least two factors are required"));
        }
        if cells.len() != n * n {
            return Err(Error::invalid(
                "reachability matrix",
                format!("expected {} cells, found {}", n * n, cells.len()),
            ));
        }
        if let Some(d) = (0..n).find(|&d| cells[d * n + d] != Reach::One) {
            return Err(Error::invalid(
                "reachability matrix",
                format!("diagonal cell ({0}, {0}) must be 1", d + 1),
            ));
        }
        let mut driving_power = vec![0; n];
        let mut dependence_power = vec![0; n];
        for (k, cell) in cells.iter().enumerate() {
            if cell.is_reachable() {
                driving_power[k / n] += 1;
                dependence_power[k % n] += 1;
            }
        }
        Ok(ReachabilityMatrix {
            n,
            cells,
            driving_power,
            dependence_power,
        })
    }

    pub fn from_rows(rows: &[Vec<Reach>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(
                "reachability matrix",
                format!("row {} has {} cells, expected {n}", bad + 1, rows[bad].len()),
            ));
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell at 1-based (i, j).
    pub fn get(&self, i: usize, j: usize) -> Result<Reach> {
        if i == 0 || j == 0 || i > self.n || j > self.n {
            return Err(Error::IndexOutOfRange { i, j, n: self.n });
        }
        Ok(self.cells[(i - 1) * self.n + (j - 1)])
    }

    pub(crate) fn at(&self, r: usize, c: usize) -> Reach {
        self.cells[r * self.n + c]
    }

    pub(crate) fn reaches(&self, r: usize, c: usize) -> bool {
        self.at(r, c).is_reachable()
    }

    pub fn cells(&self) -> &[Reach] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<Reach>> {
        self.cells.chunks(self.n).map(<[Reach]>::to_vec).collect()
    }

    /// Row sums of non-zero cells, in registry order.
    pub fn driving_power(&self) -> &[usize] {
        &self.driving_power
    }

    /// Column sums of non-zero cells, in registry order.
    pub fn dependence_power(&self) -> &[usize] {
        &self.dependence_power
    }

    pub fn reachable_count(&self) -> usize {
        self.driving_power.iter().sum()
    }

    pub fn has_stars(&self) -> bool {
        self.cells.contains(&Reach::OneStar)
    }

    pub fn is_transitively_closed(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).filter(|&j| self.reaches(i, j)).all(|j| {
                (0..n).all(|k| !self.reaches(j, k) || self.reaches(i, k))
            })
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ReachRepr {
    n: usize,
    rows: Vec<Vec<Reach>>,
    driving_power: Vec<usize>,
    dependence_power: Vec<usize>,
}

impl TryFrom<ReachRepr> for ReachabilityMatrix {
    type Error = Error;

    fn try_from(repr: ReachRepr) -> Result<Self> {
        let m = ReachabilityMatrix::from_rows(&repr.rows)?;
        if m.n != repr.n
            || m.driving_power != repr.driving_power
            || m.dependence_power != repr.dependence_power
        {
            return Err(Error::invalid(
                "reachability matrix",
                "recorded powers do not match the cells",
            ));
        }
        Ok(m)
    }
}

impl From<ReachabilityMatrix> for ReachRepr {
    fn from(m: ReachabilityMatrix) -> Self {
        ReachRepr {
            n: m.n,
            rows: m.to_rows(),
            driving_power: m.driving_power,
            dependence_power: m.dependence_power,
        }
    }
}

/// Reachability, antecedent and intersection sets of one factor, as recorded
/// in the round that assigned its level. Sets hold 1-based factor indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub index: usize,
    pub level: usize,
    pub reachability: Vec<usize>,
    pub antecedent: Vec<usize>,
    pub intersection: Vec<usize>,
}

/// Hierarchical level of every factor; level 1 is the top of the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartition {
    records: Vec<LevelRecord>,
    level_count: usize,
}

impl LevelPartition {
    /// `records` in registry order. Levels must be contiguous from 1.
    pub fn new(records: Vec<LevelRecord>) -> Result<Self> {
        if records.iter().enumerate().any(|(p, r)| r.index != p + 1) {
            return Err(Error::invalid("level partition", "records out of registry order"));
        }
        let level_count = records.iter().map(|r| r.level).max().unwrap_or(0);
        for level in 1..=level_count {
            if !records.iter().any(|r| r.level == level) {
                return Err(Error::invalid(
                    "level partition",
                    format!("level {level} is empty"),
                ));
            }
        }
        if records.iter().any(|r| r.level == 0) {
            return Err(Error::invalid("level partition", "level 0 assigned"));
        }
        Ok(LevelPartition {
            records,
            level_count,
        })
    }

    pub fn records(&self) -> &[LevelRecord] {
        &self.records
    }

    pub fn record(&self, index: usize) -> Option<&LevelRecord> {
        index.checked_sub(1).and_then(|i| self.records.get(i))
    }

    /// Level of each factor in registry order.
    pub fn levels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.level).collect()
    }

    pub fn level_of(&self, index: usize) -> Option<usize> {
        self.record(index).map(|r| r.level)
    }

    pub fn level_count(&self) -> usize {
        self.level_count
    }

    /// 1-based members of `level`, ascending.
    pub fn members(&self, level: usize) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.level == level)
            .map(|r| r.index)
            .collect()
    }
}
