//! File-level orchestration: loading inputs, running the stages, rendering
//! output bundles and writing them atomically.
//!
//! Every stage produces an [`Intermediate`] JSON file tagged with its role so
//! later stages can resume from it. Rendering happens fully in memory; files
//! are written only after every output has been produced.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dematel::{self, DematelResult};
use crate::dot;
use crate::error::{Error, Result};
use crate::io::{self, format_fixed, write_csv_row, Precision};
use crate::ism::{self, IsmResult};
use crate::micmac::{self, Quadrant, QuadrantAssignment};
use crate::model::{BarrierRegistry, InfluenceMatrix, MatrixRole, SsimMatrix};
use crate::survey::{self, ExpertResponse, ReliabilityResult, Screening, Violation};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Optional export formats. Stage intermediates and the report are always
/// written as JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub dot: bool,
}

impl Formats {
    pub const ALL: Formats = Formats { csv: true, json: true, dot: true };
    pub const NONE: Formats = Formats { csv: false, json: false, dot: false };
}

impl Default for Formats {
    fn default() -> Self {
        Formats::ALL
    }
}

impl FromStr for Formats {
    type Err = Error;

    /// Comma-separated subset of `csv`, `json`, `dot`; `none` or an empty
    /// string selects nothing.
    fn from_str(s: &str) -> Result<Self> {
        let mut formats = Formats::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "csv" => formats.csv = true,
                "json" => formats.json = true,
                "dot" => formats.dot = true,
                "none" => {}
                other => {
                    return Err(Error::invalid(
                        "formats",
                        format!("unknown format `{other}`; expected csv, json or dot"),
                    ))
                }
            }
        }
        Ok(formats)
    }
}

impl fmt::Display for Formats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.csv, "csv"), (self.json, "json"), (self.dot, "dot")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub registry_path: PathBuf,
    pub responses_dir: PathBuf,
    pub output_dir: PathBuf,
    pub strict_screening: bool,
    /// Cronbach's alpha is computed only when set.
    pub alpha_item_count: Option<usize>,
    pub micmac_mid_override: Option<f64>,
    pub formats: Formats,
}

impl RunConfig {
    pub fn new(
        registry_path: impl Into<PathBuf>,
        responses_dir: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            registry_path: registry_path.into(),
            responses_dir: responses_dir.into(),
            output_dir: output_dir.into(),
            strict_screening: false,
            alpha_item_count: None,
            micmac_mid_override: None,
            formats: Formats::ALL,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (what, path) in [
            ("registry path", &self.registry_path),
            ("responses directory", &self.responses_dir),
            ("output directory", &self.output_dir),
        ] {
            if path.as_os_str().is_empty() {
                return Err(Error::invalid("configuration", format!("{what} is empty")));
            }
        }
        check_alpha_items(self.alpha_item_count)?;
        check_mid(self.micmac_mid_override)
    }
}

fn check_alpha_items(k: Option<usize>) -> Result<()> {
    match k {
        Some(k) if k < 2 => Err(Error::invalid(
            "configuration",
            format!("alpha item count must be at least 2, found {k}"),
        )),
        _ => Ok(()),
    }
}

fn check_mid(mid: Option<f64>) -> Result<()> {
    match mid {
        Some(m) if !m.is_finite() => Err(Error::invalid(
            "configuration",
            format!("MICMAC mid must be finite, found {m}"),
        )),
        _ => Ok(()),
    }
}

/// Tool identity and SHA-256 of every input file, keyed by a path-free name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub inputs: BTreeMap<String, String>,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            tool: TOOL_NAME.to_owned(),
            version: TOOL_VERSION.to_owned(),
            inputs: BTreeMap::new(),
        }
    }
}

impl Provenance {
    pub fn record(&mut self, input: &InputFile) {
        self.inputs.insert(input.name.clone(), input.sha256.clone());
    }

    fn merge(&mut self, other: &Provenance) -> Result<()> {
        for (name, hash) in &other.inputs {
            match self.inputs.get(name) {
                Some(existing) if existing != hash => {
                    return Err(Error::invalid(
                        "intermediates",
                        format!("`{name}` has different hashes across stages; rerun the stages"),
                    ))
                }
                _ => {
                    self.inputs.insert(name.clone(), hash.clone());
                }
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An input file read into memory.
#[derive(Debug, Clone)]
pub struct InputFile {
    /// Name used in provenance and error messages.
    pub name: String,
    pub text: String,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let sha256 = sha256_hex(&bytes);
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::parse(&name, 1, format!("not valid UTF-8: {e}")))?;
        Ok(InputFile { name, text, sha256 })
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn load_registry(path: &Path) -> Result<(BarrierRegistry, InputFile)> {
    let file = InputFile::read(path, "registry")?;
    let registry = io::parse_registry(&file.text, &file_name(path))?;
    Ok((registry, file))
}

/// One response file per expert, ordered by file name. Hidden files are
/// ignored; the expert id is the file stem.
pub fn list_responses(dir: &Path) -> Result<Vec<(String, InputFile)>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_owned(),
            source,
        })?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if path.is_file() && !hidden {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NoResponses);
    }
    paths
        .into_iter()
        .map(|path| {
            let id = path
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            let file = InputFile::read(&path, format!("responses/{}", file_name(&path)))?;
            Ok((id, file))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageRole {
    Validation,
    Ism,
    Micmac,
    Dematel,
    Report,
}

impl StageRole {
    pub fn file_name(self) -> &'static str {
        match self {
            StageRole::Validation => "validation.json",
            StageRole::Ism => "ism.json",
            StageRole::Micmac => "micmac.json",
            StageRole::Dematel => "dematel.json",
            StageRole::Report => "report.json",
        }
    }

    /// Subcommand that produces this file.
    pub fn command(self) -> &'static str {
        match self {
            StageRole::Validation => "validate",
            StageRole::Ism => "ism",
            StageRole::Micmac => "micmac",
            StageRole::Dematel => "dematel",
            StageRole::Report => "report",
        }
    }
}

/// A section that is either present or skipped with a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T> {
    Ok { value: T },
    Skipped { reason: String },
}

impl<T> Section<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Section::Ok { value } => Some(value),
            Section::Skipped { .. } => None,
        }
    }
}

/// Serialized output of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intermediate<T> {
    pub role: StageRole,
    pub provenance: Provenance,
    pub registry: BarrierRegistry,
    pub data: T,
}

pub fn read_intermediate<T: DeserializeOwned>(out_dir: &Path, role: StageRole) -> Result<Intermediate<T>> {
    let path = out_dir.join(role.file_name());
    if !path.is_file() {
        return Err(Error::MissingIntermediate {
            path,
            stage: role.command(),
        });
    }
    let bytes = fs::read(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let value: Intermediate<T> =
        serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.clone(), source })?;
    if value.role != role {
        return Err(Error::invalid(
            "intermediate",
            format!(
                "{} holds role `{}`, expected `{}`",
                path.display(),
                value.role.command(),
                role.command()
            ),
        ));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertConsistency {
    pub expert_id: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub consistency: Vec<ExpertConsistency>,
    pub screening: Screening,
    /// Computed over the retained responses.
    pub reliability: Section<ReliabilityResult>,
}

impl Validation {
    pub fn violation_count(&self) -> usize {
        self.consistency.iter().map(|c| c.violations.len()).sum()
    }

    /// Passes when every response is consistent and alpha, if computed, is
    /// acceptable.
    pub fn verdict(&self) -> Result<()> {
        let count = self.violation_count();
        if count > 0 {
            return Err(Error::ConsistencyFailed(count));
        }
        if let Some(r) = self.reliability.value() {
            if !r.acceptable {
                return Err(Error::Unreliable {
                    alpha: r.alpha,
                    minimum: survey::ACCEPTABLE_ALPHA,
                });
            }
        }
        Ok(())
    }
}

/// Consistency, screening and (when `alpha_items` is set) reliability.
pub fn validate(
    responses: &[ExpertResponse],
    strict: bool,
    alpha_items: Option<usize>,
) -> Result<Validation> {
    check_alpha_items(alpha_items)?;
    let reports: Vec<_> = responses.iter().map(survey::check_consistency).collect();
    let screening = survey::screen(responses, &reports, strict);
    let consistency = responses
        .iter()
        .zip(&reports)
        .map(|(r, report)| ExpertConsistency {
            expert_id: r.expert_id().to_owned(),
            violations: report.violations.clone(),
        })
        .collect();
    let retained: Vec<ExpertResponse> = responses
        .iter()
        .filter(|r| screening.retained.iter().any(|id| id == r.expert_id()))
        .cloned()
        .collect();
    let reliability = match alpha_items {
        None => Section::Skipped {
            reason: "no alpha item count configured".into(),
        },
        Some(_) if retained.len() < 2 => Section::Skipped {
            reason: format!(
                "alpha needs at least two retained respondents, found {}",
                retained.len()
            ),
        },
        Some(k) => {
            let items = survey::score_items(&retained);
            let available = items.first().map_or(0, Vec::len);
            if k != available {
                return Err(Error::invalid(
                    "alpha item count",
                    format!(
                        "configured k = {k} but each response has {available} off-diagonal scores"
                    ),
                ));
            }
            Section::Ok {
                value: survey::cronbach_alpha(&items, k)?,
            }
        }
    };
    Ok(Validation {
        consistency,
        screening,
        reliability,
    })
}

/// Entries whose ids survived screening; all of them when `screening` is `None`.
fn select<'a, T>(items: &'a [(String, T)], screening: Option<&Screening>) -> Result<Vec<&'a T>> {
    let kept: Vec<&T> = items
        .iter()
        .filter(|(id, _)| screening.is_none_or(|s| s.retained.contains(id)))
        .map(|(_, item)| item)
        .collect();
    if kept.is_empty() {
        return Err(Error::AllResponsesExcluded(items.len()));
    }
    Ok(kept)
}

fn retained_ids(items: &[(String, impl Sized)], screening: Option<&Screening>) -> Vec<String> {
    items
        .iter()
        .map(|(id, _)| id)
        .filter(|id| screening.is_none_or(|s| s.retained.contains(id)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsmStage {
    /// Experts aggregated into the SSIM; absent when the SSIM was given directly.
    pub experts: Option<Vec<String>>,
    pub result: IsmResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DematelStage {
    /// Experts averaged; absent when the average matrix was given directly.
    pub experts: Option<Vec<String>>,
    pub result: DematelResult,
}

pub fn ism_stage(judgments: &[(String, SsimMatrix)], screening: Option<&Screening>) -> Result<IsmStage> {
    let kept = select(judgments, screening)?;
    let ssim = survey::aggregate_ssim(kept)?;
    Ok(IsmStage {
        experts: Some(retained_ids(judgments, screening)),
        result: ism::analyze(&ssim)?,
    })
}

pub fn dematel_stage(
    scores: &[(String, InfluenceMatrix)],
    screening: Option<&Screening>,
) -> Result<DematelStage> {
    let kept = select(scores, screening)?;
    let average = survey::aggregate_average(kept)?;
    Ok(DematelStage {
        experts: Some(retained_ids(scores, screening)),
        result: dematel::analyze(&average)?,
    })
}

struct Loaded {
    registry: BarrierRegistry,
    provenance: Provenance,
    files: Vec<(String, InputFile)>,
}

fn load(registry_path: &Path, responses_dir: &Path) -> Result<Loaded> {
    let (registry, registry_file) = load_registry(registry_path)?;
    let files = list_responses(responses_dir)?;
    let mut provenance = Provenance::default();
    provenance.record(&registry_file);
    for (_, file) in &files {
        provenance.record(file);
    }
    Ok(Loaded { registry, provenance, files })
}

fn parse_all<T>(
    loaded: &Loaded,
    parse: impl Fn(&str, &str, &BarrierRegistry) -> Result<T>,
) -> Result<Vec<(String, T)>> {
    loaded
        .files
        .iter()
        .map(|(id, f)| Ok((id.clone(), parse(&f.text, &f.name, &loaded.registry)?)))
        .collect()
}

/// Reads complete responses and runs consistency, screening and alpha.
pub fn validate_files(
    registry_path: &Path,
    responses_dir: &Path,
    strict: bool,
    alpha_items: Option<usize>,
) -> Result<Intermediate<Validation>> {
    let stage = "survey";
    let loaded = load(registry_path, responses_dir).map_err(|e| e.in_stage(stage))?;
    let responses: Vec<ExpertResponse> = loaded
        .files
        .iter()
        .map(|(id, f)| io::parse_response(id, &f.text, &f.name, &loaded.registry))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage(stage))?;
    let data = validate(&responses, strict, alpha_items).map_err(|e| e.in_stage(stage))?;
    Ok(Intermediate {
        role: StageRole::Validation,
        provenance: loaded.provenance,
        registry: loaded.registry,
        data,
    })
}

/// Screening to apply for a resumed stage: `None` when not strict, otherwise
/// the strict screening recorded by a previous `validate` run.
pub fn screening_for(out_dir: &Path, strict: bool) -> Result<Option<Screening>> {
    if !strict {
        return Ok(None);
    }
    let validation: Intermediate<Validation> = read_intermediate(out_dir, StageRole::Validation)?;
    if !validation.data.screening.strict {
        return Err(Error::invalid(
            "screening",
            "validation.json was produced without strict screening; run `validate --strict` first",
        ));
    }
    Ok(Some(validation.data.screening))
}

/// ISM from the `[SSIM]` sections only.
pub fn ism_from_responses(
    registry_path: &Path,
    responses_dir: &Path,
    screening: Option<&Screening>,
) -> Result<Intermediate<IsmStage>> {
    let stage = "ism";
    let loaded = load(registry_path, responses_dir).map_err(|e| e.in_stage(stage))?;
    let judgments =
        parse_all(&loaded, io::parse_response_judgments).map_err(|e| e.in_stage(stage))?;
    let data = ism_stage(&judgments, screening).map_err(|e| e.in_stage(stage))?;
    Ok(Intermediate {
        role: StageRole::Ism,
        provenance: loaded.provenance,
        registry: loaded.registry,
        data,
    })
}

/// ISM from an aggregated SSIM listing.
pub fn ism_from_ssim(registry_path: &Path, ssim_path: &Path) -> Result<Intermediate<IsmStage>> {
    let stage = "ism";
    let run = || {
        let (registry, registry_file) = load_registry(registry_path)?;
        let file = InputFile::read(ssim_path, "ssim")?;
        let ssim = io::parse_ssim(&file.text, &file_name(ssim_path), registry.len())?;
        let mut provenance = Provenance::default();
        provenance.record(&registry_file);
        provenance.record(&file);
        Ok(Intermediate {
            role: StageRole::Ism,
            provenance,
            registry,
            data: IsmStage {
                experts: None,
                result: ism::analyze(&ssim)?,
            },
        })
    };
    run().map_err(|e: Error| e.in_stage(stage))
}

pub fn micmac_from_ism(
    ism: &Intermediate<IsmStage>,
    mid: Option<f64>,
) -> Result<Intermediate<QuadrantAssignment>> {
    check_mid(mid).map_err(|e| e.in_stage("micmac"))?;
    Ok(Intermediate {
        role: StageRole::Micmac,
        provenance: ism.provenance.clone(),
        registry: ism.registry.clone(),
        data: micmac::classify(&ism.data.result.frm, mid),
    })
}

/// DEMATEL from the `[SCORES]` sections only.
pub fn dematel_from_responses(
    registry_path: &Path,
    responses_dir: &Path,
    screening: Option<&Screening>,
) -> Result<Intermediate<DematelStage>> {
    let stage = "dematel";
    let loaded = load(registry_path, responses_dir).map_err(|e| e.in_stage(stage))?;
    let scores = parse_all(&loaded, io::parse_response_scores).map_err(|e| e.in_stage(stage))?;
    let data = dematel_stage(&scores, screening).map_err(|e| e.in_stage(stage))?;
    Ok(Intermediate {
        role: StageRole::Dematel,
        provenance: loaded.provenance,
        registry: loaded.registry,
        data,
    })
}

/// DEMATEL from a labelled average-matrix CSV.
pub fn dematel_from_average(
    registry_path: &Path,
    average_path: &Path,
) -> Result<Intermediate<DematelStage>> {
    let run = || {
        let (registry, registry_file) = load_registry(registry_path)?;
        let file = InputFile::read(average_path, "average")?;
        let average =
            io::parse_matrix(&file.text, &file_name(average_path), &registry, MatrixRole::Average)?;
        let mut provenance = Provenance::default();
        provenance.record(&registry_file);
        provenance.record(&file);
        Ok(Intermediate {
            role: StageRole::Dematel,
            provenance,
            registry,
            data: DematelStage {
                experts: None,
                result: dematel::analyze(&average)?,
            },
        })
    };
    run().map_err(|e: Error| e.in_stage("dematel"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub role: StageRole,
    pub provenance: Provenance,
    pub registry: BarrierRegistry,
    pub validation: Section<Validation>,
    pub ism: IsmStage,
    pub micmac: QuadrantAssignment,
    pub dematel: DematelStage,
}

impl AnalysisReport {
    pub fn assemble(
        validation: Option<Intermediate<Validation>>,
        ism: Intermediate<IsmStage>,
        micmac: Intermediate<QuadrantAssignment>,
        dematel: Intermediate<DematelStage>,
    ) -> Result<Self> {
        let registry = ism.registry.clone();
        let mut provenance = Provenance::default();
        for (name, other_registry, other) in [
            ("micmac", &micmac.registry, &micmac.provenance),
            ("dematel", &dematel.registry, &dematel.provenance),
            ("ism", &ism.registry, &ism.provenance),
        ] {
            if *other_registry != registry {
                return Err(Error::invalid(
                    "intermediates",
                    format!("{name} stage used a different registry"),
                ));
            }
            provenance.merge(other)?;
        }
        let validation = match validation {
            Some(v) => {
                if v.registry != registry {
                    return Err(Error::invalid(
                        "intermediates",
                        "validation stage used a different registry",
                    ));
                }
                provenance.merge(&v.provenance)?;
                Section::Ok { value: v.data }
            }
            None => Section::Skipped {
                reason: "no survey validation; run `validate` to include it".into(),
            },
        };
        Ok(AnalysisReport {
            role: StageRole::Report,
            provenance,
            registry,
            validation,
            ism: ism.data,
            micmac: micmac.data,
            dematel: dematel.data,
        })
    }

    /// Causes by descending R−C.
    pub fn top_causes(&self) -> Vec<usize> {
        self.dematel.result.cause_effect.strongest_causes()
    }
}

/// Report from the intermediates in `out_dir`. Validation is optional.
pub fn assemble_report(out_dir: &Path) -> Result<AnalysisReport> {
    let validation = match read_intermediate(out_dir, StageRole::Validation) {
        Ok(v) => Some(v),
        Err(Error::MissingIntermediate { .. }) => None,
        Err(e) => return Err(e),
    };
    AnalysisReport::assemble(
        validation,
        read_intermediate(out_dir, StageRole::Ism)?,
        read_intermediate(out_dir, StageRole::Micmac)?,
        read_intermediate(out_dir, StageRole::Dematel)?,
    )
}

/// File name to contents.
pub type Bundle = BTreeMap<String, Vec<u8>>;

fn put_json(bundle: &mut Bundle, name: &str, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: PathBuf::from(name),
        source,
    })?;
    bytes.push(b'\n');
    bundle.insert(name.to_owned(), bytes);
    Ok(())
}

fn put_text(bundle: &mut Bundle, name: &str, text: String) {
    bundle.insert(name.to_owned(), text.into_bytes());
}

fn table<R, F>(header: &[&str], rows: impl IntoIterator<Item = R>) -> String
where
    R: IntoIterator<Item = F>,
    F: AsRef<str>,
{
    let mut out = String::new();
    write_csv_row(&mut out, header);
    for row in rows {
        write_csv_row(&mut out, row);
    }
    out
}

fn joined(indices: &[usize]) -> String {
    indices.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn abbrs(registry: &BarrierRegistry, indices: &[usize]) -> String {
    indices.iter().map(|&i| registry.abbr(i)).collect::<Vec<_>>().join(", ")
}

const PLACES: usize = 3;

fn fixed(v: f64) -> String {
    format_fixed(v, PLACES)
}

fn render_validation_exports(bundle: &mut Bundle, v: &Validation, formats: Formats) {
    if formats.csv {
        let rows = v.consistency.iter().flat_map(|c| {
            c.violations.iter().map(|x| {
                vec![
                    x.expert_id.clone(),
                    x.i.to_string(),
                    x.j.to_string(),
                    x.rule.to_string(),
                    x.detail.clone(),
                ]
            })
        });
        put_text(bundle, "consistency.csv", table(&["expert_id", "i", "j", "rule", "detail"], rows));
    }
}

fn conical_csv(result: &IsmResult) -> String {
    let c = &result.conical;
    let mut header = vec!["Variables".to_owned()];
    header.extend(c.order.iter().map(ToString::to_string));
    header.extend(["Driving Power".to_owned(), "Level".to_owned()]);
    let mut out = String::new();
    write_csv_row(&mut out, &header);
    for (p, row) in c.rows.iter().enumerate() {
        let mut fields = vec![c.order[p].to_string()];
        fields.extend(row.iter().map(|r| r.literal().to_owned()));
        fields.extend([c.driving_power[p].to_string(), c.levels[p].to_string()]);
        write_csv_row(&mut out, &fields);
    }
    let tail = ["".to_owned(), "".to_owned()];
    let mut dep = vec!["Dependence Power".to_owned()];
    dep.extend(c.dependence_power.iter().map(ToString::to_string));
    dep.extend(tail.clone());
    write_csv_row(&mut out, &dep);
    let mut lv = vec!["Level".to_owned()];
    lv.extend(c.levels.iter().map(ToString::to_string));
    lv.extend(tail);
    write_csv_row(&mut out, &lv);
    out
}

fn render_ism_exports(bundle: &mut Bundle, stage: &IsmStage, reg: &BarrierRegistry, formats: Formats) {
    let r = &stage.result;
    if formats.csv {
        put_text(bundle, "ssim.csv", io::ssim_to_csv(&r.ssim));
        put_text(bundle, "irm.csv", io::reachability_to_csv(&r.irm, reg));
        put_text(bundle, "frm.csv", io::reachability_to_csv(&r.frm, reg));
        let rows = r.levels.records().iter().map(|rec| {
            vec![
                rec.index.to_string(),
                joined(&rec.reachability),
                joined(&rec.antecedent),
                joined(&rec.intersection),
                rec.level.to_string(),
            ]
        });
        put_text(
            bundle,
            "levels.csv",
            table(&["index", "reachability", "antecedent", "intersection", "level"], rows),
        );
        put_text(bundle, "conical.csv", conical_csv(r));
    }
    if formats.json {
        let mut bytes = serde_json::to_vec_pretty(&dot::ism_json(&r.digraph, reg))
            .expect("JSON values serialize");
        bytes.push(b'\n');
        bundle.insert("ism_digraph.json".into(), bytes);
    }
    if formats.dot {
        put_text(bundle, "ism.dot", dot::ism_dot(&r.digraph, reg));
    }
}

fn render_micmac_exports(
    bundle: &mut Bundle,
    q: &QuadrantAssignment,
    reg: &BarrierRegistry,
    formats: Formats,
) {
    if formats.csv {
        let rows = q.points.iter().map(|p| {
            vec![
                reg.abbr(p.index).to_owned(),
                p.driving.to_string(),
                p.dependence.to_string(),
                p.quadrant.to_string(),
            ]
        });
        put_text(
            bundle,
            "micmac.csv",
            table(&["abbr", "driving", "dependence", "quadrant"], rows),
        );
    }
    if formats.json {
        let mut bytes =
            serde_json::to_vec_pretty(&dot::micmac_json(q, reg)).expect("JSON values serialize");
        bytes.push(b'\n');
        bundle.insert("micmac_chart.json".into(), bytes);
    }
}

fn render_dematel_exports(
    bundle: &mut Bundle,
    stage: &DematelStage,
    reg: &BarrierRegistry,
    formats: Formats,
) {
    let d = &stage.result;
    if formats.csv {
        let p = Precision::Fixed(PLACES);
        put_text(bundle, "average.csv", io::matrix_to_csv(&d.average, reg, p));
        put_text(bundle, "normalized.csv", io::matrix_to_csv(&d.normalization.matrix, reg, p));
        put_text(bundle, "total.csv", io::matrix_to_csv(&d.total.matrix, reg, p));
        let rows = d.cause_effect.rows.iter().map(|r| {
            vec![
                reg.abbr(r.index).to_owned(),
                fixed(r.r),
                fixed(r.c),
                fixed(r.prominence),
                fixed(r.relation),
                r.group.to_string(),
                r.zero_relation.to_string(),
            ]
        });
        put_text(
            bundle,
            "cause_effect.csv",
            table(&["abbr", "r", "c", "prominence", "relation", "group", "zero_relation"], rows),
        );
        let rows = d.edges.edges.iter().map(|e| {
            vec![reg.abbr(e.from).to_owned(), reg.abbr(e.to).to_owned(), fixed(e.value)]
        });
        put_text(bundle, "influence_edges.csv", table(&["from", "to", "value"], rows));
        let rows = d.ranking.iter().enumerate().map(|(k, &i)| {
            vec![
                (k + 1).to_string(),
                reg.abbr(i).to_owned(),
                fixed(d.cause_effect.rows[i - 1].prominence),
            ]
        });
        put_text(bundle, "ranking.csv", table(&["rank", "abbr", "prominence"], rows));
    }
    if formats.json {
        let mut bytes =
            serde_json::to_vec_pretty(&dot::influence_json(d, reg)).expect("JSON values serialize");
        bytes.push(b'\n');
        bundle.insert("influence_map.json".into(), bytes);
    }
    if formats.dot {
        put_text(bundle, "influence.dot", dot::influence_dot(d, reg));
    }
}

pub fn render_validation(v: &Intermediate<Validation>, formats: Formats) -> Result<Bundle> {
    let mut bundle = Bundle::new();
    put_json(&mut bundle, StageRole::Validation.file_name(), v)?;
    render_validation_exports(&mut bundle, &v.data, formats);
    Ok(bundle)
}

pub fn render_ism(i: &Intermediate<IsmStage>, formats: Formats) -> Result<Bundle> {
    let mut bundle = Bundle::new();
    put_json(&mut bundle, StageRole::Ism.file_name(), i)?;
    render_ism_exports(&mut bundle, &i.data, &i.registry, formats);
    Ok(bundle)
}

pub fn render_micmac(m: &Intermediate<QuadrantAssignment>, formats: Formats) -> Result<Bundle> {
    let mut bundle = Bundle::new();
    put_json(&mut bundle, StageRole::Micmac.file_name(), m)?;
    render_micmac_exports(&mut bundle, &m.data, &m.registry, formats);
    Ok(bundle)
}

pub fn render_dematel(d: &Intermediate<DematelStage>, formats: Formats) -> Result<Bundle> {
    let mut bundle = Bundle::new();
    put_json(&mut bundle, StageRole::Dematel.file_name(), d)?;
    render_dematel_exports(&mut bundle, &d.data, &d.registry, formats);
    Ok(bundle)
}

/// `report.json`, `summary.txt` and the exports of every section.
pub fn render_report(report: &AnalysisReport, formats: Formats) -> Result<Bundle> {
    let mut bundle = Bundle::new();
    put_json(&mut bundle, StageRole::Report.file_name(), report)?;
    put_text(&mut bundle, "summary.txt", summary(report));
    let reg = &report.registry;
    if let Some(v) = report.validation.value() {
        render_validation_exports(&mut bundle, v, formats);
    }
    render_ism_exports(&mut bundle, &report.ism, reg, formats);
    render_micmac_exports(&mut bundle, &report.micmac, reg, formats);
    render_dematel_exports(&mut bundle, &report.dematel, reg, formats);
    Ok(bundle)
}

/// Plain-text digest of a report.
pub fn summary(report: &AnalysisReport) -> String {
    let reg = &report.registry;
    let mut out = String::new();
    let _ = writeln!(out, "{} {} analysis summary", report.provenance.tool, report.provenance.version);
    let _ = writeln!(out, "Factors: {}", reg.len());
    let _ = writeln!(out);

    match &report.validation {
        Section::Ok { value: v } => {
            let s = &v.screening;
            let _ = writeln!(
                out,
                "Survey: {} response(s), {} retained, {} excluded, {} consistency violation(s) (screening {})",
                v.consistency.len(),
                s.retained.len(),
                s.excluded.len(),
                v.violation_count(),
                if s.strict { "strict" } else { "lenient" }
            );
            match &v.reliability {
                Section::Ok { value: r } => {
                    let _ = writeln!(
                        out,
                        "Reliability: Cronbach's alpha {} over k = {} items ({})",
                        format_fixed(r.alpha, 4),
                        r.k,
                        if r.acceptable { "acceptable" } else { "below 0.7" }
                    );
                }
                Section::Skipped { reason } => {
                    let _ = writeln!(out, "Reliability: skipped ({reason})");
                }
            }
        }
        Section::Skipped { reason } => {
            let _ = writeln!(out, "Survey: skipped ({reason})");
        }
    }
    let _ = writeln!(out);

    let levels = &report.ism.result.levels;
    let _ = writeln!(out, "ISM levels (1 = top):");
    for level in 1..=levels.level_count() {
        let _ = writeln!(out, "  Level {level}: {}", abbrs(reg, &levels.members(level)));
    }
    let _ = writeln!(out);

    let q = &report.micmac;
    let _ = writeln!(out, "MICMAC quadrants (mid = {}):", q.mid);
    for quadrant in Quadrant::ALL {
        let members = q.members(quadrant);
        let list = if members.is_empty() { "none".to_owned() } else { abbrs(reg, &members) };
        let _ = writeln!(out, "  {quadrant}: {list}");
    }
    let _ = writeln!(out);

    let d = &report.dematel.result;
    let ce = &d.cause_effect;
    let _ = writeln!(
        out,
        "DEMATEL: divisor {}, threshold {}, {} influence edge(s) above threshold",
        fixed(d.normalization.divisor),
        fixed(d.threshold()),
        d.edges.edges.len()
    );
    let _ = writeln!(out, "  Causes: {}", abbrs(reg, &ce.causes()));
    let _ = writeln!(out, "  Effects: {}", abbrs(reg, &ce.effects()));
    let flagged = ce.zero_relation_flags();
    if !flagged.is_empty() {
        let _ = writeln!(out, "  Zero R-C (grouped as causes): {}", abbrs(reg, &flagged));
    }
    let top: Vec<String> = report
        .top_causes()
        .iter()
        .take(2)
        .map(|&i| {
            let name = &reg.get(i).expect("registry index").name;
            format!("{name} ({}, R-C = {})", reg.abbr(i), fixed(ce.rows[i - 1].relation))
        })
        .collect();
    if !top.is_empty() {
        let _ = writeln!(out, "  Top causes: {}", top.join("; "));
    }
    let _ = writeln!(out, "  Ranking by prominence (R+C): {}", abbrs(reg, &d.ranking).replace(", ", " > "));
    out
}

/// Writes every file of `bundle` into `dir` through a temporary file and a
/// rename. Nothing is renamed into place unless every temporary was written.
pub fn write_bundle(dir: &Path, bundle: &Bundle) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(bundle.len());
    for (name, bytes) in bundle {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(io_err(&tmp)(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest).map_err(io_err(dest))?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub report: AnalysisReport,
    /// Stage intermediates, report files and exports.
    pub bundle: Bundle,
}

/// Runs survey, ISM, MICMAC and DEMATEL in order and renders every output
/// without touching the file system beyond reading inputs.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    config.check()?;
    let loaded = load(&config.registry_path, &config.responses_dir).map_err(|e| e.in_stage("survey"))?;
    let responses: Vec<ExpertResponse> = loaded
        .files
        .iter()
        .map(|(id, f)| io::parse_response(id, &f.text, &f.name, &loaded.registry))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("survey"))?;
    let validation = validate(&responses, config.strict_screening, config.alpha_item_count)
        .map_err(|e| e.in_stage("survey"))?;
    let screening = Some(&validation.screening);

    let judgments: Vec<(String, SsimMatrix)> = responses
        .iter()
        .map(|r| (r.expert_id().to_owned(), r.judgments().clone()))
        .collect();
    let ism_data = ism_stage(&judgments, screening).map_err(|e| e.in_stage("ism"))?;
    let micmac_data = micmac::classify(&ism_data.result.frm, config.micmac_mid_override);
    let scores: Vec<(String, InfluenceMatrix)> = responses
        .iter()
        .map(|r| (r.expert_id().to_owned(), r.scores().clone()))
        .collect();
    let dematel_data = dematel_stage(&scores, screening).map_err(|e| e.in_stage("dematel"))?;

    fn wrap<T>(loaded: &Loaded, role: StageRole, data: T) -> Intermediate<T> {
        Intermediate {
            role,
            provenance: loaded.provenance.clone(),
            registry: loaded.registry.clone(),
            data,
        }
    }
    let validation = wrap(&loaded, StageRole::Validation, validation);
    let ism = wrap(&loaded, StageRole::Ism, ism_data);
    let micmac = wrap(&loaded, StageRole::Micmac, micmac_data);
    let dematel = wrap(&loaded, StageRole::Dematel, dematel_data);

    let mut bundle = Bundle::new();
    put_json(&mut bundle, StageRole::Validation.file_name(), &validation)?;
    put_json(&mut bundle, StageRole::Ism.file_name(), &ism)?;
    put_json(&mut bundle, StageRole::Micmac.file_name(), &micmac)?;
    put_json(&mut bundle, StageRole::Dematel.file_name(), &dematel)?;
    let report = AnalysisReport::assemble(Some(validation), ism, micmac, dematel)?;
    bundle.extend(render_report(&report, config.formats)?);
    Ok(PipelineOutput { report, bundle })
}

/// [`run_pipeline`] followed by [`write_bundle`] into the output directory.
pub fn execute(config: &RunConfig) -> Result<AnalysisReport> {
    let output = run_pipeline(config)?;
    write_bundle(&config.output_dir, &output.bundle)?;
    Ok(output.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_parse() {
        assert_eq!("csv,json,dot".parse::<Formats>().unwrap(), Formats::ALL);
        assert_eq!(" CSV ".parse::<Formats>().unwrap(), Formats { csv: true, ..Formats::NONE });
        assert_eq!("".parse::<Formats>().unwrap(), Formats::NONE);
        assert_eq!("none".parse::<Formats>().unwrap().to_string(), "none");
        assert!("xml".parse::<Formats>().is_err());
        assert_eq!(Formats::ALL.to_string(), "csv,json,dot");
    }

    #[test]
    fn section_serializes_with_status() {
        let s: Section<u8> = Section::Skipped { reason: "x".into() };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"status":"skipped","reason":"x"}"#);
        let s: Section<u8> = Section::Ok { value: 3 };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"status":"ok","value":3}"#);
    }

    #[test]
    fn bundle_write_is_complete() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = Bundle::new();
        bundle.insert("a.txt".into(), b"A".to_vec());
        bundle.insert("b.txt".into(), b"B".to_vec());
        write_bundle(dir.path(), &bundle).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, vec!["a.txt", "b.txt"]);
    }

    #[test]
    fn config_checks() {
        let mut c = RunConfig::new("r.csv", "resp", "out");
        assert!(c.check().is_ok());
        c.alpha_item_count = Some(1);
        assert!(c.check().is_err());
        c.alpha_item_count = None;
        c.micmac_mid_override = Some(f64::NAN);
        assert!(c.check().is_err());
        c.micmac_mid_override = None;
        c.output_dir = PathBuf::new();
        assert!(c.check().is_err());
    }
}
