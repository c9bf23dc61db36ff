use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ism_dematel::pipeline::{self, Bundle, Formats, Intermediate, IsmStage, RunConfig, StageRole};
use ism_dematel::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "ism-dematel",
    version,
    about = "ISM, MICMAC and DEMATEL analysis of expert pairwise surveys"
)]
struct Cli {
    /// Barrier registry CSV (index,abbr,name).
    #[arg(long, global = true, env = "ISM_DEMATEL_REGISTRY")]
    registry: Option<PathBuf>,

    /// Directory with one response file per expert.
    #[arg(long, global = true, env = "ISM_DEMATEL_RESPONSES")]
    responses: Option<PathBuf>,

    /// Output directory for intermediates, exports and the report.
    #[arg(long, global = true, env = "ISM_DEMATEL_OUT", default_value = "out")]
    out: PathBuf,

    /// Exclude experts with consistency violations instead of warning.
    #[arg(long, global = true, env = "ISM_DEMATEL_STRICT")]
    strict: bool,

    /// Item count k for Cronbach's alpha; alpha is skipped when unset.
    #[arg(long = "alpha-items", global = true, env = "ISM_DEMATEL_ALPHA_ITEMS")]
    alpha_items: Option<usize>,

    /// MICMAC quadrant split; defaults to n/2.
    #[arg(long, global = true, env = "ISM_DEMATEL_MID")]
    mid: Option<f64>,

    /// Extra exports: any of csv,json,dot or none.
    #[arg(long, global = true, env = "ISM_DEMATEL_FORMATS", default_value = "csv,json,dot")]
    formats: Formats,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Consistency checks, screening and Cronbach's alpha.
    Validate,
    /// Reachability, level partition and digraph.
    Ism {
        /// Aggregated SSIM listing (i,j,symbol) used instead of responses.
        #[arg(long, env = "ISM_DEMATEL_SSIM", conflicts_with = "responses")]
        ssim: Option<PathBuf>,
    },
    /// Driving/dependence quadrants from a previous `ism` run.
    Micmac,
    /// Total-relation matrix, cause/effect split and influence map.
    Dematel {
        /// Average matrix CSV used instead of responses.
        #[arg(long, env = "ISM_DEMATEL_AVERAGE", conflicts_with = "responses")]
        average: Option<PathBuf>,
    },
    /// Full pipeline when --responses is given, otherwise assembles the
    /// report from existing intermediates.
    Report,
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| {
        Error::invalid("arguments", format!("`{command}` needs --{flag}"))
    })
}

fn write(out: &Path, bundle: &Bundle) -> Result<()> {
    pipeline::write_bundle(out, bundle)?;
    eprintln!("wrote {} file(s) to {}", bundle.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Validate => {
            let registry = required(&cli.registry, "registry", "validate")?;
            let responses = required(&cli.responses, "responses", "validate")?;
            let v = pipeline::validate_files(registry, responses, cli.strict, cli.alpha_items)?;
            write(out, &pipeline::render_validation(&v, cli.formats)?)?;
            for expert in &v.data.consistency {
                for violation in &expert.violations {
                    println!(
                        "{} ({}, {}) {}: {}",
                        expert.expert_id, violation.i, violation.j, violation.rule, violation.detail
                    );
                }
            }
            if let Some(r) = v.data.reliability.value() {
                println!("alpha = {:.4} (k = {})", r.alpha, r.k);
            }
            v.data.verdict()?;
            println!("validation passed");
        }
        Command::Ism { ssim } => {
            let registry = required(&cli.registry, "registry", "ism")?;
            let ism = match ssim {
                Some(ssim) => pipeline::ism_from_ssim(registry, ssim)?,
                None => {
                    let responses = required(&cli.responses, "responses or --ssim", "ism")?;
                    let screening = pipeline::screening_for(out, cli.strict)?;
                    pipeline::ism_from_responses(registry, responses, screening.as_ref())?
                }
            };
            write(out, &pipeline::render_ism(&ism, cli.formats)?)?;
            println!("{} levels", ism.data.result.levels.level_count());
        }
        Command::Micmac => {
            let ism: Intermediate<IsmStage> = pipeline::read_intermediate(out, StageRole::Ism)?;
            let micmac = pipeline::micmac_from_ism(&ism, cli.mid)?;
            write(out, &pipeline::render_micmac(&micmac, cli.formats)?)?;
            println!("mid = {}", micmac.data.mid);
        }
        Command::Dematel { average } => {
            let registry = required(&cli.registry, "registry", "dematel")?;
            let dematel = match average {
                Some(average) => pipeline::dematel_from_average(registry, average)?,
                None => {
                    let responses = required(&cli.responses, "responses or --average", "dematel")?;
                    let screening = pipeline::screening_for(out, cli.strict)?;
                    pipeline::dematel_from_responses(registry, responses, screening.as_ref())?
                }
            };
            write(out, &pipeline::render_dematel(&dematel, cli.formats)?)?;
            println!(
                "threshold = {:.6}, {} edge(s)",
                dematel.data.result.threshold(),
                dematel.data.result.edges.edges.len()
            );
        }
        Command::Report => {
            let report = match &cli.responses {
                Some(responses) => {
                    let registry = required(&cli.registry, "registry", "report")?;
                    let mut config = RunConfig::new(registry, responses, out);
                    config.strict_screening = cli.strict;
                    config.alpha_item_count = cli.alpha_items;
                    config.micmac_mid_override = cli.mid;
                    config.formats = cli.formats;
                    let output = pipeline::run_pipeline(&config)?;
                    write(out, &output.bundle)?;
                    output.report
                }
                None => {
                    let report = pipeline::assemble_report(out)?;
                    write(out, &pipeline::render_report(&report, cli.formats)?)?;
                    report
                }
            };
            print!("{}", pipeline::summary(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind().exit_code() as u8)
        }
    }
}
