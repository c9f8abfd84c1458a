use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ctperf_cli::{
    cmd_analyze, cmd_phantom, cmd_pipeline, cmd_progress, criteria_json, AifInput, AnalyzeInputs,
    PipelineConfig, ProgressInputs,
};
use ctperf_core::triage::{CoreRule, LesionRule};
use ctperf_core::Method;

/// CT perfusion phantom simulation, deconvolution, triage and infarct progression.
#[derive(Parser)]
#[command(name = "ctperf", version)]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the noise generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Deconvolution method: ssvd or csvd.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Relative singular-value truncation threshold in [0, 1).
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Core rule, e.g. `rcbf`, `rcbf=0.3` or `rcbv=0.6`.
    #[arg(long, global = true)]
    core_rule: Option<CoreRule>,
    /// Lesion rule, e.g. `tmax`, `tmax=6`, `rcbv=0.6` or `delay=3`.
    #[arg(long, global = true)]
    lesion_rule: Option<LesionRule>,
    /// Mismatch criteria file (JSON list).
    #[arg(long, global = true)]
    criteria: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the phantom and simulate the acquisition.
    Phantom,
    /// Derive perfusion maps, lesion masks and the mismatch report from a series.
    Analyze {
        /// Series header (JSON).
        #[arg(long)]
        series: PathBuf,
        /// AIF curve CSV, or `auto` to select one from the series.
        #[arg(long, default_value = "auto")]
        aif: AifInput,
        /// Normal-tissue reference mask.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Brain mask restricting segmentation.
        #[arg(long)]
        brain: Option<PathBuf>,
    },
    /// Model core growth from a CBF map.
    Progress {
        /// Acute CBF map.
        #[arg(long)]
        cbf: PathBuf,
        /// CBF without occlusion; tissue is where it is positive.
        #[arg(long)]
        normal_cbf: PathBuf,
        /// Acute core mask, for the final-infarct masks.
        #[arg(long, requires = "acute_lesion")]
        acute_core: Option<PathBuf>,
        /// Acute perfusion-lesion mask, for the final-infarct masks.
        #[arg(long, requires = "acute_core")]
        acute_lesion: Option<PathBuf>,
    },
    /// Run phantom, analyze and progress.
    Pipeline,
    /// Print the mismatch criteria registry.
    Criteria,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = cli.method {
        cfg.deconv.method = m;
    }
    if let Some(l) = cli.lambda {
        cfg.deconv.lambda_rel = l;
    }
    if let Some(r) = cli.core_rule {
        cfg.segmentation.core_rule = r;
    }
    if let Some(r) = cli.lesion_rule {
        cfg.segmentation.lesion_rule = r;
    }
    if let Some(c) = &cli.criteria {
        cfg.criteria_path = Some(c.clone());
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match cli.command {
        Command::Phantom => {
            let out = cmd_phantom(&cfg)?;
            say(format!("phantom written to {}", out.dir.display()));
        }
        Command::Analyze {
            series,
            aif,
            reference,
            brain,
        } => {
            let out = cmd_analyze(
                &cfg,
                &AnalyzeInputs {
                    series,
                    aif,
                    reference_mask: reference,
                    brain_mask: brain,
                },
            )?;
            say(serde_json::to_string_pretty(&out.report)?);
        }
        Command::Progress {
            cbf,
            normal_cbf,
            acute_core,
            acute_lesion,
        } => {
            let out = cmd_progress(
                &cfg,
                &ProgressInputs {
                    cbf,
                    normal_cbf,
                    acute_core,
                    acute_lesion,
                },
            )?;
            if let Some((t, ml)) = out.trajectory.last() {
                say(format!("core at {t} min: {ml} ml"));
            }
        }
        Command::Pipeline => {
            let (_, an, pr) = cmd_pipeline(&cfg)?;
            say(serde_json::to_string_pretty(&an.report)?);
            if let Some((t, ml)) = pr.trajectory.last() {
                say(format!("core at {t} min: {ml} ml"));
            }
        }
        Command::Criteria => println!("{}", criteria_json(&cfg.resolved_criteria()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ctperf: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
