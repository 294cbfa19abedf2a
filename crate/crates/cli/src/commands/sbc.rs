use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::{Deserialize, Serialize};

use bayescg::calibration::{ks_critical_value_1pct, sbc_run, SbcConfig, SolveMethod, TestVector};

use crate::manifest::{ensure_out_dir, write_file, ManifestBuilder};
use crate::CliError;

/// File-configurable settings; command-line flags override these, which
/// override the built-in defaults (the paper setting at desk scale).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbcFileConfig {
    pub d: usize,
    pub n_sim: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub method: SolveMethod,
    pub histogram_bins: usize,
    pub record_z: bool,
    pub test_vector: TestVector,
    pub matrix_seed: Option<u64>,
}

impl Default for SbcFileConfig {
    fn default() -> Self {
        SbcFileConfig {
            d: 100,
            n_sim: 1000,
            eps1: 1e-1,
            eps2: 1e-5,
            method: SolveMethod::Rpi,
            histogram_bins: 20,
            record_z: false,
            test_vector: TestVector::RandomUnit,
            matrix_seed: None,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SbcArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    d: Option<usize>,

    #[arg(long)]
    n_sim: Option<usize>,

    #[arg(long)]
    eps1: Option<f64>,

    #[arg(long)]
    eps2: Option<f64>,

    /// cg, pi, or rpi.
    #[arg(long)]
    method: Option<String>,

    #[arg(long)]
    bins: Option<usize>,

    /// Also record the Z-statistic of each replicate.
    #[arg(long)]
    record_z: bool,
}

pub fn parse_method(name: &str) -> Result<SolveMethod, CliError> {
    match name {
        "cg" => Ok(SolveMethod::Cg),
        "pi" => Ok(SolveMethod::Pi),
        "rpi" => Ok(SolveMethod::Rpi),
        other => Err(CliError::Config(format!("unknown method {other:?} (expected cg, pi or rpi)"))),
    }
}

fn resolve(args: &SbcArgs, seed: u64) -> Result<SbcConfig, CliError> {
    let mut file: SbcFileConfig = super::load_config(args.config.as_deref())?;
    if let Some(d) = args.d {
        file.d = d;
    }
    if let Some(n) = args.n_sim {
        file.n_sim = n;
    }
    if let Some(e) = args.eps1 {
        file.eps1 = e;
    }
    if let Some(e) = args.eps2 {
        file.eps2 = e;
    }
    if let Some(m) = &args.method {
        file.method = parse_method(m)?;
    }
    if let Some(b) = args.bins {
        file.histogram_bins = b;
    }

    let mut cfg = SbcConfig::new(file.d, file.n_sim, file.eps1, file.eps2, file.method, seed);
    cfg.histogram_bins = file.histogram_bins;
    cfg.record_z = file.record_z || args.record_z;
    cfg.test_vector = file.test_vector;
    cfg.matrix_seed = file.matrix_seed;
    Ok(cfg)
}

pub const RANKS_HEADER: &str = "rank";
pub const HISTOGRAM_HEADER: &str = "bin_left,bin_right,count";

pub fn run(args: &SbcArgs, seed: u64, out_dir: &Path) -> Result<ExitCode, CliError> {
    ensure_out_dir(out_dir)?;
    let cfg = resolve(args, seed)?;
    let mut manifest = ManifestBuilder::new("sbc", super::to_config_value(&cfg), seed);

    let report = sbc_run(&cfg)?;

    let mut ranks_csv = String::from(RANKS_HEADER);
    ranks_csv.push('\n');
    for r in &report.ranks {
        writeln!(ranks_csv, "{r}").expect("string write");
    }
    let ranks_path = out_dir.join("ranks.csv");
    write_file(&ranks_path, &ranks_csv)?;
    manifest.add_csv(&ranks_path, RANKS_HEADER);

    let mut hist_csv = String::from(HISTOGRAM_HEADER);
    hist_csv.push('\n');
    for (i, count) in report.histogram.counts.iter().enumerate() {
        writeln!(
            hist_csv,
            "{},{},{}",
            report.histogram.edges[i],
            report.histogram.edges[i + 1],
            count
        )
        .expect("string write");
    }
    let hist_path = out_dir.join("histogram.csv");
    write_file(&hist_path, &hist_csv)?;
    manifest.add_csv(&hist_path, HISTOGRAM_HEADER);

    let report_path = out_dir.join("report.json");
    let body = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&report_path, &body)?;
    manifest.add_output(&report_path);
    manifest.write(out_dir)?;

    println!(
        "sbc ({}): {} ranks ({} degenerate), KS = {:.4}, 1% critical value = {:.4}",
        cfg.method.name(),
        report.ranks.len(),
        report.degenerate,
        report.ks_statistic,
        ks_critical_value_1pct(report.ranks.len().max(1))
    );
    Ok(ExitCode::SUCCESS)
}
