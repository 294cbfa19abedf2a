use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::{Deserialize, Serialize};

use bayescg::calibration::{ks_sweep, MatrixPolicy, SolveMethod, SweepConfig, SweepRow};

use crate::manifest::{ensure_out_dir, write_file, ManifestBuilder};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepFileConfig {
    pub dims: Vec<usize>,
    pub eps1_grid: Vec<f64>,
    pub eps2_grid: Vec<f64>,
    pub methods: Vec<SolveMethod>,
    pub replicates: usize,
    pub sims_per_replicate: usize,
    pub matrix_policy: MatrixPolicy,
}

impl Default for SweepFileConfig {
    fn default() -> Self {
        SweepFileConfig {
            dims: vec![100],
            eps1_grid: vec![1e-1],
            eps2_grid: vec![1e-2, 1e-3, 1e-5],
            methods: vec![SolveMethod::Pi, SolveMethod::Rpi],
            replicates: 50,
            sims_per_replicate: 1000,
            matrix_policy: MatrixPolicy::RedrawnPerReplicate,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',')]
    eps1_grid: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',')]
    eps2_grid: Option<Vec<f64>>,

    /// Comma-separated subset of cg, pi, rpi.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    #[arg(long)]
    replicates: Option<usize>,

    #[arg(long)]
    sims: Option<usize>,

    /// fixed-per-run or redrawn-per-replicate.
    #[arg(long)]
    matrix_policy: Option<String>,
}

fn resolve(args: &SweepArgs, seed: u64) -> Result<SweepConfig, CliError> {
    let mut file: SweepFileConfig = super::load_config(args.config.as_deref())?;
    if let Some(v) = &args.dims {
        file.dims = v.clone();
    }
    if let Some(v) = &args.eps1_grid {
        file.eps1_grid = v.clone();
    }
    if let Some(v) = &args.eps2_grid {
        file.eps2_grid = v.clone();
    }
    if let Some(v) = &args.methods {
        file.methods = v
            .iter()
            .map(|m| super::sbc::parse_method(m))
            .collect::<Result<_, _>>()?;
    }
    if let Some(r) = args.replicates {
        file.replicates = r;
    }
    if let Some(s) = args.sims {
        file.sims_per_replicate = s;
    }
    if let Some(p) = &args.matrix_policy {
        file.matrix_policy = match p.as_str() {
            "fixed-per-run" => MatrixPolicy::FixedPerRun,
            "redrawn-per-replicate" => MatrixPolicy::RedrawnPerReplicate,
            other => {
                return Err(CliError::Config(format!(
                    "unknown matrix policy {other:?} (expected fixed-per-run or redrawn-per-replicate)"
                )))
            }
        };
    }
    Ok(SweepConfig {
        dims: file.dims,
        eps1_grid: file.eps1_grid,
        eps2_grid: file.eps2_grid,
        methods: file.methods,
        replicates: file.replicates,
        sims_per_replicate: file.sims_per_replicate,
        matrix_policy: file.matrix_policy,
        seed,
    })
}

pub const SWEEP_HEADER: &str = "method,eps1,eps2,ks_median,ks_q1,ks_q3,n_replicates";

fn push_row(csv: &mut String, row: &SweepRow) {
    writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        row.method, row.eps1, row.eps2, row.ks_median, row.ks_q1, row.ks_q3, row.n_replicates
    )
    .expect("string write");
}

pub fn run(args: &SweepArgs, seed: u64, out_dir: &Path) -> Result<ExitCode, CliError> {
    ensure_out_dir(out_dir)?;
    let cfg = resolve(args, seed)?;
    let mut manifest = ManifestBuilder::new("ks-sweep", super::to_config_value(&cfg), seed);

    let table = ks_sweep(&cfg)?;

    // one file per dimension; single-dim sweeps use the plain name
    let single = cfg.dims.len() == 1;
    for &dim in &cfg.dims {
        let mut csv = String::from(SWEEP_HEADER);
        csv.push('\n');
        for row in table.rows.iter().filter(|r| r.dim == dim) {
            push_row(&mut csv, row);
        }
        push_row(&mut csv, &table.uniform_baseline);
        let name = if single { "sweep.csv".to_string() } else { format!("sweep_d{dim}.csv") };
        let path = out_dir.join(name);
        write_file(&path, &csv)?;
        manifest.add_csv(&path, SWEEP_HEADER);
    }

    let table_path = out_dir.join("sweep.json");
    let body = serde_json::to_string_pretty(&table).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&table_path, &body)?;
    manifest.add_output(&table_path);
    manifest.write(out_dir)?;

    println!(
        "ks-sweep: {} grid points, {} skipped as invalid, uniform baseline median {:.4}",
        table.rows.len(),
        table.skipped_invalid,
        table.uniform_baseline.ks_median
    );
    Ok(ExitCode::SUCCESS)
}
