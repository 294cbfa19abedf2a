use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::{Deserialize, Serialize};

use bayescg::inverse::{
    generate_data, kde, rwm_sample, summarize_chain, Bandwidth, ChainSummary, ForwardModel,
    InverseSolver, McmcChain, Mesh,
};
use bayescg::rng::{derive_seed, RngStream};

use crate::manifest::{ensure_out_dir, write_file, ManifestBuilder};
use crate::CliError;

/// Experiment constants, defaulted to the reference setup: data from a
/// finer mesh at theta = 2 with observation noise 0.01, four chains of
/// 10,000 proposals at tolerance 0.1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseFileConfig {
    /// Inference mesh subdivisions (multiple of 4).
    pub n: usize,
    /// Data-generation mesh subdivisions; at least 2n avoids the
    /// inverse crime of inverting on the data mesh.
    pub fine_n: usize,
    pub theta_dagger: f64,
    pub sigma: f64,
    /// CG tolerance; postiteration methods use eps1 = 10 eps, eps2 = eps.
    pub eps: f64,
    pub n_iter: usize,
    pub theta0: f64,
    /// Fraction of each chain discarded before summaries and KDE.
    pub burn_in: f64,
    /// Proposal standard deviations per method.
    pub eta_exact: f64,
    pub eta_cg: f64,
    pub eta_pi: f64,
    pub eta_rpi: f64,
    /// Subset of exact, cg, pi, rpi.
    pub methods: Vec<String>,
}

impl Default for InverseFileConfig {
    fn default() -> Self {
        InverseFileConfig {
            n: 16,
            fine_n: 32,
            theta_dagger: 2.0,
            sigma: 0.01,
            eps: 0.1,
            n_iter: 10_000,
            theta0: 0.0,
            burn_in: 0.2,
            eta_exact: 0.2,
            eta_cg: 0.2,
            eta_pi: 0.4,
            eta_rpi: 0.4,
            methods: vec!["exact".into(), "cg".into(), "pi".into(), "rpi".into()],
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct InverseArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    n: Option<usize>,

    #[arg(long)]
    fine_n: Option<usize>,

    #[arg(long)]
    theta_dagger: Option<f64>,

    #[arg(long)]
    sigma: Option<f64>,

    #[arg(long)]
    eps: Option<f64>,

    #[arg(long)]
    n_iter: Option<usize>,

    /// Comma-separated subset of exact, cg, pi, rpi.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

fn resolve(args: &InverseArgs) -> Result<InverseFileConfig, CliError> {
    let mut cfg: InverseFileConfig = super::load_config(args.config.as_deref())?;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(fine) = args.fine_n {
        cfg.fine_n = fine;
    }
    if let Some(t) = args.theta_dagger {
        cfg.theta_dagger = t;
    }
    if let Some(s) = args.sigma {
        cfg.sigma = s;
    }
    if let Some(e) = args.eps {
        cfg.eps = e;
    }
    if let Some(n) = args.n_iter {
        cfg.n_iter = n;
    }
    if let Some(m) = &args.methods {
        cfg.methods = m.clone();
    }
    if cfg.fine_n < 2 * cfg.n {
        return Err(CliError::Config(format!(
            "data mesh ({}) must be at least twice the inference mesh ({})",
            cfg.fine_n, cfg.n
        )));
    }
    if !(0.0..1.0).contains(&cfg.burn_in) {
        return Err(CliError::Config(format!("burn_in must lie in [0, 1), got {}", cfg.burn_in)));
    }
    Ok(cfg)
}

fn solver_for(method: &str, cfg: &InverseFileConfig) -> Result<(InverseSolver, f64), CliError> {
    let eps = cfg.eps;
    match method {
        "exact" => Ok((InverseSolver::Exact, cfg.eta_exact)),
        "cg" => Ok((InverseSolver::Cg { eps }, cfg.eta_cg)),
        "pi" => Ok((InverseSolver::Pi { eps1: 10.0 * eps, eps2: eps }, cfg.eta_pi)),
        "rpi" => Ok((InverseSolver::Rpi { eps1: 10.0 * eps, eps2: eps }, cfg.eta_rpi)),
        other => Err(CliError::Config(format!(
            "unknown method {other:?} (expected exact, cg, pi or rpi)"
        ))),
    }
}

pub const CHAIN_HEADER: &str = "iter,theta,log_post,accepted";
pub const KDE_HEADER: &str = "theta,density";

fn chain_csv(chain: &McmcChain) -> String {
    let mut csv = String::from(CHAIN_HEADER);
    csv.push('\n');
    for i in 0..chain.samples.len() {
        writeln!(
            csv,
            "{},{},{},{}",
            i,
            chain.samples[i],
            chain.log_posts[i],
            u8::from(chain.accepted[i])
        )
        .expect("string write");
    }
    csv
}

fn kde_csv(curve: &bayescg::inverse::DensityCurve) -> String {
    let mut csv = String::from(KDE_HEADER);
    csv.push('\n');
    for (g, v) in curve.grid.iter().zip(&curve.values) {
        writeln!(csv, "{g},{v}").expect("string write");
    }
    csv
}

#[derive(Serialize)]
struct InverseSummary {
    config: InverseFileConfig,
    data: Vec<f64>,
    /// Per-method posterior summaries (post burn-in).
    methods: BTreeMap<String, ChainSummary>,
    /// Per-method failures, preserved so partial runs stay useful.
    errors: BTreeMap<String, String>,
}

pub fn run(args: &InverseArgs, seed: u64, out_dir: &Path) -> Result<ExitCode, CliError> {
    ensure_out_dir(out_dir)?;
    let cfg = resolve(args)?;
    let mut manifest = ManifestBuilder::new("inverse", super::to_config_value(&cfg), seed);

    // data generated once on the fine mesh
    let mut data_rng = RngStream::new(derive_seed(seed, 0xDA7A), 0);
    let y = generate_data(cfg.fine_n, cfg.theta_dagger, cfg.sigma, &mut data_rng)?;
    let model = ForwardModel::new(Mesh::unit_square(cfg.n)?, cfg.sigma, y.clone())?;

    let mut summaries = BTreeMap::new();
    let mut errors = BTreeMap::new();
    for (idx, method) in cfg.methods.iter().enumerate() {
        let (solver, eta) = solver_for(method, &cfg)?;
        let mut chain_rng = RngStream::new(derive_seed(seed, 0xC4A1 + idx as u64), 0);
        let chain = match rwm_sample(&model, solver, eta, cfg.n_iter, cfg.theta0, &mut chain_rng) {
            Ok(chain) => chain,
            Err(e) => {
                eprintln!("warning: {method} chain failed: {e}");
                errors.insert(method.clone(), e.to_string());
                continue;
            }
        };

        let chain_path = out_dir.join(format!("chain_{method}.csv"));
        write_file(&chain_path, &chain_csv(&chain))?;
        manifest.add_csv(&chain_path, CHAIN_HEADER);

        let summary = summarize_chain(&chain, cfg.burn_in);
        let burn = summary.burn_in;
        match kde(&chain.samples[burn..], Bandwidth::Auto) {
            Ok(curve) => {
                let kde_path = out_dir.join(format!("kde_{method}.csv"));
                write_file(&kde_path, &kde_csv(&curve))?;
                manifest.add_csv(&kde_path, KDE_HEADER);
            }
            Err(e) => {
                eprintln!("warning: {method} kde skipped: {e}");
                errors.insert(format!("{method}.kde"), e.to_string());
            }
        }

        println!(
            "{method}: mean {:.4}, std {:.4}, 95% interval [{:.4}, {:.4}], acceptance {:.3}, solver failures {}",
            summary.mean, summary.std, summary.q025, summary.q975,
            summary.acceptance_rate, chain.solver_failures
        );
        summaries.insert(method.clone(), summary);
    }

    let n_methods = cfg.methods.len();
    let summary_path = out_dir.join("summary.json");
    let summary = InverseSummary { config: cfg, data: y, methods: summaries, errors: errors.clone() };
    let body = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&summary_path, &body)?;
    manifest.add_output(&summary_path);

    if errors.is_empty() {
        manifest.write(out_dir)?;
        Ok(ExitCode::SUCCESS)
    } else {
        // partial results stay on disk; the missing manifest marks the
        // run as incomplete
        Err(CliError::Internal(format!(
            "{} of {n_methods} chains failed or were incomplete",
            errors.len()
        )))
    }
}
