use std::process::ExitCode;

use bayescg::selftest;

use crate::CliError;

#[derive(Debug, clap::Args)]
pub struct SelftestArgs {}

pub fn run(_args: &SelftestArgs, seed: u64) -> Result<ExitCode, CliError> {
    let results = selftest::run_all(seed);
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("[{verdict}] {}: {}", r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("selftest: all {} suites green", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Internal(format!("{failed} of {} suites failed", results.len())))
    }
}
