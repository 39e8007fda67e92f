//! Helpers shared by the CLI tests and the acceptance run.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

/// SHA-256 of the simulation-study outputs produced by [`run_study`].
pub const GOLDEN: &[(&str, &str)] = &[
    ("out/paths.csv", "0fd7e7760c6a5f7fe98afaeec92d5ae817a5862cbfb2ecaf8497a68ff37cd14c"),
    ("out/simulation.json", "49fc85fec3f5ab399479159386561aa4c697a91413ea8526b279011d031ee71e"),
    ("out/fit_report.json", "6e1de409300d4daf12834914f4e3e1dc9044f90aaea56b75e1ed1a6dd3815220"),
    ("out/c_hat.csv", "16a15f65289c22094d30f66de3c137a703d712bdd549345296009fd40ea3a869"),
    ("out/mean_fit.csv", "01f2d1d662ee13c7cfb79ee37f78efab718a2a3b61f3bdf4a086b50bca2073ea"),
    ("out/fpt_summary.json", "edbaa9275f163f555c86dddb140d74c6a341cf6a8f8efc96f542dcfcbf38de0c"),
];

pub fn study_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/simulation_study.toml")
}

pub fn richfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_richfit"))
        .args(args)
        .current_dir(dir)
        .env_remove("RICHFIT_THREADS")
        .output()
        .expect("binary runs")
}

pub fn richfit_ok(dir: &Path, args: &[&str]) -> String {
    let out = richfit(dir, args);
    assert!(
        out.status.success(),
        "richfit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Simulate, fit and first-passage steps of the simulation study, run in
/// `dir` with the shipped configuration.
pub fn run_study(dir: &Path) {
    let cfg = study_config();
    let cfg = cfg.to_str().unwrap();
    richfit_ok(dir, &["simulate", "--config", cfg]);
    richfit_ok(dir, &["fit", "--config", cfg]);
    richfit_ok(dir, &["fpt", "--config", cfg]);
}

pub fn sha256_file(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files whose hash differs from [`GOLDEN`], with the observed hash.
pub fn golden_mismatches(dir: &Path) -> Vec<(String, String)> {
    GOLDEN
        .iter()
        .filter_map(|(file, want)| {
            let got = sha256_file(&dir.join(file));
            (got != *want).then(|| (file.to_string(), got))
        })
        .collect()
}
