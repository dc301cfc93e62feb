//! Regenerate the shipped fixture inputs:
//! `cargo run -p policylens-cli --example gen_fixtures [dir]`.

use std::fs::File;
use std::path::PathBuf;

use policylens::ingest::{write_policy_corpus, write_wdi_table, HarmonizeConfig, PolicyDocument};
use policylens::synth::{fixture_policies, fixture_wdi, keyword_corpus, FIXTURE_COUNTRIES, FIXTURE_YEARS};

const POLICY_SEED: u64 = 2024;
const WDI_SEED: u64 = 2025;
const TRAIN_SEED: u64 = 2026;
const TRAIN_DOCS: usize = 400;

fn main() -> anyhow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    let docs = fixture_policies(POLICY_SEED);
    write_policy_corpus(&docs, File::create(dir.join("policies.csv"))?, false)?;
    let wdi = fixture_wdi(&docs, WDI_SEED);
    write_wdi_table(&wdi, File::create(dir.join("wdi.csv"))?)?;
    std::fs::write(dir.join("harmonize.conf"), HarmonizeConfig::default().to_conf_string())?;
    // Keyword-planted training corpus, separable by construction.
    let years: Vec<i32> = FIXTURE_YEARS.collect();
    let train: Vec<PolicyDocument> = keyword_corpus(TRAIN_DOCS, TRAIN_SEED)
        .into_iter()
        .enumerate()
        .map(|(i, (summary_text, labels))| PolicyDocument {
            doc_id: format!("T{i:04}"),
            country: FIXTURE_COUNTRIES[i % FIXTURE_COUNTRIES.len()].parse().expect("valid code"),
            year: years[i % years.len()],
            summary_text,
            gold_labels: labels,
            predicted_labels: None,
        })
        .collect();
    write_policy_corpus(&train, File::create(dir.join("train.csv"))?, false)?;
    println!("{} documents, {} indicator rows -> {}", docs.len(), wdi.len(), dir.display());
    Ok(())
}
