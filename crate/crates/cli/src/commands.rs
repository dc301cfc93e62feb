use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use policylens::ca::CountryFilter;
use policylens::ingest::{load_policy_corpus, load_wdi_table, merge_policy_and_wdi, HarmonizeConfig, MIN_VALID_YEAR};
use policylens::panel::{RegressionSpec, ThemeScale};
use policylens::textclf::{MultiLabelModel, ThemeScores, TrainConfig, DEFAULT_THRESHOLD};
use policylens::{CountryCode, ThemeSet};

use crate::manifest::{sha256_hex, FileDigest, RunManifest};
use crate::stages::{self, StageOutput};
use crate::staging::Staging;
use crate::{
    CaArgs, ClassifyArgs, Cli, Command, EvaluateArgs, IndicatorsArgs, PanelArgs, PipelineArgs, TrainArgs,
};

pub const BUILTIN_CONFIG: &str = "<builtin>";

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train(a) => train(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Indicators(a) => indicators(cli, a),
        Command::Ca(a) => ca(cli, a),
        Command::Panel(a) => panel(cli, a),
        Command::Pipeline(a) => pipeline(cli, a),
    }
}

fn note(cli: &Cli, msg: &str) {
    if !cli.quiet {
        eprintln!("{msg}");
    }
}

struct RunStart {
    config: HarmonizeConfig,
    manifest: RunManifest,
}

/// Config from `--config` or `POLICYLENS_CONFIG`, else the built-in default.
/// The digest covers the exact bytes that were parsed; a `--min-year`
/// override switches it to the effective config.
fn load_config(cli: &Cli) -> anyhow::Result<(HarmonizeConfig, FileDigest)> {
    let (mut config, mut digest) = match &cli.config {
        Some(path) => {
            let config = HarmonizeConfig::load(path).with_context(|| format!("config {}", path.display()))?;
            (config, FileDigest::of_file(path)?)
        }
        None => {
            let config = HarmonizeConfig::default();
            let digest = FileDigest {
                path: BUILTIN_CONFIG.to_string(),
                sha256: sha256_hex(config.to_conf_string().as_bytes()),
            };
            (config, digest)
        }
    };
    if let Some(year) = cli.min_year {
        if year < MIN_VALID_YEAR {
            bail!("--min-year {year} is before {MIN_VALID_YEAR}");
        }
        config.min_year = year;
        digest.path = format!("{} with min_year = {year}", digest.path);
        digest.sha256 = sha256_hex(config.to_conf_string().as_bytes());
    }
    Ok((config, digest))
}

fn start(cli: &Cli, subcommand: &str, inputs: &[&Path]) -> anyhow::Result<RunStart> {
    let (config, config_digest) = load_config(cli)?;
    let inputs = inputs
        .iter()
        .map(|p| FileDigest::of_file(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(RunStart {
        config,
        manifest: RunManifest::new(subcommand, config_digest, inputs),
    })
}

fn stage_all(staging: &mut Staging, manifest: &mut RunManifest, out: StageOutput, prefix: &str) -> anyhow::Result<()> {
    for a in &out.artifacts {
        staging.add(a.name, &a.bytes)?;
    }
    manifest
        .warnings
        .extend(out.warnings.into_iter().map(|w| format!("{prefix}: {w}")));
    Ok(())
}

fn commit(cli: &Cli, staging: Staging, manifest: RunManifest) -> anyhow::Result<()> {
    let name = format!("{}.manifest.json", manifest.subcommand);
    for w in &manifest.warnings {
        note(cli, &format!("warning: {w}"));
    }
    let n = staging.digests().len();
    staging.commit_files(manifest, &name)?;
    note(cli, &format!("wrote {n} outputs and {name} to {}", cli.out_dir.display()));
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<MultiLabelModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model {}", path.display()))?;
    MultiLabelModel::from_text(&text).with_context(|| format!("invalid model {}", path.display()))
}

fn check_threshold(t: f64) -> anyhow::Result<()> {
    if !(t > 0.0 && t < 1.0) {
        bail!("threshold must lie in (0, 1), got {t}");
    }
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs) -> anyhow::Result<()> {
    let RunStart { mut manifest, .. } = start(cli, "train", &[&a.corpus])?;
    let docs = load_policy_corpus(&a.corpus)?;
    let cfg = TrainConfig {
        min_df: a.min_df,
        max_terms: a.max_terms,
        epochs: a.epochs,
        learning_rate: a.lr,
        l2: a.l2,
        tol: a.tol,
    };
    let outcome = stages::train_and_evaluate(&docs, &cfg, a.split, a.seed)?;
    note(
        cli,
        &format!("trained on {} documents, evaluated on {}", outcome.n_train, outcome.n_test),
    );

    let mut staging = Staging::new(&cli.out_dir)?;
    let model_dest = a.model_out.clone().unwrap_or_else(|| cli.out_dir.join("model.txt"));
    staging.add_to("model.txt", outcome.model.to_text().as_bytes(), model_dest)?;
    stage_all(&mut staging, &mut manifest, outcome.evaluation, "evaluate")?;
    commit(cli, staging, manifest)
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> anyhow::Result<()> {
    check_threshold(a.threshold)?;
    let RunStart { manifest, .. } = start(cli, "classify", &[&a.corpus, &a.model])?;
    let model = load_model(&a.model)?;
    let docs = load_policy_corpus(&a.corpus)?;
    let classified = stages::classify_docs(&model, &docs, a.threshold);
    let mut staging = Staging::new(&cli.out_dir)?;
    let dest = a.out.clone().unwrap_or_else(|| cli.out_dir.join("classified.csv"));
    staging.add_to("classified.csv", &stages::corpus_csv(&classified, true)?, dest)?;
    commit(cli, staging, manifest)
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> anyhow::Result<()> {
    check_threshold(a.threshold)?;
    let mut inputs: Vec<&Path> = vec![&a.corpus];
    if let Some(m) = &a.model {
        inputs.push(m);
    }
    let RunStart { mut manifest, .. } = start(cli, "evaluate", &inputs)?;
    let docs = load_policy_corpus(&a.corpus)?;
    let docs = stages::labeled(&docs);
    if docs.is_empty() {
        bail!("corpus has no gold labels to evaluate against");
    }
    let golds: Vec<ThemeSet> = docs.iter().map(|d| d.gold_labels).collect();
    let out = match &a.model {
        Some(path) => {
            let model = load_model(path)?;
            let scores: Vec<ThemeScores> = docs.iter().map(|d| model.score_text(&d.summary_text)).collect();
            let preds = stages::scores_to_labels(&scores, a.threshold);
            stages::evaluation_artifacts(&golds, &preds, Some(&scores))?
        }
        None => {
            let preds = docs
                .iter()
                .map(|d| {
                    d.predicted_labels
                        .with_context(|| format!("document {} has no predicted labels; pass --model", d.doc_id))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            stages::evaluation_artifacts(&golds, &preds, None)?
        }
    };
    let mut staging = Staging::new(&cli.out_dir)?;
    stage_all(&mut staging, &mut manifest, out, "evaluate")?;
    commit(cli, staging, manifest)
}

fn indicators(cli: &Cli, a: &IndicatorsArgs) -> anyhow::Result<()> {
    let RunStart { config, mut manifest } = start(cli, "indicators", &[&a.corpus])?;
    let docs = load_policy_corpus(&a.corpus)?;
    let panel = stages::theme_panel(&docs, config.min_year);
    let out = stages::indicator_artifacts(&panel, a.top)?;
    let mut staging = Staging::new(&cli.out_dir)?;
    stage_all(&mut staging, &mut manifest, out, "indicators")?;
    commit(cli, staging, manifest)
}

fn parse_countries(codes: &[String]) -> anyhow::Result<Vec<CountryCode>> {
    codes
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<CountryCode>().map_err(anyhow::Error::from))
        .collect()
}

fn ca(cli: &Cli, a: &CaArgs) -> anyhow::Result<()> {
    let RunStart { config, mut manifest } = start(cli, "ca", &[&a.corpus])?;
    let filter = CountryFilter {
        top_n: a.top_n,
        always_include: parse_countries(&a.always_include)?,
    };
    let docs = load_policy_corpus(&a.corpus)?;
    let panel = stages::theme_panel(&docs, config.min_year);
    let out = stages::ca_artifacts(&panel, &filter)?;
    let mut staging = Staging::new(&cli.out_dir)?;
    stage_all(&mut staging, &mut manifest, out, "ca")?;
    commit(cli, staging, manifest)
}

fn panel(cli: &Cli, a: &PanelArgs) -> anyhow::Result<()> {
    let RunStart { config, mut manifest } = start(cli, "panel", &[&a.corpus, &a.wdi])?;
    let docs = load_policy_corpus(&a.corpus)?;
    let wdi = load_wdi_table(&a.wdi)?;
    let themes = stages::theme_panel(&docs, config.min_year);
    let (analysis, warnings) = stages::analysis_panel(&themes, &wdi, &config)?;
    manifest.warnings.extend(warnings.into_iter().map(|w| format!("harmonize: {w}")));
    let outcomes = if a.outcomes.is_empty() {
        config.indicator_codes()
    } else {
        a.outcomes.clone()
    };
    let template = RegressionSpec {
        theme_scale: if a.standardize { ThemeScale::Standardized } else { ThemeScale::Counts },
        drop_singletons: a.drop_singletons,
        confidence: a.confidence,
        ..RegressionSpec::themes("")
    };
    let out = stages::panel_artifacts(&analysis, &outcomes, &template)?;
    let mut staging = Staging::new(&cli.out_dir)?;
    stage_all(&mut staging, &mut manifest, out, "panel")?;
    commit(cli, staging, manifest)
}

/// Run `f` as a named pipeline stage; any error carries the stage name.
fn stage<T>(cli: &Cli, name: &str, f: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
    note(cli, &format!("stage {name}"));
    f().with_context(|| format!("stage {name} failed"))
}

fn pipeline(cli: &Cli, a: &PipelineArgs) -> anyhow::Result<()> {
    let mut inputs: Vec<PathBuf> = vec![a.policies.clone(), a.wdi.clone()];
    if let Some(m) = &a.model {
        inputs.push(m.clone());
    }
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let RunStart { config, mut manifest } = stage(cli, "setup", || start(cli, "pipeline", &input_refs))?;
    let mut staging = Staging::new(&cli.out_dir)?;

    let docs = stage(cli, "load_policies", || Ok(load_policy_corpus(&a.policies)?))?;
    let classified = stage(cli, "classify", || {
        let model = match &a.model {
            Some(path) => load_model(path)?,
            None => stages::train_on(&stages::labeled(&docs), &TrainConfig::default())?,
        };
        let classified = stages::classify_docs(&model, &docs, DEFAULT_THRESHOLD);
        staging.add("classified.csv", &stages::corpus_csv(&classified, true)?)?;
        Ok(classified)
    })?;
    let themes = stage(cli, "theme_counts", || {
        let panel = stages::theme_panel(&classified, config.min_year);
        if panel.is_empty() {
            bail!("no classified documents from {} onwards", config.min_year);
        }
        Ok(panel)
    })?;
    let wdi = stage(cli, "load_wdi", || Ok(load_wdi_table(&a.wdi)?))?;
    let (harmonized, warnings) = stage(cli, "harmonize", || stages::harmonize_wdi(&wdi, &config))?;
    manifest.warnings.extend(warnings.into_iter().map(|w| format!("harmonize: {w}")));
    let analysis = stage(cli, "merge", || Ok(merge_policy_and_wdi(&themes, &harmonized)))?;

    let out = stage(cli, "indicators", || stages::indicator_artifacts(&themes, 10))?;
    stage_all(&mut staging, &mut manifest, out, "indicators")?;
    let out = stage(cli, "ca", || stages::ca_artifacts(&themes, &CountryFilter::default()))?;
    stage_all(&mut staging, &mut manifest, out, "ca")?;
    let out = stage(cli, "panel", || {
        stages::panel_artifacts(&analysis, &config.indicator_codes(), &RegressionSpec::themes(""))
    })?;
    stage_all(&mut staging, &mut manifest, out, "panel")?;

    for w in &manifest.warnings {
        note(cli, &format!("warning: {w}"));
    }
    stage(cli, "manifest", || staging.commit_directory(manifest))?;
    note(cli, &format!("wrote {}", cli.out_dir.display()));
    Ok(())
}
