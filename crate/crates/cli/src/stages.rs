//! The computations behind each subcommand, returning serialized artifacts so
//! that subcommands and the pipeline share one implementation.

use anyhow::{bail, Context};
use policylens::ca::{contingency_from_panel, correspondence_analysis, write_coordinates_csv, write_summary_csv, CountryFilter};
use policylens::indicators::{
    box_stats, standardize_panel, theme_counts, top_countries, write_rankings_csv, write_theme_counts_csv, ThemePanel,
};
use policylens::ingest::{
    harmonize, merge_policy_and_wdi, write_policy_corpus, AnalysisPanel, HarmonizeConfig, HarmonizedPanel, IndicatorObservation,
    PolicyDocument,
};
use policylens::metrics::{classification_report, confusion_counts, pr_curve, samples_average, MetricsError};
use policylens::panel::{run_regression_battery, write_battery_csv, RegressionSpec};
use policylens::report::{render_biplot, render_boxplots, render_coef_plot, render_pr_curves, write_pr_curves_csv, BoxFacet, FigureKind, FigureSpec};
use policylens::textclf::{holdout_split, predict_labels, train, MultiLabelModel, ThemeScores, TrainConfig};
use policylens::{Theme, ThemeSet};

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

/// Artifacts of one stage plus anything worth recording in the manifest.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub artifacts: Vec<Artifact>,
    pub warnings: Vec<String>,
}

impl StageOutput {
    fn push(&mut self, name: &'static str, bytes: Vec<u8>) {
        self.artifacts.push(Artifact { name, bytes });
    }
}

pub fn corpus_csv(docs: &[PolicyDocument], with_predictions: bool) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_policy_corpus(docs, &mut buf, with_predictions)?;
    Ok(buf)
}

/// Replace `predicted_labels` with the model's labels at `threshold`.
pub fn classify_docs(model: &MultiLabelModel, docs: &[PolicyDocument], threshold: f64) -> Vec<PolicyDocument> {
    docs.iter()
        .map(|d| PolicyDocument {
            predicted_labels: Some(predict_labels(&model.score_text(&d.summary_text), threshold)),
            ..d.clone()
        })
        .collect()
}

/// Documents carrying gold labels; unlabeled rows cannot supervise or score.
pub fn labeled(docs: &[PolicyDocument]) -> Vec<&PolicyDocument> {
    docs.iter().filter(|d| !d.gold_labels.is_empty()).collect()
}

pub fn train_on(docs: &[&PolicyDocument], cfg: &TrainConfig) -> anyhow::Result<MultiLabelModel> {
    if docs.is_empty() {
        bail!("corpus has no gold labels to train on");
    }
    let texts: Vec<&str> = docs.iter().map(|d| d.summary_text.as_str()).collect();
    let labels: Vec<ThemeSet> = docs.iter().map(|d| d.gold_labels).collect();
    Ok(train(&texts, &labels, cfg)?)
}

pub struct TrainOutcome {
    pub model: MultiLabelModel,
    pub n_train: usize,
    pub n_test: usize,
    pub evaluation: StageOutput,
}

/// Split the labeled documents, train on one side and evaluate on the other.
pub fn train_and_evaluate(
    docs: &[PolicyDocument],
    cfg: &TrainConfig,
    test_fraction: f64,
    seed: u64,
) -> anyhow::Result<TrainOutcome> {
    if !(0.0..1.0).contains(&test_fraction) {
        bail!("--split must lie in [0, 1), got {test_fraction}");
    }
    let docs = labeled(docs);
    if docs.is_empty() {
        bail!("corpus has no gold labels to train on");
    }
    let labels: Vec<ThemeSet> = docs.iter().map(|d| d.gold_labels).collect();
    let (train_idx, test_idx) = holdout_split(&labels, test_fraction, seed);
    let train_docs: Vec<&PolicyDocument> = train_idx.iter().map(|&i| docs[i]).collect();
    let model = train_on(&train_docs, cfg)?;

    let mut warnings = Vec::new();
    let eval_idx = if test_idx.is_empty() {
        warnings.push("held-out split is empty; evaluating on the training documents".to_string());
        train_idx.clone()
    } else {
        test_idx.clone()
    };
    let golds: Vec<ThemeSet> = eval_idx.iter().map(|&i| labels[i]).collect();
    let scores: Vec<ThemeScores> = eval_idx
        .iter()
        .map(|&i| model.score_text(&docs[i].summary_text))
        .collect();
    let mut evaluation = evaluation_artifacts(&golds, &scores_to_labels(&scores, 0.5), Some(&scores))?;
    warnings.append(&mut evaluation.warnings);
    evaluation.warnings = warnings;
    Ok(TrainOutcome {
        model,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        evaluation,
    })
}

pub fn scores_to_labels(scores: &[ThemeScores], threshold: f64) -> Vec<ThemeSet> {
    scores.iter().map(|s| predict_labels(s, threshold)).collect()
}

/// report.csv and report.txt, plus pr_curves.csv and pr_curves.svg when
/// scores are available. Themes without gold positives get no curve.
pub fn evaluation_artifacts(
    golds: &[ThemeSet],
    predictions: &[ThemeSet],
    scores: Option<&[ThemeScores]>,
) -> anyhow::Result<StageOutput> {
    let mut out = StageOutput::default();
    let counts = confusion_counts(predictions, golds)?;
    let samples = samples_average(predictions, golds)?;
    let table = classification_report(&counts, samples);
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    out.push("report.csv", csv);
    out.push("report.txt", table.to_text().into_bytes());

    if let Some(scores) = scores {
        let mut curves = Vec::new();
        for theme in Theme::ALL {
            let s: Vec<f64> = scores.iter().map(|x| x.get(theme)).collect();
            let g: Vec<bool> = golds.iter().map(|l| l.contains(theme)).collect();
            match pr_curve(&s, &g) {
                Ok(c) => curves.push((theme, c)),
                Err(MetricsError::NoPositives) => out
                    .warnings
                    .push(format!("{}: no positive documents, PR curve omitted", theme.label())),
                Err(e) => return Err(e.into()),
            }
        }
        if curves.is_empty() {
            out.warnings.push("no theme has positives; PR figure omitted".to_string());
        } else {
            let mut csv = Vec::new();
            write_pr_curves_csv(&curves, &mut csv)?;
            out.push("pr_curves.csv", csv);
            let svg = render_pr_curves(&curves, &FigureSpec::new(FigureKind::PrCurve))?;
            out.push("pr_curves.svg", svg.into_bytes());
        }
    }
    Ok(out)
}

/// Theme counts from each document's effective labels, restricted to the
/// analysis window.
pub fn theme_panel(docs: &[PolicyDocument], min_year: i32) -> ThemePanel {
    theme_counts(docs.iter().map(|d| (d.country, d.year, d.effective_labels()))).since(min_year)
}

/// theme_counts.csv, rankings.csv and boxplots.svg.
pub fn indicator_artifacts(panel: &ThemePanel, top: usize) -> anyhow::Result<StageOutput> {
    let mut out = StageOutput::default();
    if panel.is_empty() {
        bail!("no policy documents inside the analysis window");
    }
    let mut csv = Vec::new();
    write_theme_counts_csv(&standardize_panel(panel), &mut csv)?;
    out.push("theme_counts.csv", csv);

    let rankings: Vec<_> = Theme::ALL
        .into_iter()
        .map(|t| (t, top_countries(panel, t, top)))
        .collect();
    let mut csv = Vec::new();
    write_rankings_csv(&rankings, &mut csv)?;
    out.push("rankings.csv", csv);

    let facets: Vec<BoxFacet> = rankings
        .iter()
        .map(|(theme, ranked)| BoxFacet {
            theme: *theme,
            boxes: ranked
                .iter()
                .filter_map(|r| {
                    let z: Vec<f64> = r.series.iter().map(|&(_, z)| z).collect();
                    box_stats(&z).map(|b| (r.country, b))
                })
                .collect(),
        })
        .collect();
    let svg = render_boxplots(&facets, &FigureSpec::new(FigureKind::Boxplots))?;
    out.push("boxplots.svg", svg.into_bytes());
    Ok(out)
}

/// ca_coords.csv, ca_summary.csv and biplot.svg.
pub fn ca_artifacts(panel: &ThemePanel, filter: &CountryFilter) -> anyhow::Result<StageOutput> {
    let mut out = StageOutput::default();
    let build = contingency_from_panel(panel, filter)?;
    out.warnings.extend(build.warnings);
    let ca = correspondence_analysis(&build.table)?;
    let mut csv = Vec::new();
    write_coordinates_csv(&ca, &mut csv)?;
    out.push("ca_coords.csv", csv);
    let mut csv = Vec::new();
    write_summary_csv(&ca, &mut csv)?;
    out.push("ca_summary.csv", csv);
    let svg = render_biplot(&ca, &FigureSpec::new(FigureKind::Biplot))?;
    out.push("biplot.svg", svg.into_bytes());
    Ok(out)
}

pub fn harmonize_wdi(
    wdi: &[IndicatorObservation],
    config: &HarmonizeConfig,
) -> anyhow::Result<(HarmonizedPanel, Vec<String>)> {
    let hp = harmonize(wdi, config)?;
    let warnings = hp
        .drops
        .iter()
        .filter(|(_, d)| d.nonpositive_log > 0)
        .map(|(code, d)| format!("{code}: {} non-positive values dropped before logging", d.nonpositive_log))
        .collect();
    Ok((hp, warnings))
}

pub fn analysis_panel(
    panel: &ThemePanel,
    wdi: &[IndicatorObservation],
    config: &HarmonizeConfig,
) -> anyhow::Result<(AnalysisPanel, Vec<String>)> {
    let (hp, warnings) = harmonize_wdi(wdi, config)?;
    Ok((merge_policy_and_wdi(panel, &hp), warnings))
}

/// regression.csv and coef_plot.svg. Outcomes that cannot be estimated are
/// reported as warnings; at least one must succeed.
pub fn panel_artifacts(
    panel: &AnalysisPanel,
    outcomes: &[String],
    template: &RegressionSpec,
) -> anyhow::Result<StageOutput> {
    let mut out = StageOutput::default();
    let entries = run_regression_battery(panel, outcomes, template)?;
    let mut fits = Vec::new();
    for e in &entries {
        match &e.result {
            Ok(r) => fits.push(r.clone()),
            Err(err) => out.warnings.push(format!("outcome {}: {err}", e.outcome)),
        }
    }
    if fits.is_empty() {
        bail!("no outcome could be estimated: {}", out.warnings.join("; "));
    }
    let mut csv = Vec::new();
    write_battery_csv(&entries, &mut csv)?;
    out.push("regression.csv", csv);
    let svg = render_coef_plot(&fits, &FigureSpec::new(FigureKind::CoefPlot)).context("coefficient plot")?;
    out.push("coef_plot.svg", svg.into_bytes());
    Ok(out)
}
