//! Multi-label evaluation: per-theme confusion counts, the classification
//! report with its four averages, and precision-recall curves.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::theme::{Theme, ThemeSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{predictions} predictions but {golds} gold label sets")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("average precision is undefined without gold positives")]
    NoPositives,
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Confusion {
        Confusion { tp, fp, fn_ }
    }

    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn scores(&self) -> Prf {
        Prf::from_counts(self.tp, self.fp, self.fn_)
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;
    fn add(self, o: Confusion) -> Confusion {
        Confusion::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

/// Confusion counts indexed by [`Theme::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PerThemeCounts(pub [Confusion; 4]);

impl PerThemeCounts {
    pub fn get(&self, theme: Theme) -> Confusion {
        self.0[theme.index()]
    }

    pub fn total(&self) -> Confusion {
        self.0.iter().fold(Confusion::default(), |a, &b| a + b)
    }
}

pub fn confusion_counts(predictions: &[ThemeSet], golds: &[ThemeSet]) -> Result<PerThemeCounts> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let mut out = PerThemeCounts::default();
    for (p, g) in predictions.iter().zip(golds) {
        for theme in Theme::ALL {
            let c = &mut out.0[theme.index()];
            match (p.contains(theme), g.contains(theme)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(out)
}

/// Precision, recall and F1. Any zero denominator yields 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        Prf::from_pr(precision, recall)
    }

    pub fn from_pr(precision: f64, recall: f64) -> Prf {
        Prf {
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
        }
    }
}

/// Per-document scores averaged over documents. A document whose predicted
/// and gold sets are both empty scores 1; one empty and one not scores 0.
pub fn samples_average(predictions: &[ThemeSet], golds: &[ThemeSet]) -> Result<Option<Prf>> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Ok(None);
    }
    let mut sum = Prf::default();
    for (p, g) in predictions.iter().zip(golds) {
        let doc = match (p.is_empty(), g.is_empty()) {
            (true, true) => Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            },
            (true, false) | (false, true) => Prf::default(),
            (false, false) => {
                let hit = p.intersection(*g).len() as f64;
                Prf::from_pr(hit / p.len() as f64, hit / g.len() as f64)
            }
        };
        sum.precision += doc.precision;
        sum.recall += doc.recall;
        sum.f1 += doc.f1;
    }
    let n = predictions.len() as f64;
    Ok(Some(Prf {
        precision: sum.precision / n,
        recall: sum.recall / n,
        f1: sum.f1 / n,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub per_theme: [(Prf, u64); 4],
    pub micro: Prf,
    pub macro_avg: Prf,
    pub weighted: Prf,
    /// Absent when only aggregate counts were available.
    pub samples: Option<Prf>,
    pub total_support: u64,
}

/// Build the report from confusion counts. `samples` is the document-level
/// average from [`samples_average`], if the per-document sets are known.
pub fn classification_report(counts: &PerThemeCounts, samples: Option<Prf>) -> ReportTable {
    let per_theme: [(Prf, u64); 4] = std::array::from_fn(|k| (counts.0[k].scores(), counts.0[k].support()));
    let micro = counts.total().scores();
    let total_support: u64 = per_theme.iter().map(|p| p.1).sum();

    let mut macro_avg = Prf::default();
    let mut weighted = Prf::default();
    for (m, s) in &per_theme {
        macro_avg.precision += m.precision / 4.0;
        macro_avg.recall += m.recall / 4.0;
        macro_avg.f1 += m.f1 / 4.0;
        let w = ratio(*s as f64, total_support as f64);
        weighted.precision += w * m.precision;
        weighted.recall += w * m.recall;
        weighted.f1 += w * m.f1;
    }
    ReportTable {
        per_theme,
        micro,
        macro_avg,
        weighted,
        samples,
        total_support,
    }
}

impl ReportTable {
    pub fn get(&self, theme: Theme) -> Prf {
        self.per_theme[theme.index()].0
    }

    /// Rows in display order: the four themes, then micro, macro, weighted and
    /// samples averages. Average rows carry the total support.
    pub fn rows(&self) -> Vec<(String, Option<Prf>, u64)> {
        let mut rows: Vec<(String, Option<Prf>, u64)> = Theme::ALL
            .iter()
            .map(|t| {
                let (m, s) = self.per_theme[t.index()];
                (t.label().to_string(), Some(m), s)
            })
            .collect();
        rows.push(("micro avg".into(), Some(self.micro), self.total_support));
        rows.push(("macro avg".into(), Some(self.macro_avg), self.total_support));
        rows.push(("weighted avg".into(), Some(self.weighted), self.total_support));
        rows.push(("samples avg".into(), self.samples, self.total_support));
        rows
    }

    /// `label,precision,recall,f1,support`; an unavailable samples average is
    /// written with empty metric cells.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "precision", "recall", "f1", "support"])?;
        for (label, m, s) in self.rows() {
            let cells = match m {
                Some(m) => [m.precision.to_string(), m.recall.to_string(), m.f1.to_string()],
                None => Default::default(),
            };
            w.write_record([label, cells[0].clone(), cells[1].clone(), cells[2].clone(), s.to_string()])?;
        }
        w.flush()
    }

    /// Plain-text table, two decimals, in the classic report layout.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut s = String::new();
        writeln!(
            s,
            "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "precision", "recall", "f1-score", "support"
        )
        .unwrap();
        for (i, (label, m, support)) in rows.iter().enumerate() {
            if i == 4 {
                s.push('\n');
            }
            match m {
                Some(m) => writeln!(
                    s,
                    "{label:>width$}  {:>9.2}  {:>9.2}  {:>9.2}  {support:>9}",
                    m.precision, m.recall, m.f1
                ),
                None => writeln!(s, "{label:>width$}  {:>9}  {:>9}  {:>9}  {support:>9}", "-", "-", "-"),
            }
            .unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    /// One point per distinct score, from the highest threshold down.
    pub points: Vec<PrPoint>,
    pub ap: f64,
}

/// Sweep every distinct score as a threshold (tied scores enter together)
/// and accumulate the step-wise average precision.
pub fn pr_curve(scores: &[f64], golds: &[bool]) -> Result<PRCurve> {
    if scores.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: scores.len(),
            golds: golds.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore { index });
    }
    let positives = golds.iter().filter(|&&g| g).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            tp += golds[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / positives as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            precision,
            recall,
        });
    }
    Ok(PRCurve { points, ap })
}
