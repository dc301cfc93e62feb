//! Two-way fixed-effects regression on unbalanced country-year panels.
//!
//! Country and year effects are swept out by alternating projections, slopes
//! come from QR least squares on the demeaned data, and inference uses a
//! country-clustered sandwich with t critical values on G−1 degrees of
//! freedom.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::indicators::zscore;
use crate::ingest::AnalysisPanel;
use crate::linalg::{householder_lstsq, LinalgError, Matrix};
use crate::theme::{CountryCode, Theme};

pub const DEMEAN_TOL: f64 = 1e-10;
pub const DEMEAN_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeError {
    #[error("invalid regression spec: {0}")]
    InvalidSpec(String),
    #[error("indicator {0:?} is not in the panel")]
    UnknownIndicator(String),
    #[error("under-identified: {n_obs} usable rows, need at least {required} (regressors + countries + years)")]
    UnderIdentified { n_obs: usize, required: usize },
    #[error("demeaning did not converge in {iterations} iterations (last max change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("regressor {regressor:?} is collinear with the fixed effects or other regressors")]
    Collinear { regressor: String },
    #[error("cluster-robust covariance needs at least 2 clusters, got {clusters}")]
    TooFewClusters { clusters: usize },
    #[error("battery needs at least one outcome")]
    EmptyBattery,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, FeError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regressor {
    Theme(Theme),
    Indicator(String),
}

impl Regressor {
    pub fn themes() -> Vec<Regressor> {
        Theme::ALL.into_iter().map(Regressor::Theme).collect()
    }

    /// Stable machine name: the theme slug or the indicator code.
    pub fn name(&self) -> &str {
        match self {
            Regressor::Theme(t) => t.slug(),
            Regressor::Indicator(code) => code,
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regressor::Theme(t) => f.write_str(t.label()),
            Regressor::Indicator(code) => f.write_str(code),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThemeScale {
    #[default]
    Counts,
    /// Pooled z-scores over every panel row with theme coverage.
    Standardized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub outcome: String,
    pub regressors: Vec<Regressor>,
    pub theme_scale: ThemeScale,
    pub drop_singletons: bool,
    pub confidence: f64,
}

impl RegressionSpec {
    /// The four theme counts jointly, 95% intervals.
    pub fn themes(outcome: impl Into<String>) -> RegressionSpec {
        RegressionSpec {
            outcome: outcome.into(),
            regressors: Regressor::themes(),
            theme_scale: ThemeScale::Counts,
            drop_singletons: false,
            confidence: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(FeError::InvalidSpec("no regressors".into()));
        }
        let unique: BTreeSet<&Regressor> = self.regressors.iter().collect();
        if unique.len() != self.regressors.len() {
            return Err(FeError::InvalidSpec("duplicate regressor".into()));
        }
        if self
            .regressors
            .iter()
            .any(|r| matches!(r, Regressor::Indicator(c) if *c == self.outcome))
        {
            return Err(FeError::InvalidSpec(format!("outcome {} is also a regressor", self.outcome)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(FeError::InvalidSpec("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Rows that survive listwise deletion, in (country, year) order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub countries: Vec<CountryCode>,
    pub years: Vec<i32>,
    pub y: Vec<f64>,
    /// N × K regressor matrix.
    pub x: Matrix,
    pub regressor_names: Vec<String>,
}

impl RegressionSample {
    pub fn new(countries: Vec<CountryCode>, years: Vec<i32>, y: Vec<f64>, x: Matrix, regressor_names: Vec<String>) -> Self {
        assert!(countries.len() == y.len() && years.len() == y.len() && x.rows() == y.len());
        assert_eq!(regressor_names.len(), x.cols());
        RegressionSample {
            countries,
            years,
            y,
            x,
            regressor_names,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_countries(&self) -> usize {
        self.countries.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn n_years(&self) -> usize {
        self.years.iter().collect::<BTreeSet<_>>().len()
    }

    fn check_identified(&self) -> Result<()> {
        let required = self.x.cols() + self.n_countries() + self.n_years();
        if self.n_obs() < required {
            return Err(FeError::UnderIdentified {
                n_obs: self.n_obs(),
                required,
            });
        }
        Ok(())
    }

    fn retain(&mut self, keep: &[bool]) {
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        self.countries = idx.iter().map(|&i| self.countries[i]).collect();
        self.years = idx.iter().map(|&i| self.years[i]).collect();
        self.y = idx.iter().map(|&i| self.y[i]).collect();
        let rows: Vec<&[f64]> = idx.iter().map(|&i| self.x.row(i)).collect();
        self.x = if rows.is_empty() {
            Matrix::zeros(0, self.x.cols())
        } else {
            Matrix::from_rows(&rows)
        };
    }

    /// Repeatedly drop rows whose country or year occurs only once.
    fn drop_singletons(&mut self) {
        loop {
            let mut by_country: BTreeMap<CountryCode, usize> = BTreeMap::new();
            let mut by_year: BTreeMap<i32, usize> = BTreeMap::new();
            for (c, y) in self.countries.iter().zip(&self.years) {
                *by_country.entry(*c).or_default() += 1;
                *by_year.entry(*y).or_default() += 1;
            }
            let keep: Vec<bool> = self
                .countries
                .iter()
                .zip(&self.years)
                .map(|(c, y)| by_country[c] > 1 && by_year[y] > 1)
                .collect();
            if keep.iter().all(|&k| k) {
                return;
            }
            self.retain(&keep);
        }
    }
}

/// Listwise deletion: a row enters only when the outcome and every regressor
/// are present.
pub fn assemble_regression_sample(panel: &AnalysisPanel, spec: &RegressionSpec) -> Result<RegressionSample> {
    spec.validate()?;
    if !panel.indicator_codes.contains(&spec.outcome) {
        return Err(FeError::UnknownIndicator(spec.outcome.clone()));
    }
    for r in &spec.regressors {
        if let Regressor::Indicator(code) = r {
            if !panel.indicator_codes.contains(code) {
                return Err(FeError::UnknownIndicator(code.clone()));
            }
        }
    }

    // Standardized theme values are pooled over rows with corpus coverage,
    // before any deletion for this particular outcome.
    let covered: Vec<usize> = (0..panel.rows.len())
        .filter(|&i| panel.rows[i].theme_counts.is_some())
        .collect();
    let mut theme_values: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); 4];
    for theme in Theme::ALL {
        let raw: Vec<f64> = covered
            .iter()
            .map(|&i| panel.rows[i].theme_counts.expect("covered")[theme.index()] as f64)
            .collect();
        let vals = match spec.theme_scale {
            ThemeScale::Counts => raw,
            ThemeScale::Standardized => zscore(&raw),
        };
        theme_values[theme.index()] = covered.iter().copied().zip(vals).collect();
    }

    let (mut countries, mut years, mut y, mut rows) = (vec![], vec![], vec![], vec![]);
    'rows: for (i, row) in panel.rows.iter().enumerate() {
        let Some(&outcome) = row.indicators.get(&spec.outcome) else {
            continue;
        };
        let mut xs = Vec::with_capacity(spec.regressors.len());
        for r in &spec.regressors {
            let v = match r {
                Regressor::Theme(t) => theme_values[t.index()].get(&i).copied(),
                Regressor::Indicator(code) => row.indicators.get(code).copied(),
            };
            match v {
                Some(v) => xs.push(v),
                None => continue 'rows,
            }
        }
        countries.push(row.country);
        years.push(row.year);
        y.push(outcome);
        rows.push(xs);
    }
    let k = spec.regressors.len();
    let x = if rows.is_empty() {
        Matrix::zeros(0, k)
    } else {
        Matrix::from_rows(&rows)
    };
    let names = spec.regressors.iter().map(|r| r.name().to_string()).collect();
    let mut sample = RegressionSample::new(countries, years, y, x, names);
    if spec.drop_singletons {
        sample.drop_singletons();
    }
    sample.check_identified()?;
    Ok(sample)
}

/// Demeaned outcome and regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct Demeaned {
    pub y: Vec<f64>,
    pub x: Matrix,
    pub iterations: usize,
    /// Largest absolute cell change in the final pass.
    pub last_change: f64,
}

fn group_index<T: Ord + Copy>(keys: &[T]) -> (Vec<usize>, usize) {
    let levels: BTreeMap<T, usize> = keys
        .iter()
        .copied()
        .collect::<BTreeSet<T>>()
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    (keys.iter().map(|k| levels[k]).collect(), levels.len())
}

fn subtract_group_means(col: &mut [f64], groups: &[usize], n_groups: usize) {
    let mut sum = vec![0.0; n_groups];
    let mut count = vec![0usize; n_groups];
    for (v, &g) in col.iter().zip(groups) {
        sum[g] += v;
        count[g] += 1;
    }
    for (v, &g) in col.iter_mut().zip(groups) {
        *v -= sum[g] / count[g] as f64;
    }
}

/// Alternating projections: subtract country means, then year means, and
/// repeat until no cell moves by more than `tol` times its column's scale
/// (max(1, max|column|)). A balanced panel stops after the second pass.
pub fn within_transform(sample: &RegressionSample, tol: f64, max_iter: usize) -> Result<Demeaned> {
    let (cg, n_c) = group_index(&sample.countries);
    let (yg, n_y) = group_index(&sample.years);
    let n = sample.n_obs();
    let k = sample.x.cols();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    columns.push(sample.y.clone());
    columns.extend((0..k).map(|j| sample.x.column(j)));
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().fold(1.0_f64, |m, v| m.max(v.abs())))
        .collect();

    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut prev = vec![0.0; n];
    while iterations < max_iter {
        iterations += 1;
        let mut converged = true;
        last_change = 0.0;
        for (col, &scale) in columns.iter_mut().zip(&scales) {
            prev.copy_from_slice(col);
            subtract_group_means(col, &cg, n_c);
            subtract_group_means(col, &yg, n_y);
            let change = col.iter().zip(&prev).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            last_change = last_change.max(change);
            if change >= tol * scale {
                converged = false;
            }
        }
        if converged {
            let y = columns.remove(0);
            let x = if n == 0 {
                Matrix::zeros(0, k)
            } else {
                Matrix::from_columns(&columns)
            };
            return Ok(Demeaned {
                y,
                x,
                iterations,
                last_change,
            });
        }
    }
    Err(FeError::NoConvergence {
        iterations,
        change: last_change,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// (XᵀX)⁻¹ from the QR factor.
    pub xtx_inv: Matrix,
}

/// Least squares by Householder QR. A rank-deficient column is reported by
/// its index through [`LinalgError::Collinear`].
pub fn ols(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let ls = householder_lstsq(x, y)?;
    let xtx_inv = ls.xtx_inverse();
    Ok(OlsFit {
        beta: ls.beta,
        residuals: ls.residuals,
        xtx_inv,
    })
}

/// Cluster-robust sandwich with small-sample factor
/// c = G/(G−1) · (N−1)/(N−K), K being the number of columns of X.
pub fn cluster_robust_vcov<C: Ord>(x: &Matrix, residuals: &[f64], clusters: &[C]) -> Result<Matrix> {
    let ls = householder_lstsq(x, &vec![0.0; x.rows()])?;
    cluster_robust_vcov_with(&ls.xtx_inverse(), x, residuals, clusters)
}

fn cluster_robust_vcov_with<C: Ord>(xtx_inv: &Matrix, x: &Matrix, residuals: &[f64], clusters: &[C]) -> Result<Matrix> {
    let (n, k) = (x.rows(), x.cols());
    if residuals.len() != n || clusters.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "X has {n} rows, {} residuals, {} cluster ids",
            residuals.len(),
            clusters.len()
        ))
        .into());
    }
    let mut scores: BTreeMap<&C, Vec<f64>> = BTreeMap::new();
    for i in 0..n {
        let s = scores.entry(&clusters[i]).or_insert_with(|| vec![0.0; k]);
        for (j, sj) in s.iter_mut().enumerate() {
            *sj += x[(i, j)] * residuals[i];
        }
    }
    let g = scores.len();
    if g < 2 {
        return Err(FeError::TooFewClusters { clusters: g });
    }
    let mut meat = Matrix::zeros(k, k);
    let mut buf = vec![0.0; k * k];
    for s in scores.values() {
        for a in 0..k {
            for b in 0..k {
                buf[a * k + b] += s[a] * s[b];
            }
        }
    }
    if k > 0 {
        meat = Matrix::from_row_major(k, k, buf);
    }
    let c = (g as f64 / (g - 1) as f64) * ((n as f64 - 1.0) / (n as f64 - k as f64));
    Ok(xtx_inv.matmul(&meat).matmul(xtx_inv).scale(c))
}

/// Two-sided critical value t_{(1+confidence)/2, df}.
pub fn t_critical(confidence: f64, df: usize) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    t.inverse_cdf(0.5 + confidence / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub regressor: String,
    pub beta: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Interval excludes zero.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FEResult {
    pub outcome: String,
    pub coefficients: Vec<Coefficient>,
    pub vcov: Matrix,
    pub confidence: f64,
    pub n_obs: usize,
    pub n_countries: usize,
    pub n_years: usize,
    pub iterations: usize,
    pub within_r2: f64,
}

/// Demean, solve, and attach clustered intervals for a prepared sample.
pub fn fit_sample(outcome: &str, sample: &RegressionSample, confidence: f64) -> Result<FEResult> {
    sample.check_identified()?;
    let dm = within_transform(sample, DEMEAN_TOL, DEMEAN_MAX_ITER)?;
    let fit = ols(&dm.x, &dm.y).map_err(|e| match e {
        FeError::Linalg(LinalgError::Collinear { column, .. }) => FeError::Collinear {
            regressor: sample.regressor_names[column].clone(),
        },
        other => other,
    })?;
    let vcov = cluster_robust_vcov_with(&fit.xtx_inv, &dm.x, &fit.residuals, &sample.countries)?;
    let g = sample.n_countries();
    let t = t_critical(confidence, g - 1);
    let coefficients = sample
        .regressor_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let beta = fit.beta[j];
            let se = vcov[(j, j)].max(0.0).sqrt();
            let (ci_low, ci_high) = (beta - t * se, beta + t * se);
            Coefficient {
                regressor: name.clone(),
                beta,
                se,
                ci_low,
                ci_high,
                significant: ci_low > 0.0 || ci_high < 0.0,
            }
        })
        .collect();
    let sst: f64 = dm.y.iter().map(|v| v * v).sum();
    let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let within_r2 = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };
    Ok(FEResult {
        outcome: outcome.to_string(),
        coefficients,
        vcov,
        confidence,
        n_obs: sample.n_obs(),
        n_countries: g,
        n_years: sample.n_years(),
        iterations: dm.iterations,
        within_r2,
    })
}

pub fn fit_twoway_fe(panel: &AnalysisPanel, spec: &RegressionSpec) -> Result<FEResult> {
    let sample = assemble_regression_sample(panel, spec)?;
    fit_sample(&spec.outcome, &sample, spec.confidence)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryEntry {
    pub outcome: String,
    pub result: Result<FEResult>,
}

/// One fit per outcome, run concurrently; entries follow the input order and
/// a failing outcome does not stop the others. `template` supplies
/// everything except the outcome.
pub fn run_regression_battery(
    panel: &AnalysisPanel,
    outcomes: &[String],
    template: &RegressionSpec,
) -> Result<Vec<BatteryEntry>> {
    if outcomes.is_empty() {
        return Err(FeError::EmptyBattery);
    }
    let results: Vec<Result<FEResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = outcomes
            .iter()
            .map(|outcome| {
                let spec = RegressionSpec {
                    outcome: outcome.clone(),
                    ..template.clone()
                };
                s.spawn(move || fit_twoway_fe(panel, &spec))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("regression thread panicked"))
            .collect()
    });
    Ok(outcomes
        .iter()
        .cloned()
        .zip(results)
        .map(|(outcome, result)| BatteryEntry { outcome, result })
        .collect())
}

/// `outcome,regressor,beta,se,ci_low,ci_high,n_obs,n_countries,n_years,within_r2`
/// for every successful fit.
pub fn write_battery_csv<W: Write>(entries: &[BatteryEntry], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "outcome",
        "regressor",
        "beta",
        "se",
        "ci_low",
        "ci_high",
        "n_obs",
        "n_countries",
        "n_years",
        "within_r2",
    ])?;
    for entry in entries {
        let Ok(r) = &entry.result else { continue };
        for c in &r.coefficients {
            w.write_record([
                r.outcome.clone(),
                c.regressor.clone(),
                c.beta.to_string(),
                c.se.to_string(),
                c.ci_low.to_string(),
                c.ci_high.to_string(),
                r.n_obs.to_string(),
                r.n_countries.to_string(),
                r.n_years.to_string(),
                r.within_r2.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AnalysisRow;
    use approx::assert_abs_diff_eq;

    fn cc(s: &str) -> CountryCode {
        s.parse().unwrap()
    }

    fn sample(rows: &[(&str, i32, f64, f64)]) -> RegressionSample {
        RegressionSample::new(
            rows.iter().map(|r| cc(r.0)).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            Matrix::from_rows(&rows.iter().map(|r| vec![r.3]).collect::<Vec<_>>()),
            vec!["x".into()],
        )
    }

    #[test]
    fn balanced_panel_converges_on_second_pass() {
        let s = sample(&[
            ("AAA", 1, 1.0, 3.0),
            ("AAA", 2, 4.0, 1.0),
            ("BBB", 1, 2.0, 7.0),
            ("BBB", 2, 9.0, 2.0),
        ]);
        let d = within_transform(&s, DEMEAN_TOL, DEMEAN_MAX_ITER).unwrap();
        assert_eq!(d.iterations, 2);
        assert_eq!(d.last_change, 0.0);
    }

    #[test]
    fn country_constant_regressor_demeans_to_zero() {
        let s = sample(&[
            ("AAA", 1, 1.0, 5.0),
            ("AAA", 2, 4.0, 5.0),
            ("AAA", 3, 2.0, 5.0),
            ("BBB", 1, 2.0, 2.0),
            ("BBB", 3, 9.0, 2.0),
        ]);
        let d = within_transform(&s, DEMEAN_TOL, DEMEAN_MAX_ITER).unwrap();
        assert!(d.x.column(0).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn demeaning_iteration_cap() {
        let s = sample(&[
            ("AAA", 1, 1.0, 5.0),
            ("AAA", 2, 4.0, 1.0),
            ("BBB", 2, 2.0, 2.0),
            ("BBB", 3, 9.0, 7.0),
        ]);
        assert!(matches!(
            within_transform(&s, 0.0, 3),
            Err(FeError::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn ols_examples() {
        let fit = ols(&Matrix::identity(3), &[1.0, -2.0, 5.0]).unwrap();
        for (b, e) in fit.beta.iter().zip([1.0, -2.0, 5.0]) {
            assert_abs_diff_eq!(*b, e, epsilon = 1e-14);
        }
        let dup = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        assert!(matches!(
            ols(&dup, &[1.0, 2.0, 3.0]),
            Err(FeError::Linalg(LinalgError::Collinear { column: 1, .. }))
        ));
    }

    #[test]
    fn vcov_zero_residuals_and_cluster_floor() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]);
        let v = cluster_robust_vcov(&x, &[0.0; 3], &[1, 2, 3]).unwrap();
        assert_eq!(v[(0, 0)], 0.0);
        assert_eq!(
            cluster_robust_vcov(&x, &[1.0, 0.0, -1.0], &[7, 7, 7]),
            Err(FeError::TooFewClusters { clusters: 1 })
        );
    }

    #[test]
    fn t_quantiles() {
        assert_abs_diff_eq!(t_critical(0.95, 1), 12.706204736174698, epsilon = 1e-6);
        assert_abs_diff_eq!(t_critical(0.95, 10), 2.2281388519649385, epsilon = 1e-8);
        assert!(t_critical(0.90, 10) < t_critical(0.95, 10));
    }

    fn noiseless_panel(shift: f64) -> AnalysisPanel {
        let mut rows = Vec::new();
        for (ci, c) in ["AAA", "BBB", "CCC", "DDD"].iter().enumerate() {
            for year in 2015..2021 {
                if (ci + year as usize).is_multiple_of(5) {
                    continue;
                }
                let counts = [
                    ((ci * 7 + year as usize * 3) % 5) as u32,
                    ((ci * 3 + year as usize) % 4) as u32,
                    ((ci + year as usize * 5) % 3) as u32,
                    ((ci * year as usize) % 2) as u32,
                ];
                let alpha = ci as f64 * 1.5 + if ci == 2 { shift } else { 0.0 };
                let gamma = (year - 2015) as f64 * 0.25;
                let y = 2.0 * counts[0] as f64 - 1.0 * counts[1] as f64 + 0.5 * counts[2] as f64 + 3.0 * counts[3] as f64
                    + alpha
                    + gamma;
                rows.push(AnalysisRow {
                    country: cc(c),
                    year,
                    theme_counts: Some(counts),
                    indicators: [("Y".to_string(), y)].into_iter().collect(),
                });
            }
        }
        AnalysisPanel {
            rows,
            indicator_codes: vec!["Y".into()],
        }
    }

    #[test]
    fn noiseless_recovery_and_absorption() {
        let base = fit_twoway_fe(&noiseless_panel(0.0), &RegressionSpec::themes("Y")).unwrap();
        let truth = [2.0, -1.0, 0.5, 3.0];
        for (c, t) in base.coefficients.iter().zip(truth) {
            assert_abs_diff_eq!(c.beta, t, epsilon = 1e-10);
            assert!(c.ci_low <= c.beta && c.beta <= c.ci_high);
        }
        assert_abs_diff_eq!(base.within_r2, 1.0, epsilon = 1e-9);

        let shifted = fit_twoway_fe(&noiseless_panel(7.0), &RegressionSpec::themes("Y")).unwrap();
        for (a, b) in base.coefficients.iter().zip(&shifted.coefficients) {
            assert_abs_diff_eq!(a.beta, b.beta, epsilon = 1e-10);
        }
    }

    #[test]
    fn spec_validation_and_listwise_deletion() {
        let mut spec = RegressionSpec::themes("Y");
        spec.regressors.push(Regressor::Theme(Theme::Mitigation));
        assert!(matches!(spec.validate(), Err(FeError::InvalidSpec(_))));
        let mut spec = RegressionSpec::themes("Y");
        spec.regressors = vec![Regressor::Indicator("Y".into())];
        assert!(matches!(spec.validate(), Err(FeError::InvalidSpec(_))));

        let mut panel = noiseless_panel(0.0);
        let full = assemble_regression_sample(&panel, &RegressionSpec::themes("Y")).unwrap();
        panel.rows[0].indicators.clear();
        panel.rows[1].theme_counts = None;
        let fewer = assemble_regression_sample(&panel, &RegressionSpec::themes("Y")).unwrap();
        assert_eq!(fewer.n_obs(), full.n_obs() - 2);

        assert!(matches!(
            fit_twoway_fe(&panel, &RegressionSpec::themes("NOPE")),
            Err(FeError::UnknownIndicator(_))
        ));
    }

    #[test]
    fn battery_isolates_failures_and_keeps_order() {
        let mut panel = noiseless_panel(0.0);
        for r in panel.rows.iter_mut().skip(2) {
            let y = r.indicators["Y"];
            r.indicators.insert("Z".into(), -y);
        }
        panel.rows[0].indicators.insert("SPARSE".into(), 1.0);
        panel.indicator_codes = vec!["SPARSE".into(), "Y".into(), "Z".into()];
        let outcomes: Vec<String> = vec!["Z".into(), "SPARSE".into(), "Y".into()];
        let spec = RegressionSpec::themes("unused");
        let a = run_regression_battery(&panel, &outcomes, &spec).unwrap();
        assert_eq!(a.iter().map(|e| e.outcome.as_str()).collect::<Vec<_>>(), ["Z", "SPARSE", "Y"]);
        assert!(a[0].result.is_ok() && a[2].result.is_ok());
        assert!(matches!(a[1].result, Err(FeError::UnderIdentified { .. })));
        let b = run_regression_battery(&panel, &outcomes, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(run_regression_battery(&panel, &[], &spec), Err(FeError::EmptyBattery));

        let mut buf = Vec::new();
        write_battery_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.lines().nth(1).unwrap().starts_with("Z,mitigation,"));
    }

    #[test]
    fn singleton_dropping() {
        let mut s = sample(&[
            ("AAA", 1, 1.0, 3.0),
            ("AAA", 2, 4.0, 1.0),
            ("BBB", 1, 2.0, 7.0),
            ("BBB", 2, 9.0, 2.0),
            ("CCC", 2, 9.0, 2.0),
        ]);
        s.drop_singletons();
        assert_eq!(s.n_obs(), 4);
        assert_eq!(s.n_countries(), 2);
    }
}
