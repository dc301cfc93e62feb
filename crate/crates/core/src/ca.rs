//! Correspondence analysis of a country × theme contingency table.
//!
//! The standardized residual matrix
//! `S = D_r^{-1/2} (P − r cᵀ) D_c^{-1/2}` is decomposed with [`svd_small`];
//! principal coordinates for rows and columns are then
//! `F = D_r^{-1/2} U Σ` and `G = D_c^{-1/2} V Σ` (the symmetric map).

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::indicators::ThemePanel;
use crate::linalg::{svd_small, LinalgError, Matrix};
pub use crate::linalg::Svd;
use crate::theme::{CountryCode, Theme};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaError {
    #[error("contingency table is {rows}x{cols}; at least 2x2 is required")]
    TooSmall { rows: usize, cols: usize },
    #[error("label count does not match table shape: {0}")]
    Shape(String),
    #[error("cell ({row}, {col}) is negative or not finite")]
    InvalidCell { row: usize, col: usize },
    #[error("{kind} `{label}` sums to zero")]
    ZeroMargin { kind: &'static str, label: String },
    #[error("theme panel is empty")]
    EmptyPanel,
    #[error("svd failed: {0}")]
    Svd(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    counts: Matrix,
}

impl ContingencyTable {
    /// Validates shape (≥ 2×2), non-negative finite cells and non-zero
    /// margins.
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        counts: Matrix,
    ) -> Result<ContingencyTable, CaError> {
        if row_labels.len() != counts.rows() || col_labels.len() != counts.cols() {
            return Err(CaError::Shape(format!(
                "{} row labels, {} column labels for a {}x{} table",
                row_labels.len(),
                col_labels.len(),
                counts.rows(),
                counts.cols()
            )));
        }
        if counts.rows() < 2 || counts.cols() < 2 {
            return Err(CaError::TooSmall {
                rows: counts.rows(),
                cols: counts.cols(),
            });
        }
        for i in 0..counts.rows() {
            for j in 0..counts.cols() {
                let v = counts[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(CaError::InvalidCell { row: i, col: j });
                }
            }
        }
        for (i, label) in row_labels.iter().enumerate() {
            if counts.row(i).iter().sum::<f64>() == 0.0 {
                return Err(CaError::ZeroMargin {
                    kind: "row",
                    label: label.clone(),
                });
            }
        }
        for (j, label) in col_labels.iter().enumerate() {
            if counts.column(j).iter().sum::<f64>() == 0.0 {
                return Err(CaError::ZeroMargin {
                    kind: "column",
                    label: label.clone(),
                });
            }
        }
        Ok(ContingencyTable {
            row_labels,
            col_labels,
            counts,
        })
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn counts(&self) -> &Matrix {
        &self.counts
    }

    pub fn grand_total(&self) -> f64 {
        self.counts.as_slice().iter().sum()
    }
}

/// Which countries enter the biplot table.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryFilter {
    pub top_n: usize,
    pub always_include: Vec<CountryCode>,
}

impl Default for CountryFilter {
    fn default() -> Self {
        CountryFilter {
            top_n: 50,
            always_include: CountryCode::g7(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableBuild {
    pub table: ContingencyTable,
    pub warnings: Vec<String>,
}

/// Aggregate counts over all years per (country, theme), keep the `top_n`
/// countries by total (ties by ISO3) plus the always-include list, and drop
/// all-zero rows and columns with a warning. Rows come out in ISO3 order,
/// columns in canonical theme order.
pub fn contingency_from_panel(panel: &ThemePanel, filter: &CountryFilter) -> Result<TableBuild, CaError> {
    if panel.is_empty() {
        return Err(CaError::EmptyPanel);
    }
    let mut totals: BTreeMap<CountryCode, [u64; 4]> = BTreeMap::new();
    for ((country, _), counts) in panel.cells() {
        let acc = totals.entry(*country).or_insert([0; 4]);
        for (a, c) in acc.iter_mut().zip(counts) {
            *a += *c as u64;
        }
    }

    let mut by_total: Vec<(CountryCode, u64)> = totals
        .iter()
        .map(|(c, counts)| (*c, counts.iter().sum()))
        .collect();
    by_total.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut selected: Vec<CountryCode> = by_total.iter().take(filter.top_n).map(|(c, _)| *c).collect();

    let mut warnings = Vec::new();
    for c in &filter.always_include {
        if !totals.contains_key(c) {
            warnings.push(format!("always-include country {c} not present in panel"));
        } else if !selected.contains(c) {
            selected.push(*c);
        }
    }
    selected.sort();

    let mut rows: Vec<CountryCode> = Vec::new();
    for c in selected {
        if totals[&c].iter().all(|&v| v == 0) {
            warnings.push(format!("dropped country {c}: zero total count"));
        } else {
            rows.push(c);
        }
    }
    let mut cols: Vec<Theme> = Vec::new();
    for t in Theme::ALL {
        if rows.iter().all(|c| totals[c][t.index()] == 0) {
            warnings.push(format!("dropped theme {t}: zero total count"));
        } else {
            cols.push(t);
        }
    }
    if rows.len() < 2 || cols.len() < 2 {
        return Err(CaError::TooSmall {
            rows: rows.len(),
            cols: cols.len(),
        });
    }

    let mut m = Matrix::zeros(rows.len(), cols.len());
    for (i, c) in rows.iter().enumerate() {
        for (j, t) in cols.iter().enumerate() {
            m[(i, j)] = totals[c][t.index()] as f64;
        }
    }
    let table = ContingencyTable::new(
        rows.iter().map(|c| c.to_string()).collect(),
        cols.iter().map(|t| t.label().to_string()).collect(),
        m,
    )?;
    Ok(TableBuild { table, warnings })
}

#[derive(Debug, Clone)]
pub struct CAResult {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
    /// Nontrivial singular values, descending.
    pub singular_values: Vec<f64>,
    /// σ_k² per dimension.
    pub inertias: Vec<f64>,
    /// σ_k² / Σσ_j².
    pub shares: Vec<f64>,
    pub total_inertia: f64,
    /// rows × dims
    pub row_coords: Matrix,
    /// cols × dims
    pub col_coords: Matrix,
    /// The decomposition of the standardized residual matrix.
    pub svd: Svd,
    pub residuals: Matrix,
}

impl CAResult {
    pub fn dims(&self) -> usize {
        self.singular_values.len()
    }
}

/// Standardized residual matrix S together with row and column masses.
pub fn standardized_residuals(table: &ContingencyTable) -> (Matrix, Vec<f64>, Vec<f64>) {
    let counts = table.counts();
    let n = table.grand_total();
    let (nr, nc) = (counts.rows(), counts.cols());
    let p = counts.scale(1.0 / n);
    let r: Vec<f64> = (0..nr).map(|i| p.row(i).iter().sum()).collect();
    let c: Vec<f64> = (0..nc).map(|j| (0..nr).map(|i| p[(i, j)]).sum()).collect();
    let mut s = Matrix::zeros(nr, nc);
    for i in 0..nr {
        for j in 0..nc {
            s[(i, j)] = (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt();
        }
    }
    (s, r, c)
}

/// Run correspondence analysis. At most min(rows, cols) − 1 dimensions are
/// kept, which removes the trivial dimension along the column-mass
/// direction.
pub fn correspondence_analysis(table: &ContingencyTable) -> Result<CAResult, CaError> {
    let (s, r, c) = standardized_residuals(table);
    let mut svd = svd_small(&s)?;
    let max_dims = r.len().min(c.len()) - 1;
    let dims = svd.singular_values.len().min(max_dims);
    if dims < svd.singular_values.len() {
        svd = Svd {
            u: keep_columns(&svd.u, dims),
            singular_values: svd.singular_values[..dims].to_vec(),
            v: keep_columns(&svd.v, dims),
        };
    }

    let sig = &svd.singular_values;
    let mut row_coords = Matrix::zeros(r.len(), dims);
    for i in 0..r.len() {
        for k in 0..dims {
            row_coords[(i, k)] = svd.u[(i, k)] * sig[k] / r[i].sqrt();
        }
    }
    let mut col_coords = Matrix::zeros(c.len(), dims);
    for j in 0..c.len() {
        for k in 0..dims {
            col_coords[(j, k)] = svd.v[(j, k)] * sig[k] / c[j].sqrt();
        }
    }
    let inertias: Vec<f64> = sig.iter().map(|s| s * s).collect();
    let total_inertia: f64 = inertias.iter().sum();
    let shares = inertias.iter().map(|i| i / total_inertia).collect();

    Ok(CAResult {
        row_labels: table.row_labels().to_vec(),
        col_labels: table.col_labels().to_vec(),
        row_masses: r,
        col_masses: c,
        singular_values: sig.clone(),
        inertias,
        shares,
        total_inertia,
        row_coords,
        col_coords,
        svd,
        residuals: s,
    })
}

fn keep_columns(m: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), k);
    for i in 0..m.rows() {
        for j in 0..k {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

/// Coordinates CSV: `kind,label,dim1,dim2,...` with `row` entries first.
pub fn write_coordinates_csv<W: Write>(ca: &CAResult, writer: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["kind".to_string(), "label".to_string()];
    header.extend((1..=ca.dims()).map(|k| format!("dim{k}")));
    wtr.write_record(&header)?;
    for (kind, labels, coords) in [
        ("row", &ca.row_labels, &ca.row_coords),
        ("col", &ca.col_labels, &ca.col_coords),
    ] {
        for (i, label) in labels.iter().enumerate() {
            let mut rec = vec![kind.to_string(), label.clone()];
            rec.extend(coords.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Summary CSV: `dim,singular_value,inertia,share`.
pub fn write_summary_csv<W: Write>(ca: &CAResult, writer: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["dim", "singular_value", "inertia", "share"])?;
    for k in 0..ca.dims() {
        wtr.write_record([
            (k + 1).to_string(),
            ca.singular_values[k].to_string(),
            ca.inertias[k].to_string(),
            ca.shares[k].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::theme_counts;
    use crate::theme::ThemeSet;
    use approx::assert_abs_diff_eq;

    fn table(rows: &[&[f64]]) -> ContingencyTable {
        let m = Matrix::from_rows(rows);
        ContingencyTable::new(
            (0..m.rows()).map(|i| format!("r{i}")).collect(),
            (0..m.cols()).map(|j| format!("c{j}")).collect(),
            m,
        )
        .unwrap()
    }

    #[test]
    fn independence_table_has_no_dimensions() {
        let ca = correspondence_analysis(&table(&[&[10.0, 20.0], &[20.0, 40.0]])).unwrap();
        assert!(ca.total_inertia < 1e-12);
        assert_eq!(ca.dims(), 0);
    }

    #[test]
    fn diagonal_table_full_inertia() {
        let ca = correspondence_analysis(&table(&[&[10.0, 0.0], &[0.0, 10.0]])).unwrap();
        assert_abs_diff_eq!(ca.total_inertia, 1.0, epsilon = 1e-12);
        assert_eq!(ca.dims(), 1);
        assert_abs_diff_eq!(ca.shares[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn table_validation() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0]]);
        let err = ContingencyTable::new(vec!["a".into(), "b".into()], vec!["x".into(), "y".into()], m);
        assert!(matches!(err, Err(CaError::ZeroMargin { kind: "column", .. })));
        let m = Matrix::from_rows(&[[1.0, -1.0], [2.0, 3.0]]);
        let err = ContingencyTable::new(vec!["a".into(), "b".into()], vec!["x".into(), "y".into()], m);
        assert!(matches!(err, Err(CaError::InvalidCell { row: 0, col: 1 })));
        let m = Matrix::from_rows(&[[1.0, 2.0]]);
        let err = ContingencyTable::new(vec!["a".into()], vec!["x".into(), "y".into()], m);
        assert!(matches!(err, Err(CaError::TooSmall { .. })));
    }

    fn cc(s: &str) -> CountryCode {
        s.parse().unwrap()
    }

    #[test]
    fn from_panel_single_country_fails() {
        let panel = theme_counts([(cc("DEU"), 2020, ThemeSet::FULL)]);
        let filter = CountryFilter {
            top_n: 50,
            always_include: vec![],
        };
        assert!(matches!(
            contingency_from_panel(&panel, &filter),
            Err(CaError::TooSmall { rows: 1, cols: 4 })
        ));
    }

    #[test]
    fn from_panel_drops_zero_rows_and_columns() {
        let m = ThemeSet::EMPTY.with(Theme::Mitigation);
        let a = ThemeSet::EMPTY.with(Theme::Adaptation);
        let mut docs = vec![];
        for _ in 0..3 {
            docs.push((cc("AAA"), 2020, m));
            docs.push((cc("BBB"), 2020, a));
        }
        docs.push((cc("AAA"), 2020, a));
        docs.push((cc("BBB"), 2020, m));
        docs.push((cc("ZZZ"), 2020, ThemeSet::EMPTY));
        let panel = theme_counts(docs);
        let build = contingency_from_panel(&panel, &CountryFilter::default()).unwrap();
        assert_eq!(build.table.row_labels(), ["AAA", "BBB"]);
        assert_eq!(build.table.col_labels(), ["Mitigation", "Adaptation"]);
        assert_eq!(build.table.counts(), &Matrix::from_rows(&[[3.0, 1.0], [1.0, 3.0]]));
        assert!(build.warnings.iter().any(|w| w.contains("ZZZ")));
        assert!(build.warnings.iter().any(|w| w.contains("Loss and Damage")));
        assert!(build.warnings.iter().any(|w| w.contains("USA")));
    }

    #[test]
    fn from_panel_top_n_plus_always_include() {
        let m = ThemeSet::EMPTY.with(Theme::Mitigation).with(Theme::Adaptation);
        let mut docs = vec![];
        for (c, n) in [("AAA", 5), ("BBB", 4), ("CCC", 3), ("USA", 1)] {
            for _ in 0..n {
                docs.push((cc(c), 2020, m));
            }
        }
        docs.push((cc("CCC"), 2021, ThemeSet::EMPTY.with(Theme::Adaptation)));
        let panel = theme_counts(docs);
        let filter = CountryFilter {
            top_n: 2,
            always_include: vec![cc("USA")],
        };
        let build = contingency_from_panel(&panel, &filter).unwrap();
        assert_eq!(build.table.row_labels(), ["AAA", "BBB", "USA"]);
    }

    #[test]
    fn csv_layout() {
        let ca = correspondence_analysis(&table(&[&[3.0, 1.0, 2.0], &[1.0, 3.0, 2.0], &[2.0, 2.0, 5.0]])).unwrap();
        let mut buf = Vec::new();
        write_coordinates_csv(&ca, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "kind,label,dim1,dim2");
        assert_eq!(lines.len(), 1 + 3 + 3);
        assert!(lines[1].starts_with("row,r0,"));
        assert!(lines[4].starts_with("col,c0,"));

        let mut buf = Vec::new();
        write_summary_csv(&ca, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("dim,singular_value,inertia,share\n1,"));
        assert_eq!(text.lines().count(), 3);
    }
}
