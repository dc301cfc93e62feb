//! Country-year theme counts and the descriptive machinery built on them:
//! pooled z-scores, country rankings by mean standardized intensity, and
//! boxplot statistics.

use std::collections::BTreeMap;
use std::io::Write;

use crate::theme::{CountryCode, Theme, ThemeSet};

/// Policy counts per theme, keyed by (country, year).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ThemePanel {
    cells: BTreeMap<(CountryCode, i32), [u32; 4]>,
}

impl ThemePanel {
    pub fn from_cells(cells: BTreeMap<(CountryCode, i32), [u32; 4]>) -> ThemePanel {
        ThemePanel { cells }
    }

    pub fn cells(&self) -> &BTreeMap<(CountryCode, i32), [u32; 4]> {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, country: CountryCode, year: i32) -> Option<[u32; 4]> {
        self.cells.get(&(country, year)).copied()
    }

    /// Distinct countries in ascending ISO3 order.
    pub fn countries(&self) -> Vec<CountryCode> {
        let mut out: Vec<CountryCode> = self.cells.keys().map(|(c, _)| *c).collect();
        out.dedup();
        out
    }

    /// First and last year with a cell for `country`.
    pub fn year_span(&self, country: CountryCode) -> Option<(i32, i32)> {
        let mut years = self
            .cells
            .range((country, i32::MIN)..=(country, i32::MAX))
            .map(|((_, y), _)| *y);
        let first = years.next()?;
        Some((first, years.next_back().unwrap_or(first)))
    }

    /// Same panel with explicit zero cells for every year inside each
    /// country's observed span.
    pub fn zero_filled(&self) -> ThemePanel {
        let mut cells = self.cells.clone();
        for country in self.countries() {
            let (first, last) = self.year_span(country).expect("country present");
            for year in first..=last {
                cells.entry((country, year)).or_insert([0; 4]);
            }
        }
        ThemePanel { cells }
    }

    /// Keep only cells with year ≥ `min_year`.
    pub fn since(&self, min_year: i32) -> ThemePanel {
        ThemePanel {
            cells: self
                .cells
                .iter()
                .filter(|((_, y), _)| *y >= min_year)
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.cells
            .values()
            .flat_map(|c| c.iter())
            .map(|&v| v as u64)
            .sum()
    }
}

/// Count documents per (country, year, theme). A document with m labels
/// contributes to m themes.
pub fn theme_counts<I>(docs: I) -> ThemePanel
where
    I: IntoIterator<Item = (CountryCode, i32, ThemeSet)>,
{
    let mut cells: BTreeMap<(CountryCode, i32), [u32; 4]> = BTreeMap::new();
    for (country, year, labels) in docs {
        let cell = cells.entry((country, year)).or_insert([0; 4]);
        for t in labels.iter() {
            cell[t.index()] += 1;
        }
    }
    ThemePanel { cells }
}

/// Standardize with the sample standard deviation (divisor n−1). A constant
/// or single-element series maps to all zeros.
pub fn zscore(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let ss: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return vec![0.0; n];
    }
    series.iter().map(|x| (x - mean) / sd).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedCell {
    pub country: CountryCode,
    pub year: i32,
    pub theme: Theme,
    pub count: u32,
    pub zscore: f64,
}

/// Pooled standardization: for each theme, z-scores over every country-year
/// cell of the zero-filled panel. Output is ordered by theme, then
/// (country, year).
pub fn standardize_panel(panel: &ThemePanel) -> Vec<StandardizedCell> {
    let filled = panel.zero_filled();
    let keys: Vec<(CountryCode, i32)> = filled.cells.keys().copied().collect();
    let mut out = Vec::with_capacity(keys.len() * 4);
    for theme in Theme::ALL {
        let counts: Vec<u32> = filled.cells.values().map(|c| c[theme.index()]).collect();
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let z = zscore(&values);
        for (i, (country, year)) in keys.iter().enumerate() {
            out.push(StandardizedCell {
                country: *country,
                year: *year,
                theme,
                count: counts[i],
                zscore: z[i],
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCountry {
    pub country: CountryCode,
    pub mean_z: f64,
    /// (year, z-score) in year order.
    pub series: Vec<(i32, f64)>,
}

// Means closer than 1e-9 count as tied so that rounding noise from an affine
// rescaling cannot flip an exact tie.
fn rank_key(mean_z: f64) -> i64 {
    (mean_z * 1e9).round() as i64
}

/// Z-score the pooled observations, average per country and return the top
/// `k` countries by mean z, descending. Ties go to the lower ISO3 code.
pub fn rank_series(obs: &[(CountryCode, i32, f64)], k: usize) -> Vec<RankedCountry> {
    let values: Vec<f64> = obs.iter().map(|o| o.2).collect();
    let z = zscore(&values);
    let mut by_country: BTreeMap<CountryCode, Vec<(i32, f64)>> = BTreeMap::new();
    for (o, zi) in obs.iter().zip(z) {
        by_country.entry(o.0).or_default().push((o.1, zi));
    }
    let mut ranked: Vec<RankedCountry> = by_country
        .into_iter()
        .map(|(country, mut series)| {
            series.sort_by_key(|(y, _)| *y);
            let mean_z = series.iter().map(|(_, z)| z).sum::<f64>() / series.len() as f64;
            RankedCountry {
                country,
                mean_z,
                series,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        rank_key(b.mean_z)
            .cmp(&rank_key(a.mean_z))
            .then(a.country.cmp(&b.country))
    });
    ranked.truncate(k);
    ranked
}

/// Top `k` countries for one theme by mean pooled z-score. Returns every
/// country when fewer than `k` exist.
pub fn top_countries(panel: &ThemePanel, theme: Theme, k: usize) -> Vec<RankedCountry> {
    let obs: Vec<(CountryCode, i32, f64)> = panel
        .zero_filled()
        .cells
        .iter()
        .map(|((c, y), counts)| (*c, *y, counts[theme.index()] as f64))
        .collect();
    rank_series(&obs, k)
}

/// Five-number summary plus outliers for one boxplot.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linear interpolation between order statistics at zero-indexed position
/// p·(n−1). `sorted` must be non-empty and ascending.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Boxplot statistics with 1.5·IQR fences. A whisker never extends inside
/// its box: when no data point lies between a fence and its quartile the
/// whisker sits on the quartile.
///
/// Returns `None` for an empty series or one containing NaN.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&sorted, 0.25);
    let median = quantile_type7(&sorted, 0.5);
    let q3 = quantile_type7(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;

    let lower_whisker = sorted
        .iter()
        .copied()
        .find(|&v| v >= lo_fence)
        .map_or(q1, |v| v.min(q1));
    let upper_whisker = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= hi_fence)
        .map_or(q3, |v| v.max(q3));
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        lower_whisker,
        upper_whisker,
        outliers,
    })
}

/// Long-format CSV: `country_iso3,year,theme,count,zscore`.
pub fn write_theme_counts_csv<W: Write>(cells: &[StandardizedCell], writer: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["country_iso3", "year", "theme", "count", "zscore"])?;
    for c in cells {
        wtr.write_record([
            c.country.as_str(),
            &c.year.to_string(),
            c.theme.label(),
            &c.count.to_string(),
            &c.zscore.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Ranking CSV: `theme,rank,country_iso3,mean_z`, ranks starting at 1.
pub fn write_rankings_csv<W: Write>(
    rankings: &[(Theme, Vec<RankedCountry>)],
    writer: W,
) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["theme", "rank", "country_iso3", "mean_z"])?;
    for (theme, ranked) in rankings {
        for (i, r) in ranked.iter().enumerate() {
            wtr.write_record([
                theme.label(),
                &(i + 1).to_string(),
                r.country.as_str(),
                &r.mean_z.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
