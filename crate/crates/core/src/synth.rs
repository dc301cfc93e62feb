//! Seeded synthetic data: keyword-planted corpora, fixture inputs for the
//! command-line pipeline, and random panels and tables for verification.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{IndicatorObservation, PolicyDocument};
use crate::linalg::Matrix;
use crate::panel::RegressionSample;
use crate::theme::{CountryCode, Theme, ThemeSet};

/// Words planted for each theme, indexed by [`Theme::index`].
pub const THEME_KEYWORDS: [&[&str]; 4] = [
    &["emissions", "renewable", "carbon", "solar", "decarbonisation", "efficiency", "methane", "electrification"],
    &["adaptation", "drought", "irrigation", "coastal", "resilient", "heatwave", "watershed", "agroforestry"],
    &["evacuation", "preparedness", "earlywarning", "cyclone", "contingency", "floodplain", "sendai", "relief"],
    &["compensation", "lossanddamage", "displacement", "insurance", "solidarity", "reparations", "slowonset", "santiago"],
];

pub const FILLER: &[&str] = &[
    "the", "policy", "national", "government", "framework", "shall", "ministry", "plan", "strategy",
    "implementation", "sector", "development", "regulation", "measures", "programme", "law", "act", "decree",
    "objectives", "annual", "reporting", "budget", "authority", "local", "coordination", "public", "private",
    "support", "review", "targets", "institutional", "capacity", "finance", "monitoring", "investment", "order",
    "committee", "provisions", "amendment", "guidelines",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One theme drawn by `weights`, plus a second draw 30% of the time.
fn random_labels(rng: &mut ChaCha8Rng, weights: &[f64; 4]) -> ThemeSet {
    let pick = |rng: &mut ChaCha8Rng| {
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for t in Theme::ALL {
            u -= weights[t.index()];
            if u < 0.0 {
                return t;
            }
        }
        Theme::LossAndDamage
    };
    let mut set = ThemeSet::EMPTY.with(pick(rng));
    if rng.random_bool(0.3) {
        set.insert(pick(rng));
    }
    set
}

/// Filler text with a few keywords planted for every theme in `labels`.
pub fn planted_text(rng: &mut ChaCha8Rng, labels: ThemeSet) -> String {
    let mut words: Vec<&str> = Vec::new();
    for t in labels.iter() {
        for _ in 0..rng.random_range(3..=5) {
            words.push(THEME_KEYWORDS[t.index()].choose(rng).expect("non-empty"));
        }
    }
    for _ in 0..rng.random_range(8..=15) {
        words.push(FILLER.choose(rng).expect("non-empty"));
    }
    words.shuffle(rng);
    let mut text = words.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text.push('.');
    text
}

/// `n` documents, each with one or two planted themes. Separable by
/// construction because theme keyword lists are disjoint.
pub fn keyword_corpus(n: usize, seed: u64) -> Vec<(String, ThemeSet)> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| {
            let labels = random_labels(&mut rng, &[1.0; 4]);
            (planted_text(&mut rng, labels), labels)
        })
        .collect()
}

pub const FIXTURE_COUNTRIES: [&str; 16] = [
    "CAN", "FRA", "DEU", "ITA", "JPN", "GBR", "USA", "BRA", "CHN", "IND", "KEN", "BGD", "FJI", "MEX", "ZAF", "EUU",
];
pub const FIXTURE_YEARS: std::ops::RangeInclusive<i32> = 2012..=2022;

/// Policy corpus for the shipped fixtures: every country leans towards its
/// own mix of themes, so the CA table has structure.
pub fn fixture_policies(seed: u64) -> Vec<PolicyDocument> {
    let mut rng = rng(seed);
    let mut docs = Vec::new();
    for (ci, code) in FIXTURE_COUNTRIES.iter().enumerate() {
        let country: CountryCode = code.parse().expect("valid fixture code");
        let mut weights = [1.0, 0.6, 0.4, 0.15];
        weights[ci % 4] += 1.0;
        weights.iter_mut().for_each(|w| *w *= rng.random_range(0.7..1.3));
        let activity = rng.random_range(1..=3);
        for year in FIXTURE_YEARS {
            for _ in 0..rng.random_range(0..=activity) {
                let labels = random_labels(&mut rng, &weights);
                docs.push(PolicyDocument {
                    doc_id: format!("{code}-{year}-{:03}", docs.len()),
                    country,
                    year,
                    summary_text: planted_text(&mut rng, labels),
                    gold_labels: labels,
                    predicted_labels: None,
                });
            }
        }
    }
    docs
}

/// Indicator table for the fixture countries, 2010 to 2022 with roughly 10%
/// of cells missing. Values follow country and year effects plus a small
/// dependence on the documents' gold theme counts.
pub fn fixture_wdi(docs: &[PolicyDocument], seed: u64) -> Vec<IndicatorObservation> {
    let mut rng = rng(seed);
    let mut counts: BTreeMap<(CountryCode, i32), [f64; 4]> = BTreeMap::new();
    for d in docs {
        let c = counts.entry((d.country, d.year)).or_default();
        for t in d.gold_labels.iter() {
            c[t.index()] += 1.0;
        }
    }
    // (code, log-scale?, base level, spread across countries, trend per year)
    let specs: [(&str, bool, f64, f64, f64); 8] = [
        ("GDP", true, 26.0, 2.0, 0.02),
        ("GNI_ATLAS", true, 26.0, 2.0, 0.018),
        ("GNI_PPP", true, 26.5, 1.5, 0.02),
        ("FDI", false, 5.0e9, 4.0e9, 1.0e8),
        ("EXT_DEBT", true, 24.0, 1.5, 0.03),
        ("ELEC_CONS", false, 4000.0, 3000.0, 40.0),
        ("ADOL_FERT", false, 40.0, 30.0, -1.0),
        ("SEC_ENROLL", false, 85.0, 15.0, 0.5),
    ];
    let mut out = Vec::new();
    for code in FIXTURE_COUNTRIES {
        let country: CountryCode = code.parse().expect("valid fixture code");
        let effects: Vec<f64> = specs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let slopes: Vec<[f64; 4]> = specs
            .iter()
            .map(|_| std::array::from_fn(|_| rng.random_range(-0.5..0.5)))
            .collect();
        for year in 2010..=2022 {
            let c = counts.get(&(country, year)).copied().unwrap_or_default();
            for (k, &(ind, log, base, spread, trend)) in specs.iter().enumerate() {
                if rng.random_bool(0.1) {
                    continue;
                }
                let policy: f64 = (0..4).map(|j| slopes[k][j] * c[j]).sum();
                let noise = rng.random_range(-0.5..0.5);
                let t = (year - 2010) as f64;
                let value = if log {
                    (base + spread * effects[k] + trend * t + 0.01 * policy + 0.01 * noise).exp()
                } else {
                    let unit = spread / 10.0;
                    base + spread * effects[k] + trend * t + unit * (0.2 * policy + 0.2 * noise)
                };
                out.push(IndicatorObservation {
                    country,
                    year,
                    indicator_code: ind.to_string(),
                    value,
                });
            }
        }
    }
    out
}

/// Random unbalanced panel y = Xβ + α_country + γ_year + noise.
#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub sample: RegressionSample,
    pub beta: Vec<f64>,
}

/// `countries` × `years` grid with each cell missing with probability
/// `missing`, keeping at least one row per country and per year and enough
/// rows to identify `k` slopes.
pub fn random_panel(
    rng: &mut ChaCha8Rng,
    countries: usize,
    years: usize,
    missing: f64,
    k: usize,
    noise: f64,
) -> SyntheticPanel {
    loop {
        let mut keep = vec![vec![false; years]; countries];
        for row in keep.iter_mut() {
            for cell in row.iter_mut() {
                *cell = !rng.random_bool(missing);
            }
        }
        let n: usize = keep.iter().flatten().filter(|&&b| b).count();
        let every_country = keep.iter().all(|r| r.iter().any(|&b| b));
        let every_year = (0..years).all(|t| keep.iter().any(|r| r[t]));
        if !(every_country && every_year) || n < k + countries + years {
            continue;
        }
        let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let alpha: Vec<f64> = (0..countries).map(|_| rng.random_range(-5.0..5.0)).collect();
        let gamma: Vec<f64> = (0..years).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (mut cs, mut ys, mut out, mut rows) = (vec![], vec![], vec![], vec![]);
        for (c, row) in keep.iter().enumerate() {
            let code = country_code(c);
            for (t, &present) in row.iter().enumerate() {
                if !present {
                    continue;
                }
                let x: Vec<f64> = (0..k)
                    .map(|_| rng.random_range(0.0..10.0) + 0.3 * alpha[c] + 0.2 * gamma[t])
                    .collect();
                let fitted: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                out.push(fitted + alpha[c] + gamma[t] + noise * rng.random_range(-1.0..1.0));
                cs.push(code);
                ys.push(2000 + t as i32);
                rows.push(x);
            }
        }
        let names = (0..k).map(|j| format!("x{}", j + 1)).collect();
        let sample = RegressionSample::new(cs, ys, out, Matrix::from_rows(&rows), names);
        return SyntheticPanel { sample, beta };
    }
}

/// Deterministic synthetic ISO3-shaped code for the i-th unit (AAA, AAB, ...).
pub fn country_code(i: usize) -> CountryCode {
    let b = [b'A' + (i / 676 % 26) as u8, b'A' + (i / 26 % 26) as u8, b'A' + (i % 26) as u8];
    std::str::from_utf8(&b).expect("ascii").parse().expect("uppercase letters")
}

/// Random count table with every row and column total positive.
pub fn random_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize, max_count: u32) -> Matrix {
    loop {
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| {
                if rng.random_bool(0.15) {
                    0.0
                } else {
                    rng.random_range(0..=max_count) as f64
                }
            })
            .collect();
        let m = Matrix::from_row_major(rows, cols, data);
        let row_ok = (0..rows).all(|i| m.row(i).iter().sum::<f64>() > 0.0);
        let col_ok = (0..cols).all(|j| m.column(j).iter().sum::<f64>() > 0.0);
        if row_ok && col_ok {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded() {
        assert_eq!(keyword_corpus(20, 7), keyword_corpus(20, 7));
        assert_ne!(keyword_corpus(20, 7), keyword_corpus(20, 8));
        for (text, labels) in keyword_corpus(50, 1) {
            assert!(!labels.is_empty() && labels.len() <= 2);
            for t in labels.iter() {
                assert!(THEME_KEYWORDS[t.index()].iter().any(|k| text.contains(k)));
            }
        }
    }

    #[test]
    fn keyword_lists_are_disjoint_and_long_enough() {
        let mut all: Vec<&str> = THEME_KEYWORDS.iter().flat_map(|k| k.iter().copied()).collect();
        all.extend(FILLER);
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
        assert!(all.iter().all(|w| w.len() > 1));
    }

    #[test]
    fn panel_shape() {
        let mut r = rng(3);
        let p = random_panel(&mut r, 12, 6, 0.2, 4, 0.0);
        assert_eq!(p.sample.n_countries(), 12);
        assert_eq!(p.sample.n_years(), 6);
        assert!(p.sample.n_obs() >= 4 + 12 + 6);
    }

    #[test]
    fn codes() {
        assert_eq!(country_code(0).as_str(), "AAA");
        assert_eq!(country_code(27).as_str(), "ABB");
    }

    #[test]
    fn fixtures_cover_every_country() {
        let docs = fixture_policies(11);
        for code in FIXTURE_COUNTRIES {
            assert!(docs.iter().any(|d| d.country.as_str() == code), "{code}");
        }
        let wdi = fixture_wdi(&docs, 12);
        assert!(wdi.iter().all(|o| o.value.is_finite()));
    }
}
