use std::collections::BTreeMap;

use policylens::indicators::*;
use policylens::synth::country_code;
use policylens::{CountryCode, Theme, ThemeSet};
use proptest::prelude::*;

#[test]
fn hand_computed_zscores_and_fences() {
    let z = zscore(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    // mean 5, sample sd sqrt(32/7)
    let sd = (32.0f64 / 7.0).sqrt();
    assert!((sd - 2.13809).abs() < 1e-5);
    assert!((z[0] - (-3.0 / sd)).abs() < 1e-9);
    assert!((z[0] - (-1.40312)).abs() < 1e-5);

    let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
    assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
    assert_eq!(b.upper_whisker, 4.0);
    assert_eq!(b.lower_whisker, 1.0);
    assert_eq!(b.outliers, vec![100.0]);
}

fn panel_from(cells: &[(usize, i32, [u32; 4])]) -> ThemePanel {
    let map: BTreeMap<(CountryCode, i32), [u32; 4]> =
        cells.iter().map(|(c, y, v)| ((country_code(*c), *y), *v)).collect();
    ThemePanel::from_cells(map)
}

proptest! {
    #[test]
    fn zscores_are_standardized(xs in prop::collection::vec(-1e3f64..1e3, 2..50)) {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        prop_assume!(ss > 1e-6);
        let z = zscore(&xs);
        let n = z.len() as f64;
        let zm = z.iter().sum::<f64>() / n;
        let zs = (z.iter().map(|v| (v - zm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!(zm.abs() < 1e-12);
        prop_assert!((zs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn whiskers_sit_between_extremes_and_quartiles(xs in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let b = box_stats(&xs).unwrap();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        prop_assert!(min <= b.lower_whisker && b.lower_whisker <= b.q1);
        prop_assert!(b.q3 <= b.upper_whisker && b.upper_whisker <= max);
        for o in &b.outliers {
            prop_assert!(*o < b.lower_whisker || *o > b.upper_whisker);
        }
    }

    #[test]
    fn counts_total_matches_label_mass(
        docs in prop::collection::vec((0usize..5, 2015i32..2020, 0u8..16), 0..60)
    ) {
        let panel = theme_counts(docs.iter().map(|(c, y, b)| (country_code(*c), *y, ThemeSet::from_bits(*b))));
        let expected: u64 = docs.iter().map(|d| ThemeSet::from_bits(d.2).len() as u64).sum();
        prop_assert_eq!(panel.total(), expected);
    }

    #[test]
    fn ranking_survives_positive_affine_rescaling(
        cells in prop::collection::vec((0usize..8, 2015i32..2021, prop::array::uniform4(0u32..6)), 1..40),
        a in 1u32..5,
        b in 0u32..10,
    ) {
        // rescale every cell that enters standardization, zero-filled ones included
        let panel = panel_from(&cells).zero_filled();
        let scaled: BTreeMap<(CountryCode, i32), [u32; 4]> =
            panel.cells().iter().map(|(k, v)| (*k, v.map(|x| a * x + b))).collect();
        let scaled_panel = ThemePanel::from_cells(scaled);
        for theme in Theme::ALL {
            let r1: Vec<CountryCode> = top_countries(&panel, theme, 10).iter().map(|r| r.country).collect();
            let r2: Vec<CountryCode> = top_countries(&scaled_panel, theme, 10).iter().map(|r| r.country).collect();
            prop_assert_eq!(r1, r2);
        }
    }
}

#[test]
fn ranking_examples() {
    let deu: CountryCode = "DEU".parse().unwrap();
    let fra: CountryCode = "FRA".parse().unwrap();
    let obs = vec![(fra, 2020, 1.0), (deu, 2020, 1.0), (fra, 2021, 3.0), (deu, 2021, 3.0)];
    let r = rank_series(&obs, 10);
    assert_eq!(r[0].country, deu);
    assert_eq!(r[1].country, fra);
    assert_eq!(rank_series(&obs, 1).len(), 1);
}
