mod common;

use std::collections::BTreeMap;

use policylens::linalg::Matrix;
use policylens::panel::*;
use policylens::synth::{self, random_panel};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn demeaned_slopes_match_lsdv() {
    let mut rng = synth::rng(11);
    for _ in 0..50 {
        let g = rng.random_range(10..=30);
        let t = rng.random_range(5..=8);
        let missing = rng.random_range(0.1..0.3);
        let p = random_panel(&mut rng, g, t, missing, 4, 1.0);
        let fe = fit_sample("y", &p.sample, 0.95).unwrap();
        let lsdv = common::lsdv_slopes(&p.sample);
        for (c, o) in fe.coefficients.iter().zip(&lsdv) {
            assert!((c.beta - o).abs() < 1e-8, "{} vs {o}", c.beta);
        }
    }
}

#[test]
fn noiseless_slopes_are_exact() {
    let mut rng = synth::rng(12);
    for _ in 0..20 {
        let p = random_panel(&mut rng, 15, 7, 0.2, 3, 0.0);
        let fe = fit_sample("y", &p.sample, 0.95).unwrap();
        for (c, b) in fe.coefficients.iter().zip(&p.beta) {
            assert!((c.beta - b).abs() < 1e-10);
        }
    }
}

#[test]
fn sandwich_matches_naive_double_loop() {
    let mut rng = synth::rng(13);
    for _ in 0..50 {
        let (g, t) = (rng.random_range(10..=30), rng.random_range(5..=8));
        let p = random_panel(&mut rng, g, t, 0.2, 4, 1.0);
        let d = within_transform(&p.sample, DEMEAN_TOL, DEMEAN_MAX_ITER).unwrap();
        let fit = ols(&d.x, &d.y).unwrap();
        let v = cluster_robust_vcov(&d.x, &fit.residuals, &p.sample.countries).unwrap();
        let oracle = common::naive_cluster_sandwich(&d.x, &fit.residuals, &p.sample.countries);
        for a in 0..4 {
            for b in 0..4 {
                assert!((v[(a, b)] - oracle[(a, b)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn singleton_clusters_give_the_hc_sandwich() {
    let mut rng = synth::rng(14);
    let x = Matrix::from_row_major(30, 2, (0..60).map(|_| rng.random_range(-1.0..1.0)).collect());
    let e: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ids: Vec<usize> = (0..30).collect();
    let v = cluster_robust_vcov(&x, &e, &ids).unwrap();
    // HC form: (XᵀX)⁻¹ Σ e_i² x_i x_iᵀ (XᵀX)⁻¹ times the same factor
    let xn = common::to_na(&x);
    let bread = (xn.transpose() * &xn).try_inverse().unwrap();
    let mut meat = nalgebra::DMatrix::<f64>::zeros(2, 2);
    for i in 0..30 {
        let xi = xn.row(i).transpose();
        meat += &xi * xi.transpose() * e[i] * e[i];
    }
    let c = 30.0 / 29.0 * 29.0 / 28.0;
    let hc = &bread * meat * &bread * c;
    for a in 0..2 {
        for b in 0..2 {
            assert!((v[(a, b)] - hc[(a, b)]).abs() < 1e-12);
        }
    }
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = synth::rng(15);
    let x = Matrix::from_row_major(50, 3, (0..150).map(|_| rng.random_range(-1.0..1.0)).collect());
    let y: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fit = ols(&x, &y).unwrap();
    let xn = common::to_na(&x);
    let beta = (xn.transpose() * &xn).try_inverse().unwrap() * xn.transpose() * nalgebra::DVector::from_vec(y);
    for j in 0..3 {
        assert!((fit.beta[j] - beta[j]).abs() < 1e-8);
    }
}

fn group_means<K: Ord + Copy>(keys: &[K], col: &[f64]) -> Vec<f64> {
    let mut acc: BTreeMap<K, (f64, f64)> = BTreeMap::new();
    for (k, v) in keys.iter().zip(col) {
        let e = acc.entry(*k).or_default();
        e.0 += v;
        e.1 += 1.0;
    }
    acc.values().map(|(s, n)| s / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn within_properties(seed in 0u64..100_000, shift_c in -50.0f64..50.0, shift_t in -50.0f64..50.0) {
        let mut rng = synth::rng(seed);
        let p = random_panel(&mut rng, 12, 6, 0.25, 2, 1.0);
        let d = within_transform(&p.sample, DEMEAN_TOL, DEMEAN_MAX_ITER).unwrap();
        for j in 0..2 {
            let col = d.x.column(j);
            let scale = p.sample.x.column(j).iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for m in group_means(&p.sample.countries, &col).into_iter().chain(group_means(&p.sample.years, &col)) {
                prop_assert!(m.abs() < 10.0 * DEMEAN_TOL * scale, "{m}");
            }
        }

        let base = fit_sample("y", &p.sample, 0.95).unwrap();
        prop_assert!((0.0..=1.0).contains(&base.within_r2));

        // add a country-constant and a year-constant series to the outcome
        let mut shifted = p.sample.clone();
        let first = shifted.countries[0];
        for i in 0..shifted.y.len() {
            if shifted.countries[i] == first {
                shifted.y[i] += shift_c;
            }
            shifted.y[i] += shift_t * (shifted.years[i] - 2000) as f64;
        }
        let moved = fit_sample("y", &shifted, 0.95).unwrap();
        for (a, b) in base.coefficients.iter().zip(&moved.coefficients) {
            prop_assert!((a.beta - b.beta).abs() < 1e-10);
        }

        let narrow = fit_sample("y", &p.sample, 0.80).unwrap();
        for (w, n) in base.coefficients.iter().zip(&narrow.coefficients) {
            prop_assert!(((w.beta - w.ci_low) - (w.ci_high - w.beta)).abs() < 1e-9 * (1.0 + w.beta.abs()));
            prop_assert!(n.ci_high - n.ci_low <= w.ci_high - w.ci_low);
        }
    }
}
