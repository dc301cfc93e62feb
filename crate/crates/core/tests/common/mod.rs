//! Independent reference implementations used as test oracles. Nothing
//! here calls the code under test for the quantity being checked.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use policylens::linalg::Matrix;
use policylens::panel::RegressionSample;
use policylens::textclf::{loss_and_gradient, Head, SparseVector};

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Pearson χ² of a count table divided by its grand total.
pub fn chi2_over_n(t: &Matrix) -> f64 {
    let n: f64 = t.as_slice().iter().sum();
    let rows: Vec<f64> = (0..t.rows()).map(|i| t.row(i).iter().sum()).collect();
    let cols: Vec<f64> = (0..t.cols()).map(|j| t.column(j).iter().sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..t.rows() {
        for j in 0..t.cols() {
            let e = rows[i] * cols[j] / n;
            chi2 += (t[(i, j)] - e).powi(2) / e;
        }
    }
    chi2 / n
}

/// Chi-square distance between the profiles of rows a and b.
pub fn chi2_profile_distance(t: &Matrix, a: usize, b: usize) -> f64 {
    let n: f64 = t.as_slice().iter().sum();
    let ra: f64 = t.row(a).iter().sum();
    let rb: f64 = t.row(b).iter().sum();
    (0..t.cols())
        .map(|j| {
            let cj = t.column(j).iter().sum::<f64>() / n;
            (t[(a, j)] / ra - t[(b, j)] / rb).powi(2) / cj
        })
        .sum::<f64>()
        .sqrt()
}

/// Least-squares dummy variables: slopes, one dummy per country and one per
/// year except the first, solved by nalgebra's SVD.
pub fn lsdv_slopes(s: &RegressionSample) -> Vec<f64> {
    let countries: Vec<_> = {
        let mut v = s.countries.clone();
        v.sort();
        v.dedup();
        v
    };
    let years: Vec<i32> = {
        let mut v = s.years.clone();
        v.sort();
        v.dedup();
        v
    };
    let k = s.x.cols();
    let p = k + countries.len() + years.len() - 1;
    let n = s.n_obs();
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..k {
            x[(i, j)] = s.x[(i, j)];
        }
        let c = countries.binary_search(&s.countries[i]).unwrap();
        x[(i, k + c)] = 1.0;
        let t = years.binary_search(&s.years[i]).unwrap();
        if t > 0 {
            x[(i, k + countries.len() + t - 1)] = 1.0;
        }
    }
    let y = DVector::from_vec(s.y.clone());
    let beta = x.svd(true, true).solve(&y, 1e-13).expect("svd solve");
    beta.iter().take(k).copied().collect()
}

/// Cluster sandwich written as a literal double loop over observation
/// pairs that share a cluster.
pub fn naive_cluster_sandwich<C: PartialEq>(x: &Matrix, e: &[f64], clusters: &[C]) -> DMatrix<f64> {
    let (n, k) = (x.rows(), x.cols());
    let xn = to_na(x);
    let bread = (xn.transpose() * &xn).try_inverse().expect("invertible");
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        for j in 0..n {
            if clusters[i] != clusters[j] {
                continue;
            }
            for a in 0..k {
                for b in 0..k {
                    meat[(a, b)] += x[(i, a)] * e[i] * e[j] * x[(j, b)];
                }
            }
        }
    }
    let mut g = 0;
    for i in 0..n {
        if !clusters[..i].contains(&clusters[i]) {
            g += 1;
        }
    }
    let g = g as f64;
    let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    &bread * meat * &bread * c
}

/// AP by brute force: for every distinct score, classify by `score >= t`
/// from scratch and accumulate (R_t − R_prev)·P_t from the highest threshold down.
pub fn ap_by_enumeration(scores: &[f64], golds: &[bool]) -> f64 {
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let pos = golds.iter().filter(|&&g| g).count() as f64;
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut pp = 0.0;
        for (s, g) in scores.iter().zip(golds) {
            if *s >= t {
                pp += 1.0;
                if *g {
                    tp += 1.0;
                }
            }
        }
        let r = tp / pos;
        ap += (r - prev_r) * (tp / pp);
        prev_r = r;
    }
    ap
}

/// Central differences of the loss with respect to every weight and the bias.
pub fn fd_gradient(head: &Head, data: &[SparseVector], targets: &[bool], l2: f64, h: f64) -> Head {
    let f = |hd: &Head| loss_and_gradient(hd, data, targets, l2).0;
    let mut g = Head::zeros(head.weights.len());
    for j in 0..head.weights.len() {
        let mut p = head.clone();
        let mut m = head.clone();
        p.weights[j] += h;
        m.weights[j] -= h;
        g.weights[j] = (f(&p) - f(&m)) / (2.0 * h);
    }
    let mut p = head.clone();
    let mut m = head.clone();
    p.bias += h;
    m.bias -= h;
    g.bias = (f(&p) - f(&m)) / (2.0 * h);
    g
}

/// ‖a − b‖ / max(‖a‖, ‖b‖) over weights and bias together.
pub fn relative_error(a: &Head, b: &Head) -> f64 {
    let flat = |h: &Head| h.weights.iter().copied().chain([h.bias]).collect::<Vec<f64>>();
    let (fa, fb) = (flat(a), flat(b));
    let diff = fa.iter().zip(&fb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = fa.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = fb.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
