//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use psmatch::dataset::Column;
use psmatch::rng::SplitMix64;
use psmatch::{load_csv, ColumnRoles, Dataset, PropensityModel};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// Stored logistic fixtures: file name and covariate count.
pub const LOGIT_FIXTURES: [(&str, usize); 3] = [
    ("logit_p2.csv", 2),
    ("logit_p3.csv", 3),
    ("logit_p4.csv", 4),
];

pub fn load_logit_fixture(name: &str, p: usize) -> Dataset {
    let names: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let roles = ColumnRoles::new("z", &refs).with_id("id");
    load_csv(fixture_path(name), &roles).expect("fixture loads")
}

/// Design rows with a leading 1 for the intercept.
pub fn design(ds: &Dataset) -> Vec<Vec<f64>> {
    (0..ds.len())
        .map(|i| {
            let mut row = vec![1.0];
            row.extend(ds.covariates().iter().map(|c| c.values[i]));
            row
        })
        .collect()
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (r, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Gradient of the log-likelihood, `X'(z - p)`.
pub fn gradient(x: &[Vec<f64>], z: &[u8], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &zi) in x.iter().zip(z) {
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let r = zi as f64 - sigmoid(eta);
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += xj * r;
        }
    }
    g
}

pub fn log_likelihood(x: &[Vec<f64>], z: &[u8], beta: &[f64]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(row, &zi)| {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            // log(1 + e^eta) computed stably
            let softplus = eta.max(0.0) + (-eta.abs()).exp().ln_1p();
            zi as f64 * eta - softplus
        })
        .sum()
}

/// Plain Newton–Raphson from zero until the step is below 1e-10.
pub fn newton_logistic(x: &[Vec<f64>], z: &[u8]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let mut h = vec![vec![0.0; p]; p];
        for row in x {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let w = mu * (1.0 - mu);
            for j in 0..p {
                for k in 0..p {
                    h[j][k] += w * row[j] * row[k];
                }
            }
        }
        let step = solve(h, gradient(x, z, &beta));
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if step.iter().all(|s| s.abs() < 1e-10) {
            return beta;
        }
    }
    panic!("oracle did not converge");
}

/// A dataset and hand-built model with the given scores; `z[i]` picks the group.
pub fn score_instance(z: &[u8], scores: &[f64]) -> (Dataset, PropensityModel) {
    let ds = Dataset::from_columns(
        "z",
        z.to_vec(),
        vec![Column::new("x", scores.to_vec())],
        vec![],
        vec![],
    )
    .unwrap();
    let model = PropensityModel {
        terms: vec!["(Intercept)".into(), "x".into()],
        coefficients: vec![0.0, 0.0],
        scores: scores.to_vec(),
        logits: scores
            .iter()
            .map(|&s| psmatch::propensity::logit(s))
            .collect(),
        converged: true,
        iterations: 0,
        log_likelihood: 0.0,
    };
    (ds, model)
}

/// Random small matching instance: 1..=max_t treated and 1..=max_c controls in
/// shuffled row order. Half the instances draw scores from a coarse grid so
/// that ties in score and distance are common.
pub fn random_instance(rng: &mut SplitMix64, max_t: usize, max_c: usize) -> (Vec<u8>, Vec<f64>) {
    let nt = 1 + rng.below(max_t);
    let nc = 1 + rng.below(max_c);
    let mut z: Vec<u8> = [vec![1u8; nt], vec![0u8; nc]].concat();
    for i in (1..z.len()).rev() {
        let j = rng.below(i + 1);
        z.swap(i, j);
    }
    let grid = rng.next_f64() < 0.5;
    let scores = (0..z.len())
        .map(|_| {
            if grid {
                (1 + rng.below(9)) as f64 / 10.0
            } else {
                0.02 + 0.96 * rng.next_f64()
            }
        })
        .collect();
    (z, scores)
}

/// Output of [`reference_greedy`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMatch {
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

/// Step-by-step greedy nearest-neighbor matching, nearest-within caliper mode,
/// no discarding. `logits` are taken as given so distances agree bit for bit.
pub fn reference_greedy(
    z: &[u8],
    scores: &[f64],
    logits: &[f64],
    ratio: usize,
    replace: bool,
    caliper: Option<f64>,
) -> ReferenceMatch {
    let n = z.len();
    let width = caliper.map(|c| {
        let mean = logits.iter().sum::<f64>() / n as f64;
        let var = logits.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n as f64 - 1.0);
        c * var.sqrt()
    });
    let scale: &[f64] = if width.is_some() { logits } else { scores };

    let mut order: Vec<usize> = (0..n).filter(|&i| z[i] == 1).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut taken = vec![false; n];
    let mut got: Vec<Vec<usize>> = vec![vec![]; n];
    let mut pairs = Vec::new();
    for _pass in 0..ratio {
        for &t in &order {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..n {
                if z[c] != 0 || got[t].contains(&c) || (taken[c] && !replace) {
                    continue;
                }
                let d = (scale[t] - scale[c]).abs();
                if let Some(w) = width {
                    if d > w {
                        continue;
                    }
                }
                match best {
                    Some((_, bd)) if bd <= d => {}
                    _ => best = Some((c, d)),
                }
            }
            if let Some((c, _)) = best {
                taken[c] = true;
                got[t].push(c);
                pairs.push((t, c));
            }
        }
    }

    let mut weights = vec![0.0; n];
    let matched: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&t| !got[t].is_empty())
        .collect();
    for &t in &matched {
        weights[t] = 1.0;
        for &c in &got[t] {
            weights[c] += 1.0 / got[t].len() as f64;
        }
    }
    let total: f64 = (0..n).filter(|&i| z[i] == 0).map(|i| weights[i]).sum();
    if total > 0.0 {
        for i in (0..n).filter(|&i| z[i] == 0) {
            weights[i] *= matched.len() as f64 / total;
        }
    }
    ReferenceMatch { pairs, weights }
}

/// Brute-force condensed table: repeatedly take the first remaining term with
/// the largest `|smd|` among those above the threshold.
pub fn brute_condensed(smds: &[f64], threshold: f64) -> Vec<usize> {
    let mut left: Vec<usize> = (0..smds.len())
        .filter(|&i| smds[i].abs() > threshold)
        .collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for k in 1..left.len() {
            if smds[left[k]].abs() > smds[left[best]].abs() {
                best = k;
            }
        }
        out.push(left.remove(best));
    }
    out
}
