use crate::autodiff::Matrix;
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-9;
const MAX_ITERS: usize = 10_000;

/// Top-`k` principal directions of `x` (rows are samples) by power iteration
/// on the covariance with deflation. Each direction is flipped so that its
/// first nonzero loading is positive. Directions with zero variance are
/// returned as zero vectors.
pub fn principal_directions(x: &Matrix<f64>, k: usize) -> Result<Vec<Vec<f64>>> {
    let (n, f) = x.shape();
    if n < 2 || f < 2 {
        return Err(Error::param("pca needs at least 2 rows and 2 columns"));
    }
    let centered = center(x);
    let mut cov = centered.matmul_t(true, &centered, false)?;
    let scale = 1.0 / (n - 1) as f64;
    cov.data_mut().iter_mut().for_each(|v| *v *= scale);

    let trace: f64 = (0..f).map(|i| cov.get(i, i)).sum();
    let mut dirs = Vec::with_capacity(k);
    for _ in 0..k {
        let (lambda, mut v) = power_iteration(&cov);
        if lambda <= trace * 1e-14 || lambda <= 0.0 {
            dirs.push(vec![0.0; f]);
            continue;
        }
        if let Some(&first) = v.iter().find(|&&a| a.abs() > 1e-12) {
            if first < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
        }
        for i in 0..f {
            for j in 0..f {
                let d = cov.get(i, j) - lambda * v[i] * v[j];
                cov.set(i, j, d);
            }
        }
        dirs.push(v);
    }
    Ok(dirs)
}

fn center(x: &Matrix<f64>) -> Matrix<f64> {
    let (n, f) = x.shape();
    let mut mean = vec![0.0; f];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Matrix::from_fn(n, f, |i, j| x.get(i, j) - mean[j])
}

fn power_iteration(cov: &Matrix<f64>) -> (f64, Vec<f64>) {
    let f = cov.rows();
    // Deterministic start that is unlikely to be orthogonal to the target.
    let mut v: Vec<f64> = (0..f).map(|i| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERS {
        let mut w = vec![0.0; f];
        for i in 0..f {
            w[i] = cov.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return (0.0, v);
        }
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        lambda = norm;
        if delta < TOLERANCE {
            break;
        }
    }
    (lambda, v)
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    n
}

/// Projects the centered rows of `x` onto the top two principal directions.
pub fn pca_project_2d(x: &Matrix<f64>) -> Result<Vec<[f64; 2]>> {
    let dirs = principal_directions(x, 2)?;
    let c = center(x);
    Ok((0..c.rows())
        .map(|i| {
            let r = c.row(i);
            let p = |d: &[f64]| r.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
            [p(&dirs[0]), p(&dirs[1])]
        })
        .collect())
}

/// "node_id x y" lines; `labels[i]` names row `i`.
pub fn pca_text(labels: &[String], coords: &[[f64; 2]]) -> Result<String> {
    if labels.len() != coords.len() {
        return Err(Error::LengthMismatch(labels.len(), coords.len()));
    }
    let mut out = String::new();
    for (l, [x, y]) in labels.iter().zip(coords) {
        out.push_str(&format!("{l} {x} {y}\n"));
    }
    Ok(out)
}
