use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TauMode {
    /// `(C - D) / (n (n-1) / 2)`; tied pairs count as neither.
    TauA,
    /// `(C - D) / sqrt((n0 - n1)(n0 - n2))` with tie corrections.
    #[default]
    TauB,
}

impl TauMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TauMode::TauA => "tau_a",
            TauMode::TauB => "tau_b",
        }
    }
}

/// Pair counts from which both coefficients follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub pairs: u64,
    /// Pairs tied in `x`.
    pub ties_x: u64,
    /// Pairs tied in `y`.
    pub ties_y: u64,
    /// Concordant minus discordant.
    pub score: i64,
}

impl PairCounts {
    /// A zero denominator (a constant input) yields 0.
    pub fn tau(&self, mode: TauMode) -> f64 {
        let num = self.score as f64;
        let den = match mode {
            TauMode::TauA => self.pairs as f64,
            TauMode::TauB => (((self.pairs - self.ties_x) as f64) * ((self.pairs - self.ties_y) as f64)).sqrt(),
        };
        if den == 0.0 {
            0.0
        } else {
            (num / den).clamp(-1.0, 1.0)
        }
    }
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::GraphTooSmall {
            op: "kendall_tau",
            min: 2,
            actual: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("kendall_tau input".into()));
    }
    Ok(())
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort of `v` returning the number of inversions.
fn sort_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count(&mut v[..mid], &mut buf[..mid]) + sort_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k = k + mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Knight's O(n log n) pair counting.
pub fn pair_counts(x: &[f64], y: &[f64]) -> Result<PairCounts> {
    check(x, y)?;
    let n = x.len() as u64;
    let pairs = n * (n - 1) / 2;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let ties_x = tied_pairs(&xs);
    let mut joint = 0u64;
    let mut run = 1u64;
    for k in 1..ys.len() {
        if xs[k] == xs[k - 1] && ys[k] == ys[k - 1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_count(&mut ys, &mut buf);
    let ties_y = tied_pairs(&ys);
    let score = pairs as i64 - ties_x as i64 - ties_y as i64 + joint as i64 - 2 * swaps as i64;
    Ok(PairCounts {
        pairs,
        ties_x,
        ties_y,
        score,
    })
}

/// O(n²) reference used by the tests.
pub fn pair_counts_brute_force(x: &[f64], y: &[f64]) -> Result<PairCounts> {
    check(x, y)?;
    let n = x.len();
    let (mut ties_x, mut ties_y, mut score) = (0u64, 0u64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i64;
            let sy = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i64;
            ties_x += (sx == 0) as u64;
            ties_y += (sy == 0) as u64;
            score += sx * sy;
        }
    }
    Ok(PairCounts {
        pairs: (n * (n - 1) / 2) as u64,
        ties_x,
        ties_y,
        score,
    })
}

/// Kendall correlation between two score vectors; ties come from equal scores.
pub fn kendall_tau_scores(x: &[f64], y: &[f64], mode: TauMode) -> Result<f64> {
    Ok(pair_counts(x, y)?.tau(mode))
}

/// Kendall correlation between two rankings (position 0 = top).
pub fn kendall_tau(r1: &[usize], r2: &[usize], mode: TauMode) -> Result<f64> {
    let a: Vec<f64> = r1.iter().map(|&r| r as f64).collect();
    let b: Vec<f64> = r2.iter().map(|&r| r as f64).collect();
    kendall_tau_scores(&a, &b, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_reversal() {
        let r: Vec<usize> = (0..9).collect();
        let rev: Vec<usize> = r.iter().rev().copied().collect();
        assert_eq!(kendall_tau(&r, &r, TauMode::TauB).unwrap(), 1.0);
        assert_eq!(kendall_tau(&r, &rev, TauMode::TauB).unwrap(), -1.0);
        assert_eq!(kendall_tau(&r, &rev, TauMode::TauA).unwrap(), -1.0);
    }

    #[test]
    fn one_swap_of_three() {
        let t = kendall_tau(&[1, 2, 3], &[1, 3, 2], TauMode::TauB).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_match_brute_force() {
        let x = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 0.5];
        let y = [2.0, 1.0, 1.0, 5.0, 4.0, 5.0, 0.0];
        assert_eq!(pair_counts(&x, &y).unwrap(), pair_counts_brute_force(&x, &y).unwrap());
        let b = kendall_tau_scores(&x, &y, TauMode::TauB).unwrap();
        let a = kendall_tau_scores(&x, &y, TauMode::TauA).unwrap();
        assert!(b.abs() >= a.abs());
    }

    #[test]
    fn constant_input_is_zero() {
        assert_eq!(kendall_tau_scores(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0], TauMode::TauB).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(kendall_tau(&[0], &[0], TauMode::TauB).is_err());
        assert!(kendall_tau(&[0, 1], &[0, 1, 2], TauMode::TauB).is_err());
    }
}
