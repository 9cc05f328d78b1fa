use crate::centrality::CentralityVector;
use crate::error::{Error, Result};

/// Normalized rank of each node: position in ascending order of centrality
/// (ties by node index) divided by `n - 1`. The most central node gets 1.
pub fn build_targets(c: &CentralityVector) -> Result<Vec<f64>> {
    let n = c.values.len();
    if n < 2 {
        return Err(Error::GraphTooSmall {
            op: "build_targets",
            min: 2,
            actual: n,
        });
    }
    if c.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("centrality vector".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c.values[a].total_cmp(&c.values[b]).then(a.cmp(&b)));
    let mut t = vec![0.0; n];
    let scale = 1.0 / (n - 1) as f64;
    for (pos, &i) in order.iter().enumerate() {
        t[i] = pos as f64 * scale;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centrality::CentralityKind;

    fn cv(values: Vec<f64>) -> CentralityVector {
        CentralityVector {
            values,
            kind: CentralityKind::Closeness,
        }
    }

    #[test]
    fn small_examples() {
        assert_eq!(build_targets(&cv(vec![0.2, 0.5, 0.1])).unwrap(), vec![0.5, 1.0, 0.0]);
        assert_eq!(build_targets(&cv(vec![1.0; 4])).unwrap(), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(build_targets(&cv(vec![0.5, 1.0, 0.5])).unwrap()[1], 1.0);
        assert!(build_targets(&cv(vec![1.0])).is_err());
        assert!(build_targets(&cv(vec![1.0, f64::NAN])).is_err());
    }
}

#[cfg(test)]
mod rank_consistency {
    use super::*;
    use crate::centrality::{rank_of, CentralityKind};

    #[test]
    fn targets_mirror_descending_ranks() {
        let values: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 * 0.1 + 0.01).collect();
        let t = build_targets(&CentralityVector {
            values: values.clone(),
            kind: CentralityKind::Betweenness,
        })
        .unwrap();
        for (ti, ri) in t.iter().zip(rank_of(&values)) {
            assert_eq!((ti * 49.0).round() as usize, 49 - ri);
        }
    }
}
