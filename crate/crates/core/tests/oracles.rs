use centrank::centrality::{betweenness_all, brute_force_betweenness, closeness_all};
use centrank::checks::{closeness_reference, layer_gradchecks};
use centrank::eval::{kendall_tau, pair_counts, pair_counts_brute_force, pca_project_2d, principal_directions, TauMode};
use centrank::generators::{generate, GeneratorSpec};
use centrank::rng::rng_from_seed;
use centrank::{Graph, Matrix};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let pairs: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (a % n, b % n))
        .filter(|(a, b)| a != b)
        .collect();
    let mut seen = std::collections::HashSet::new();
    let uniq: Vec<_> = pairs
        .into_iter()
        .filter(|&(a, b)| seen.insert((a.min(b), a.max(b))))
        .collect();
    Graph::from_edges(n, uniq).unwrap()
}

proptest! {
    #[test]
    fn brandes_matches_path_enumeration(n in 3usize..12, edges in prop::collection::vec((0usize..12, 0usize..12), 0..30)) {
        let g = random_graph(n, &edges);
        let fast = betweenness_all(&g).unwrap().values;
        let slow = brute_force_betweenness(&g).unwrap().values;
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn closeness_matches_floyd_warshall(n in 2usize..15, edges in prop::collection::vec((0usize..15, 0usize..15), 0..40)) {
        let g = random_graph(n, &edges);
        prop_assert_eq!(closeness_all(&g).unwrap().values, closeness_reference(&g));
    }

    #[test]
    fn kendall_with_ties_matches_brute_force(
        x in prop::collection::vec(0u8..5, 2..40),
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|_| f64::from(rng.random_range(0u8..4))).collect();
        let fast = pair_counts(&x, &y).unwrap();
        let slow = pair_counts_brute_force(&x, &y).unwrap();
        prop_assert_eq!(fast, slow);
        for mode in [TauMode::TauA, TauMode::TauB] {
            let t = fast.tau(mode);
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert_eq!(t, pair_counts(&y, &x).unwrap().tau(mode));
        }
    }
}

#[test]
fn brandes_on_generated_graphs() {
    for seed in 0..20 {
        let g = if seed % 2 == 0 {
            generate(&GeneratorSpec::ba(60, 2, seed)).unwrap()
        } else {
            generate(&GeneratorSpec::ws(60, 4, 0.2, seed)).unwrap()
        };
        let fast = betweenness_all(&g).unwrap().values;
        let slow = brute_force_betweenness(&g).unwrap().values;
        let worst = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "seed {seed}: {worst}");
        assert_eq!(closeness_all(&g).unwrap().values, closeness_reference(&g));
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn kendall_all_permutations_of_seven() {
    let id: Vec<usize> = (0..7).collect();
    let idf: Vec<f64> = id.iter().map(|&i| i as f64).collect();
    let perms = permutations(7);
    assert_eq!(perms.len(), 5040);
    for p in &perms {
        let pf: Vec<f64> = p.iter().map(|&i| i as f64).collect();
        assert_eq!(pair_counts(&idf, &pf).unwrap(), pair_counts_brute_force(&idf, &pf).unwrap());
        let t = kendall_tau(&id, p, TauMode::TauB).unwrap();
        let rev: Vec<usize> = p.iter().map(|&i| 6 - i).collect();
        assert_eq!(kendall_tau(&id, &rev, TauMode::TauB).unwrap(), -t);
        assert_eq!(t, kendall_tau(p, &id, TauMode::TauB).unwrap());
    }
}

#[test]
fn kendall_random_hundreds() {
    let mut rng = rng_from_seed(11);
    for _ in 0..1000 {
        let mut a: Vec<usize> = (0..100).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let af: Vec<f64> = a.iter().map(|&i| i as f64).collect();
        let bf: Vec<f64> = b.iter().map(|&i| i as f64).collect();
        assert_eq!(pair_counts(&af, &bf).unwrap(), pair_counts_brute_force(&af, &bf).unwrap());
    }
}

#[test]
fn layer_gradients_twenty_seeds() {
    for seed in 0..20 {
        for (name, c) in layer_gradchecks(seed).unwrap() {
            assert!(c.max_rel_err < 1e-4, "seed {seed} {name}: {c:?}");
        }
    }
}

/// Largest principal angle between the spans of two orthonormal pairs.
fn principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    // sin of the largest angle: norm of the part of each `a` outside span(b).
    a.iter()
        .map(|x| {
            let mut r = x.clone();
            for y in b {
                let c = dot(x, y);
                r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= c * yi);
            }
            dot(&r, &r).sqrt().min(1.0).asin()
        })
        .fold(0.0, f64::max)
}

#[test]
fn pca_subspace_matches_dense_eigensolver() {
    let mut rng = rng_from_seed(5);
    let (n, f) = (50, 256);
    // Low-rank signal plus noise so the top two eigenvalues are separated.
    let basis: Vec<Vec<f64>> = (0..2).map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let x = Matrix::from_fn(n, f, |i, j| {
        let w = [((i * 7) % 11) as f64 - 5.0, ((i * 3) % 5) as f64 - 2.0];
        w[0] * basis[0][j] + w[1] * basis[1][j]
    });
    let mut x = x;
    for v in x.data_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let ours = principal_directions(&x, 2).unwrap();

    let mean: Vec<f64> = (0..f).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let c = DMatrix::from_fn(n, f, |i, j| x.get(i, j) - mean[j]);
    let cov = c.transpose() * &c / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..f).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let theirs: Vec<Vec<f64>> = idx[..2]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    let angle = principal_angle(&ours, &theirs);
    assert!(angle < 1e-6, "angle {angle}");

    let p = pca_project_2d(&x).unwrap();
    assert_eq!(p.len(), n);
}

#[test]
fn pca_on_pure_noise_matches_eigensolver() {
    let mut rng = rng_from_seed(8);
    let x = Matrix::from_fn(50, 256, |_, _| rng.random_range(-1.0..1.0));
    let ours = principal_directions(&x, 2).unwrap();
    let mean: Vec<f64> = (0..256).map(|j| (0..50).map(|i| x.get(i, j)).sum::<f64>() / 50.0).collect();
    let c = DMatrix::from_fn(50, 256, |i, j| x.get(i, j) - mean[j]);
    let eig = SymmetricEigen::new(c.transpose() * &c);
    let mut idx: Vec<usize> = (0..256).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let theirs: Vec<Vec<f64>> = idx[..2]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    let angle = principal_angle(&ours, &theirs);
    assert!(angle < 1e-6, "angle {angle}");
}
