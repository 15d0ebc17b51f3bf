#![allow(dead_code)]

use hilbert_sgm::{Points, Provenance, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Two-class table shaped like the Wisconsin breast-cancer data: nine integer
/// features in 1..=10, about 35% positives, 2% flipped labels.
pub fn breast_cancer_like(n: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = Normal::<f64>::new(6.0, 2.8).unwrap();
    let neg = Normal::<f64>::new(2.2, 1.6).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let positive = rng.random::<f64>() < 0.35;
        let law = if positive { pos } else { neg };
        rows.push(
            (0..9)
                .map(|_| law.sample(&mut rng).round().clamp(1.0, 10.0))
                .collect::<Vec<f64>>(),
        );
        let flip = rng.random::<f64>() < 0.02;
        labels.push(if positive != flip { 1.0 } else { -1.0 });
    }
    Sample::new(
        Points::from_rows(&rows).unwrap(),
        labels,
        Provenance::Generator {
            id: "breast-cancer-like".into(),
            seed,
        },
    )
    .unwrap()
}

/// Spectral form of the euclidean population iteration with a constant step:
/// in the covariance eigenbasis each component obeys
/// `c_{t+1} = (1 − η σ) c_t + η σ w`, so `c_t = (1 − (1 − η σ)^t) w`.
pub fn population_closed_form(points: &Points, w_dagger: &[f64], eta: f64, t: usize) -> Vec<f64> {
    let d = w_dagger.len();
    let n = points.len() as f64;
    let x = nalgebra::DMatrix::from_row_slice(points.len(), d, points.as_slice());
    let cov = (x.transpose() * &x) / n;
    let eig = cov.symmetric_eigen();
    let w = nalgebra::DVector::from_column_slice(w_dagger);
    let mut out = nalgebra::DVector::zeros(d);
    for i in 0..d {
        let u = eig.eigenvectors.column(i);
        let s = eig.eigenvalues[i].max(0.0);
        let proj = u.dot(&w);
        let factor = 1.0 - (1.0 - eta * s).powi(t as i32);
        out += u * (factor * proj);
    }
    out.iter().copied().collect()
}
