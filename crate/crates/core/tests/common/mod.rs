#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shadowspec::linalg::{self, Lu, Matrix, C64};
use shadowspec::operators::DenseOperator;
use shadowspec::random;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    Matrix::from_fn(dim, dim, |_, _| {
        random::complex_gaussian(rng) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Invertible Gaussian matrix with smallest singular value at least 0.05.
pub fn random_invertible(rng: &mut ChaCha8Rng, dim: usize) -> DenseOperator {
    loop {
        let m = gaussian_matrix(rng, dim);
        if linalg::min_singular_value(&m) > 0.05 {
            return DenseOperator::new(m).unwrap();
        }
    }
}

/// Haar-like unitary from Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    let g = gaussian_matrix(rng, dim);
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..dim {
        let mut v = g.column(j);
        for u in &cols {
            let p = linalg::dot(&v, u);
            v = linalg::vec_sub(&v, &linalg::vec_scale(u, p));
        }
        let n = linalg::vec_norm(&v);
        cols.push(linalg::vec_scale(&v, c(1.0 / n, 0.0)));
    }
    Matrix::from_fn(dim, dim, |i, j| cols[j][i])
}

/// `V diag(eigs) V^{-1}` with `V` a unitary times a unit upper-triangular
/// factor whose off-diagonal entries have size about `shear`.
pub fn similar_to_diag(rng: &mut ChaCha8Rng, eigs: &[C64], shear: f64) -> DenseOperator {
    let dim = eigs.len();
    let u = random_unitary(rng, dim);
    let t = Matrix::from_fn(dim, dim, |i, j| {
        if i == j {
            c(1.0, 0.0)
        } else if i < j {
            random::complex_gaussian(rng) * shear
        } else {
            c(0.0, 0.0)
        }
    });
    let v = u.mul(&t);
    let v_inv = Lu::new(&v).unwrap().inverse();
    DenseOperator::new(v.mul(&Matrix::from_diag(eigs)).mul(&v_inv)).unwrap()
}

fn random_phase(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.0..std::f64::consts::TAU)
}

/// Eigenvalue with modulus drawn from `[lo, hi]`.
pub fn eigen_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> C64 {
    C64::from_polar(rng.gen_range(lo..=hi), random_phase(rng))
}

/// Hyperbolic matrix whose eigenvalue moduli avoid `(1 - gap, 1 + gap)`,
/// with at least one eigenvalue on each side when `dim >= 2`.
pub fn random_hyperbolic(rng: &mut ChaCha8Rng, dim: usize, gap: f64) -> DenseOperator {
    let eigs: Vec<C64> = (0..dim)
        .map(|i| {
            let inside = match (dim, i) {
                (1, _) => rng.gen_bool(0.5),
                (_, 0) => true,
                (_, 1) => false,
                _ => rng.gen_bool(0.5),
            };
            if inside {
                eigen_in(rng, 0.25, 1.0 - gap)
            } else {
                eigen_in(rng, 1.0 + gap, 4.0)
            }
        })
        .collect();
    similar_to_diag(rng, &eigs, 0.3)
}

/// Matrix with at least one eigenvalue on the unit circle.
pub fn random_on_circle(rng: &mut ChaCha8Rng, dim: usize) -> DenseOperator {
    let eigs: Vec<C64> = (0..dim)
        .map(|i| {
            if i == 0 || rng.gen_bool(0.3) {
                C64::from_polar(1.0, random_phase(rng))
            } else {
                eigen_in(rng, 0.3, 3.0)
            }
        })
        .collect();
    similar_to_diag(rng, &eigs, 0.3)
}

pub fn unimodular(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, random_phase(rng))
}
