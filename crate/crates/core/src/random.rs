//! Seeded sampling helpers shared by the orbit generator and the witness search.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, C64};

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    (0..dim).map(|_| complex_gaussian(rng)).collect()
}

/// Uniform point on the sphere of radius `radius` in `C^dim`.
pub fn on_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<C64> {
    loop {
        let v = complex_gaussian_vec(rng, dim);
        let n = linalg::vec_norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|z| z * (radius / n)).collect();
        }
    }
}

/// Uniform point in the ball of radius `radius` in `C^dim` (real dimension `2 dim`).
pub fn in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<C64> {
    let u: f64 = rng.gen();
    let r = radius * u.powf(1.0 / (2 * dim) as f64);
    on_sphere(rng, dim, r)
}
