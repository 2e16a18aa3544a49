//! Spectra, unit-circle gaps and the three verdicts (hyperbolicity, uniform
//! expansivity, shadowing).
//!
//! For dense operators the spectrum, approximate point spectrum and right
//! spectrum coincide, so all three verdicts reduce to one eigenvalue gap.
//! For two-sided constant weighted shifts the spectral sets are known in
//! closed form and the verdicts are read off analytically:
//!
//! * hyperbolic iff the spectrum avoids the unit circle,
//! * uniformly expansive iff the approximate point spectrum avoids it,
//! * shadowing iff the right spectrum avoids it, i.e. iff the adjoint is
//!   uniformly expansive.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix, C64};
use crate::operators::{DenseOperator, Direction, ShiftOperator, DEFAULT_SINGULARITY_RTOL};
use crate::random;

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Points of the unit circle on which [`duality_check`] compares both sides.
pub const DUALITY_GRID_POINTS: usize = 360;

/// Largest dimension accepted by [`eigenvalues`].
pub const MAX_EIGEN_DIM: usize = 512;

/// Largest dimension accepted by [`duality_check`].
pub const MAX_DUALITY_DIM: usize = 64;

/// Slack on the doubling threshold `2` of the expansivity witness.
pub const EXPANSION_SLACK: f64 = 1e-9;

const HYPERBOLIC_RULE: &str = "hyperbolic iff sigma(T) does not meet the unit circle";
const EXPANSIVE_RULE: &str = "uniformly expansive iff sigma_a(T) does not meet the unit circle";
const SHADOWING_RULE: &str =
    "shadowing iff sigma_r(T) does not meet the unit circle, i.e. iff T* is uniformly expansive";
const FINITE_DIM_NOTE: &str = "finite dimension: sigma = sigma_a = sigma_r";

pub fn eigenvalues(a: &DenseOperator) -> Result<Vec<C64>> {
    if a.dim() > MAX_EIGEN_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues limited to dimension {MAX_EIGEN_DIM}, got {}",
            a.dim()
        )));
    }
    linalg::eigenvalues(a.matrix())
}

/// Largest `alpha` with `|A x| >= alpha |x|`.
pub fn min_singular_value(a: &DenseOperator) -> f64 {
    linalg::min_singular_value(a.matrix())
}

/// `min | |lambda| - 1 |` over a finite point set.
pub fn unit_circle_gap(points: &[C64]) -> f64 {
    points
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub hyperbolic: bool,
    pub uniformly_expansive: bool,
    pub shadowing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Justification {
    pub hyperbolic: String,
    pub uniformly_expansive: String,
    pub shadowing: String,
}

/// A rotation-invariant subset of the plane: a union of circles or a closed annulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum RadialSet {
    Circles { radii: Vec<f64> },
    Annulus { inner: f64, outer: f64 },
    Empty,
}

impl RadialSet {
    /// `min | |lambda| - 1 |` over the set (infinite for the empty set).
    pub fn unit_circle_gap(&self) -> f64 {
        match self {
            RadialSet::Circles { radii } => radii
                .iter()
                .map(|r| (r - 1.0).abs())
                .fold(f64::INFINITY, f64::min),
            RadialSet::Annulus { inner, outer } => {
                if *inner <= 1.0 && 1.0 <= *outer {
                    0.0
                } else {
                    (inner - 1.0).abs().min((outer - 1.0).abs())
                }
            }
            RadialSet::Empty => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSpectra {
    pub annulus_inner: f64,
    pub annulus_outer: f64,
    pub approx_point: RadialSet,
    /// Open annulus `inner < |lambda| < outer`, or empty.
    pub point_spectrum: RadialSet,
}

impl ShiftSpectra {
    pub fn of(op: &ShiftOperator) -> ShiftSpectra {
        // weights seen as time runs forward: far past, far future
        let (past, future) = match op.direction() {
            Direction::Forward => (op.weight_neg(), op.weight_pos()),
            Direction::Backward => (op.weight_pos(), op.weight_neg()),
        };
        let inner = past.min(future);
        let outer = past.max(future);
        // eigenvectors decay at both ends exactly when future < |lambda| < past
        if future < past {
            ShiftSpectra {
                annulus_inner: inner,
                annulus_outer: outer,
                approx_point: RadialSet::Annulus { inner, outer },
                point_spectrum: RadialSet::Annulus { inner, outer },
            }
        } else {
            let radii = if inner == outer {
                vec![inner]
            } else {
                vec![inner, outer]
            };
            ShiftSpectra {
                annulus_inner: inner,
                annulus_outer: outer,
                approx_point: RadialSet::Circles { radii },
                point_spectrum: RadialSet::Empty,
            }
        }
    }

    pub fn spectrum(&self) -> RadialSet {
        RadialSet::Annulus {
            inner: self.annulus_inner,
            outer: self.annulus_outer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEigenvalues {
    pub label: String,
    pub half_width: usize,
    pub values: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_spectra: Option<ShiftSpectra>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjoint_shift_spectra: Option<ShiftSpectra>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_eigenvalues: Option<WindowEigenvalues>,
    /// Gap of the spectrum to the unit circle.
    pub gap_sigma: f64,
    /// Gap of the approximate point spectrum.
    pub gap_approx_point: f64,
    /// Gap of the right spectrum.
    pub gap_right: f64,
    pub tol: f64,
    pub verdicts: Verdicts,
    pub justification: Justification,
}

fn pairs(values: &[C64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

pub fn classify_dense(a: &DenseOperator, tol: f64) -> Result<SpectralReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if !a.is_invertible(DEFAULT_SINGULARITY_RTOL) {
        return Err(Error::Singular {
            sigma_min: min_singular_value(a),
            tol: DEFAULT_SINGULARITY_RTOL * a.matrix().norm2(),
        });
    }
    // In finite dimension the three sets coincide; each gap is still
    // measured along its own route so disagreements would surface.
    let eig = eigenvalues(a)?;
    let gap = unit_circle_gap(&eig);
    let approx_point: Vec<C64> = eigenvalues(&a.inverse()?)?
        .iter()
        .map(|z| z.inv())
        .collect();
    let gap_a = unit_circle_gap(&approx_point);
    let right: Vec<C64> = eigenvalues(&a.adjoint())?
        .iter()
        .map(|z| z.conj())
        .collect();
    let gap_r = unit_circle_gap(&right);
    Ok(SpectralReport {
        kind: "dense".into(),
        eigenvalues: Some(pairs(&eig)),
        shift_spectra: None,
        adjoint_shift_spectra: None,
        window_eigenvalues: None,
        gap_sigma: gap,
        gap_approx_point: gap_a,
        gap_right: gap_r,
        tol,
        verdicts: Verdicts {
            hyperbolic: gap > tol,
            uniformly_expansive: gap_a > tol,
            shadowing: gap_r > tol,
        },
        justification: Justification {
            hyperbolic: format!("{HYPERBOLIC_RULE}; eigenvalues of T, gap {gap:e}"),
            uniformly_expansive: format!(
                "{EXPANSIVE_RULE}; {FINITE_DIM_NOTE}, reciprocal eigenvalues of T^-1, gap {gap_a:e}"
            ),
            shadowing: format!(
                "{SHADOWING_RULE}; {FINITE_DIM_NOTE}, conjugate eigenvalues of T*, gap {gap_r:e}"
            ),
        },
    })
}

pub fn classify_shift(op: &ShiftOperator, tol: f64) -> Result<SpectralReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let own = ShiftSpectra::of(op);
    let adj = ShiftSpectra::of(&op.adjoint());
    let gap_sigma = own.spectrum().unit_circle_gap();
    let gap_a = own.approx_point.unit_circle_gap();
    // sigma_r(T) is the conjugate of sigma_a(T*); conjugation preserves moduli
    let gap_r = adj.approx_point.unit_circle_gap();
    Ok(SpectralReport {
        kind: "shift".into(),
        eigenvalues: None,
        shift_spectra: Some(own),
        adjoint_shift_spectra: Some(adj),
        window_eigenvalues: None,
        gap_sigma,
        gap_approx_point: gap_a,
        gap_right: gap_r,
        tol,
        verdicts: Verdicts {
            hyperbolic: gap_sigma > tol,
            uniformly_expansive: gap_a > tol,
            shadowing: gap_r > tol,
        },
        justification: Justification {
            hyperbolic: format!("{HYPERBOLIC_RULE}; analytic annulus, gap {gap_sigma:e}"),
            uniformly_expansive: format!("{EXPANSIVE_RULE}; analytic sigma_a, gap {gap_a:e}"),
            shadowing: format!("{SHADOWING_RULE}; analytic sigma_a(T*), gap {gap_r:e}"),
        },
    })
}

/// Eigenvalues of the finite section of a shift. These do not approximate any
/// spectral set of the infinite operator and are labelled accordingly.
pub fn shift_window_eigenvalues(
    op: &ShiftOperator,
    half_width: usize,
) -> Result<WindowEigenvalues> {
    let eig = eigenvalues(&op.materialize(half_width))?;
    Ok(WindowEigenvalues {
        label: "window artifact".into(),
        half_width,
        values: pairs(&eig),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub grid_points: usize,
    pub tol: f64,
    /// Grid points where "surjective" and "adjoint bounded below" disagree.
    pub mismatches: usize,
    /// Largest gap between the surjectivity modulus `1/|right inverse|` and
    /// the lower bound of the adjoint, over the grid.
    pub worst_modulus_discrepancy: f64,
    /// Matching distance between `sigma_r(A)` and `conj(sigma_a(A*))`.
    pub eigen_set_discrepancy: f64,
    pub passed: bool,
}

/// Surjectivity modulus of a square matrix: `1 / |R|` for its right inverse
/// `R`, zero when none exists.
fn surjectivity_modulus(m: &Matrix) -> f64 {
    match Lu::new(m) {
        Ok(lu) => {
            let right_inverse = lu.inverse();
            if !right_inverse.is_finite() {
                return 0.0;
            }
            let n = right_inverse.norm2();
            if n.is_finite() && n > 0.0 {
                1.0 / n
            } else {
                0.0
            }
        }
        Err(_) => 0.0,
    }
}

/// Compares, on a grid of the unit circle, surjectivity of `lambda I - A`
/// (through an explicit right inverse) with bounded-belowness of
/// `conj(lambda) I - A*` (through its smallest singular value), and compares
/// `sigma_r(A)` with the conjugate of `sigma_a(A*)` as eigenvalue multisets.
pub fn duality_check(a: &DenseOperator, tol: f64) -> Result<DualityReport> {
    if a.dim() > MAX_DUALITY_DIM {
        return Err(Error::InvalidArgument(format!(
            "duality check limited to dimension {MAX_DUALITY_DIM}, got {}",
            a.dim()
        )));
    }
    let adj = a.adjoint();
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for k in 0..DUALITY_GRID_POINTS {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / DUALITY_GRID_POINTS as f64;
        let lambda = C64::from_polar(1.0, theta);
        let surj = surjectivity_modulus(&a.matrix().shifted_from(lambda));
        let below = linalg::min_singular_value(&adj.matrix().shifted_from(lambda.conj()));
        if (surj > tol) != (below > tol) {
            mismatches += 1;
        }
        worst = worst.max((surj - below).abs());
    }
    let right = eigenvalues(a)?;
    let approx_adj: Vec<C64> = eigenvalues(&adj)?.into_iter().map(|z| z.conj()).collect();
    let eigen_gap = linalg::multiset_distance(&right, &approx_adj);
    let scale = right.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    Ok(DualityReport {
        grid_points: DUALITY_GRID_POINTS,
        tol,
        mismatches,
        worst_modulus_discrepancy: worst,
        eigen_set_discrepancy: eigen_gap,
        passed: mismatches == 0 && eigen_gap <= 1e-8 * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExpansivityWitness {
    /// Every unit vector doubles under `A^n` or `A^-n`. `certified_min` is
    /// `min_{|x| = 1} max(|A^n x|, |A^-n x|)` from the dual problem,
    /// `sampled_min` the best value the direct search reached.
    ExpansiveAt {
        n: u32,
        sampled_min: f64,
        certified_min: f64,
    },
    /// A unit vector that doubles neither way at `n = n_max`.
    Counterexample {
        n: u32,
        vector: Vec<[f64; 2]>,
        forward_norm: f64,
        backward_norm: f64,
    },
}

struct DoublingObjective {
    forward: Matrix,
    backward: Matrix,
}

impl DoublingObjective {
    fn norms(&self, x: &[C64]) -> (f64, f64) {
        (
            linalg::vec_norm(&self.forward.mul_vec(x)),
            linalg::vec_norm(&self.backward.mul_vec(x)),
        )
    }

    fn eval(&self, x: &[C64]) -> f64 {
        let (f, b) = self.norms(x);
        f.max(b)
    }
}

fn normalized(mut x: Vec<C64>) -> Vec<C64> {
    let n = linalg::vec_norm(&x);
    for z in &mut x {
        *z /= n;
    }
    x
}

/// Pattern search on the unit sphere from `start`.
fn minimize_on_sphere(
    obj: &DoublingObjective,
    start: Vec<C64>,
    rng: &mut ChaCha8Rng,
) -> (Vec<C64>, f64) {
    let mut x = start;
    let mut fx = obj.eval(&x);
    let mut step = 0.5;
    let dim = x.len();
    while step > 1e-10 {
        let mut improved = false;
        for _ in 0..(8 + 4 * dim) {
            let d = random::complex_gaussian_vec(rng, dim);
            let cand: Vec<C64> = x.iter().zip(&d).map(|(a, b)| a + b * step).collect();
            let cand = normalized(cand);
            let fc = obj.eval(&cand);
            if fc < fx {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// `min_{|x| = 1} max(|P x|, |Q x|)` through its dual
/// `max_t sigma_min([sqrt(t) P; sqrt(1 - t) Q])`. The joint numerical range
/// of two Hermitian forms on a complex space is convex, so there is no
/// duality gap; the dual is concave in `t` and solved by golden section.
fn dual_min(p: &Matrix, q: &Matrix) -> f64 {
    let (rows, cols) = (p.rows(), p.cols());
    let stacked = |t: f64| {
        let mut m = Matrix::zeros(2 * rows, cols);
        m.set_block(0, 0, &p.scale(C64::new(t.sqrt(), 0.0)));
        m.set_block(rows, 0, &q.scale(C64::new((1.0 - t).sqrt(), 0.0)));
        linalg::min_singular_value(&m)
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut m1 = hi - ratio * (hi - lo);
    let mut m2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (stacked(m1), stacked(m2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + ratio * (hi - lo);
            f2 = stacked(m2);
        } else {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - ratio * (hi - lo);
            f1 = stacked(m1);
        }
    }
    f1.max(f2).max(stacked(0.0)).max(stacked(1.0))
}

/// Searches for the least `n <= n_max` at which every unit vector doubles in
/// norm under `A^n` or `A^-n`, by random sampling plus local minimization of
/// `max(|A^n x|, |A^-n x|)` over the sphere. The decision at each `n` uses
/// the dual value, which the search can only overestimate; the search
/// supplies the counterexample vector when doubling fails.
pub fn expansivity_witness(
    a: &DenseOperator,
    n_max: u32,
    samples: usize,
    rng_seed: u64,
) -> Result<ExpansivityWitness> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let inv = a.inverse()?;
    let dim = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut forward = a.matrix().clone();
    let mut backward = inv.matrix().clone();
    let starts = 8.min(samples.max(1));
    let mut last = None;
    for n in 1..=n_max {
        if n > 1 {
            forward = forward.mul(a.matrix());
            backward = backward.mul(inv.matrix());
        }
        let obj = DoublingObjective {
            forward: forward.clone(),
            backward: backward.clone(),
        };
        let mut probes: Vec<(f64, Vec<C64>)> = (0..samples.max(1))
            .map(|_| {
                let x = normalized(random::complex_gaussian_vec(&mut rng, dim));
                (obj.eval(&x), x)
            })
            .collect();
        probes.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut best = (probes[0].1.clone(), probes[0].0);
        for (_, x) in probes.into_iter().take(starts) {
            let (xm, fm) = minimize_on_sphere(&obj, x, &mut rng);
            if fm < best.1 {
                best = (xm, fm);
            }
        }
        let certified = dual_min(&forward, &backward).min(best.1);
        if certified >= 2.0 - EXPANSION_SLACK {
            return Ok(ExpansivityWitness::ExpansiveAt {
                n,
                sampled_min: best.1,
                certified_min: certified,
            });
        }
        let (f, b) = obj.norms(&best.0);
        last = Some(ExpansivityWitness::Counterexample {
            n,
            vector: pairs(&best.0),
            forward_norm: f,
            backward_norm: b,
        });
    }
    Ok(last.expect("n_max >= 1"))
}
