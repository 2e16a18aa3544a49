//! Pseudo-orbits, their shadows, and finite-window probes of the sequence
//! operators `(x_{n+1} - T x_n)_n` and `(x_{n-1} - T^* x_n)_n`.
//!
//! A pseudo-orbit on the window `lo..=hi` stores its states `y_n` together
//! with the defects `z_n = y_{n+1} - T y_n` (`lo <= n < hi`) that generated
//! it. For a hyperbolic splitting `B`, the bounded solution of
//! `x_{n+1} = T x_n + z_n` is
//!
//! ```text
//! x_n = sum_{k>=0} T^k B z_{n-k-1} - sum_{k>=1} T^{-k} (I - B) z_{n+k-1},
//! ```
//!
//! and `u_n = y_n - x_n` is a genuine trajectory within `sup |x_n|` of `y`.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, ZERO};
use crate::operators::{
    check_unimodular, DenseOperator, Operator, ShiftOperator, SupportedVector, Vector,
};
use crate::projector::{self, DecayRates};
use crate::random;

/// Default support half-width of random defects for shift operators.
pub const DEFAULT_SHIFT_SUPPORT: usize = 16;

/// Relative size of the dropped series tail that truncation may leave.
pub const TAIL_TOL: f64 = 1e-10;

/// `q^K` target used to pick the default number of series terms.
pub const DEFAULT_TAIL_TARGET: f64 = 1e-12;

/// Truncation target of the test sequence: `q^{-N}` must fall below this.
pub const BGAIN_TRUNCATION: f64 = 1e-14;

/// How the per-step defects are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum DefectSampling {
    /// Uniform on the sphere of radius `delta`.
    Sphere,
    /// Uniform in the ball of radius `delta`.
    Ball,
    /// The same defect every step: `delta * v / |v|`.
    Constant(Vector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitOptions {
    pub lo: i64,
    pub hi: i64,
    pub delta: f64,
    pub seed: u64,
    pub sampling: DefectSampling,
    /// Random shift defects live on `-shift_support..=shift_support`.
    pub shift_support: usize,
}

impl OrbitOptions {
    pub fn new(lo: i64, hi: i64, delta: f64, seed: u64) -> Self {
        OrbitOptions {
            lo,
            hi,
            delta,
            seed,
            sampling: DefectSampling::Sphere,
            shift_support: DEFAULT_SHIFT_SUPPORT,
        }
    }

    pub fn symmetric(half_width: i64, delta: f64, seed: u64) -> Self {
        Self::new(-half_width, half_width, delta, seed)
    }

    pub fn with_sampling(mut self, sampling: DefectSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_shift_support(mut self, shift_support: usize) -> Self {
        self.shift_support = shift_support;
        self
    }
}

/// States `y_lo..=y_hi` and defects `z_lo..z_{hi-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoOrbit {
    pub lo: i64,
    pub hi: i64,
    pub delta: f64,
    pub states: Vec<Vector>,
    pub defects: Vec<Vector>,
}

impl PseudoOrbit {
    pub fn state(&self, n: i64) -> &Vector {
        &self.states[(n - self.lo) as usize]
    }

    pub fn defect(&self, n: i64) -> &Vector {
        &self.defects[(n - self.lo) as usize]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn defect_norms(&self) -> Vec<f64> {
        self.defects.iter().map(Vector::norm).collect()
    }

    /// `|y_{n+1} - T y_n|` recomputed from the states.
    pub fn measured_defect_norms(&self, op: &Operator) -> Result<Vec<f64>> {
        self.states
            .windows(2)
            .map(|w| Ok(w[1].sub(&op.apply(&w[0])?)?.norm()))
            .collect()
    }

    fn dense_defects(&self, dim: usize) -> Result<Vec<&[C64]>> {
        self.defects
            .iter()
            .map(|z| match z {
                Vector::Dense(v) if v.len() == dim => Ok(v.as_slice()),
                Vector::Dense(v) => Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                }),
                Vector::Supported(_) => Err(Error::KindMismatch("orbit holds shift states".into())),
            })
            .collect()
    }
}

fn draw_defect(
    op: &Operator,
    opts: &OrbitOptions,
    template: &Vector,
    rng: &mut ChaCha8Rng,
) -> Vector {
    match (&opts.sampling, op) {
        (DefectSampling::Constant(v), _) => v.scale(C64::new(opts.delta / v.norm(), 0.0)),
        (sampling, Operator::Dense(_)) => {
            let dim = template.as_dense().map_or(0, <[C64]>::len);
            Vector::Dense(match sampling {
                DefectSampling::Ball => random::in_ball(rng, dim, opts.delta),
                _ => random::on_sphere(rng, dim, opts.delta),
            })
        }
        (sampling, Operator::Shift(_)) => {
            let m = opts.shift_support as i64;
            let size = 2 * opts.shift_support + 1;
            let values = match sampling {
                DefectSampling::Ball => random::in_ball(rng, size, opts.delta),
                _ => random::on_sphere(rng, size, opts.delta),
            };
            Vector::Supported(SupportedVector::from_window(-m, &values))
        }
    }
}

/// Builds `y` with `y_0 = x0`, `y_{n+1} = T y_n + z_n` forward and
/// `y_n = T^{-1}(y_{n+1} - z_n)` backward; the window must contain 0.
pub fn generate_pseudo_orbit(
    op: &Operator,
    x0: &Vector,
    opts: &OrbitOptions,
) -> Result<PseudoOrbit> {
    if !(opts.delta >= 0.0 && opts.delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta must be >= 0, got {}",
            opts.delta
        )));
    }
    if !(opts.lo <= 0 && 0 <= opts.hi) {
        return Err(Error::InvalidArgument(format!(
            "window {}..={} must contain 0",
            opts.lo, opts.hi
        )));
    }
    match (op, x0) {
        (Operator::Dense(a), Vector::Dense(v)) if a.dim() != v.len() => {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: v.len(),
            })
        }
        (Operator::Dense(_), Vector::Supported(_)) | (Operator::Shift(_), Vector::Dense(_)) => {
            return Err(Error::KindMismatch(
                "initial state does not match the operator kind".into(),
            ))
        }
        _ => {}
    }
    if let DefectSampling::Constant(v) = &opts.sampling {
        if v.norm() == 0.0 || !v.norm().is_finite() {
            return Err(Error::InvalidArgument(
                "constant defect direction must be nonzero".into(),
            ));
        }
        // checks the kind and dimension of the direction
        v.add(&x0.zero_like())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let steps = (opts.hi - opts.lo) as usize;
    let defects: Vec<Vector> = (0..steps)
        .map(|_| draw_defect(op, opts, x0, &mut rng))
        .collect();

    let inv = if opts.lo < 0 {
        Some(op.inverse()?)
    } else {
        None
    };
    let mut states = vec![x0.clone(); steps + 1];
    let origin = (-opts.lo) as usize;
    for i in origin..steps {
        states[i + 1] = op.apply(&states[i])?.add(&defects[i])?;
    }
    if let Some(inv) = inv {
        for i in (0..origin).rev() {
            states[i] = inv.apply(&states[i + 1].sub(&defects[i])?)?;
        }
    }
    Ok(PseudoOrbit {
        lo: opts.lo,
        hi: opts.hi,
        delta: opts.delta,
        states,
        defects,
    })
}

/// Multiplies the states by `lambda^n` and the defects by `lambda^{n+1}`. A
/// pseudo-orbit of `T` becomes one of `lambda T` with identical defect norms.
pub fn rotate_orbit(orbit: &PseudoOrbit, lambda: C64) -> Result<PseudoOrbit> {
    check_unimodular(lambda)?;
    let power = |n: i64| lambda.powi(n as i32);
    Ok(PseudoOrbit {
        lo: orbit.lo,
        hi: orbit.hi,
        delta: orbit.delta,
        states: orbit
            .states
            .iter()
            .zip(orbit.lo..)
            .map(|(y, n)| y.scale(power(n)))
            .collect(),
        defects: orbit
            .defects
            .iter()
            .zip(orbit.lo..)
            .map(|(z, n)| z.scale(power(n + 1)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowResult {
    /// Seed `u_0` of the shadowing trajectory `u_n = T^n u_0`.
    pub anchor: Vector,
    /// `sup_n |y_n - T^n u_0|` over the window.
    pub epsilon_achieved: f64,
    /// `K (1 + q) / (1 - q) * delta`.
    pub epsilon_bound: f64,
    pub q_used: f64,
    pub k_used: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    /// Number of series terms kept on each side.
    pub tail_k: usize,
    /// `max_n |x_{n+1} - T x_n - z_n|`.
    pub recurrence_residual: f64,
    /// The bounded correction `x_lo..=x_hi`.
    #[serde(skip)]
    pub correction: Vec<Vec<C64>>,
}

/// Smallest `K` with `q^K < target`.
pub fn default_tail_k(q: f64) -> usize {
    (DEFAULT_TAIL_TARGET.ln() / q.ln()).floor() as usize + 1
}

/// Shadows a dense pseudo-orbit through the splitting `B`.
///
/// The decay rates `r_+`, `r_-` of `A^k B` and `A^{-k}(I - B)` must both be
/// below 1; then `q = (1 + max(r_+, r_-)) / 2` and `K` is the largest of
/// `|A^k B| / q^k`, `|A^{-k}(I - B)| / q^k` over the terms used. Defects are
/// zero outside the window, so the series are finite and exact once
/// `tail_k` covers the window length.
pub fn construct_shadow(
    a: &DenseOperator,
    b: &DenseOperator,
    orbit: &PseudoOrbit,
    tail_k: Option<usize>,
) -> Result<ShadowResult> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: b.dim(),
        });
    }
    let defects = orbit.dense_defects(dim)?;
    if !(orbit.lo <= 0 && 0 <= orbit.hi) {
        return Err(Error::InvalidArgument("orbit window must contain 0".into()));
    }
    let rates: DecayRates = projector::decay_rates(a, b, 64)?;
    if !rates.certified() {
        return Err(Error::DecayCertificate {
            r_plus: rates.r_plus,
            r_minus: rates.r_minus,
        });
    }
    let q = 0.5 * (1.0 + rates.r_plus.max(rates.r_minus));
    let steps = defects.len();
    let requested = tail_k.unwrap_or_else(|| default_tail_k(q));
    let k_max = requested.min(steps);

    let inv = a.inverse()?;
    let (plus, minus) = projector::splitting_powers(a.matrix(), inv.matrix(), b.matrix(), k_max);
    let mut k_const = 0.0f64;
    for k in 0..=k_max {
        let qk = q.powi(k as i32);
        k_const = k_const.max(plus[k].norm2() / qk);
        if k >= 1 {
            k_const = k_const.max(minus[k].norm2() / qk);
        }
    }
    if requested < steps {
        let bound = k_const * q.powi(requested as i32) / (1.0 - q);
        if bound >= TAIL_TOL {
            return Err(Error::TailBound {
                tail_k: requested,
                bound,
                limit: TAIL_TOL,
            });
        }
    }

    let lo = orbit.lo;
    let hi = orbit.hi;
    let defect_at = |m: i64| -> Option<&[C64]> {
        if m >= lo && m < hi {
            Some(defects[(m - lo) as usize])
        } else {
            None
        }
    };
    let correction: Vec<Vec<C64>> = (lo..=hi)
        .map(|n| {
            let mut x = vec![ZERO; dim];
            for (k, p) in plus.iter().enumerate() {
                if let Some(z) = defect_at(n - k as i64 - 1) {
                    x = linalg::vec_add(&x, &p.mul_vec(z));
                }
            }
            for (k, m) in minus.iter().enumerate().skip(1) {
                if let Some(z) = defect_at(n + k as i64 - 1) {
                    x = linalg::vec_sub(&x, &m.mul_vec(z));
                }
            }
            x
        })
        .collect();

    let mut residual = 0.0f64;
    for n in lo..hi {
        let i = (n - lo) as usize;
        let next = a.matrix().mul_vec(&correction[i]);
        let r = linalg::vec_sub(&linalg::vec_sub(&correction[i + 1], &next), defects[i]);
        residual = residual.max(linalg::vec_norm(&r));
    }
    let epsilon_achieved = correction
        .iter()
        .map(|x| linalg::vec_norm(x))
        .fold(0.0, f64::max);
    let origin = (-lo) as usize;
    let y0 = orbit.state(0).as_dense().expect("dense orbit");
    let anchor = Vector::Dense(linalg::vec_sub(y0, &correction[origin]));

    Ok(ShadowResult {
        anchor,
        epsilon_achieved,
        epsilon_bound: k_const * (1.0 + q) / (1.0 - q) * orbit.delta,
        q_used: q,
        k_used: k_const,
        r_plus: rates.r_plus,
        r_minus: rates.r_minus,
        tail_k: k_max,
        recurrence_residual: residual,
        correction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub best_anchor: Vector,
    /// `sup_n |y_n - T^n x|` for the least-squares seed `x`.
    pub epsilon_achieved: f64,
    /// Largest condition estimate among the factorised subproblems.
    pub condition_estimate: f64,
}

/// Least-squares shadow: the seed `x` minimising `sum_n |y_n - T^n x|^2`.
///
/// Writing `e_n = y_n - T^n x`, the problem is the minimum-norm solution of
/// `e_{n+1} - T e_n = z_n`, solved by an orthogonal factorisation. For shifts
/// the system splits into independent scalar chains along the diagonals
/// followed by the shift.
pub fn shadow_oracle_lsq(op: &Operator, orbit: &PseudoOrbit) -> Result<OracleResult> {
    if orbit.states.is_empty() || !(orbit.lo <= 0 && 0 <= orbit.hi) {
        return Err(Error::InvalidArgument("orbit window must contain 0".into()));
    }
    match op {
        Operator::Dense(a) => oracle_dense(a, orbit),
        Operator::Shift(s) => oracle_shift(s, orbit),
    }
}

fn oracle_dense(a: &DenseOperator, orbit: &PseudoOrbit) -> Result<OracleResult> {
    let d = a.dim();
    let defects = orbit.dense_defects(d)?;
    let steps = defects.len();
    if steps == 0 {
        return Ok(OracleResult {
            best_anchor: orbit.state(0).clone(),
            epsilon_achieved: 0.0,
            condition_estimate: 1.0,
        });
    }
    let mut system = Matrix::zeros(steps * d, (steps + 1) * d);
    let neg = a.matrix().scale(C64::new(-1.0, 0.0));
    for i in 0..steps {
        system.set_block(i * d, i * d, &neg);
        system.set_block(i * d, (i + 1) * d, &Matrix::identity(d));
    }
    let rhs: Vec<C64> = defects.iter().flat_map(|z| z.iter().copied()).collect();
    let (e, cond) = linalg::min_norm_solve(&system, &rhs)?;
    let epsilon = e.chunks(d).map(linalg::vec_norm).fold(0.0, f64::max);
    let origin = (-orbit.lo) as usize;
    let y0 = orbit.state(0).as_dense().expect("dense orbit");
    Ok(OracleResult {
        best_anchor: Vector::Dense(linalg::vec_sub(y0, &e[origin * d..(origin + 1) * d])),
        epsilon_achieved: epsilon,
        condition_estimate: cond,
    })
}

/// Minimum-norm solution of the scalar chain `a_{i+1} - w_i a_i = z_i`,
/// `0 <= i < L`, with `L + 1` unknowns.
///
/// Every solution is `a_n = h_n (b_n + t)` with `h` the homogeneous solution
/// and `b_{n+1} - b_n = z_n / h_{n+1}`; the optimal `t` is a weighted mean.
/// Normalising `h` and basing `b` at the peak of `|h|` keeps the result
/// accurate even when the chain's dichotomy makes the stacked system
/// exponentially ill-conditioned. The returned condition figure is
/// `max |h| / min |h|`. Chains whose kernel spans more than the floating
/// range fall back to an orthogonal factorisation.
pub fn chain_min_norm(weights: &[C64], rhs: &[C64]) -> Result<(Vec<C64>, f64)> {
    let l = weights.len();
    if rhs.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: rhs.len(),
        });
    }
    let mut log_mod = vec![0.0f64; l + 1];
    let mut arg = vec![0.0f64; l + 1];
    for i in 0..l {
        log_mod[i + 1] = log_mod[i] + weights[i].norm().ln();
        arg[i + 1] = arg[i] + weights[i].arg();
    }
    let peak = (0..=l).fold(
        0,
        |best, i| if log_mod[i] > log_mod[best] { i } else { best },
    );
    let low = log_mod.iter().copied().fold(f64::INFINITY, f64::min);
    let span = log_mod[peak] - low;
    if !span.is_finite() || span > 600.0 {
        let mut system = Matrix::zeros(l, l + 1);
        for i in 0..l {
            system[(i, i)] = -weights[i];
            system[(i, i + 1)] = C64::new(1.0, 0.0);
        }
        return linalg::min_norm_solve(&system, rhs);
    }
    let h: Vec<C64> = (0..=l)
        .map(|i| C64::from_polar((log_mod[i] - log_mod[peak]).exp(), arg[i]))
        .collect();
    let mut b = vec![ZERO; l + 1];
    for i in peak..l {
        b[i + 1] = b[i] + rhs[i] / h[i + 1];
    }
    for i in (0..peak).rev() {
        b[i] = b[i + 1] - rhs[i] / h[i + 1];
    }
    let mut num = ZERO;
    let mut den = 0.0f64;
    for i in 0..=l {
        let w2 = h[i].norm_sqr();
        num += b[i] * w2;
        den += w2;
    }
    let t = -num / den;
    let a = (0..=l).map(|i| h[i] * (b[i] + t)).collect();
    Ok((a, span.exp()))
}

/// Coordinate visited at time `lo + i` by the chain that sits at `start` at
/// time `lo`.
fn chain_coordinate(op: &ShiftOperator, start: i64, i: i64) -> i64 {
    match op.direction() {
        crate::operators::Direction::Forward => start + i,
        crate::operators::Direction::Backward => start - i,
    }
}

fn oracle_shift(op: &ShiftOperator, orbit: &PseudoOrbit) -> Result<OracleResult> {
    let defects: Vec<&SupportedVector> = orbit
        .defects
        .iter()
        .map(|z| {
            z.as_supported()
                .ok_or_else(|| Error::KindMismatch("orbit holds dense states".into()))
        })
        .collect::<Result<_>>()?;
    let steps = defects.len() as i64;

    // z_n(j) enters the chain sitting at j at time n + 1
    let mut starts = BTreeSet::new();
    for (i, z) in defects.iter().enumerate() {
        for (j, c) in z.iter() {
            if c != ZERO {
                starts.insert(chain_coordinate(op, j, -(i as i64 + 1)));
            }
        }
    }
    let starts: Vec<i64> = starts.into_iter().collect();

    let chains: Vec<(i64, Vec<C64>, f64)> = starts
        .par_iter()
        .map(|&start| -> Result<(i64, Vec<C64>, f64)> {
            let l = steps as usize;
            let mut weights = vec![ZERO; l];
            let mut rhs = vec![ZERO; l];
            for i in 0..l {
                let j = chain_coordinate(op, start, i as i64);
                let (target, w) = op.image_of_basis(j);
                weights[i] = w;
                rhs[i] = defects[i].get(target);
            }
            let (e, cond) = chain_min_norm(&weights, &rhs)?;
            Ok((start, e, cond))
        })
        .collect::<Result<_>>()?;

    let len = orbit.len();
    let mut sq = vec![0.0f64; len];
    let mut cond = 1.0f64;
    let mut e0 = SupportedVector::zero();
    let origin = (-orbit.lo) as usize;
    for (start, e, c) in &chains {
        cond = cond.max(*c);
        for (i, v) in e.iter().enumerate() {
            sq[i] += v.norm_sqr();
        }
        e0.add_at(chain_coordinate(op, *start, origin as i64), e[origin]);
    }
    let epsilon = sq.iter().map(|s| s.sqrt()).fold(0.0, f64::max);
    let y0 = orbit.state(0).as_supported().expect("shift orbit");
    Ok(OracleResult {
        best_anchor: Vector::Supported(y0.sub(&e0)),
        epsilon_achieved: epsilon,
        condition_estimate: cond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Rows `x_{n+1} - T x_n`.
    ScriptS,
    /// Rows `x_{n-1} - T^* x_n`.
    ScriptB,
}

/// Stencil `x_{n+1} - T x_n`, `lo <= n < hi`, on states `lo..=hi`.
pub fn forward_stencil(t: &Matrix, lo: i64, hi: i64) -> Matrix {
    let d = t.rows();
    let steps = (hi - lo) as usize;
    let mut m = Matrix::zeros(steps * d, (steps + 1) * d);
    let neg = t.scale(C64::new(-1.0, 0.0));
    for i in 0..steps {
        m.set_block(i * d, i * d, &neg);
        m.set_block(i * d, (i + 1) * d, &Matrix::identity(d));
    }
    m
}

/// Finite window of a sequence operator on states `x_{-N..=N}`.
///
/// `ScriptS` has the `2N` rows `x_{n+1} - T x_n`, `-N <= n < N`. `ScriptB`
/// has the `2N + 2` rows `x_{n-1} - T^* x_n`, `-N <= n <= N + 1`, with states
/// outside the window taken as zero, so it is exactly the restriction of the
/// full operator to window-supported sequences. For shifts every state is cut
/// to coordinates `-M..=M`.
pub fn windowed_operator(op: &Operator, kind: ProbeKind, n: usize, m: usize) -> Result<Matrix> {
    if n < 1 || m < 1 {
        return Err(Error::InvalidArgument(format!(
            "window sizes must be >= 1, got N = {n}, M = {m}"
        )));
    }
    let t = op.window_matrix(m).into_matrix();
    let n = n as i64;
    Ok(match kind {
        ProbeKind::ScriptS => forward_stencil(&t, -n, n),
        ProbeKind::ScriptB => {
            let d = t.rows();
            let states = (2 * n + 1) as usize;
            let neg_adj = t.adjoint().scale(C64::new(-1.0, 0.0));
            let mut b = Matrix::zeros((states + 1) * d, states * d);
            for row in 0..=states {
                // row index r corresponds to n = row - N
                if row >= 1 {
                    b.set_block(row * d, (row - 1) * d, &Matrix::identity(d));
                }
                if row < states {
                    b.set_block(row * d, row * d, &neg_adj);
                }
            }
            b
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowProbe {
    pub n: usize,
    pub gain: f64,
    pub operator_kind: ProbeKind,
    /// The gain is measured in the Euclidean norm of the stacked window.
    pub norm: &'static str,
}

/// Smallest singular value of the window: the surjectivity modulus for
/// `ScriptS`, the lower bound of `|B y| / |y|` over window-supported `y`
/// for `ScriptB`.
pub fn window_probe(op: &Operator, kind: ProbeKind, n: usize, m: usize) -> Result<WindowProbe> {
    let w = windowed_operator(op, kind, n, m)?;
    Ok(WindowProbe {
        n,
        gain: linalg::min_singular_value(&w),
        operator_kind: kind,
        norm: "l2 surrogate",
    })
}

pub fn probe_csv(probes: &[WindowProbe]) -> String {
    let mut out = String::from("N,gain\n");
    for p in probes {
        out.push_str(&format!("{},{:.17e}\n", p.n, p.gain));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BgainResult {
    pub q: f64,
    pub truncation: usize,
    /// `|B y|_1 / |y|_1` summed over the truncated sequence.
    pub gain_measured: f64,
    /// `(|x/q - T^* x| q + |q x - T^* x|) / ((1 + q) |x|)`.
    pub gain_identity: f64,
}

/// Smallest `N` with `q^{-N} < 1e-14`.
pub fn bgain_truncation(q: f64) -> usize {
    (-BGAIN_TRUNCATION.ln() / q.ln()).floor() as usize + 1
}

/// Applies the sequence operator `(y_{n-1} - T^* y_n)_n` to the two-sided
/// geometric sequence `y_n = q^n x` (`n < 0`), `q^{-n} x` (`n >= 0`),
/// truncated to `|n| <= N`, and compares the summed-norm ratio with its
/// closed form.
pub fn bgain_test_sequence(
    op: &Operator,
    x: &Vector,
    q: f64,
    truncation: Option<usize>,
) -> Result<BgainResult> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("q must be > 1, got {q}")));
    }
    let xn = x.norm();
    if xn == 0.0 || !xn.is_finite() {
        return Err(Error::InvalidArgument("test vector must be nonzero".into()));
    }
    let minimal = bgain_truncation(q);
    let n = truncation.unwrap_or(minimal);
    if n < minimal {
        return Err(Error::InvalidArgument(format!(
            "truncation {n} leaves q^-N >= {BGAIN_TRUNCATION:e}; need N >= {minimal}"
        )));
    }
    let adj = op.adjoint();
    let n = n as i64;
    let coefficient = |k: i64| -> f64 {
        if k.abs() > n {
            0.0
        } else if k < 0 {
            q.powi(k as i32)
        } else {
            q.powi(-k as i32)
        }
    };
    let image = adj.apply(x)?;
    let mut y_norm = 0.0;
    for k in -n..=n {
        y_norm += x.scale(C64::new(coefficient(k), 0.0)).norm();
    }
    let mut by_norm = 0.0;
    for k in -n..=n + 1 {
        let prev = x.scale(C64::new(coefficient(k - 1), 0.0));
        let here = image.scale(C64::new(coefficient(k), 0.0));
        by_norm += prev.sub(&here)?.norm();
    }
    let inv_q = x.scale(C64::new(1.0 / q, 0.0)).sub(&image)?.norm();
    let times_q = x.scale(C64::new(q, 0.0)).sub(&image)?.norm();
    Ok(BgainResult {
        q,
        truncation: n as usize,
        gain_measured: by_norm / y_norm,
        gain_identity: (inv_q * q + times_q) / ((1.0 + q) * xn),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn scalar(t: f64) -> Operator {
        Operator::Dense(DenseOperator::real_diag(&[t]))
    }

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn zero_delta_gives_trajectory() {
        let op = Operator::Dense(DenseOperator::real_diag(&[2.0, 0.5]));
        let x0 = Vector::Dense(vec![ONE, ONE]);
        let orbit = generate_pseudo_orbit(&op, &x0, &OrbitOptions::new(-3, 3, 0.0, 1)).unwrap();
        for n in -3..=3i64 {
            let y = orbit.state(n).as_dense().unwrap();
            assert!((y[0] - r(2f64.powi(n as i32))).norm() < 1e-14);
            assert!((y[1] - r(0.5f64.powi(n as i32))).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_defect_geometric_sum() {
        let op = scalar(2.0);
        let delta = 1e-3;
        let opts = OrbitOptions::new(0, 10, delta, 0)
            .with_sampling(DefectSampling::Constant(Vector::Dense(vec![ONE])));
        let orbit = generate_pseudo_orbit(&op, &Vector::Dense(vec![ZERO]), &opts).unwrap();
        for n in 0..=10i64 {
            let y = orbit.state(n).as_dense().unwrap()[0];
            assert!((y - r(delta * (2f64.powi(n as i32) - 1.0))).norm() < 1e-15);
        }
    }

    #[test]
    fn orbit_is_seed_deterministic() {
        let op = Operator::Dense(DenseOperator::real_diag(&[2.0, 0.5]));
        let x0 = Vector::Dense(vec![ONE, ZERO]);
        let opts = OrbitOptions::symmetric(5, 1e-2, 42);
        let a = generate_pseudo_orbit(&op, &x0, &opts).unwrap();
        let b = generate_pseudo_orbit(&op, &x0, &opts).unwrap();
        assert_eq!(a, b);
        for norm in a.defect_norms() {
            assert!((norm - 1e-2).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_shadow_with_zero_splitting() {
        let op = DenseOperator::real_diag(&[2.0]);
        let delta = 1e-3;
        let opts = OrbitOptions::symmetric(10, delta, 0)
            .with_sampling(DefectSampling::Constant(Vector::Dense(vec![ONE])));
        let orbit = generate_pseudo_orbit(
            &Operator::Dense(op.clone()),
            &Vector::Dense(vec![ZERO]),
            &opts,
        )
        .unwrap();
        let res = construct_shadow(&op, &DenseOperator::zero(1), &orbit, None).unwrap();
        // x_n = -delta * sum_{k=1}^{10-n} 2^{-k}, which tends to -delta
        for (i, x) in res.correction.iter().enumerate() {
            let n = i as i32 - 10;
            assert!((x[0] - r(-delta * (1.0 - 2f64.powi(n - 10)))).norm() < 1e-15);
        }
        assert!(res.recurrence_residual < 1e-15);
        assert!(res.epsilon_achieved <= res.epsilon_bound);
    }

    #[test]
    fn construct_rejects_bad_splitting() {
        let op = DenseOperator::identity(2);
        let orbit = generate_pseudo_orbit(
            &Operator::Dense(op.clone()),
            &Vector::Dense(vec![ONE, ONE]),
            &OrbitOptions::symmetric(3, 1e-3, 0),
        )
        .unwrap();
        let err = construct_shadow(&op, &DenseOperator::zero(2), &orbit, None).unwrap_err();
        assert!(matches!(err, Error::DecayCertificate { .. }));
        assert_eq!(err.exit_code(), crate::error::exit::CERTIFICATE);
    }

    #[test]
    fn tail_bound_error_when_truncated_too_early() {
        let op = DenseOperator::real_diag(&[2.0]);
        let orbit = generate_pseudo_orbit(
            &Operator::Dense(op.clone()),
            &Vector::Dense(vec![ONE]),
            &OrbitOptions::symmetric(20, 1e-3, 0),
        )
        .unwrap();
        let err = construct_shadow(&op, &DenseOperator::zero(1), &orbit, Some(3)).unwrap_err();
        assert!(matches!(err, Error::TailBound { .. }));
    }

    #[test]
    fn identity_oracle_grows_linearly() {
        let op = scalar(1.0);
        let delta = 1e-3;
        for n in [4i64, 8, 16] {
            let opts = OrbitOptions::symmetric(n, delta, 0)
                .with_sampling(DefectSampling::Constant(Vector::Dense(vec![ONE])));
            let orbit = generate_pseudo_orbit(&op, &Vector::Dense(vec![ZERO]), &opts).unwrap();
            let res = shadow_oracle_lsq(&op, &orbit).unwrap();
            assert!((res.epsilon_achieved - n as f64 * delta).abs() < 1e-12);
        }
    }

    #[test]
    fn script_s_stencil_scalar() {
        let w = windowed_operator(&scalar(2.0), ProbeKind::ScriptS, 1, 1).unwrap();
        let want = Matrix::from_rows(&[vec![r(-2.0), ONE, ZERO], vec![ZERO, r(-2.0), ONE]]);
        assert_eq!(w, want);
    }

    #[test]
    fn bgain_identity_operator() {
        let op = Operator::Dense(DenseOperator::identity(2));
        let res = bgain_test_sequence(&op, &Vector::Dense(vec![ONE, r(2.0)]), 2.0, None).unwrap();
        assert!((res.gain_identity - 2.0 / 3.0).abs() < 1e-15);
        assert!((res.gain_measured - res.gain_identity).abs() < 1e-12);
        assert!(bgain_test_sequence(&op, &Vector::Dense(vec![ONE, ONE]), 1.0, None).is_err());
    }

    #[test]
    fn rotate_orbit_unit_is_identity() {
        let op = Operator::Dense(DenseOperator::real_diag(&[2.0, 0.5]));
        let orbit = generate_pseudo_orbit(
            &op,
            &Vector::Dense(vec![ONE, ONE]),
            &OrbitOptions::symmetric(4, 1e-3, 9),
        )
        .unwrap();
        assert_eq!(rotate_orbit(&orbit, ONE).unwrap(), orbit);
        assert!(rotate_orbit(&orbit, r(1.1)).is_err());
    }
}
