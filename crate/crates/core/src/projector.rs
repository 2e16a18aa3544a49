//! Contour quadrature of the resolvent `R(lambda) = (lambda I - A)^{-1}`.
//!
//! On an origin-centred circle `|lambda| = r` inside the resolvent annulus
//! around the unit circle, the Laurent coefficients of `R` are
//!
//! ```text
//! C_n = 1/(2 pi i) \oint lambda^{-n-1} R(lambda) dlambda
//!     = 1/(2 pi) \int_0^{2 pi} lambda^{-n} R(lambda) dtheta,
//! ```
//!
//! which the equispaced trapezoid rule approximates with geometric accuracy.
//! `C_{-1}` is the Riesz projector onto the spectral part inside the circle.
//! The coefficients obey
//!
//! ```text
//! C_0 = -A^{-1} (I - C_{-1}),   C_n = A^{-n} C_0,   C_{-n} = A^{n-1} C_{-1}   (n >= 1).
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum, Lu, Matrix, C64};
use crate::operators::DenseOperator;
use crate::spectral;

pub const DEFAULT_NODES: usize = 256;
pub const MIN_NODES: usize = 16;
pub const MAX_NODES: usize = 1 << 20;

/// Largest `|n|` accepted by [`laurent_coefficient`].
pub const MAX_LAURENT_INDEX: i64 = 64;

/// Residual below which the coefficient relations are accepted.
pub const RELATION_TOL: f64 = 1e-7;

/// Resolvents are refused within this smallest-singular-value distance.
pub const RESOLVENT_GUARD: f64 = 1e-10;

/// Nodes are evaluated in fixed chunks so the summation tree does not depend
/// on the number of worker threads.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourConfig {
    pub radius: f64,
    pub nodes: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            radius: 1.0,
            nodes: DEFAULT_NODES,
        }
    }
}

impl ContourConfig {
    pub fn new(radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "contour radius must be positive, got {radius}"
            )));
        }
        if nodes < MIN_NODES || !nodes.is_power_of_two() || nodes > MAX_NODES {
            return Err(Error::InvalidArgument(format!(
                "quadrature nodes must be a power of two in [{MIN_NODES}, {MAX_NODES}], got {nodes}"
            )));
        }
        Ok(ContourConfig { radius, nodes })
    }

    /// Minimum distance an eigenvalue modulus must keep from the radius: one
    /// node spacing.
    pub fn guard(&self) -> f64 {
        2.0 * PI * self.radius / self.nodes as f64
    }

    pub fn check_against(&self, eigenvalues: &[C64]) -> Result<()> {
        let distance = eigenvalues
            .iter()
            .map(|z| (z.norm() - self.radius).abs())
            .fold(f64::INFINITY, f64::min);
        if distance < self.guard() {
            return Err(Error::ContourThroughSpectrum {
                radius: self.radius,
                distance,
                guard: self.guard(),
            });
        }
        Ok(())
    }

    /// A contour in the spectral gap around the unit circle, placed where the
    /// trapezoid rule converges fastest, with enough nodes for coefficients up
    /// to `|n| = n_max`. Fails when an eigenvalue lies on the unit circle.
    pub fn adapted(a: &DenseOperator, n_max: usize) -> Result<Self> {
        let eig = spectral::eigenvalues(a)?;
        Self::adapted_to_spectrum(&eig, n_max)
    }

    pub fn adapted_to_spectrum(eig: &[C64], n_max: usize) -> Result<Self> {
        let gap = spectral::unit_circle_gap(eig);
        if gap <= RESOLVENT_GUARD {
            return Err(Error::ContourThroughSpectrum {
                radius: 1.0,
                distance: gap,
                guard: RESOLVENT_GUARD,
            });
        }
        let inner = eig
            .iter()
            .map(|z| z.norm())
            .filter(|&m| m < 1.0)
            .fold(None, |acc: Option<f64>, m| {
                Some(acc.map_or(m, |a| a.max(m)))
            });
        let outer = eig
            .iter()
            .map(|z| z.norm())
            .filter(|&m| m > 1.0)
            .fold(None, |acc: Option<f64>, m| {
                Some(acc.map_or(m, |a| a.min(m)))
            });
        let (radius, ratio) = match (inner, outer) {
            (Some(i), Some(o)) => {
                let r = (i.max(1e-300) * o).sqrt();
                (r, (i / o).sqrt())
            }
            (Some(i), None) => ((2.0 * i).max(1e-3), 0.5),
            (None, Some(o)) => (0.5 * o, 0.5),
            (None, None) => (1.0, 0.5),
        };
        let ratio = ratio.max(1e-300);
        let needed = (37.0 / -ratio.ln()).ceil() as usize + 2 * n_max;
        let nodes = needed.max(DEFAULT_NODES).next_power_of_two().min(MAX_NODES);
        ContourConfig::new(radius, nodes)
    }
}

/// `(lambda I - A)^{-1}`, refused when `lambda` is (numerically) in the spectrum.
pub fn resolvent(a: &DenseOperator, lambda: C64) -> Result<DenseOperator> {
    let m = a.matrix().shifted_from(lambda);
    let distance = linalg::min_singular_value(&m);
    if distance <= RESOLVENT_GUARD {
        return Err(Error::NearSingularResolvent {
            re: lambda.re,
            im: lambda.im,
            distance,
        });
    }
    DenseOperator::new(Lu::new(&m)?.inverse())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaurentCoefficient {
    pub n: i64,
    #[serde(serialize_with = "serialize_matrix")]
    pub value: Matrix,
    /// Largest entry change when the node count is doubled.
    pub doubling_residual: f64,
}

/// Trapezoid sums for several `n` at once: returns, per `n`, the estimate
/// with `cfg.nodes` nodes and the estimate with `2 * cfg.nodes` nodes.
fn quadrature(a: &DenseOperator, ns: &[i64], cfg: &ContourConfig) -> Result<Vec<(Matrix, Matrix)>> {
    let eig = spectral::eigenvalues(a)?;
    cfg.check_against(&eig)?;
    let fine = 2 * cfg.nodes;
    let dim = a.dim();
    let chunks: Vec<(usize, usize)> = (0..fine)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(fine)))
        .collect();

    // per chunk and per n: (sum over even nodes, sum over all nodes)
    let partials: Vec<Vec<(Matrix, Matrix)>> = chunks
        .par_iter()
        .map(|&(start, end)| -> Result<Vec<(Matrix, Matrix)>> {
            let mut even_terms: Vec<Vec<Matrix>> = vec![Vec::new(); ns.len()];
            let mut all_terms: Vec<Vec<Matrix>> = vec![Vec::new(); ns.len()];
            for k in start..end {
                let theta = 2.0 * PI * k as f64 / fine as f64;
                let lambda = C64::from_polar(cfg.radius, theta);
                let m = a.matrix().shifted_from(lambda);
                let r = Lu::new(&m)
                    .map_err(|_| Error::ContourThroughSpectrum {
                        radius: cfg.radius,
                        distance: 0.0,
                        guard: cfg.guard(),
                    })?
                    .inverse();
                for (idx, &n) in ns.iter().enumerate() {
                    // lambda^{-n} with the phase reduced exactly mod the node count
                    let phase_index = ((k as i64) * (-n)).rem_euclid(fine as i64);
                    let angle = 2.0 * PI * phase_index as f64 / fine as f64;
                    let w = C64::from_polar(cfg.radius.powi(-n as i32), angle);
                    let term = r.scale(w);
                    if k % 2 == 0 {
                        even_terms[idx].push(term.clone());
                    }
                    all_terms[idx].push(term);
                }
            }
            Ok((0..ns.len())
                .map(|idx| {
                    let even = if even_terms[idx].is_empty() {
                        Matrix::zeros(dim, dim)
                    } else {
                        pairwise_sum(&even_terms[idx])
                    };
                    (even, pairwise_sum(&all_terms[idx]))
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(ns.len());
    for idx in 0..ns.len() {
        let evens: Vec<Matrix> = partials.iter().map(|p| p[idx].0.clone()).collect();
        let alls: Vec<Matrix> = partials.iter().map(|p| p[idx].1.clone()).collect();
        let coarse = pairwise_sum(&evens).scale(C64::new(1.0 / cfg.nodes as f64, 0.0));
        let finer = pairwise_sum(&alls).scale(C64::new(1.0 / fine as f64, 0.0));
        out.push((coarse, finer));
    }
    Ok(out)
}

pub fn laurent_coefficient(
    a: &DenseOperator,
    n: i64,
    cfg: &ContourConfig,
) -> Result<LaurentCoefficient> {
    if n.abs() > MAX_LAURENT_INDEX {
        return Err(Error::InvalidArgument(format!(
            "|n| must be <= {MAX_LAURENT_INDEX}, got {n}"
        )));
    }
    let (coarse, finer) = quadrature(a, &[n], cfg)?.remove(0);
    Ok(LaurentCoefficient {
        n,
        doubling_residual: coarse.sub(&finer).max_abs(),
        value: coarse,
    })
}

/// The Riesz projector `C_{-1}` onto the spectral part inside the contour.
pub fn riesz_projector(a: &DenseOperator, cfg: &ContourConfig) -> Result<DenseOperator> {
    DenseOperator::new(laurent_coefficient(a, -1, cfg)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaurentTable {
    pub n_max: usize,
    pub contour: ContourConfig,
    #[serde(serialize_with = "serialize_coefficients")]
    pub coefficients: BTreeMap<i64, Matrix>,
    pub r_plus: f64,
    pub r_minus: f64,
    pub doubling_residual: f64,
}

impl LaurentTable {
    pub fn get(&self, n: i64) -> Option<&Matrix> {
        self.coefficients.get(&n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// All coefficients `C_n`, `|n| <= n_max`, from one set of resolvent
/// evaluations, plus the decay rates of the splitting `B = C_{-1}`.
pub fn laurent_table(a: &DenseOperator, n_max: usize, cfg: &ContourConfig) -> Result<LaurentTable> {
    if n_max as i64 > MAX_LAURENT_INDEX {
        return Err(Error::InvalidArgument(format!(
            "n_max must be <= {MAX_LAURENT_INDEX}, got {n_max}"
        )));
    }
    let ns: Vec<i64> = (-(n_max as i64)..=n_max as i64).collect();
    let results = quadrature(a, &ns, cfg)?;
    let mut coefficients = BTreeMap::new();
    let mut residual = 0.0f64;
    for (&n, (coarse, finer)) in ns.iter().zip(results) {
        residual = residual.max(coarse.sub(&finer).max_abs());
        coefficients.insert(n, coarse);
    }
    let b = DenseOperator::new(coefficients[&-1].clone())?;
    let rates = decay_rates(a, &b, (2 * n_max).max(16))?;
    Ok(LaurentTable {
        n_max,
        contour: *cfg,
        coefficients,
        r_plus: rates.r_plus,
        r_minus: rates.r_minus,
        doubling_residual: residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaurentRelations {
    /// `|C_0 + A^{-1}(I - C_{-1})|_max`
    pub zeroth: f64,
    /// `max_n |C_n - A^{-n} C_0|_max`
    pub positive: f64,
    /// `max_n |C_{-n} - A^{n-1} C_{-1}|_max`
    pub negative: f64,
    pub passed: bool,
}

pub fn verify_laurent_relations(
    a: &DenseOperator,
    table: &LaurentTable,
) -> Result<LaurentRelations> {
    if table.n_max < 3 {
        return Err(Error::InvalidArgument(format!(
            "relation check needs n_max >= 3, got {}",
            table.n_max
        )));
    }
    let missing = || Error::InvalidArgument("Laurent table is missing coefficients".into());
    let inv = a.inverse()?;
    let dim = a.dim();
    let id = Matrix::identity(dim);
    let c_m1 = table.get(-1).ok_or_else(missing)?;
    let c_0 = table.get(0).ok_or_else(missing)?;
    let zeroth = c_0.add(&inv.matrix().mul(&id.sub(c_m1))).max_abs();

    let mut positive = 0.0f64;
    let mut inv_pow = Matrix::identity(dim);
    let mut negative = 0.0f64;
    let mut pow = Matrix::identity(dim);
    for n in 1..=table.n_max as i64 {
        inv_pow = inv_pow.mul(inv.matrix());
        let c_n = table.get(n).ok_or_else(missing)?;
        positive = positive.max(c_n.sub(&inv_pow.mul(c_0)).max_abs());
        if n > 1 {
            pow = pow.mul(a.matrix());
        }
        let c_mn = table.get(-n).ok_or_else(missing)?;
        negative = negative.max(c_mn.sub(&pow.mul(c_m1)).max_abs());
    }
    Ok(LaurentRelations {
        zeroth,
        positive,
        negative,
        passed: zeroth < RELATION_TOL && positive < RELATION_TOL && negative < RELATION_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRates {
    /// Tail maximum of `|A^n B|^{1/n}`.
    pub r_plus: f64,
    /// Tail maximum of `|A^{-n}(I - B)|^{1/n}`.
    pub r_minus: f64,
    pub n_max: usize,
    /// Whether `B` was recognised as an `A`-invariant projector and the powers
    /// were re-projected at every step.
    pub projected: bool,
}

impl DecayRates {
    pub fn certified(&self) -> bool {
        self.r_plus < 1.0 && self.r_minus < 1.0
    }
}

/// `B` is treated as a spectral projector of `A` when it is idempotent and
/// commutes with `A` to working accuracy; then `A^k B = B A^k B` and each
/// power can be re-projected, which keeps rounding from leaking into the
/// complementary (growing) part.
pub(crate) fn is_invariant_projector(a: &Matrix, b: &Matrix) -> bool {
    let scale_b = b.max_abs().max(1.0);
    let idem = b.mul(b).sub(b).max_abs() <= 1e-8 * scale_b;
    let comm = a.mul(b).sub(&b.mul(a)).max_abs() <= 1e-8 * scale_b * a.max_abs().max(1.0);
    idem && comm
}

/// Log-norm sequence `ln |M^k S|_2`, `k = 0..=k_max`, with periodic rescaling
/// so the iterates never overflow. With `project`, every iterate is
/// multiplied by `S` again.
fn log_power_norms(m: &Matrix, s: &Matrix, k_max: usize, project: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut current = s.clone();
    let mut log_scale = 0.0f64;
    for k in 0..=k_max {
        if k > 0 {
            current = m.mul(&current);
            if project {
                current = s.mul(&current);
            }
        }
        let norm = current.norm2();
        if norm == 0.0 {
            out.push(f64::NEG_INFINITY);
            // stays zero from here on
            out.resize(k_max + 1, f64::NEG_INFINITY);
            break;
        }
        out.push(log_scale + norm.ln());
        if !(1e-100..=1e100).contains(&norm) {
            current = current.scale(C64::new(1.0 / norm, 0.0));
            log_scale += norm.ln();
        }
    }
    out
}

fn tail_rate(log_norms: &[f64], n_max: usize) -> f64 {
    let start = n_max - n_max / 2 + 1;
    (start..=n_max)
        .map(|n| (log_norms[n] / n as f64).exp())
        .fold(0.0, f64::max)
}

/// Finite-order estimates of the decay rates of `A^n B` and `A^{-n}(I - B)`:
/// the maxima of the `n`-th roots over `n` in the last half of `1..=n_max`.
pub fn decay_rates(a: &DenseOperator, b: &DenseOperator, n_max: usize) -> Result<DecayRates> {
    if n_max < 8 {
        return Err(Error::InvalidArgument(format!(
            "n_max must be >= 8, got {n_max}"
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let inv = a.inverse()?;
    let complement = Matrix::identity(a.dim()).sub(b.matrix());
    let projected = is_invariant_projector(a.matrix(), b.matrix());
    let plus = log_power_norms(a.matrix(), b.matrix(), n_max, projected);
    let minus = log_power_norms(inv.matrix(), &complement, n_max, projected);
    Ok(DecayRates {
        r_plus: tail_rate(&plus, n_max),
        r_minus: tail_rate(&minus, n_max),
        n_max,
        projected,
    })
}

/// `A^k B` and `A^{-k}(I - B)` for `k = 0..=k_max`, re-projected when `B` is
/// an invariant projector.
pub(crate) fn splitting_powers(
    a: &Matrix,
    inv: &Matrix,
    b: &Matrix,
    k_max: usize,
) -> (Vec<Matrix>, Vec<Matrix>) {
    let project = is_invariant_projector(a, b);
    let complement = Matrix::identity(a.rows()).sub(b);
    let run = |m: &Matrix, s: &Matrix| {
        let mut seq = Vec::with_capacity(k_max + 1);
        let mut current = s.clone();
        seq.push(current.clone());
        for _ in 0..k_max {
            current = m.mul(&current);
            if project {
                current = s.mul(&current);
            }
            seq.push(current.clone());
        }
        seq
    };
    (run(a, b), run(inv, &complement))
}

fn serialize_matrix<S: serde::Serializer>(
    m: &Matrix,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Matrix", 3)?;
    st.serialize_field("rows", &m.rows())?;
    st.serialize_field("cols", &m.cols())?;
    let entries: Vec<[f64; 2]> = m.as_slice().iter().map(|z| [z.re, z.im]).collect();
    st.serialize_field("entries", &entries)?;
    st.end()
}

fn serialize_coefficients<S: serde::Serializer>(
    map: &BTreeMap<i64, Matrix>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;

    fn by_ref<S: serde::Serializer>(m: &&Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_matrix(m, s)
    }

    #[derive(Serialize)]
    struct Entry<'a> {
        n: i64,
        #[serde(serialize_with = "by_ref")]
        value: &'a Matrix,
    }

    let mut seq = s.serialize_seq(Some(map.len()))?;
    for (&n, m) in map {
        seq.serialize_element(&Entry { n, value: m })?;
    }
    seq.end()
}
