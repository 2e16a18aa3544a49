//! Operator representations: dense complex matrices and two-sided constant
//! bilateral weighted shifts on `l2(Z)`.
//!
//! A shift is described by the weight it puts on each edge `(j, j+1)` of the
//! integer lattice: `weight_pos` for `j >= crossover`, `weight_neg` below.
//! The forward shift moves `e_j` to `w(j) e_{j+1}`; the backward shift moves
//! `e_{j+1}` to `w(j) e_j`. With this convention the adjoint of a forward
//! shift is the backward shift with the same weights, and the inverse flips
//! the direction and reciprocates the weights.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix, C64, ONE, ZERO};

/// Relative tolerance on the smallest singular value below which a dense
/// operator is treated as singular.
pub const DEFAULT_SINGULARITY_RTOL: f64 = 1e-12;

/// Accepted deviation of `|lambda|` from one for unimodular scalars.
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// The large weight of the classical example pair of shifts, `2 sqrt 2`.
pub const EXAMPLE_WEIGHT: f64 = 2.0 * SQRT_2;

pub fn check_unimodular(lambda: C64) -> Result<()> {
    if (lambda.norm() - 1.0).abs() < UNIMODULAR_TOL {
        Ok(())
    } else {
        Err(Error::NotUnimodular {
            re: lambda.re,
            im: lambda.im,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: Matrix,
}

impl DenseOperator {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        if matrix.rows() == 0 {
            return Err(Error::InvalidArgument(
                "operator dimension must be >= 1".into(),
            ));
        }
        if !matrix.is_finite() {
            return Err(Error::InvalidArgument(
                "operator entries must be finite".into(),
            ));
        }
        Ok(DenseOperator { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        DenseOperator {
            matrix: Matrix::identity(dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        DenseOperator {
            matrix: Matrix::zeros(dim, dim),
        }
    }

    pub fn diag(entries: &[C64]) -> Self {
        DenseOperator {
            matrix: Matrix::from_diag(entries),
        }
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        DenseOperator {
            matrix: Matrix::from_real_diag(entries),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(self.matrix.mul_vec(v))
    }

    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn compose(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(DenseOperator {
            matrix: self.matrix.mul(&other.matrix),
        })
    }

    /// Whether the smallest singular value exceeds `rtol` times the largest.
    pub fn is_invertible(&self, rtol: f64) -> bool {
        let sv = linalg::singular_values(&self.matrix);
        let max = sv[0];
        let min = *sv.last().unwrap();
        max > 0.0 && min > rtol * max
    }

    pub fn inverse(&self) -> Result<DenseOperator> {
        self.inverse_with_tol(DEFAULT_SINGULARITY_RTOL)
    }

    pub fn inverse_with_tol(&self, rtol: f64) -> Result<DenseOperator> {
        let sv = linalg::singular_values(&self.matrix);
        let max = sv[0];
        let min = *sv.last().unwrap();
        if max == 0.0 || min <= rtol * max {
            return Err(Error::Singular {
                sigma_min: min,
                tol: rtol * max,
            });
        }
        let lu = Lu::new(&self.matrix)?;
        Ok(DenseOperator {
            matrix: lu.inverse(),
        })
    }

    /// `lambda^{-1} A` for unimodular `lambda`.
    pub fn rotate(&self, lambda: C64) -> Result<DenseOperator> {
        check_unimodular(lambda)?;
        Ok(DenseOperator {
            matrix: self.matrix.scale(ONE / lambda),
        })
    }

    /// Integer power; negative exponents go through the inverse.
    pub fn power(&self, n: i32) -> Result<DenseOperator> {
        let base = if n < 0 { self.inverse()? } else { self.clone() };
        Ok(DenseOperator {
            matrix: base.matrix.powi(n.unsigned_abs()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Bilateral weighted shift with two constant weight regimes, optionally
/// multiplied by a unimodular phase (the result of [`ShiftOperator::rotate`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOperator {
    direction: Direction,
    weight_pos: f64,
    weight_neg: f64,
    crossover: i64,
    phase: C64,
}

impl ShiftOperator {
    pub fn new(
        direction: Direction,
        weight_pos: f64,
        weight_neg: f64,
        crossover: i64,
    ) -> Result<Self> {
        for (name, w) in [("weight_pos", weight_pos), ("weight_neg", weight_neg)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {w}"
                )));
            }
        }
        Ok(ShiftOperator {
            direction,
            weight_pos,
            weight_neg,
            crossover,
            phase: ONE,
        })
    }

    /// `T e_n = 2 sqrt2 e_{n+1}` for `n >= 0` and `e_{n+1} / (2 sqrt2)` for `n <= -1`.
    pub fn example_t() -> Self {
        ShiftOperator::new(Direction::Forward, EXAMPLE_WEIGHT, 1.0 / EXAMPLE_WEIGHT, 0).unwrap()
    }

    /// `S e_n = 2 sqrt2 e_{n-1}` for `n >= 1` and `e_{n-1} / (2 sqrt2)` for `n <= 0`.
    pub fn example_s() -> Self {
        ShiftOperator::new(Direction::Backward, EXAMPLE_WEIGHT, 1.0 / EXAMPLE_WEIGHT, 0).unwrap()
    }

    /// `c_j = (2 sqrt2)^{-|j|}` cut to `|j| <= half_width`; `S c = c` up to
    /// the cut, so `1` is an eigenvalue of `S`.
    pub fn example_fixed_vector(half_width: usize) -> SupportedVector {
        let m = half_width as i64;
        SupportedVector::from_pairs(
            (-m..=m).map(|j| (j, C64::new(EXAMPLE_WEIGHT.powi(-(j.abs() as i32)), 0.0))),
        )
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn weight_pos(&self) -> f64 {
        self.weight_pos
    }

    pub fn weight_neg(&self) -> f64 {
        self.weight_neg
    }

    pub fn crossover(&self) -> i64 {
        self.crossover
    }

    pub fn phase(&self) -> C64 {
        self.phase
    }

    /// Weight carried by the edge `(j, j+1)`.
    pub fn edge_weight(&self, j: i64) -> f64 {
        if j >= self.crossover {
            self.weight_pos
        } else {
            self.weight_neg
        }
    }

    /// Image of the basis vector `e_j`: `(target index, coefficient)`.
    pub fn image_of_basis(&self, j: i64) -> (i64, C64) {
        match self.direction {
            Direction::Forward => (j + 1, self.phase * self.edge_weight(j)),
            Direction::Backward => (j - 1, self.phase * self.edge_weight(j - 1)),
        }
    }

    pub fn apply(&self, v: &SupportedVector) -> SupportedVector {
        let mut out = SupportedVector::zero();
        for (&j, &c) in &v.coeffs {
            let (target, w) = self.image_of_basis(j);
            out.add_at(target, c * w);
        }
        out
    }

    pub fn adjoint(&self) -> ShiftOperator {
        ShiftOperator {
            direction: self.direction.flipped(),
            phase: self.phase.conj(),
            ..*self
        }
    }

    pub fn inverse(&self) -> ShiftOperator {
        ShiftOperator {
            direction: self.direction.flipped(),
            weight_pos: 1.0 / self.weight_pos,
            weight_neg: 1.0 / self.weight_neg,
            crossover: self.crossover,
            phase: ONE / self.phase,
        }
    }

    pub fn rotate(&self, lambda: C64) -> Result<ShiftOperator> {
        check_unimodular(lambda)?;
        Ok(ShiftOperator {
            phase: self.phase / lambda,
            ..*self
        })
    }

    /// Finite section on indices `-half_width..=half_width`. Images that leave
    /// the window are dropped, so the matrix acts exactly on vectors supported
    /// in the interior.
    pub fn materialize(&self, half_width: usize) -> DenseOperator {
        let n = half_width as i64;
        let size = 2 * half_width + 1;
        let mut m = Matrix::zeros(size, size);
        for j in -n..=n {
            let (target, w) = self.image_of_basis(j);
            if (-n..=n).contains(&target) {
                m[((target + n) as usize, (j + n) as usize)] = w;
            }
        }
        DenseOperator { matrix: m }
    }
}

/// Finitely supported vector in `l2(Z)`; unlisted coefficients are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SupportedVector {
    coeffs: BTreeMap<i64, C64>,
}

impl SupportedVector {
    pub fn zero() -> Self {
        SupportedVector::default()
    }

    pub fn basis(j: i64) -> Self {
        let mut v = SupportedVector::zero();
        v.coeffs.insert(j, ONE);
        v
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, C64)>) -> Self {
        let mut v = SupportedVector::zero();
        for (j, c) in pairs {
            v.add_at(j, c);
        }
        v
    }

    /// Vector on `lo..=hi` with the given coefficients.
    pub fn from_window(lo: i64, values: &[C64]) -> Self {
        SupportedVector::from_pairs(values.iter().enumerate().map(|(k, &c)| (lo + k as i64, c)))
    }

    pub fn get(&self, j: i64) -> C64 {
        self.coeffs.get(&j).copied().unwrap_or(ZERO)
    }

    pub fn add_at(&mut self, j: i64, c: C64) {
        *self.coeffs.entry(j).or_insert(ZERO) += c;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs.iter().map(|(&j, &c)| (j, c))
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Smallest and largest listed index.
    pub fn support_bounds(&self) -> Option<(i64, i64)> {
        let lo = *self.coeffs.keys().next()?;
        let hi = *self.coeffs.keys().next_back()?;
        Some((lo, hi))
    }

    pub fn norm(&self) -> f64 {
        let v: Vec<C64> = self.coeffs.values().copied().collect();
        linalg::vec_norm(&v)
    }

    pub fn scale(&self, s: C64) -> SupportedVector {
        SupportedVector {
            coeffs: self.coeffs.iter().map(|(&j, &c)| (j, c * s)).collect(),
        }
    }

    pub fn add(&self, other: &SupportedVector) -> SupportedVector {
        let mut out = self.clone();
        for (&j, &c) in &other.coeffs {
            out.add_at(j, c);
        }
        out
    }

    pub fn sub(&self, other: &SupportedVector) -> SupportedVector {
        let mut out = self.clone();
        for (&j, &c) in &other.coeffs {
            out.add_at(j, -c);
        }
        out
    }

    /// Coefficients on `-half_width..=half_width` as a dense vector.
    pub fn window(&self, half_width: usize) -> Vec<C64> {
        let n = half_width as i64;
        (-n..=n).map(|j| self.get(j)).collect()
    }
}

/// A state vector of either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Vector {
    Dense(Vec<C64>),
    Supported(SupportedVector),
}

impl Vector {
    pub fn norm(&self) -> f64 {
        match self {
            Vector::Dense(v) => linalg::vec_norm(v),
            Vector::Supported(v) => v.norm(),
        }
    }

    pub fn zero_like(&self) -> Vector {
        match self {
            Vector::Dense(v) => Vector::Dense(vec![ZERO; v.len()]),
            Vector::Supported(_) => Vector::Supported(SupportedVector::zero()),
        }
    }

    pub fn scale(&self, s: C64) -> Vector {
        match self {
            Vector::Dense(v) => Vector::Dense(linalg::vec_scale(v, s)),
            Vector::Supported(v) => Vector::Supported(v.scale(s)),
        }
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        match (self, other) {
            (Vector::Dense(a), Vector::Dense(b)) if a.len() == b.len() => {
                Ok(Vector::Dense(linalg::vec_add(a, b)))
            }
            (Vector::Dense(a), Vector::Dense(b)) => Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            }),
            (Vector::Supported(a), Vector::Supported(b)) => Ok(Vector::Supported(a.add(b))),
            _ => Err(Error::KindMismatch(
                "cannot mix dense and supported vectors".into(),
            )),
        }
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.add(&other.scale(-ONE))
    }

    pub fn as_dense(&self) -> Option<&[C64]> {
        match self {
            Vector::Dense(v) => Some(v),
            Vector::Supported(_) => None,
        }
    }

    pub fn as_supported(&self) -> Option<&SupportedVector> {
        match self {
            Vector::Supported(v) => Some(v),
            Vector::Dense(_) => None,
        }
    }
}

/// Dense vectors serialize as `[[re, im], ...]`; supported vectors as
/// `{"index": [re, im], ...}` in index order.
impl Serialize for Vector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::{SerializeMap, SerializeSeq};
        match self {
            Vector::Dense(v) => {
                let mut seq = s.serialize_seq(Some(v.len()))?;
                for z in v {
                    seq.serialize_element(&[z.re, z.im])?;
                }
                seq.end()
            }
            Vector::Supported(v) => {
                let mut map = s.serialize_map(Some(v.support_len()))?;
                for (j, z) in v.iter() {
                    map.serialize_entry(&j.to_string(), &[z.re, z.im])?;
                }
                map.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Dense(DenseOperator),
    Shift(ShiftOperator),
}

impl From<DenseOperator> for Operator {
    fn from(op: DenseOperator) -> Self {
        Operator::Dense(op)
    }
}

impl From<ShiftOperator> for Operator {
    fn from(op: ShiftOperator) -> Self {
        Operator::Shift(op)
    }
}

impl Operator {
    pub fn kind(&self) -> &'static str {
        match self {
            Operator::Dense(_) => "dense",
            Operator::Shift(_) => "shift",
        }
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        match (self, v) {
            (Operator::Dense(op), Vector::Dense(x)) => Ok(Vector::Dense(op.apply(x)?)),
            (Operator::Shift(op), Vector::Supported(x)) => Ok(Vector::Supported(op.apply(x))),
            (Operator::Dense(_), Vector::Supported(_)) => Err(Error::KindMismatch(
                "dense operator applied to a supported vector".into(),
            )),
            (Operator::Shift(_), Vector::Dense(_)) => Err(Error::KindMismatch(
                "shift operator applied to a dense vector".into(),
            )),
        }
    }

    pub fn adjoint(&self) -> Operator {
        match self {
            Operator::Dense(op) => Operator::Dense(op.adjoint()),
            Operator::Shift(op) => Operator::Shift(op.adjoint()),
        }
    }

    pub fn inverse(&self) -> Result<Operator> {
        match self {
            Operator::Dense(op) => Ok(Operator::Dense(op.inverse()?)),
            Operator::Shift(op) => Ok(Operator::Shift(op.inverse())),
        }
    }

    pub fn rotate(&self, lambda: C64) -> Result<Operator> {
        match self {
            Operator::Dense(op) => Ok(Operator::Dense(op.rotate(lambda)?)),
            Operator::Shift(op) => Ok(Operator::Shift(op.rotate(lambda)?)),
        }
    }

    /// Dense matrix of the operator: itself for dense operators, the finite
    /// section of half-width `half_width` for shifts.
    pub fn window_matrix(&self, half_width: usize) -> DenseOperator {
        match self {
            Operator::Dense(op) => op.clone(),
            Operator::Shift(op) => op.materialize(half_width),
        }
    }

    pub fn from_json(text: &str) -> Result<Operator> {
        let spec: OperatorSpec = serde_json::from_str(text)?;
        spec.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&OperatorSpec::from(self)).expect("operator spec serializes")
    }
}

/// Wire format of operators:
/// `{"kind":"dense","dim":n,"entries":[[re,im],...]}` (row-major, `n*n` pairs) or
/// `{"kind":"shift","direction":"forward|backward","weight_pos":w,"weight_neg":w,"crossover":k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorSpec {
    Dense {
        dim: usize,
        entries: Vec<[f64; 2]>,
    },
    Shift {
        direction: Direction,
        weight_pos: f64,
        weight_neg: f64,
        crossover: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<[f64; 2]>,
    },
}

impl TryFrom<OperatorSpec> for Operator {
    type Error = Error;

    fn try_from(spec: OperatorSpec) -> Result<Operator> {
        match spec {
            OperatorSpec::Dense { dim, entries } => {
                if entries.len() != dim * dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim * dim,
                        found: entries.len(),
                    });
                }
                let data = entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
                Ok(Operator::Dense(DenseOperator::new(
                    Matrix::from_row_major(dim, dim, data),
                )?))
            }
            OperatorSpec::Shift {
                direction,
                weight_pos,
                weight_neg,
                crossover,
                phase,
            } => {
                let mut op = ShiftOperator::new(direction, weight_pos, weight_neg, crossover)?;
                if let Some([re, im]) = phase {
                    let p = C64::new(re, im);
                    check_unimodular(p)?;
                    op.phase = p;
                }
                Ok(Operator::Shift(op))
            }
        }
    }
}

impl From<&Operator> for OperatorSpec {
    fn from(op: &Operator) -> Self {
        match op {
            Operator::Dense(d) => OperatorSpec::Dense {
                dim: d.dim(),
                entries: d.matrix().as_slice().iter().map(|z| [z.re, z.im]).collect(),
            },
            Operator::Shift(s) => OperatorSpec::Shift {
                direction: s.direction,
                weight_pos: s.weight_pos,
                weight_neg: s.weight_neg,
                crossover: s.crossover,
                phase: (s.phase != ONE).then_some([s.phase.re, s.phase.im]),
            },
        }
    }
}
