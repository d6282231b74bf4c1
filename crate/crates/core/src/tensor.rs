//! Small mixed tensors on a 2- or 3-dimensional tangent space.
//!
//! A [`MixedTensor`] is an endomorphism of the tangent space written as an
//! `n x n` matrix. The metric adjoint, the complex structure of a Kähler
//! surface and the degree-one and degree-two trace invariants live here.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

const MAX_DIM: usize = 3;

/// Sign `s` in the identity `Tr Δ(Δ - Δ') = s (Tr JΔ)^2`, which holds for
/// every 2x2 deformation and every compatible pair (g, J).
///
/// Direct expansion with `J = [[0,-1],[1,0]]`, `g = I` and
/// `Δ = [[a,b],[c,d]]` gives `Tr Δ(Δ - Δᵀ) = -(b-c)^2` and `Tr JΔ = b - c`,
/// so the relation carries a minus sign. Basis independence of both sides
/// extends it to arbitrary compatible pairs.
pub const T4_SIGN: i8 = -1;

/// An `n x n` matrix, `n` in {2, 3}, interpreted as an endomorphism.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedTensor<S> {
    n: usize,
    m: [[S; MAX_DIM]; MAX_DIM],
}

impl<S: Scalar> MixedTensor<S> {
    pub fn zeros(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            m: [[S::zero(); MAX_DIM]; MAX_DIM],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut out = Self::zeros(n)?;
        for i in 0..n {
            out.m[i][i] = S::one();
        }
        Ok(out)
    }

    /// Builds a tensor from rows. All rows must have length `rows.len()`.
    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut out = Self::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            out.m[i][..n].copy_from_slice(row);
        }
        Ok(out)
    }

    /// Builds a tensor from `n*n` entries in row-major order.
    pub fn from_row_major(n: usize, entries: &[S]) -> Result<Self> {
        let mut out = Self::zeros(n)?;
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                out.m[i][j] = entries[i * n + j];
            }
        }
        Ok(out)
    }

    /// The elementary matrix with a single one at `(i, j)`.
    pub fn unit(n: usize, i: usize, j: usize) -> Result<Self> {
        let mut out = Self::zeros(n)?;
        out.m[i][j] = S::one();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            out.extend_from_slice(&self.m[i][..self.n]);
        }
        out
    }

    pub fn trace(&self) -> S {
        (0..self.n).fold(S::zero(), |acc, i| acc + self.m[i][i])
    }

    pub fn transpose(&self) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn scale(&self, k: S) -> Self {
        self.map(|x| x * k)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] = f(self.m[i][j]);
            }
        }
        out
    }

    /// `Σ_ij self_ij other_ij`.
    pub fn frobenius_dot(&self, other: &Self) -> S {
        let mut acc = S::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                acc = acc + self.m[i][j] * other.m[i][j];
            }
        }
        acc
    }

    pub fn determinant(&self) -> S {
        let m = &self.m;
        match self.n {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Inverse by the adjugate. Returns `None` for a singular matrix.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == S::zero() {
            return None;
        }
        let m = &self.m;
        let mut adj = *self;
        match self.n {
            2 => {
                adj.m[0][0] = m[1][1];
                adj.m[0][1] = -m[0][1];
                adj.m[1][0] = -m[1][0];
                adj.m[1][1] = m[0][0];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        adj.m[i][j] = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
                    }
                }
            }
        }
        Some(adj.map(|x| x / det))
    }

    /// `g(self x, y)` for a bilinear form `g` represented as a matrix.
    pub fn apply(&self, x: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| (0..self.n).fold(S::zero(), |acc, j| acc + self.m[i][j] * x[j]))
            .collect()
    }

    pub fn is_finite_by(&self, pred: impl Fn(S) -> bool) -> bool {
        self.to_row_major().into_iter().all(pred)
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

impl<S: Real> MixedTensor<S> {
    /// Largest absolute entry.
    pub fn max_abs(&self) -> S {
        self.to_row_major()
            .into_iter()
            .fold(S::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.is_finite_by(|x| x.is_finite())
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

impl<S> Index<(usize, usize)> for MixedTensor<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        assert!(i < self.n && j < self.n, "tensor index out of range");
        &self.m[i][j]
    }
}

impl<S> IndexMut<(usize, usize)> for MixedTensor<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        assert!(i < self.n && j < self.n, "tensor index out of range");
        &mut self.m[i][j]
    }
}

impl<S: Scalar> Add for MixedTensor<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.n, rhs.n, "tensor dimension mismatch");
        let mut out = self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] = self.m[i][j] + rhs.m[i][j];
            }
        }
        out
    }
}

impl<S: Scalar> Sub for MixedTensor<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> Neg for MixedTensor<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<S: Scalar> Mul for MixedTensor<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.n, rhs.n, "tensor dimension mismatch");
        let mut out = self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] =
                    (0..self.n).fold(S::zero(), |acc, k| acc + self.m[i][k] * rhs.m[k][j]);
            }
        }
        out
    }
}

/// A positive-definite symmetric bilinear form on the tangent space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric<S> {
    g: MixedTensor<S>,
    g_inv: MixedTensor<S>,
}

impl<S: Scalar> Metric<S> {
    pub fn new(g: MixedTensor<S>) -> Result<Self> {
        let n = g.dim();
        let scale = g.to_row_major().into_iter().fold(S::zero(), |acc, x| {
            let a = if x < S::zero() { -x } else { x };
            if a > acc {
                a
            } else {
                acc
            }
        });
        for i in 0..n {
            for j in 0..i {
                if !S::close(g[(i, j)], g[(j, i)], scale) {
                    return Err(Error::AsymmetricMetric);
                }
            }
        }
        // Sylvester's criterion on the leading minors.
        if g[(0, 0)] <= S::zero() {
            return Err(Error::NotPositiveDefinite);
        }
        if g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)] <= S::zero() {
            return Err(Error::NotPositiveDefinite);
        }
        if n == 3 && g.determinant() <= S::zero() {
            return Err(Error::NotPositiveDefinite);
        }
        let g_inv = g.inverse().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { g, g_inv })
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(MixedTensor::identity(n)?)
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn matrix(&self) -> &MixedTensor<S> {
        &self.g
    }

    pub fn inverse(&self) -> &MixedTensor<S> {
        &self.g_inv
    }

    /// `g(x, y)`.
    pub fn inner(&self, x: &[S], y: &[S]) -> S {
        let gy = self.g.apply(y);
        x.iter().zip(gy).fold(S::zero(), |acc, (a, b)| acc + *a * b)
    }

    pub fn check_tensor(&self, t: &MixedTensor<S>) -> Result<()> {
        self.g.same_dim(t)
    }

    /// `P^T g P`, the metric expressed in the basis given by the columns of `P`.
    pub fn pull_back(&self, p: &MixedTensor<S>) -> Result<Self> {
        self.check_tensor(p)?;
        Self::new(p.transpose() * self.g * *p)
    }
}

impl<S: Real> Metric<S> {
    /// Lower-triangular `L` with `g = L Lᵀ`.
    fn cholesky(&self) -> MixedTensor<S> {
        let n = self.dim();
        let mut l = MixedTensor::zeros(n).expect("dimension already validated");
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.g[(i, j)];
                for k in 0..j {
                    sum = sum - l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    l[(i, i)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        l
    }
}

/// `Δ' = g⁻¹ Δᵀ g`, the operator satisfying `g(Δx, y) = g(x, Δ'y)`.
pub fn adjoint<S: Scalar>(delta: &MixedTensor<S>, g: &Metric<S>) -> Result<MixedTensor<S>> {
    g.check_tensor(delta)?;
    Ok(*g.inverse() * delta.transpose() * *g.matrix())
}

/// A complex structure `J` on a 2-dimensional tangent space: `J² = -1` and
/// `J` is an isometry of the paired metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexStructure<S> {
    j: MixedTensor<S>,
}

impl<S: Scalar> ComplexStructure<S> {
    /// Validates `j` against `g`.
    pub fn new(j: MixedTensor<S>, g: &Metric<S>) -> Result<Self> {
        if j.dim() != 2 || g.dim() != 2 {
            return Err(Error::InvalidComplexStructure("requires dimension 2"));
        }
        let scale = g
            .matrix()
            .to_row_major()
            .into_iter()
            .fold(S::one(), |acc, x| {
                let a = if x < S::zero() { -x } else { x };
                if a > acc {
                    a
                } else {
                    acc
                }
            });
        let sq = j * j;
        let minus_id = -MixedTensor::identity(2)?;
        let isometry = j.transpose() * *g.matrix() * j;
        for i in 0..2 {
            for k in 0..2 {
                if !S::close(sq[(i, k)], minus_id[(i, k)], S::one()) {
                    return Err(Error::InvalidComplexStructure("J^2 != -1"));
                }
                if !S::close(isometry[(i, k)], g.matrix()[(i, k)], scale) {
                    return Err(Error::InvalidComplexStructure("J is not a g-isometry"));
                }
            }
        }
        Ok(Self { j })
    }

    /// The rotation by +90° in the standard basis, `[[0,-1],[1,0]]`.
    pub fn standard() -> Self {
        let one = S::one();
        let zero = S::zero();
        Self {
            j: MixedTensor::from_rows(&[[zero, -one], [one, zero]]).expect("2x2"),
        }
    }

    pub fn matrix(&self) -> &MixedTensor<S> {
        &self.j
    }

    /// `P⁻¹ J P`, the same structure in the basis given by the columns of `P`.
    pub fn conjugate(&self, p: &MixedTensor<S>) -> Option<Self> {
        Some(Self {
            j: p.inverse()? * self.j * *p,
        })
    }
}

impl<S: Real> ComplexStructure<S> {
    /// Rotation by +90° in the g-orthonormal frame obtained from the
    /// Cholesky factor of `g`.
    pub fn from_metric(g: &Metric<S>) -> Result<Self> {
        if g.dim() != 2 {
            return Err(Error::InvalidComplexStructure("requires dimension 2"));
        }
        // Columns of E = L^{-T} form a g-orthonormal frame.
        let l = g.cholesky();
        let e = l.inverse().ok_or(Error::NotPositiveDefinite)?.transpose();
        let e_inv = l.transpose();
        let j = e * *Self::standard().matrix() * e_inv;
        Self::new(j, g)
    }
}

/// `d1 = Tr Δ`, `d2 = Tr Δ²`, `d3 = Tr ΔΔ'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralInvariants<S> {
    pub d1: S,
    pub d2: S,
    pub d3: S,
}

/// The seven degree ≤ 2 invariants of `Δ` on a Kähler surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KahlerInvariants<S> {
    /// `Tr Δ`
    pub t1: S,
    /// `Tr JΔ`
    pub t2: S,
    /// `Tr Δ(Δ + Δ')`
    pub t3: S,
    /// `Tr Δ(Δ - Δ')`
    pub t4: S,
    /// `Tr JΔ²`
    pub t5: S,
    /// `Tr JΔ'JΔ`
    pub t6: S,
    /// `Tr (JΔ)²`
    pub t7: S,
}

impl<S: Copy> KahlerInvariants<S> {
    pub fn as_array(&self) -> [S; 7] {
        [
            self.t1, self.t2, self.t3, self.t4, self.t5, self.t6, self.t7,
        ]
    }
}

pub fn general_invariants<S: Scalar>(
    delta: &MixedTensor<S>,
    g: &Metric<S>,
) -> Result<GeneralInvariants<S>> {
    let adj = adjoint(delta, g)?;
    Ok(GeneralInvariants {
        d1: delta.trace(),
        d2: (*delta * *delta).trace(),
        d3: (*delta * adj).trace(),
    })
}

pub fn kahler_invariants<S: Scalar>(
    delta: &MixedTensor<S>,
    g: &Metric<S>,
    j: &ComplexStructure<S>,
) -> Result<KahlerInvariants<S>> {
    if delta.dim() != 2 || g.dim() != 2 {
        return Err(Error::RequiresSurface);
    }
    let d = *delta;
    let adj = adjoint(delta, g)?;
    let j = *j.matrix();
    let jd = j * d;
    Ok(KahlerInvariants {
        t1: d.trace(),
        t2: jd.trace(),
        t3: (d * (d + adj)).trace(),
        t4: (d * (d - adj)).trace(),
        t5: (j * d * d).trace(),
        t6: (j * adj * j * d).trace(),
        t7: (jd * jd).trace(),
    })
}

/// Residuals `lhs - rhs` of the reduction relations among the Kähler
/// invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReductionReport<S> {
    /// `t4 - T4_SIGN t2²`
    pub t4: S,
    /// `t5 - t1 t2`
    pub t5: S,
    /// `t6 - (t3/2 - t2²/2 - t1²)`
    pub t6: S,
    /// `t7 - (t3/2 + t2²/2 - t1²)`
    pub t7: S,
    /// Magnitude of the terms entering the relations, for relative checks.
    pub scale: S,
}

impl<S: Scalar> ReductionReport<S> {
    pub fn from_invariants(t: &KahlerInvariants<S>) -> Self {
        let two = S::two();
        let t2sq = t.t2 * t.t2;
        let t1sq = t.t1 * t.t1;
        let sign = if T4_SIGN < 0 { -S::one() } else { S::one() };
        let abs = |x: S| if x < S::zero() { -x } else { x };
        Self {
            t4: t.t4 - sign * t2sq,
            t5: t.t5 - t.t1 * t.t2,
            t6: t.t6 - (t.t3 / two - t2sq / two - t1sq),
            t7: t.t7 - (t.t3 / two + t2sq / two - t1sq),
            scale: abs(t.t3) + t2sq + t1sq + abs(t.t1 * t.t2),
        }
    }

    pub fn residuals(&self) -> [S; 4] {
        [self.t4, self.t5, self.t6, self.t7]
    }

    /// True when every residual is within `tol` relative to [`Self::scale`].
    pub fn holds(&self, tol: S) -> bool {
        let abs = |x: S| if x < S::zero() { -x } else { x };
        let bound = tol
            * if self.scale > S::one() {
                self.scale
            } else {
                S::one()
            };
        self.residuals().iter().all(|r| abs(*r) <= bound)
    }
}

pub fn verify_reduction_relations<S: Scalar>(
    delta: &MixedTensor<S>,
    g: &Metric<S>,
    j: &ComplexStructure<S>,
) -> Result<ReductionReport<S>> {
    Ok(ReductionReport::from_invariants(&kahler_invariants(
        delta, g, j,
    )?))
}
