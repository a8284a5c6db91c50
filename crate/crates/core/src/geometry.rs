//! Small fixed-size vector/matrix kernel: the hat/vee isomorphism between
//! skew matrices and vectors, orthogonal projectors, tagged matrix kinds
//! (symmetric, skew, rotation), and the algebraic identities the
//! verification layer leans on.

use core::ops::{Add, Deref, Div, Index, Mul, Neg, Sub};

use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, tolerance {tol:e})")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("matrix is not antisymmetric (max residual {residual:e}, tolerance {tol:e})")]
    NotAntisymmetric { residual: f64, tol: f64 },
    #[error(
        "matrix is not a rotation (orthogonality error {ortho:e}, det {det}, tolerance {tol:e})"
    )]
    NotRotation { ortho: f64, det: f64, tol: f64 },
    #[error("vector norm {norm} too far from 1 to renormalize")]
    NotUnit { norm: f64 },
    #[error("matrix is numerically singular (det {det:e})")]
    Singular { det: f64 },
}

fn to_f64<S: Real>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

/// Column vector in R^3. Units are context-dependent: rad/s for angular
/// velocities, dimensionless for direction vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Vec3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_array(a: [S; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Self) -> S {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> S {
        self.dot(self)
    }

    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    /// Outer product `self ⊗ other`.
    pub fn outer(self, other: Self) -> Mat3<S> {
        let a = self.to_array();
        let b = other.to_array();
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i] * b[j];
            }
        }
        Mat3::from_rows(m)
    }

    pub fn norm_inf(self) -> S {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<S: Real> Add for Vec3<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<S: Real> Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<S: Real> Neg for Vec3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Real> Mul<S> for Vec3<S> {
    type Output = Self;
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<S: Real> Div<S> for Vec3<S> {
    type Output = Self;
    fn div(self, s: S) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<S> Index<usize> for Vec3<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

// ---------------------------------------------------------------------------
// Mat3
// ---------------------------------------------------------------------------

/// Dense 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<S> {
    m: [[S; 3]; 3],
}

impl<S: Real> Mat3<S> {
    pub fn from_rows(m: [[S; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn zero() -> Self {
        Self {
            m: [[S::zero(); 3]; 3],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.m[i][i] = S::one();
        }
        m
    }

    pub fn diagonal(d: Vec3<S>) -> Self {
        let mut m = Self::zero();
        m.m[0][0] = d.x;
        m.m[1][1] = d.y;
        m.m[2][2] = d.z;
        m
    }

    pub fn rows(&self) -> &[[S; 3]; 3] {
        &self.m
    }

    pub fn row(&self, i: usize) -> Vec3<S> {
        Vec3::from_array(self.m[i])
    }

    pub fn col(&self, j: usize) -> Vec3<S> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn from_cols(c0: Vec3<S>, c1: Vec3<S>, c2: Vec3<S>) -> Self {
        Self::from_rows([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> S {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> S {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = S::zero();
                for (k, row) in other.m.iter().enumerate() {
                    acc += self.m[i][k] * row[j];
                }
                r.m[i][j] = acc;
            }
        }
        r
    }

    pub fn scale(&self, s: S) -> Self {
        let mut r = *self;
        for row in r.m.iter_mut() {
            for entry in row.iter_mut() {
                *entry *= s;
            }
        }
        r
    }

    /// Largest absolute entry.
    pub fn norm_inf(&self) -> S {
        let mut best = S::zero();
        for row in &self.m {
            for entry in row {
                best = best.max(entry.abs());
            }
        }
        best
    }

    /// Max-norm of the difference `self - other`.
    pub fn max_diff(&self, other: &Self) -> S {
        (*self - *other).norm_inf()
    }

    fn asymmetry(&self) -> S {
        self.max_diff(&self.transpose())
    }

    /// Largest entry of `self + self^T`, zero iff antisymmetric.
    fn symmetric_residual(&self) -> S {
        (*self + self.transpose()).norm_inf()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|x| x.is_finite())
    }

    pub fn to_row_major(&self) -> [S; 9] {
        let m = &self.m;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn from_row_major(a: &[S]) -> Self {
        assert_eq!(a.len(), 9, "row-major 3x3 slice must have 9 entries");
        Self::from_rows([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]])
    }
}

impl<S: Real> Add for Mat3<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut r = self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += rhs.m[i][j];
            }
        }
        r
    }
}

impl<S: Real> Sub for Mat3<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut r = self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] -= rhs.m[i][j];
            }
        }
        r
    }
}

impl<S: Real> Neg for Mat3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-S::one())
    }
}

impl<S> Index<(usize, usize)> for Mat3<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.m[i][j]
    }
}

/// Commutator `[a, b] = a b - b a`.
pub fn commutator<S: Real>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    a.mul_mat(b) - b.mul_mat(a)
}

// ---------------------------------------------------------------------------
// Tagged matrix kinds
// ---------------------------------------------------------------------------

/// Symmetric 3x3 matrix, checked at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat3<S>(Mat3<S>);

impl<S: Real> SymMat3<S> {
    pub fn new(m: Mat3<S>) -> Result<Self, GeometryError> {
        let asym = m.asymmetry();
        if asym > S::algebra_tol() {
            return Err(GeometryError::NotSymmetric {
                asymmetry: to_f64(asym),
                tol: to_f64(S::algebra_tol()),
            });
        }
        Ok(Self(m))
    }

    /// Symmetrize and wrap; for results of exact-symmetric arithmetic where
    /// roundoff may leave a sub-tolerance skew part.
    pub fn from_symmetric_expr(m: Mat3<S>) -> Self {
        let half = real::<S>(0.5);
        Self((m + m.transpose()).scale(half))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn diagonal(d: Vec3<S>) -> Self {
        Self(Mat3::diagonal(d))
    }

    pub fn mat(&self) -> &Mat3<S> {
        &self.0
    }

    pub fn into_mat(self) -> Mat3<S> {
        self.0
    }

    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        self.0.mul_vec(v)
    }

    pub fn det(&self) -> S {
        self.0.det()
    }

    pub fn scale(&self, s: S) -> Self {
        Self(self.0.scale(s))
    }

    /// Solve `self * x = b` by the closed-form adjugate; the matrices this
    /// library inverts (modified inertia operators) are positive definite,
    /// so a vanishing determinant signals corrupted input.
    pub fn solve(&self, b: Vec3<S>) -> Result<Vec3<S>, GeometryError> {
        let m = self.0.rows();
        let det = self.0.det();
        if det.abs() <= S::epsilon() * self.0.norm_inf().powi(3).max(S::epsilon()) {
            return Err(GeometryError::Singular { det: to_f64(det) });
        }
        // Adjugate rows (cofactor transpose).
        let adj = Mat3::from_rows([
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ]);
        Ok(adj.mul_vec(b) / det)
    }
}

impl<S: Real> Add for SymMat3<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl<S: Real> Sub for SymMat3<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl<S> Deref for SymMat3<S> {
    type Target = Mat3<S>;
    fn deref(&self) -> &Mat3<S> {
        &self.0
    }
}

/// Antisymmetric 3x3 matrix, checked at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMat3<S>(Mat3<S>);

impl<S: Real> SkewMat3<S> {
    pub fn new(m: Mat3<S>) -> Result<Self, GeometryError> {
        let res = m.symmetric_residual();
        if res > S::algebra_tol() {
            return Err(GeometryError::NotAntisymmetric {
                residual: to_f64(res),
                tol: to_f64(S::algebra_tol()),
            });
        }
        Ok(Self(m))
    }

    pub fn mat(&self) -> &Mat3<S> {
        &self.0
    }

    pub fn into_mat(self) -> Mat3<S> {
        self.0
    }

    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        self.0.mul_vec(v)
    }

    /// Inverse of [`hat`]; exact for constructed skew matrices.
    pub fn axis(&self) -> Vec3<S> {
        Vec3::new(self.0.m[2][1], self.0.m[0][2], self.0.m[1][0])
    }
}

impl<S> Deref for SkewMat3<S> {
    type Target = Mat3<S>;
    fn deref(&self) -> &Mat3<S> {
        &self.0
    }
}

/// Proper rotation, orthogonal with det +1 within a configurable tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat3<S>(Mat3<S>);

impl<S: Real> RotMat3<S> {
    pub fn new(m: Mat3<S>) -> Result<Self, GeometryError> {
        Self::new_with_tol(m, S::rotation_tol())
    }

    pub fn new_with_tol(m: Mat3<S>, tol: S) -> Result<Self, GeometryError> {
        let ortho = Self::orthogonality_error_of(&m);
        let det = m.det();
        if ortho > tol || (det - S::one()).abs() > tol {
            return Err(GeometryError::NotRotation {
                ortho: to_f64(ortho),
                det: to_f64(det),
                tol: to_f64(tol),
            });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Rotation by `angle` about a unit axis.
    pub fn from_axis_angle(axis: &UnitVec3<S>, angle: S) -> Self {
        let k = hat(axis.vector()).into_mat();
        let k2 = k.mul_mat(&k);
        let m = Mat3::identity() + k.scale(angle.sin()) + k2.scale(S::one() - angle.cos());
        Self(m)
    }

    pub fn mat(&self) -> &Mat3<S> {
        &self.0
    }

    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        self.0.mul_vec(v)
    }

    pub fn mul_rot(&self, other: &Self) -> Self {
        Self(self.0.mul_mat(&other.0))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    fn orthogonality_error_of(m: &Mat3<S>) -> S {
        (m.transpose().mul_mat(m) - Mat3::identity()).norm_inf()
    }

    /// Max-norm of `g^T g - E`.
    pub fn orthogonality_error(&self) -> S {
        Self::orthogonality_error_of(&self.0)
    }

    /// Gram-Schmidt on the columns, restoring exact orthonormality.
    pub fn reorthonormalized(&self) -> Self {
        let c0 = self.0.col(0);
        let c0 = c0 / c0.norm();
        let c1 = self.0.col(1);
        let c1 = c1 - c0 * c0.dot(c1);
        let c1 = c1 / c1.norm();
        let c2 = c0.cross(c1);
        Self(Mat3::from_cols(c0, c1, c2))
    }
}

impl<S> Deref for RotMat3<S> {
    type Target = Mat3<S>;
    fn deref(&self) -> &Mat3<S> {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// UnitVec3
// ---------------------------------------------------------------------------

/// Unit vector on S^2. Renormalizes on construction; rejects only inputs
/// whose norm deviates enough to signal a corrupted state rather than
/// integration drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3<S>(Vec3<S>);

impl<S: Real> UnitVec3<S> {
    pub fn new(v: Vec3<S>) -> Result<Self, GeometryError> {
        let norm = v.norm();
        if (norm - S::one()).abs() > S::corruption_tol() {
            return Err(GeometryError::NotUnit { norm: to_f64(norm) });
        }
        Ok(Self(v / norm))
    }

    /// Normalize an arbitrary nonzero vector onto S^2.
    pub fn normalize(v: Vec3<S>) -> Result<Self, GeometryError> {
        let norm = v.norm();
        if !norm.is_finite() || norm < S::epsilon().sqrt() {
            return Err(GeometryError::NotUnit { norm: to_f64(norm) });
        }
        Ok(Self(v / norm))
    }

    pub fn vector(&self) -> Vec3<S> {
        self.0
    }
}

impl<S> Deref for UnitVec3<S> {
    type Target = Vec3<S>;
    fn deref(&self) -> &Vec3<S> {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Hat map: the skew matrix with `hat(a) v = a x v`.
pub fn hat<S: Real>(a: Vec3<S>) -> SkewMat3<S> {
    let z = S::zero();
    SkewMat3(Mat3::from_rows([
        [z, -a.z, a.y],
        [a.z, z, -a.x],
        [-a.y, a.x, z],
    ]))
}

/// Vee map: extract the axis of a matrix that is antisymmetric within
/// tolerance. Rejects matrices with a larger symmetric part.
pub fn vee<S: Real>(m: &Mat3<S>) -> Result<Vec3<S>, GeometryError> {
    Ok(SkewMat3::new(*m)?.axis())
}

/// Orthogonal projector onto the plane orthogonal to `gamma`:
/// `E - gamma (x) gamma`. Idempotent, kernel spanned by `gamma`.
pub fn projector<S: Real>(gamma: &UnitVec3<S>) -> SymMat3<S> {
    let g = gamma.vector();
    SymMat3(Mat3::identity() - g.outer(g))
}

/// Symmetric part of the Jacobian of `w -> (A w) x w` at `omega`;
/// equals `(A hat(omega) - hat(omega) A) / 2` for symmetric `A`.
pub fn gyro_jacobian_sym<S: Real>(a: &SymMat3<S>, omega: Vec3<S>) -> SymMat3<S> {
    let w = hat(omega);
    let comm = commutator(a.mat(), w.mat());
    SymMat3(comm.scale(real(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type V = Vec3<f64>;

    fn vec(x: f64, y: f64, z: f64) -> V {
        Vec3::new(x, y, z)
    }

    #[test]
    fn hat_matches_cross_product() {
        let a = vec(0.0, 0.0, 1.0);
        let v = vec(1.0, 0.0, 0.0);
        let hv = hat(a).mul_vec(v);
        assert_eq!(hv, vec(0.0, 1.0, 0.0)); // z x x = y
    }

    #[test]
    fn hat_of_zero_is_zero_matrix() {
        assert_eq!(hat(V::zero()).into_mat(), Mat3::zero());
    }

    #[test]
    fn vee_round_trip() {
        let a = vec(1.5, -2.0, 0.25);
        let back = vee(hat(a).mat()).unwrap();
        assert_eq!(back, a);
        let b = vec(3.0, 4.0, 5.0);
        assert_eq!(hat(b).axis(), b);
        assert_eq!(vee(&Mat3::zero()).unwrap(), V::zero());
    }

    #[test]
    fn vee_rejects_symmetric_input() {
        let err = vee(&Mat3::<f64>::identity());
        assert!(matches!(err, Err(GeometryError::NotAntisymmetric { .. })));
    }

    #[test]
    fn projector_axis_aligned() {
        let g = UnitVec3::new(vec(0.0, 0.0, 1.0)).unwrap();
        let p = projector(&g);
        assert_eq!(*p.mat(), Mat3::diagonal(vec(1.0, 1.0, 0.0)));
    }

    #[test]
    fn projector_annihilates_its_axis() {
        let g = UnitVec3::new(vec(1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0)).unwrap();
        let p = projector(&g);
        assert!(p.mul_vec(g.vector()).norm() < 1e-15);
        assert!((p.trace() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_vec_renormalizes_drift_but_rejects_corruption() {
        let near = vec(1.0 + 1e-6, 0.0, 0.0);
        let u = UnitVec3::new(near).unwrap();
        assert!((u.vector().norm() - 1.0).abs() < 1e-15);
        assert!(UnitVec3::new(vec(2.0, 0.0, 0.0)).is_err());
        assert!(UnitVec3::normalize(V::zero()).is_err());
    }

    #[test]
    fn rotation_axis_angle_is_orthogonal() {
        let axis = UnitVec3::normalize(vec(1.0, 2.0, -0.5)).unwrap();
        let g = RotMat3::from_axis_angle(&axis, 0.7);
        assert!(g.orthogonality_error() < 1e-15);
        assert!((g.mat().det() - 1.0).abs() < 1e-15);
        // The axis is fixed.
        assert!((g.mul_vec(axis.vector()) - axis.vector()).norm() < 1e-15);
    }

    #[test]
    fn reorthonormalization_restores_drifted_rotation() {
        let axis = UnitVec3::normalize(vec(0.3, -1.0, 0.2)).unwrap();
        let g = RotMat3::from_axis_angle(&axis, 1.2);
        let drifted = *g.mat() + Mat3::identity().scale(1e-7);
        let fixed = RotMat3(drifted).reorthonormalized();
        assert!(fixed.orthogonality_error() < 1e-15);
    }

    /// Finite-difference Jacobian of `w -> (A w) x w`, the independent check
    /// for `gyro_jacobian_sym`.
    fn fd_jacobian(a: &Mat3<f64>, omega: V, step: f64) -> Mat3<f64> {
        let f = |w: V| a.mul_vec(w).cross(w);
        let mut j = Mat3::zero();
        for col in 0..3 {
            let mut e = [0.0; 3];
            e[col] = step;
            let e = Vec3::from_array(e);
            let diff = (f(omega + e) - f(omega - e)) / (2.0 * step);
            for row in 0..3 {
                let mut rows = *j.rows();
                rows[row][col] = diff[row];
                j = Mat3::from_rows(rows);
            }
        }
        j
    }

    #[test]
    fn gyro_jacobian_identity_inertia_vanishes() {
        let a = SymMat3::identity();
        let j = gyro_jacobian_sym(&a, vec(0.4, -0.7, 2.0));
        assert!(j.norm_inf() < 1e-15);
    }

    #[test]
    fn gyro_jacobian_matches_finite_differences() {
        let a = SymMat3::diagonal(vec(1.0, 2.0, 3.0));
        let omega = vec(0.0, 0.0, 1.0);
        let sym = gyro_jacobian_sym(&a, omega);
        let j = fd_jacobian(a.mat(), omega, 1e-6);
        let fd_sym = (j + j.transpose()).scale(0.5);
        assert!(sym.max_diff(&fd_sym) < 1e-8);
    }

    #[test]
    fn cross_term_factors_through_commutator() {
        // (A w) x w = [A, hat(w)] w for symmetric A; checked over random data.
        let mut rng = crate::rng::SplitMix64::new(0x9e3779b97f4a7c15);
        for _ in 0..100 {
            let a = random_sym(&mut rng, 10.0);
            let w = vec(
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
            );
            let lhs = a.mul_vec(w).cross(w);
            let rhs = commutator(a.mat(), hat(w).mat()).mul_vec(w);
            assert!((lhs - rhs).norm_inf() < 1e-12);
        }
    }

    fn random_sym(rng: &mut crate::rng::SplitMix64, scale: f64) -> SymMat3<f64> {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v = rng.uniform(-scale, scale);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        SymMat3::new(Mat3::from_rows(m)).unwrap()
    }

    #[test]
    fn sym_solve_recovers_rhs() {
        let a = SymMat3::new(Mat3::from_rows([
            [4.0, 1.0, 0.5],
            [1.0, 3.0, -0.2],
            [0.5, -0.2, 5.0],
        ]))
        .unwrap();
        let x = vec(0.3, -1.2, 0.8);
        let b = a.mul_vec(x);
        let solved = a.solve(b).unwrap();
        assert!((solved - x).norm_inf() < 1e-13);
    }

    #[test]
    fn sym_constructor_rejects_asymmetric() {
        let m = Mat3::from_rows([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(SymMat3::new(m).is_err());
    }

    #[test]
    fn f32_kernel_round_trips() {
        let a = Vec3::<f32>::new(0.5, -0.25, 2.0);
        assert_eq!(vee(hat(a).mat()).unwrap(), a);
        let g = UnitVec3::new(Vec3::<f32>::new(0.0, 1.0, 0.0)).unwrap();
        assert!((projector(&g).trace() - 2.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn hat_acts_as_cross_product(
            ax in -10.0..10.0f64, ay in -10.0..10.0f64, az in -10.0..10.0f64,
            bx in -10.0..10.0f64, by in -10.0..10.0f64, bz in -10.0..10.0f64,
        ) {
            let a = vec(ax, ay, az);
            let b = vec(bx, by, bz);
            let lhs = hat(a).mul_vec(b);
            let rhs = a.cross(b);
            prop_assert!((lhs - rhs).norm_inf() < 1e-12);
        }

        #[test]
        fn projector_is_idempotent_with_trace_two(
            x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64,
        ) {
            prop_assume!(x * x + y * y + z * z > 1e-3);
            let g = UnitVec3::normalize(vec(x, y, z)).unwrap();
            let p = projector(&g);
            let p2 = p.mat().mul_mat(p.mat());
            prop_assert!(p2.max_diff(p.mat()) < 1e-14);
            prop_assert!((p.trace() - 2.0).abs() < 1e-14);
        }
    }
}
