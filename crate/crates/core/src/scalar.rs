//! Scalar abstraction: the whole library is generic over the floating-point
//! type through [`Real`], with `f64` as the validated default.

use core::fmt::{Debug, Display};
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable throughout the library.
///
/// Construction-time tolerances live here because they scale with the
/// precision of the scalar, not with the problem data.
pub trait Real:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + DivAssign + Debug + Display + 'static
{
    /// Absolute tolerance for exact-algebra checks (symmetry, antisymmetry).
    fn algebra_tol() -> Self;
    /// Absolute tolerance for unit-norm checks after construction.
    fn unit_tol() -> Self;
    /// Default tolerance for rotation-matrix orthogonality; integrated
    /// rotations drift, so this is looser than the algebra tolerance.
    fn rotation_tol() -> Self;
    /// Deviation above which a unit vector or rotation is treated as
    /// corrupted rather than drifted.
    fn corruption_tol() -> Self;
}

impl Real for f64 {
    fn algebra_tol() -> Self {
        1e-14
    }
    fn unit_tol() -> Self {
        1e-12
    }
    fn rotation_tol() -> Self {
        1e-9
    }
    fn corruption_tol() -> Self {
        1e-3
    }
}

impl Real for f32 {
    fn algebra_tol() -> Self {
        1e-5
    }
    fn unit_tol() -> Self {
        1e-5
    }
    fn rotation_tol() -> Self {
        1e-4
    }
    fn corruption_tol() -> Self {
        1e-2
    }
}

/// Shorthand for converting an `f64` literal into the working scalar.
#[inline]
pub fn real<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("literal not representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_convert() {
        assert_eq!(real::<f64>(0.5), 0.5);
        assert_eq!(real::<f32>(0.5), 0.5f32);
    }

    #[test]
    fn tolerances_are_ordered() {
        assert!(f64::algebra_tol() < f64::unit_tol());
        assert!(f64::unit_tol() < f64::rotation_tol());
        assert!(f64::rotation_tol() < f64::corruption_tol());
    }
}
