//! Dynamics of spherical and planar ball-bearing systems.
//!
//! Two nonholonomic mechanisms are covered: a dynamically nonsymmetric
//! outer sphere rolling without slipping over `n` homogeneous balls that
//! themselves roll around a fixed inner sphere, and its planar limit — a
//! plate carried without slipping by `n` balls rolling on a fixed plane.
//! The crate provides the reduced equations of motion, their first
//! integrals and invariant-measure densities, full-configuration
//! reconstruction, an independent Lagrange-multiplier formulation of the
//! planar system, fixed-step integrators with variational (tangent-flow)
//! propagation, and a verification layer that turns the conservation and
//! measure statements into executable drift checks.
//!
//! Everything is generic over the scalar type through [`Real`]
//! (`f64` is the validated default; `f32` compiles and runs at looser
//! tolerances). Concrete `f64` aliases for the math kernel live at the
//! crate root.

pub mod geometry;
pub mod integrators;
pub mod linalg;
pub mod oracle;
pub mod planar;
pub mod rng;
pub mod scalar;
pub mod spherical;
pub mod verification;

pub use scalar::{real, Real};

pub use geometry::{
    commutator, gyro_jacobian_sym, hat, projector, vee, GeometryError, Mat3, RotMat3, SkewMat3,
    SymMat3, UnitVec3, Vec3,
};

/// `f64` vector, the working scalar for tests and the CLI.
pub type Vec3f = Vec3<f64>;
/// `f64` dense 3x3 matrix.
pub type Mat3f = Mat3<f64>;
/// `f64` symmetric matrix.
pub type SymMat3f = SymMat3<f64>;
/// `f64` rotation matrix.
pub type RotMat3f = RotMat3<f64>;
/// `f64` unit vector.
pub type UnitVec3f = UnitVec3<f64>;
