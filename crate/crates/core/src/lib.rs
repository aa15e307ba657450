//! Inverse-optimal feedback design from a control Lyapunov function.
//!
//! Given a control-affine system ẋ = f(x) + Gᵀ(x)u + Ḡᵀ(x)w and a candidate
//! value function V, the [`design`] module constructs the feedback
//! u* = −½ R⁻¹ G ∇V, the worst-case disturbance w* = (1/2ξ) S⁻¹ Ḡ ∇V, and the
//! state cost q chosen so that (V, u*, w*) satisfies the stationary
//! Hamilton-Jacobi equation identically. [`verify`] certifies the construction
//! numerically (residual scans, admissibility, value identity, Riccati oracle),
//! and [`sim`] integrates the closed loop with trajectory recording.
//!
//! Everything numerical is generic over the scalar type through [`Scalar`];
//! concrete aliases for `f64` (the working precision of the test suite and the
//! CLI) live at the crate root.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub mod clf;
pub mod design;
pub mod model;
pub mod numerics;
pub mod sim;
pub mod verify;

/// Floating-point scalar the whole crate is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal into the scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal must be representable")
    }

    /// Lossy view of the scalar as `f64`, used for diagnostics.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}

pub type Matrix64 = numerics::Matrix<f64>;
pub type Vector64 = numerics::Vector<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type Vector32 = numerics::Vector<f32>;
pub type Model64 = model::ControlAffineModel<f64>;
pub type Clf64 = clf::Clf<f64>;
pub type Problem64 = design::DesignedProblem<f64>;
pub type Trajectory64 = sim::Trajectory<f64>;
