//! Scalar abstraction so the math core runs in f32 or f64.
//!
//! Training code typically instantiates `f32`; geometry oracles and gradient
//! checks use `f64`. Random draws always happen in f64 and are converted,
//! which keeps RNG streams identical across scalar types.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar dtype tag used by the checkpoint format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Dtype::F32),
            "f64" => Some(Dtype::F64),
            _ => None,
        }
    }
}

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    fn dtype() -> Dtype;

    /// Lossless-enough conversion from f64 (rounds for f32).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 -> Real conversion")
    }

    fn to_f64_(self) -> f64 {
        self.to_f64().expect("Real -> f64 conversion")
    }
}

impl Real for f32 {
    fn dtype() -> Dtype {
        Dtype::F32
    }
}

impl Real for f64 {
    fn dtype() -> Dtype {
        Dtype::F64
    }
}
