use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point type used for probabilities, rewards and values: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for probability row sums.
    fn prob_tolerance() -> Self;

    /// Converts a literal; every literal this crate uses is representable.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }
}

impl Scalar for f32 {
    fn prob_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn prob_tolerance() -> Self {
        1e-9
    }
}
