use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Real scalar the numerical kernels are written against.
///
/// Expression constants, box bounds and tolerances are stored as `f64` and
/// converted on entry with [`Scalar::lit`].
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
