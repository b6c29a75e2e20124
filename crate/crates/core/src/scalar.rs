//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Floating-point scalar the sampler is generic over (`f32` or `f64`).
///
/// Beyond the `num-traits` arithmetic this carries the handful of special
/// functions and primitive random draws that `num-traits` does not provide.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + for<'a> Sum<&'a Self>
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self;

    /// Draw from N(0, 1).
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from U[0, 1).
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from Gamma(shape, 1). `None` when `shape` is not a valid shape.
    fn gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Option<Self>;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn ln_gamma(self) -> Self {
                statrs::function::gamma::ln_gamma(self as f64) as $t
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            fn gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Option<Self> {
                Gamma::new(shape, 1.0).ok().map(|g| g.sample(rng))
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
