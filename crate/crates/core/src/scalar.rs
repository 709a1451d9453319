use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar the geometry and scoring math is written against.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
