//! Complex scalar types usable as tensor elements.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Mul};

use num_complex::{Complex32, Complex64};

/// Floating point precision of the complex scalars stored in a tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    /// Bytes occupied by one complex element.
    pub fn bytes(self) -> u64 {
        match self {
            Precision::Single => 8,
            Precision::Double => 16,
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precision::Single => f.write_str("single"),
            Precision::Double => f.write_str("double"),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "f32" | "complex64" => Ok(Precision::Single),
            "double" | "f64" | "complex128" => Ok(Precision::Double),
            other => Err(format!("unknown precision '{other}'")),
        }
    }
}

/// Element type of a [`Tensor`](crate::Tensor).
///
/// Implemented for `Complex32` (single) and `Complex64` (double).
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + AddAssign
    + Mul<Output = Self>
{
    const PRECISION: Precision;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_c64(z: Complex64) -> Self;
    fn to_c64(self) -> Complex64;

    fn bytes() -> u64 {
        Self::PRECISION.bytes()
    }
}

impl Scalar for Complex32 {
    const PRECISION: Precision = Precision::Single;

    fn zero() -> Self {
        Complex32::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex32::new(1.0, 0.0)
    }
    fn from_c64(z: Complex64) -> Self {
        Complex32::new(z.re as f32, z.im as f32)
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

impl Scalar for Complex64 {
    const PRECISION: Precision = Precision::Double;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_c64(z: Complex64) -> Self {
        z
    }
    fn to_c64(self) -> Complex64 {
        self
    }
}
