#[allow(unused_imports)]
pub(crate) use alloc::{boxed::Box, format, string::String, vec, vec::Vec};
#[allow(unused_imports)]
pub(crate) use num_traits::Float;

pub(crate) use num_complex::Complex64 as C64;

pub(crate) const SQRT_PI: f64 = 1.772_453_850_905_516;
