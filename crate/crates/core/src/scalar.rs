//! Scalar abstractions shared by the exact and floating-point layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Floating-point scalar for the spectral layer: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Coefficient ring of a group ring: a commutative *-ring that can be
/// projected to `ℂ` in double precision.
pub trait Coefficient:
    Clone + PartialEq + Debug + Zero + One + std::ops::Neg<Output = Self> + Send + Sync
{
    fn conj(&self) -> Self;
    fn to_complex(&self) -> Complex<f64>;
    /// `true` iff the imaginary part vanishes and the real part is an integer.
    fn is_integer(&self) -> bool;
    fn is_real(&self) -> bool;

    fn modulus(&self) -> f64 {
        self.to_complex().norm()
    }
}

/// Exact Gaussian rationals over any integer type (`i64`, [`BigInt`], ...).
impl<I> Coefficient for Complex<Ratio<I>>
where
    I: Integer + Clone + Signed + ToPrimitive + Debug + Send + Sync,
    Ratio<I>: ToPrimitive,
{
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }

    fn to_complex(&self) -> Complex<f64> {
        Complex::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    fn is_integer(&self) -> bool {
        self.im.is_zero() && self.re.is_integer()
    }

    fn is_real(&self) -> bool {
        self.im.is_zero()
    }
}

/// Floating complex coefficients, for callers that do not need exactness.
impl Coefficient for Complex<f64> {
    fn conj(&self) -> Self {
        Complex::conj(self)
    }

    fn to_complex(&self) -> Complex<f64> {
        *self
    }

    fn is_integer(&self) -> bool {
        self.im == 0.0 && self.re.fract() == 0.0
    }

    fn is_real(&self) -> bool {
        self.im == 0.0
    }
}

/// Natural log of a (possibly huge) positive integer.
pub fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().map(f64::ln).unwrap_or(f64::NAN) + shift as f64 * std::f64::consts::LN_2
}

/// Parse `"p/q"`, `"p"` or a decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Option<Ratio<BigInt>> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Ratio::new(p, q));
    }
    if let Ok(p) = s.parse::<BigInt>() {
        return Some(Ratio::from_integer(p));
    }
    let (int, frac) = s.split_once('.')?;
    let negative = int.trim_start().starts_with('-');
    let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
    let mut num: BigInt = digits.parse().ok()?;
    if negative {
        num = -num;
    }
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(Ratio::new(num, den))
}

pub fn rational_to_string(r: &Ratio<BigInt>) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `"p/q"` for real values, `"a+bi"` style otherwise.
pub fn gaussian_to_string(z: &Complex<Ratio<BigInt>>) -> String {
    if z.im.is_zero() {
        return rational_to_string(&z.re);
    }
    let sign = if z.im.is_negative() { "-" } else { "+" };
    format!(
        "{}{}{}i",
        rational_to_string(&z.re),
        sign,
        rational_to_string(&z.im.abs())
    )
}
