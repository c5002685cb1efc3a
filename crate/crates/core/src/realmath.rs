//! Real-number backends for the tracker.
//!
//! All tracker math is written against the [`Real`] trait, which is implemented
//! for `f64` and for the 64-bit fixed-point types [`Q40_23`] and [`Q47_16`].
//!
//! Fixed-point arithmetic is exact for add/sub, truncates toward zero for
//! mul/div (through 128-bit intermediates), and never wraps: the checked API
//! returns [`FixedError`], while the operator overloads record the first fault
//! in a thread-local sticky flag (see [`take_fault`]) and saturate so the
//! computation stays deterministic until the caller inspects the flag.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FixedError {
    #[error("fixed-point overflow")]
    Overflow,
    #[error("fixed-point division by zero")]
    DivisionByZero,
    #[error("argument outside the function domain")]
    Domain,
}

/// Layout of a signed 64-bit fixed-point word: one sign bit, then integer and
/// fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QFormat {
    pub integer_bits: u32,
    pub fraction_bits: u32,
}

impl QFormat {
    pub const Q47_16: QFormat = QFormat {
        integer_bits: 47,
        fraction_bits: 16,
    };
    pub const Q40_23: QFormat = QFormat {
        integer_bits: 40,
        fraction_bits: 23,
    };

    pub fn resolution(&self) -> f64 {
        (-(self.fraction_bits as f64)).exp2()
    }

    /// Inclusive `(min, max)` of representable values.
    pub fn range(&self) -> (f64, f64) {
        let hi = (self.integer_bits as f64).exp2();
        (-hi, hi - self.resolution())
    }
}

thread_local! {
    static FAULT: Cell<Option<FixedError>> = const { Cell::new(None) };
}

fn raise(err: FixedError) {
    FAULT.with(|f| {
        if f.get().is_none() {
            f.set(Some(err));
        }
    });
}

/// Returns and clears the first fault raised by operator arithmetic on this thread.
pub fn take_fault() -> Option<FixedError> {
    FAULT.with(|f| f.take())
}

pub fn clear_fault() {
    FAULT.with(|f| f.set(None));
}

/// Signed 64-bit fixed-point number with `FRAC` fraction bits.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed<const FRAC: u32> {
    raw: i64,
}

/// S40.23: the default tracker format.
#[allow(non_camel_case_types)]
pub type Q40_23 = Fixed<23>;

/// S47.16: wider integer range, coarser resolution.
#[allow(non_camel_case_types)]
pub type Q47_16 = Fixed<16>;

// High-precision kernel format: value * 2^60 held in an i128.
const HP_FRAC: u32 = 60;
const HP_ONE: i128 = 1 << HP_FRAC;
const HP_PI: i128 = 3_622_009_729_038_561_421;
const HP_TWO_PI: i128 = 7_244_019_458_077_122_842;
const HP_HALF_PI: i128 = 1_811_004_864_519_280_711;
const HP_QUARTER_PI: i128 = 905_502_432_259_640_355;

fn hp_mul(a: i128, b: i128) -> i128 {
    (a * b) >> HP_FRAC
}

fn hp_div(a: i128, b: i128) -> i128 {
    (a << HP_FRAC) / b
}

fn hp_sqrt(a: i128) -> i128 {
    debug_assert!(a >= 0);
    ((a as u128) << HP_FRAC).isqrt() as i128
}

/// Taylor series for sin on |x| <= pi/2.
fn hp_sin_kernel(x: i128) -> i128 {
    let x2 = hp_mul(x, x);
    let mut term = x;
    let mut sum = x;
    for k in 1..=13i128 {
        term = -hp_mul(term, x2) / ((2 * k) * (2 * k + 1));
        if term == 0 {
            break;
        }
        sum += term;
    }
    sum
}

/// sin of an arbitrary high-precision angle.
fn hp_sin(angle: i128) -> i128 {
    let mut r = angle.rem_euclid(HP_TWO_PI);
    if r > HP_PI {
        r -= HP_TWO_PI;
    }
    if r > HP_HALF_PI {
        r = HP_PI - r;
    } else if r < -HP_HALF_PI {
        r = -HP_PI - r;
    }
    hp_sin_kernel(r)
}

/// atan for z in [0, 1].
fn hp_atan_unit(z: i128) -> i128 {
    // Two half-angle reductions bring z below tan(pi/16).
    let mut z = z;
    for _ in 0..2 {
        let root = hp_sqrt(HP_ONE + hp_mul(z, z));
        z = hp_div(z, HP_ONE + root);
    }
    let z2 = hp_mul(z, z);
    let mut power = z;
    let mut sum = z;
    for k in 1..=16i128 {
        power = -hp_mul(power, z2);
        if power == 0 {
            break;
        }
        sum += power / (2 * k + 1);
    }
    sum * 4
}

impl<const FRAC: u32> Fixed<FRAC> {
    pub const FORMAT: QFormat = QFormat {
        integer_bits: 63 - FRAC,
        fraction_bits: FRAC,
    };
    pub const ZERO: Self = Self { raw: 0 };
    pub const ONE: Self = Self { raw: 1 << FRAC };
    pub const MAX: Self = Self { raw: i64::MAX };
    pub const MIN: Self = Self { raw: i64::MIN };
    pub const PI: Self = Self::from_hp_const(HP_PI);
    pub const TWO_PI: Self = Self::from_hp_const(HP_TWO_PI);
    pub const FRAC_PI_2: Self = Self::from_hp_const(HP_HALF_PI);
    pub const FRAC_PI_4: Self = Self::from_hp_const(HP_QUARTER_PI);

    const fn from_hp_const(v: i128) -> Self {
        let shift = HP_FRAC - FRAC;
        Self {
            raw: ((v + (1 << (shift - 1))) >> shift) as i64,
        }
    }

    pub const fn from_raw(raw: i64) -> Self {
        Self { raw }
    }

    pub const fn raw(self) -> i64 {
        self.raw
    }

    pub fn from_int(v: i64) -> Result<Self, FixedError> {
        v.checked_mul(1 << FRAC)
            .map(Self::from_raw)
            .ok_or(FixedError::Overflow)
    }

    /// Converts with round-half-away-from-zero.
    pub fn from_f64(value: f64) -> Result<Self, FixedError> {
        let scaled = (value * (FRAC as f64).exp2()).round();
        // i64::MAX is not representable in f64; 2^63 is the exclusive bound.
        if !scaled.is_finite() || scaled < -(63f64.exp2()) || scaled >= 63f64.exp2() {
            return Err(FixedError::Overflow);
        }
        Ok(Self { raw: scaled as i64 })
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / (FRAC as f64).exp2()
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, FixedError> {
        self.raw
            .checked_add(rhs.raw)
            .map(Self::from_raw)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, FixedError> {
        self.raw
            .checked_sub(rhs.raw)
            .map(Self::from_raw)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, FixedError> {
        let wide = self.raw as i128 * rhs.raw as i128;
        // Division (not shift) so the result truncates toward zero.
        let q = wide / (1i128 << FRAC);
        i64::try_from(q)
            .map(Self::from_raw)
            .map_err(|_| FixedError::Overflow)
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self, FixedError> {
        if rhs.raw == 0 {
            return Err(FixedError::DivisionByZero);
        }
        let q = ((self.raw as i128) << FRAC) / rhs.raw as i128;
        i64::try_from(q)
            .map(Self::from_raw)
            .map_err(|_| FixedError::Overflow)
    }

    pub fn checked_neg(self) -> Result<Self, FixedError> {
        self.raw
            .checked_neg()
            .map(Self::from_raw)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_abs(self) -> Result<Self, FixedError> {
        self.raw
            .checked_abs()
            .map(Self::from_raw)
            .ok_or(FixedError::Overflow)
    }

    /// Square root, correctly rounded to the nearest representable value.
    pub fn checked_sqrt(self) -> Result<Self, FixedError> {
        if self.raw < 0 {
            return Err(FixedError::Domain);
        }
        let n = (self.raw as u128) << FRAC;
        let mut s = n.isqrt();
        if n - s * s > s {
            s += 1;
        }
        // sqrt of a value < 2^63 with FRAC >= 1 always fits.
        Ok(Self { raw: s as i64 })
    }

    fn to_hp(self) -> i128 {
        (self.raw as i128) << (HP_FRAC - FRAC)
    }

    fn from_hp(v: i128) -> Self {
        let shift = HP_FRAC - FRAC;
        let half = 1i128 << (shift - 1);
        let q = if v >= 0 {
            (v + half) >> shift
        } else {
            -((-v + half) >> shift)
        };
        Self { raw: q as i64 }
    }

    pub fn sin(self) -> Self {
        Self::from_hp(hp_sin(self.to_hp()))
    }

    pub fn cos(self) -> Self {
        Self::from_hp(hp_sin(self.to_hp().rem_euclid(HP_TWO_PI) + HP_HALF_PI))
    }

    /// Four-quadrant arctangent of `self / x`.
    pub fn checked_atan2(self, x: Self) -> Result<Self, FixedError> {
        let (y, x) = (self.raw as i128, x.raw as i128);
        if y == 0 && x == 0 {
            return Err(FixedError::Domain);
        }
        let (ay, ax) = (y.abs(), x.abs());
        let mut angle = if ay <= ax {
            hp_atan_unit((ay << HP_FRAC) / ax)
        } else {
            HP_HALF_PI - hp_atan_unit((ax << HP_FRAC) / ay)
        };
        if x < 0 {
            angle = HP_PI - angle;
        }
        if y < 0 {
            angle = -angle;
        }
        Ok(Self::from_hp(angle))
    }

    /// Nearest integer, ties away from zero.
    pub fn round_to_int(self) -> i64 {
        let half = 1i128 << (FRAC - 1);
        let raw = self.raw as i128;
        let q = if raw >= 0 {
            (raw + half) >> FRAC
        } else {
            -((-raw + half) >> FRAC)
        };
        q as i64
    }

    pub fn floor_to_int(self) -> i64 {
        self.raw >> FRAC
    }

    fn or_fault(result: Result<Self, FixedError>, saturated: impl FnOnce() -> Self) -> Self {
        match result {
            Ok(v) => v,
            Err(e) => {
                raise(e);
                saturated()
            }
        }
    }

    fn saturate_like(negative: bool) -> Self {
        if negative {
            Self::MIN
        } else {
            Self::MAX
        }
    }
}

impl<const FRAC: u32> fmt::Debug for Fixed<FRAC> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(raw={})", self.to_f64(), self.raw)
    }
}

impl<const FRAC: u32> fmt::Display for Fixed<FRAC> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

impl<const FRAC: u32> Add for Fixed<FRAC> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::or_fault(self.checked_add(rhs), || Self::saturate_like(self.raw < 0))
    }
}

impl<const FRAC: u32> Sub for Fixed<FRAC> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::or_fault(self.checked_sub(rhs), || Self::saturate_like(self.raw < 0))
    }
}

impl<const FRAC: u32> Mul for Fixed<FRAC> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::or_fault(self.checked_mul(rhs), || {
            Self::saturate_like((self.raw < 0) != (rhs.raw < 0))
        })
    }
}

impl<const FRAC: u32> Div for Fixed<FRAC> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::or_fault(self.checked_div(rhs), || {
            Self::saturate_like((self.raw < 0) != (rhs.raw < 0))
        })
    }
}

impl<const FRAC: u32> Neg for Fixed<FRAC> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::or_fault(self.checked_neg(), || Self::MAX)
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl<const FRAC: u32> $tr for Fixed<FRAC> {
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    )*};
}

assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

/// Numeric backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Float,
    Q40_23,
    Q47_16,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Float, Backend::Q40_23, Backend::Q47_16];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Float => "float",
            Backend::Q40_23 => "q40_23",
            Backend::Q47_16 => "q47_16",
        }
    }

    pub fn is_fixed(&self) -> bool {
        !matches!(self, Backend::Float)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "float" | "f64" => Ok(Backend::Float),
            "q40_23" | "q40.23" => Ok(Backend::Q40_23),
            "q47_16" | "q47.16" => Ok(Backend::Q47_16),
            other => Err(format!(
                "unknown backend `{other}` (expected float, q40_23 or q47_16)"
            )),
        }
    }
}

/// Scalar abstraction used by all tracker math.
///
/// Fixed-point faults inside these methods are reported via [`take_fault`].
pub trait Real:
    Copy
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    const BACKEND: Backend;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_i64(v: i64) -> Self;
    fn zero() -> Self;
    fn one() -> Self;
    fn pi() -> Self;
    /// Smallest positive step of the representation (machine epsilon for floats).
    fn resolution() -> f64;

    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn abs(self) -> Self;
    fn round_to_int(self) -> i64;
    fn floor_to_int(self) -> i64;

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Real for f64 {
    const BACKEND: Backend = Backend::Float;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn resolution() -> f64 {
        f64::EPSILON
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn round_to_int(self) -> i64 {
        f64::round(self) as i64
    }
    fn floor_to_int(self) -> i64 {
        f64::floor(self) as i64
    }
}

macro_rules! impl_real_fixed {
    ($frac:literal, $backend:expr) => {
        impl Real for Fixed<$frac> {
            const BACKEND: Backend = $backend;

            fn from_f64(v: f64) -> Self {
                Self::or_fault(Fixed::from_f64(v), || Self::saturate_like(v < 0.0))
            }
            fn to_f64(self) -> f64 {
                Fixed::to_f64(self)
            }
            fn from_i64(v: i64) -> Self {
                Self::or_fault(Fixed::from_int(v), || Self::saturate_like(v < 0))
            }
            fn zero() -> Self {
                Self::ZERO
            }
            fn one() -> Self {
                Self::ONE
            }
            fn pi() -> Self {
                Self::PI
            }
            fn resolution() -> f64 {
                Self::FORMAT.resolution()
            }
            fn sqrt(self) -> Self {
                Self::or_fault(self.checked_sqrt(), || Self::ZERO)
            }
            fn sin(self) -> Self {
                Fixed::sin(self)
            }
            fn cos(self) -> Self {
                Fixed::cos(self)
            }
            fn atan2(self, x: Self) -> Self {
                Self::or_fault(self.checked_atan2(x), || Self::ZERO)
            }
            fn abs(self) -> Self {
                Self::or_fault(self.checked_abs(), || Self::MAX)
            }
            fn round_to_int(self) -> i64 {
                Fixed::round_to_int(self)
            }
            fn floor_to_int(self) -> i64 {
                Fixed::floor_to_int(self)
            }
        }
    };
}

impl_real_fixed!(23, Backend::Q40_23);
impl_real_fixed!(16, Backend::Q47_16);
