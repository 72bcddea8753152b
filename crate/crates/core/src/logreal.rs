//! Extended-range reals stored as `(sign, ln|x|)`.
//!
//! Magnitudes like `exp(-beta * n^2)` leave the `f64` range after a few
//! dozen periods; every quantity that can get that small is carried here.

use core::cmp::Ordering;
use core::ops::{Add, Div, Mul, Neg, Sub};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`. Returns `-inf` when they are equal.
#[inline]
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b || a.is_nan() || b.is_nan());
    if b == f64::NEG_INFINITY {
        return a;
    }
    let d = b - a;
    if d == 0.0 {
        return f64::NEG_INFINITY;
    }
    // log1mexp, switching branches at -ln 2 for accuracy
    if d > -core::f64::consts::LN_2 {
        a + (-(d.exp_m1())).ln()
    } else {
        a + (-(d.exp())).ln_1p()
    }
}

/// `ln(sum_i e^{x_i})`, stable for any mix of finite values and `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_infinite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Smallest positive normal `f64`, in natural-log units.
pub const LN_MIN_POSITIVE: f64 = -708.396_418_532_264_1;
/// Largest finite `f64`, in natural-log units.
pub const LN_MAX: f64 = 709.782_712_893_384;

/// A real number `sign * exp(logmag)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogReal {
    pub sign: i8,
    pub logmag: f64,
}

/// Result of converting a [`LogReal`] back to `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub value: f64,
    /// Set when the magnitude was below the smallest normal and the value was
    /// flushed (or went subnormal).
    pub underflow: bool,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { sign: 0, logmag: f64::NEG_INFINITY };
    pub const ONE: LogReal = LogReal { sign: 1, logmag: 0.0 };

    /// Builds `sign * exp(logmag)`, normalizing zero.
    pub fn new(sign: i8, logmag: f64) -> Self {
        if sign == 0 || logmag == f64::NEG_INFINITY {
            LogReal::ZERO
        } else {
            LogReal { sign: sign.signum(), logmag }
        }
    }

    /// Positive number from its natural log.
    pub fn from_ln(logmag: f64) -> Self {
        LogReal::new(1, logmag)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            LogReal::ZERO
        } else {
            LogReal { sign: if x > 0.0 { 1 } else { -1 }, logmag: x.abs().ln() }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Dense value with an explicit underflow flag instead of a silent flush.
    pub fn to_dense(&self) -> Dense {
        if self.sign == 0 {
            return Dense { value: 0.0, underflow: false };
        }
        let underflow = self.logmag < LN_MIN_POSITIVE;
        Dense { value: f64::from(self.sign) * self.logmag.exp(), underflow }
    }

    /// Dense value; tiny magnitudes flush towards zero.
    pub fn to_f64(&self) -> f64 {
        self.to_dense().value
    }

    pub fn abs(self) -> Self {
        LogReal::new(self.sign.abs(), self.logmag)
    }

    /// `ln|x|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.logmag
        }
    }

    pub fn sqrt(self) -> Self {
        debug_assert!(self.sign >= 0);
        LogReal::new(self.sign, 0.5 * self.logmag)
    }

    pub fn powf(self, p: f64) -> Self {
        debug_assert!(self.sign >= 0);
        if self.sign == 0 {
            return if p == 0.0 { LogReal::ONE } else { LogReal::ZERO };
        }
        LogReal::new(1, p * self.logmag)
    }

    /// Scale by `exp(l)`.
    pub fn scale_ln(self, l: f64) -> Self {
        LogReal::new(self.sign, self.logmag + l)
    }

    /// Total order on values (not magnitudes).
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.logmag.partial_cmp(&other.logmag).unwrap_or(Ordering::Equal),
                _ => other.logmag.partial_cmp(&self.logmag).unwrap_or(Ordering::Equal),
            },
            o => o,
        }
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal::new(-self.sign, self.logmag)
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        LogReal::new(self.sign * rhs.sign, self.logmag + rhs.logmag)
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, rhs: LogReal) -> LogReal {
        assert!(rhs.sign != 0, "division by zero LogReal");
        LogReal::new(self.sign * rhs.sign, self.logmag - rhs.logmag)
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        if self.sign == rhs.sign {
            return LogReal::new(self.sign, log_add_exp(self.logmag, rhs.logmag));
        }
        match self.logmag.partial_cmp(&rhs.logmag) {
            Some(Ordering::Greater) => LogReal::new(self.sign, log_sub_exp(self.logmag, rhs.logmag)),
            Some(Ordering::Less) => LogReal::new(rhs.sign, log_sub_exp(rhs.logmag, self.logmag)),
            _ => LogReal::ZERO,
        }
    }
}

impl Sub for LogReal {
    type Output = LogReal;
    fn sub(self, rhs: LogReal) -> LogReal {
        self + (-rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_representable() {
        for &x in &[1.0, -2.5, 1e-300, -7.25e200, 3.0] {
            let l = LogReal::from_f64(x);
            let back = l.to_f64();
            // exp/ln rounding: a few ulps scaled by |ln x|
            let tol = 4.0 * f64::EPSILON * (1.0 + x.abs().ln().abs()) * x.abs();
            assert!((back - x).abs() <= tol, "{x} -> {back}");
        }
        assert_eq!(LogReal::from_f64(0.0), LogReal::ZERO);
    }

    #[test]
    fn underflow_is_flagged() {
        let tiny = LogReal::from_ln(-1000.0);
        let d = tiny.to_dense();
        assert!(d.underflow);
        assert_eq!(d.value, 0.0);
        assert!(!LogReal::from_ln(-10.0).to_dense().underflow);
    }

    #[test]
    fn arithmetic_far_below_f64_range() {
        let a = LogReal::from_ln(-5000.0);
        let b = LogReal::from_ln(-5000.0 + 2f64.ln());
        let s = a + a;
        assert!((s.logmag - b.logmag).abs() < 1e-12);
        let d = b - a;
        assert!((d.logmag - a.logmag).abs() < 1e-12);
        assert!((a - a).is_zero());
        assert_eq!((-a + b).sign, 1);
    }

    #[test]
    fn log_sub_exp_accuracy_near_cancellation() {
        let a = 0.0;
        let b = -1e-12;
        // ln(1 - e^{-d}) = ln d - d/2 + O(d^2)
        let exact = (1e-12f64).ln() - 0.5e-12;
        assert!((log_sub_exp(a, b) - exact).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_handles_neg_infinity() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[0.0, f64::NEG_INFINITY, 0.0]);
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }
}
