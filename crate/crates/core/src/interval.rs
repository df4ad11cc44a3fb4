//! Time points and closed integer intervals with infinite ends.

use std::fmt;
use std::ops::{Add, Sub};

/// Anything at or beyond this magnitude is treated as infinite.
pub const INF: i64 = i64::MAX / 4;
pub const NEG_INF: i64 = -INF;

/// Milliseconds from the recording origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimePoint(pub i64);

impl TimePoint {
    pub const ZERO: TimePoint = TimePoint(0);

    pub fn ms(self) -> i64 {
        self.0
    }
}

impl Add<i64> for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: i64) -> TimePoint {
        TimePoint(self.0 + rhs)
    }
}

impl Sub for TimePoint {
    type Output = i64;
    fn sub(self, rhs: TimePoint) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Addition that saturates at the infinities, so `INF + x == INF`.
pub(crate) fn sat_add(a: i64, b: i64) -> i64 {
    if a >= INF || b >= INF {
        // +inf wins unless the other side is -inf; that sum never arises for
        // shortest paths because -inf weights are never stored.
        INF
    } else if a <= NEG_INF || b <= NEG_INF {
        NEG_INF
    } else {
        (a + b).clamp(NEG_INF, INF)
    }
}

/// A closed interval `[lower, upper]` of integer milliseconds. Either end may
/// be infinite. Empty intervals cannot be constructed; intersection reports
/// emptiness as `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    lower: i64,
    upper: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("empty interval [{lower}, {upper}]")]
pub struct EmptyInterval {
    pub lower: i64,
    pub upper: i64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: NEG_INF,
        upper: INF,
    };
    pub const NON_NEGATIVE: Interval = Interval {
        lower: 0,
        upper: INF,
    };
    pub const ZERO: Interval = Interval { lower: 0, upper: 0 };

    pub fn new(lower: i64, upper: i64) -> Result<Interval, EmptyInterval> {
        let lower = lower.clamp(NEG_INF, INF);
        let upper = upper.clamp(NEG_INF, INF);
        if lower > upper {
            Err(EmptyInterval { lower, upper })
        } else {
            Ok(Interval { lower, upper })
        }
    }

    /// Const constructor for literal bounds; panics if `lower > upper`.
    pub const fn closed(lower: i64, upper: i64) -> Interval {
        assert!(lower <= upper, "empty interval literal");
        Interval { lower, upper }
    }

    pub fn point(t: i64) -> Interval {
        Interval { lower: t, upper: t }
    }

    pub fn at_least(lower: i64) -> Interval {
        Interval { lower, upper: INF }
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> i64 {
        self.upper
    }

    pub fn lower_bounded(&self) -> bool {
        self.lower > NEG_INF
    }

    pub fn upper_bounded(&self) -> bool {
        self.upper < INF
    }

    pub fn is_bounded(&self) -> bool {
        self.lower_bounded() && self.upper_bounded()
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lower.max(other.lower), self.upper.min(other.upper)).ok()
    }

    /// `[-upper, -lower]`: the same constraint read in the opposite direction.
    pub fn reverse(&self) -> Interval {
        Interval {
            lower: -self.upper,
            upper: -self.lower,
        }
    }

    /// Minkowski sum with another interval.
    pub fn compose(&self, other: &Interval) -> Interval {
        Interval {
            lower: sat_add(self.lower, other.lower),
            upper: sat_add(self.upper, other.upper),
        }
    }

    pub fn shift(&self, by: i64) -> Interval {
        self.compose(&Interval::point(by))
    }

    /// `[ceil(lower * num / den), floor(upper * num / den)]` for a positive
    /// ratio, so scaled bounds never admit values outside the exact rational
    /// interval.
    pub fn scale(&self, num: i64, den: i64) -> Option<Interval> {
        assert!(num > 0 && den > 0, "scale factor must be positive");
        let lo = if self.lower_bounded() {
            div_ceil(self.lower * num, den)
        } else {
            NEG_INF
        };
        let hi = if self.upper_bounded() {
            self.upper * num / den - i64::from((self.upper * num) % den < 0)
        } else {
            INF
        };
        Interval::new(lo, hi).ok()
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a > 0) == (b > 0)) {
        q + 1
    } else {
        q
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::UNBOUNDED
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = if self.lower_bounded() {
            self.lower.to_string()
        } else {
            "-inf".to_string()
        };
        let hi = if self.upper_bounded() {
            self.upper.to_string()
        } else {
            "+inf".to_string()
        };
        write!(f, "[{lo}, {hi}]")
    }
}
