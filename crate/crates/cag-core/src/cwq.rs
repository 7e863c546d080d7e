//! Context-window quotient (CWQ): sizing a text against a model's context
//! window.
//!
//! CWQ = L / (T × C), where L is the text length in characters, T the
//! window size in tokens, and C the assumed characters-per-token ratio.
//! A CWQ of 1.0 means "exactly fills one window"; 4.0 means "four windows".
//!
//! Category boundaries sit on exact multiples of T × C (24,576 chars for the
//! defaults), so the quotient is kept as an exact rational rather than an
//! `f64` — `24_576 / 24_576` must classify as Small and `24_577 / 24_576` as
//! Medium with zero tolerance, and floating point can't promise that.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::InvalidConfig;

/// An exact non-negative ratio. Only the handful of operations CWQ needs:
/// construction, comparison against small integers, and an `f64` view for
/// display and statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: u128,
    den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Rational {
    pub fn new(num: u128, den: u128) -> Result<Self, InvalidConfig> {
        if den == 0 {
            return Err(InvalidConfig::new("chars_per_token", "denominator is zero"));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn from_integer(n: u128) -> Self {
        Self { num: n, den: 1 }
    }

    /// Parse "4", "3.5", "0.25" — an exact decimal, not a float round-trip.
    pub fn parse_decimal(s: &str) -> Result<Self, InvalidConfig> {
        let bad = || InvalidConfig::new("chars_per_token", format!("not a decimal number: {s:?}"));
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let mut num: u128 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let mut den: u128 = 1;
        for c in frac_part.chars() {
            num = num * 10 + (c as u128 - '0' as u128);
            den *= 10;
        }
        Rational::new(num, den)
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// True when 0 < self < 1.
    pub fn is_proper_fraction(&self) -> bool {
        self.num > 0 && self.num < self.den
    }

    /// ⌈self × n⌉, exact.
    pub fn mul_ceil(&self, n: usize) -> usize {
        (self.num * n as u128).div_ceil(self.den) as usize
    }

    /// ⌈1 / self⌉, exact. Panics on zero.
    pub fn recip_ceil(&self) -> usize {
        self.den.div_ceil(self.num) as usize
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn cmp_integer(&self, k: u128) -> std::cmp::Ordering {
        self.num.cmp(&(k * self.den))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Window parameters for CWQ. Defaults mirror the model this engine was
/// built around: a 6,144-token window and ~4 characters per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CwqParams {
    /// T: context window size in tokens.
    pub token_window: usize,
    /// C: assumed characters per token.
    pub chars_per_token: Rational,
}

impl Default for CwqParams {
    fn default() -> Self {
        Self {
            token_window: 6144,
            chars_per_token: Rational::from_integer(4),
        }
    }
}

impl CwqParams {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.token_window == 0 {
            return Err(InvalidConfig::new("token_window", "must be positive"));
        }
        if self.chars_per_token.is_zero() {
            return Err(InvalidConfig::new("chars_per_token", "must be positive"));
        }
        Ok(())
    }
}

/// A computed quotient, kept exact. `source_length` is the character count
/// it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwqValue {
    value: Rational,
    pub source_length: usize,
}

impl CwqValue {
    pub fn value(&self) -> Rational {
        self.value
    }

    pub fn as_f64(&self) -> f64 {
        self.value.as_f64()
    }
}

/// Size category, in whole-window steps of CWQ.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum CwqCategory {
    /// CWQ ≤ 1
    Small,
    /// 1 < CWQ ≤ 2
    Medium,
    /// 2 < CWQ ≤ 3
    Large,
    /// 3 < CWQ ≤ 4
    ExtraLarge,
    /// CWQ > 4
    Humongous,
}

impl CwqCategory {
    pub const ALL: [CwqCategory; 5] = [
        CwqCategory::Small,
        CwqCategory::Medium,
        CwqCategory::Large,
        CwqCategory::ExtraLarge,
        CwqCategory::Humongous,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CwqCategory::Small => "Small",
            CwqCategory::Medium => "Medium",
            CwqCategory::Large => "Large",
            CwqCategory::ExtraLarge => "ExtraLarge",
            CwqCategory::Humongous => "Humongous",
        }
    }
}

impl fmt::Display for CwqCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// CWQ = length / (token_window × chars_per_token), exact.
pub fn compute_cwq(text_length: usize, params: &CwqParams) -> Result<CwqValue, InvalidConfig> {
    params.validate()?;
    // L / (T * num/den) = L * den / (T * num)
    let num = text_length as u128 * params.chars_per_token.den;
    let den = params.token_window as u128 * params.chars_per_token.num;
    Ok(CwqValue {
        value: Rational::new(num, den).expect("den > 0 by validation"),
        source_length: text_length,
    })
}

/// Category for a quotient. Boundaries are inclusive on the lower side of
/// each integer: exactly 1.0 is still Small, exactly 2.0 still Medium, etc.
pub fn categorize(value: &CwqValue) -> CwqCategory {
    use std::cmp::Ordering::Greater;
    if value.value.cmp_integer(1) != Greater {
        CwqCategory::Small
    } else if value.value.cmp_integer(2) != Greater {
        CwqCategory::Medium
    } else if value.value.cmp_integer(3) != Greater {
        CwqCategory::Large
    } else if value.value.cmp_integer(4) != Greater {
        CwqCategory::ExtraLarge
    } else {
        CwqCategory::Humongous
    }
}

/// Tokens needed for `text_length` characters: ⌈L / C⌉.
pub fn estimate_tokens(text_length: usize, params: &CwqParams) -> usize {
    // ceil(L / (num/den)) = ceil(L * den / num)
    let num = params.chars_per_token.num;
    let den = params.chars_per_token.den;
    let l = text_length as u128;
    (l * den).div_ceil(num) as usize
}

/// `estimate_tokens` with the default 4-chars-per-token ratio. Session token
/// accounting and pipeline budgeting use this fixed estimator throughout.
pub fn default_token_estimate(text_length: usize) -> usize {
    text_length.div_ceil(4)
}
