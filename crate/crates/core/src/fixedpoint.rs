//! Signed/unsigned fixed-point register formats.
//!
//! A format with `i` integer bits and `f` fraction bits stores raw words of
//! `i + f` bits (plus one sign bit when signed, two's complement with the
//! top bit weighted negatively). The encoded value is `raw / 2^f`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FixedPointError {
    #[error("value {value} is not representable in {format} (range [{lo}, {hi}])")]
    OutOfRange {
        value: f64,
        format: String,
        lo: f64,
        hi: f64,
    },
    #[error("format is too wide: {0} bits (limit 63)")]
    TooWide(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    pub integer_bits: u32,
    pub fraction_bits: u32,
    pub signed: bool,
}

impl std::fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}.{}",
            if self.signed { "s" } else { "u" },
            self.integer_bits,
            self.fraction_bits
        )
    }
}

impl FixedPointFormat {
    pub fn unsigned(integer_bits: u32, fraction_bits: u32) -> Self {
        Self {
            integer_bits,
            fraction_bits,
            signed: false,
        }
    }

    pub fn signed(integer_bits: u32, fraction_bits: u32) -> Self {
        Self {
            integer_bits,
            fraction_bits,
            signed: true,
        }
    }

    /// Total register width in bits.
    pub fn width(&self) -> u32 {
        self.integer_bits + self.fraction_bits + self.signed as u32
    }

    /// Smallest raw word (two's complement).
    pub fn raw_min(&self) -> i64 {
        if self.signed {
            -(1i64 << (self.width() - 1))
        } else {
            0
        }
    }

    /// Largest raw word.
    pub fn raw_max(&self) -> i64 {
        if self.signed {
            (1i64 << (self.width() - 1)) - 1
        } else {
            (1i64 << self.width()) - 1
        }
    }

    pub fn min_value(&self) -> f64 {
        self.raw_min() as f64 / (1u64 << self.fraction_bits) as f64
    }

    pub fn max_value(&self) -> f64 {
        self.raw_max() as f64 / (1u64 << self.fraction_bits) as f64
    }

    /// Round-to-nearest-even encoding into a raw word.
    pub fn encode(&self, value: f64) -> Result<i64, FixedPointError> {
        if self.width() > 63 {
            return Err(FixedPointError::TooWide(self.width()));
        }
        let scaled = value * (1u64 << self.fraction_bits) as f64;
        let raw = scaled.round_ties_even();
        if !raw.is_finite() || raw < self.raw_min() as f64 || raw > self.raw_max() as f64 {
            return Err(FixedPointError::OutOfRange {
                value,
                format: self.to_string(),
                lo: self.min_value(),
                hi: self.max_value(),
            });
        }
        Ok(raw as i64)
    }

    /// Exact decoding of a raw word.
    pub fn decode(&self, raw: i64) -> f64 {
        raw as f64 / (1u64 << self.fraction_bits) as f64
    }

    /// Bit `b` (LSB first) of the two's-complement pattern of `raw`.
    pub fn bit(&self, raw: i64, b: u32) -> bool {
        debug_assert!(b < self.width());
        ((raw >> b) & 1) != 0
    }

    /// Raw word from an LSB-first bit pattern, sign-interpreting the top bit.
    pub fn from_bits(&self, bits: &[bool]) -> i64 {
        debug_assert_eq!(bits.len(), self.width() as usize);
        let mut raw: i64 = 0;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                raw |= 1 << i;
            }
        }
        if self.signed && bits[bits.len() - 1] {
            raw -= 1 << self.width();
        }
        raw
    }

    /// Weight of bit `b` in decoded units; negative for the sign bit.
    pub fn bit_weight(&self, b: u32) -> f64 {
        let w = 2f64.powi(b as i32 - self.fraction_bits as i32);
        if self.signed && b == self.width() - 1 {
            -w
        } else {
            w
        }
    }
}

/// Register width for holding integer occupation counts up to `q` together
/// with binary precision `eps_b`: `ceil(log2(q+1))` integer bits plus
/// `ceil(log2(1/eps_b))` fraction bits. A sign bit is added separately by
/// signed formats.
pub fn register_width_for(q: u32, eps_b: f64) -> (u32, u32) {
    assert!(q >= 1, "electron bound must be at least 1");
    assert!(eps_b > 0.0 && eps_b <= 1.0, "eps_b must be in (0, 1]");
    let int_bits = 64 - (q as u64).leading_zeros(); // ceil(log2(q+1)) for q >= 1
    let frac_bits = (1.0 / eps_b).log2().ceil() as u32;
    (int_bits, frac_bits)
}
