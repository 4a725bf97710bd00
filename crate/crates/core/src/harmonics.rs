//! Scaled solid harmonics and their translation identities.
//!
//! With `s(l,m) = sqrt((l-m)!(l+m)!)` and `C_lm` the Racah-normalized
//! spherical harmonics, the regular and irregular solid harmonics used
//! throughout the crate are
//!
//! ```text
//!     R_lm(r) = r^l  C_lm(theta, phi) / s(l,m)
//!     I_lm(r) = s(l,m) C_lm(theta, phi) / r^(l+1)
//! ```
//!
//! This asymmetric scaling is the one under which both identities the
//! expansion machinery relies on hold without extra binomial factors:
//! the one-center translation `R_lm(u+v) = sum_{jk} R_{l-j,m-k}(v) R_jk(u)`
//! and the two-center kernel expansion (see [`crate::multipole`]). Both are
//! checked against independent Cartesian oracles in the tests.
//!
//! Values are evaluated through stable Cartesian recurrences rather than
//! trigonometric forms or factorial ratios; `|R_lm(r)| <= r^l` and the
//! conjugation symmetry `X_{l,-m} = (-1)^m conj(X_lm)` hold for both kinds.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HarmonicsError {
    #[error("irregular solid harmonic is singular at r = 0")]
    SingularOrigin,
    #[error("index (l={ell}, m={m}) violates |m| <= l")]
    BadIndex { ell: i32, m: i32 },
}

/// Degree/order pair `(l, m)` with `|m| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SolidHarmonicIndex {
    pub ell: u32,
    pub m: i32,
}

impl SolidHarmonicIndex {
    pub fn new(ell: u32, m: i32) -> Result<Self, HarmonicsError> {
        if m.unsigned_abs() > ell {
            return Err(HarmonicsError::BadIndex { ell: ell as i32, m });
        }
        Ok(Self { ell, m })
    }
}

/// Table of all `R_lm` or `I_lm` with `0 <= m <= l <= p`; negative `m` is
/// recovered through conjugation symmetry.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    order: u32,
    vals: Vec<Complex64>,
}

impl HarmonicTable {
    fn idx(l: u32, m: u32) -> usize {
        (l * (l + 1) / 2 + m) as usize
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Value at `(l, m)` for any `|m| <= l <= order`.
    pub fn get(&self, l: u32, m: i32) -> Complex64 {
        debug_assert!(m.unsigned_abs() <= l && l <= self.order);
        let v = self.vals[Self::idx(l, m.unsigned_abs())];
        if m >= 0 {
            v
        } else if m % 2 == 0 {
            v.conj()
        } else {
            -v.conj()
        }
    }
}

/// All regular solid harmonics of degree `<= order` at `r`, by recurrence.
///
/// `R_00 = 1` even at the origin; higher degrees vanish there.
pub fn regular_table(order: u32, r: [f64; 3]) -> HarmonicTable {
    let [x, y, z] = r;
    let r2 = x * x + y * y + z * z;
    let xy = Complex64::new(x, y);
    let mut vals = vec![Complex64::ZERO; HarmonicTable::idx(order, order) + 1];
    vals[0] = Complex64::ONE;
    for m in 1..=order {
        let prev = vals[HarmonicTable::idx(m - 1, m - 1)];
        vals[HarmonicTable::idx(m, m)] = -xy * prev / (2.0 * m as f64);
    }
    for m in 0..=order {
        if m < order {
            let diag = vals[HarmonicTable::idx(m, m)];
            vals[HarmonicTable::idx(m + 1, m)] = z * diag;
        }
        for l in m + 2..=order {
            let a = vals[HarmonicTable::idx(l - 1, m)];
            let b = vals[HarmonicTable::idx(l - 2, m)];
            let denom = ((l + m) * (l - m)) as f64;
            vals[HarmonicTable::idx(l, m)] = ((2 * l - 1) as f64 * z * a - r2 * b) / denom;
        }
    }
    HarmonicTable { order, vals }
}

/// All irregular solid harmonics of degree `<= order` at `r != 0`.
pub fn irregular_table(order: u32, r: [f64; 3]) -> Result<HarmonicTable, HarmonicsError> {
    let [x, y, z] = r;
    let r2 = x * x + y * y + z * z;
    if r2 == 0.0 {
        return Err(HarmonicsError::SingularOrigin);
    }
    let xy = Complex64::new(x, y);
    let mut vals = vec![Complex64::ZERO; HarmonicTable::idx(order, order) + 1];
    vals[0] = Complex64::new(1.0 / r2.sqrt(), 0.0);
    for m in 1..=order {
        let prev = vals[HarmonicTable::idx(m - 1, m - 1)];
        vals[HarmonicTable::idx(m, m)] = -((2 * m - 1) as f64) * xy * prev / r2;
    }
    for m in 0..=order {
        if m < order {
            let diag = vals[HarmonicTable::idx(m, m)];
            vals[HarmonicTable::idx(m + 1, m)] = (2 * m + 1) as f64 * z * diag / r2;
        }
        for l in m + 2..=order {
            let a = vals[HarmonicTable::idx(l - 1, m)];
            let b = vals[HarmonicTable::idx(l - 2, m)];
            let num = (2 * l - 1) as f64 * z * a - (((l - 1) * (l - 1)) as f64 - (m * m) as f64) * b;
            vals[HarmonicTable::idx(l, m)] = num / r2;
        }
    }
    Ok(HarmonicTable { order, vals })
}

/// Single regular solid harmonic `R_lm(r)`.
pub fn regular_solid_harmonic(idx: SolidHarmonicIndex, r: [f64; 3]) -> Complex64 {
    regular_table(idx.ell, r).get(idx.ell, idx.m)
}

/// Single irregular solid harmonic `I_lm(r)`; fails at the origin.
pub fn irregular_solid_harmonic(
    idx: SolidHarmonicIndex,
    r: [f64; 3],
) -> Result<Complex64, HarmonicsError> {
    Ok(irregular_table(idx.ell, r)?.get(idx.ell, idx.m))
}
