//! Content digests and stable number formatting shared by every emitter.

use std::hash::Hasher;

use fnv::FnvHasher;

/// FNV-1a 64 over raw bytes.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Incremental FNV-1a 64 for multi-part keys.
#[derive(Default)]
pub struct Digest(FnvHasher);

impl Digest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(mut self, bytes: &[u8]) -> Self {
        self.0.write(bytes);
        self
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn finish(&self) -> u64 {
        self.0.finish()
    }
}

pub fn hex64(v: u64) -> String {
    format!("{v:016x}")
}

/// Formats `x` with at most `digits` significant digits, dropping trailing
/// zeros and a dangling decimal point. `-0` prints as `0`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    // Round through scientific notation first so the decimal exponent is exact
    // after rounding (e.g. 999999.5 -> 1e6).
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let mut s = if exp >= digits as i32 || exp < -6 {
        // Fall back to plain scientific form for very large/small values.
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    } else {
        format!("{:.*}", decimals, rounded)
    };
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// `x` rounded to six significant digits, i.e. the value a reader recovers
/// from [`fmt_sig`]`(x, 6)`.
pub fn quantize6(x: f64) -> f64 {
    fmt_sig(x, 6).parse().unwrap_or(x)
}
