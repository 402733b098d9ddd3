use alloc::format;
use alloc::string::String;

/// Parsed numeric token, keeping the integer/real distinction of its spelling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NumToken {
    Int(i64),
    Real(f64),
}

/// Strict numeric parse: optional sign, digits, at most one decimal point and
/// an optional exponent. Spellings such as `nan`, `inf` or `1_000` are rejected.
pub(crate) fn parse_num(text: &str) -> Option<NumToken> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    let bytes = s.as_bytes();
    let mut i = 0;
    if bytes[0] == b'+' || bytes[0] == b'-' {
        i = 1;
    }
    let mut digits = 0usize;
    let mut dot = false;
    let mut exp = false;
    let mut exp_digits = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'0'..=b'9' => {
                if exp {
                    exp_digits += 1;
                } else {
                    digits += 1;
                }
            }
            b'.' if !dot && !exp => dot = true,
            b'e' | b'E' if !exp && digits > 0 => {
                exp = true;
                if i + 1 < bytes.len() && (bytes[i + 1] == b'+' || bytes[i + 1] == b'-') {
                    i += 1;
                }
            }
            _ => return None,
        }
        i += 1;
    }
    if digits == 0 || (exp && exp_digits == 0) {
        return None;
    }
    if !dot && !exp {
        if let Ok(v) = s.parse::<i64>() {
            return Some(NumToken::Int(v));
        }
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(NumToken::Real)
}

/// Round half away from zero to `decimals` places.
pub(crate) fn round_to(value: f64, decimals: u32) -> f64 {
    if !value.is_finite() {
        return value;
    }
    let scale = libm::pow(10.0, decimals as f64);
    let scaled = value * scale;
    // Past 2^50 the scaled value has too few fractional bits for the rounding
    // to be stable, so the value is already as rounded as it can be.
    if !scaled.is_finite() || libm::fabs(scaled) >= (1u64 << 50) as f64 {
        return value;
    }
    let rounded = libm::round(scaled) / scale;
    // libm::round is already half-away-from-zero; guard representation drift
    // such as 1.005 * 100 = 100.49999.
    let nudged = libm::round(scaled + libm::copysign(1e-9, scaled)) / scale;
    if libm::fabs(libm::fabs(scaled) - libm::floor(libm::fabs(scaled)) - 0.5) < 1e-9 {
        nudged
    } else {
        rounded
    }
}

pub(crate) fn is_integral(value: f64) -> bool {
    value.is_finite() && libm::trunc(value) == value && libm::fabs(value) < 9.0e15
}

/// Shortest round-trip rendering of a real, always with a decimal point or exponent.
pub(crate) fn fmt_real(value: f64) -> String {
    format!("{:?}", value)
}
