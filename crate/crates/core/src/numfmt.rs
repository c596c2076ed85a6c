//! Fixed-precision number rendering for report files.
//!
//! Every human-facing table renders floats at 6 significant digits with
//! ties broken to even. Rust's float formatter performs exact decimal
//! conversion with round-half-even at the requested precision, so we lean on
//! `{:.5e}` and re-layout the result; the tie behavior is pinned by tests.

/// Render `x` at 6 significant digits, round-half-even, trailing zeros
/// stripped. Plain decimal notation inside a sane exponent range,
/// scientific outside it.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.5e}", x); // e.g. "-2.76280e1"
    let (mantissa, exp) = sci.split_once('e').expect("exp formatting");
    let exp: i32 = exp.parse().expect("exp digits");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    if !(-5..=15).contains(&exp) {
        let trimmed = digits.trim_end_matches('0');
        let head = &trimmed[..1];
        let tail = &trimmed[1..];
        let sign = if neg { "-" } else { "" };
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }

    // Plain decimal: place the point after `exp + 1` leading digits.
    let point = exp + 1;
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        for _ in 0..(-point) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    } else if (point as usize) >= digits.len() {
        out.push_str(&digits);
        for _ in 0..(point as usize - digits.len()) {
            out.push('0');
        }
    } else {
        let (int_part, frac_part) = digits.split_at(point as usize);
        out.push_str(int_part);
        let frac = frac_part.trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}
