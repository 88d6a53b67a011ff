//! Number formatting shared by CSV, JSON and text output.

/// Formats like C's `printf("%.9g", v)`.
pub fn g9(v: f64) -> String {
    general(v, 9)
}

/// `%.<precision>g` for finite values; `nan`/`inf`/`-inf` otherwise.
pub fn general(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let precision = precision.max(1);
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // The exponent after rounding to `precision` significant digits decides
    // between fixed and scientific notation.
    let sci = format!("{:.*e}", precision - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= precision as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.unsigned_abs())
    } else {
        let decimals = (precision as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Two decimals with trailing zeros removed: `0.50` renders as `0.5`.
pub fn two_decimals(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = strip_zeros(&s);
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}
