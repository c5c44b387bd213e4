//! Locale-independent numeric text formatting, fixed at 12 significant
//! digits so emitted files are platform-stable and diffable.

use serde_json::Value;

/// Significant digits in all emitted numbers.
pub const SIG_DIGITS: usize = 12;

/// Formats with 12 significant digits, trimming trailing zeros; fixed
/// notation while the exponent fits, scientific otherwise (the usual `%g`
/// behavior). Always uses `.` as the decimal separator.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    // {:.11e} renders exactly 12 significant digits with a correctly
    // rounded, carry-adjusted exponent.
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp_str) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp_str.parse().expect("integer exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), SIG_DIGITS);

    if (-4..SIG_DIGITS as i32).contains(&exp) {
        // Fixed notation: decimal point after exp + 1 leading digits.
        let point = exp + 1;
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        if point <= 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat('0').take((-point) as usize));
            out.push_str(&digits);
        } else if point as usize >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat('0').take(point as usize - digits.len()));
        } else {
            out.push_str(&digits[..point as usize]);
            out.push('.');
            out.push_str(&digits[point as usize..]);
        }
        trim_fraction(&mut out);
        out
    } else {
        let mut m = String::new();
        if neg {
            m.push('-');
        }
        m.push_str(&digits[..1]);
        m.push('.');
        m.push_str(&digits[1..]);
        trim_fraction(&mut m);
        format!("{m}e{exp}")
    }
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
}

/// JSON number carrying exactly the 12-significant-digit text form;
/// non-finite values become `null`.
pub fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = fmt_g(x).parse().expect("formatted float parses");
    serde_json::Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
}

/// `json_num` lifted over an optional value.
pub fn json_opt(x: Option<f64>) -> Value {
    x.map(json_num).unwrap_or(Value::Null)
}
