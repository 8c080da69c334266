//! Fixed-precision float rendering shared by every CSV writer.

/// Renders `value` with 9 significant digits, `%.9g` style: fixed notation
/// for decimal exponents in `-4..9`, scientific otherwise, trailing zeros trimmed.
pub fn format_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.8e}", value);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific rendering has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if (-4..9).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        trim_fraction(format!("{:.*}", decimals, value))
    } else {
        format!("{}e{}", trim_fraction(mantissa.to_string()), exponent)
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_like_printf_g9() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(250000.0), "250000");
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(-2.0 / 3.0), "-0.666666667");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e9");
        assert_eq!(format_sig9(0.00001234), "1.234e-5");
        assert_eq!(format_sig9(0.0001234), "0.0001234");
    }

    #[test]
    fn nine_digits_survive_reparse() {
        for &v in &[std::f64::consts::PI, 1e-12, 6.02214076e23, -47.123456789123] {
            let parsed: f64 = format_sig9(v).parse().unwrap();
            assert!(((parsed - v) / v).abs() < 1e-8, "{v} -> {parsed}");
        }
    }
}
