//! Number formatting shared by the CLI and the CSV writer.

/// `%.12g`: twelve significant digits, trailing zeros trimmed, scientific
/// notation when the decimal exponent is below -4 or at least 12.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig12(0.5), "0.5");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(1.0 / 22.5), "0.0444444444444");
        assert_eq!(sig12(12.5), "12.5");
        assert_eq!(sig12(-2.0), "-2");
        assert_eq!(sig12(1.5e-7), "1.5e-07");
        assert_eq!(sig12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(sig12(0.0001), "0.0001");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(999999999999.9), "1e+12");
    }
}
