/// Formats with 12 significant digits, dropping trailing zeros.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit; the extra decimal is harmless.
        trim(&s).to_string()
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent");
        format!("{}e{e}", trim(mantissa))
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to 12 significant digits for JSON artifacts.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        num(x).parse().unwrap_or(x)
    } else {
        x
    }
}
