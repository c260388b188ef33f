//! Number formatting shared by the CSV writers.

/// Fixed-point decimal with 12 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let prec = (11 - mag).clamp(0, 40) as usize;
    format!("{v:.prec$}")
}
