//! Decimal text rendering used by every CSV writer.

/// Renders `v` as plain decimal text with at most 12 significant digits.
///
/// Output never uses exponent notation, and `-0` prints as `0`, so files
/// produced from equal values are byte-identical.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}
