//! Numeral recognition and rendering.
//!
//! A numeral is an optionally signed run of ASCII digits with an optional
//! fraction part (`12`, `-3.5`, `+0.25`). Exponents, comma decimals,
//! `inf` and `nan` are rejected.

/// Returns the value of `surface` if it is a well-formed numeral.
pub fn numeric_value(surface: &str) -> Option<f64> {
    let body = surface.strip_prefix('-').or_else(|| surface.strip_prefix('+')).unwrap_or(surface);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return None;
    }
    let value: f64 = surface.parse().ok()?;
    // -0 and 0 are the same measurement
    Some(if value == 0.0 { 0.0 } else { value })
}

/// The grounding feature of a surface: its numeric value, or zero when the
/// surface is not a numeral.
pub fn parse_numeric(surface: &str) -> f64 {
    numeric_value(surface).unwrap_or(0.0)
}

pub fn is_numeral(surface: &str) -> bool {
    numeric_value(surface).is_some()
}

/// Renders a measurement the way the corpus generator writes it: integers
/// without a fraction, everything else with one fraction digit.
pub fn format_value(value: f64) -> String {
    let tenths = (value * 10.0).round();
    if tenths % 10.0 == 0.0 {
        format!("{:.0}", tenths / 10.0)
    } else {
        format!("{:.1}", tenths / 10.0)
    }
}
