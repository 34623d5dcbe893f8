/// Parse a duration with an optional `ms` or `s` suffix into seconds.
/// A bare number is read as seconds.
pub fn parse_duration(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (number, scale) = if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    let value: f64 = number.trim().parse().map_err(|_| format!("invalid duration {text:?}; use e.g. 10.3ms or 0.1s"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("duration must be finite and non-negative, got {text:?}"));
    }
    Ok(value * scale)
}

/// A strictly positive, finite speed.
pub fn parse_speed(text: &str) -> Result<f64, String> {
    let v: f64 = text.trim().parse().map_err(|_| format!("invalid speed {text:?}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("speeds must be positive, got {v}"))
    }
}
