//! Fixed text formatting shared by every serializer.

/// Header line carried by every CSV file the crate writes.
pub const SCHEMA_LINE: &str = "# hypermatch-schema v1";

/// Formats a float with 17 significant digits. Output is a pure function of
/// the bit pattern, which keeps serialized files byte-reproducible.
pub fn f17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{:.16e}", x)
    }
}

/// Parses a float written by [`f17`] (or any ordinary decimal form).
pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok(),
    }
}
