//! Fixed-width float formatting for byte-reproducible CSV/JSON outputs.

/// Format with 17 significant digits (scientific), enough to round-trip any
/// f64 bit pattern, so reruns with the same seed emit identical bytes.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".to_string();
    }
    format!("{:.16e}", x)
}
