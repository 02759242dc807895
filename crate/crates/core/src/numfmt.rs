//! Decimal formatting that survives a round trip through text.

use std::fmt::Write as _;

/// 17 significant digits, enough to recover any `f64` bit for bit.
pub fn f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Appends `[v0,v1,...]` using [`f64_17`] for every element.
pub fn push_json_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (j, v) in values.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e308, f64::MIN_POSITIVE, 5e-324, -0.0] {
            let s = f64_17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        let mut out = String::new();
        push_json_array(&mut out, &[1.0, -0.5]);
        assert_eq!(out, "[1.0000000000000000e0,-5.0000000000000000e-1]");
    }
}
