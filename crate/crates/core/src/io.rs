//! Text output shared by the CSV writers.

use crate::scalar::Real;

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn fmt_float<S: Real>(x: S) -> String {
    format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN))
}

/// Joins formatted values with commas.
pub fn csv_row<S: Real>(values: &[S]) -> String {
    values
        .iter()
        .map(|x| fmt_float(*x))
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1f64, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(
            csv_row(&[1.0, 2.5]),
            "1.0000000000000000e0,2.5000000000000000e0"
        );
    }
}
