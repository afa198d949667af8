//! JSON representation of complex matrices.
//!
//! Every module's inputs and outputs use one fixed format: a complex matrix
//! is a row-major array of rows, each entry a `[re, im]` pair.

use ndarray::Array2;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Serialize a complex matrix as row-major `[re, im]` pairs.
pub fn cmat_to_json(m: &CMat) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|i| {
            let row: Vec<Value> = (0..m.ncols())
                .map(|j| json!([m[[i, j]].re, m[[i, j]].im]))
                .collect();
            Value::Array(row)
        })
        .collect();
    Value::Array(rows)
}

/// Parse a complex matrix from the row-major `[re, im]` format.
pub fn cmat_from_json(v: &Value) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Config("complex matrix must be an array of rows".into()))?;
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Config("complex matrix has no rows".into()));
    }
    let ncols = rows[0]
        .as_array()
        .ok_or_else(|| Error::Config("matrix row must be an array".into()))?
        .len();
    let mut m = Array2::<Complex64>::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Config(format!("row {i} is not an array")))?;
        if row.len() != ncols {
            return Err(Error::Config(format!(
                "row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        for (j, entry) in row.iter().enumerate() {
            let pair = entry
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::Config(format!("entry ({i},{j}) is not a [re, im] pair")))?;
            let re = pair[0]
                .as_f64()
                .ok_or_else(|| Error::Config(format!("entry ({i},{j}) re is not a number")))?;
            let im = pair[1]
                .as_f64()
                .ok_or_else(|| Error::Config(format!("entry ({i},{j}) im is not a number")))?;
            m[[i, j]] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

/// Format a float with 17 significant digits; round-trip safe for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn matrix_json_round_trip() {
        let mut m = CMat::zeros((2, 3));
        m[[0, 0]] = Complex64::new(1.0, -2.0);
        m[[1, 2]] = Complex64::new(0.5, 1e-17);
        let v = cmat_to_json(&m);
        let back = cmat_from_json(&v).unwrap();
        assert!(max_abs_diff(&m, &back) < 1e-300);
    }

    #[test]
    fn rejects_ragged_rows() {
        let v = serde_json::json!([[[1.0, 0.0]], [[1.0, 0.0], [2.0, 0.0]]]);
        assert!(cmat_from_json(&v).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 6.02e23, -1.5e-300, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
