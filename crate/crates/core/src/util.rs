//! Small numeric helpers: dB conversions, report formatting, and complex
//! matrix utilities used throughout the crate.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Power floor used when reporting a zero (or effectively zero) power in dBm.
pub const DBM_FLOOR: f64 = -300.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB, flooring non-positive inputs at [`DBM_FLOOR`].
pub fn linear_to_db(x: f64) -> f64 {
    if x <= 0.0 {
        return DBM_FLOOR;
    }
    (10.0 * x.log10()).max(DBM_FLOOR)
}

/// Decimal text with 17 significant digits, the round-trip format used by
/// every CSV report.
pub fn fmt_sig17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Squared Frobenius norm.
pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Rescale every column of `m` to unit Euclidean norm. Columns with norm
/// below `tol` are left untouched (callers decide how to repair them).
pub fn normalize_columns(m: &mut CMat, tol: f64) {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > tol {
            col /= C64::new(n, 0.0);
        }
    }
}

/// Hermitian inner-product check helper: max |m - m^H| entry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let mh = m.adjoint();
    (m - mh).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
